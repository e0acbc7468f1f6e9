#include "nucert/io.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nucert {

namespace {

[[noreturn]] void parse_fail(const std::string& field, const std::string& why) {
    throw std::runtime_error("parse error in \"" + field + "\": " + why);
}

double number_at(const Json& j, const char* field) {
    if (!j.contains(field)) parse_fail(field, "missing");
    if (!j.at(field).is_number()) parse_fail(field, "expected a number");
    return j.at(field).get<double>();
}

Index index_at(const Json& j, const char* field) {
    const double v = number_at(j, field);
    if (v < 1 || v != std::floor(v)) parse_fail(field, "expected a positive integer");
    return static_cast<Index>(v);
}

Vector vector_at(const Json& j, const char* field) {
    if (!j.contains(field)) parse_fail(field, "missing");
    const Json& arr = j.at(field);
    if (!arr.is_array()) parse_fail(field, "expected an array");
    Vector v(static_cast<Index>(arr.size()));
    for (Index i = 0; i < v.size(); ++i) {
        if (!arr[static_cast<size_t>(i)].is_number())
            parse_fail(field, "expected numeric entries");
        v[i] = arr[static_cast<size_t>(i)].get<double>();
    }
    return v;
}

} // namespace

Json matrix_to_json(const Matrix& X) {
    Json j;
    j["rows"] = X.rows();
    j["cols"] = X.cols();
    const Vector v = vec_rm(X);
    j["data"] = std::vector<double>(v.data(), v.data() + v.size());
    return j;
}

Matrix matrix_from_json(const Json& j, const char* field) {
    if (!j.is_object()) parse_fail(field, "expected a matrix object");
    const Index rows = index_at(j, "rows");
    const Index cols = index_at(j, "cols");
    const Vector data = vector_at(j, "data");
    if (data.size() != rows * cols)
        parse_fail(std::string(field) + ".data", "length must be rows*cols");
    return unvec_rm(data, rows, cols);
}

Matrix read_matrix_text(const std::string& text, const char* what) {
    size_t pos = text.find_first_not_of(" \t\r\n");
    if (pos == std::string::npos) parse_fail(what, "empty matrix input");
    if (text[pos] == '{') {
        Json j = Json::parse(text, nullptr, false);
        if (j.is_discarded()) parse_fail(what, "malformed JSON");
        return matrix_from_json(j, what);
    }

    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing characters");
                row.push_back(v);
            } catch (const std::exception&) {
                parse_fail(what, "bad CSV cell \"" + cell + "\"");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            parse_fail(what, "ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) parse_fail(what, "empty matrix input");
    Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = 0; j < X.cols(); ++j)
            X(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return X;
}

Matrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open matrix file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return read_matrix_text(buf.str(), path.c_str());
}

std::string matrix_to_csv(const Matrix& X) {
    std::ostringstream out;
    out.precision(17);
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) {
            if (j) out << ',';
            out << X(i, j);
        }
        out << '\n';
    }
    return out.str();
}

Json operator_to_json(const LinearOperatorSpec& op) {
    Json j;
    j["n"] = op.n;
    j["p"] = op.p;
    switch (op.kind) {
    case OpKind::Dense:
        j["kind"] = "dense";
        j["matrix"] = matrix_to_json(op.dense);
        break;
    case OpKind::EntryMask: {
        j["kind"] = "entry_mask";
        std::vector<std::vector<Index>> idx;
        for (const auto& [a, b] : op.mask) idx.push_back({a + 1, b + 1});
        j["indices"] = idx;
        break;
    }
    case OpKind::LeftMul:
        j["kind"] = "left_mul";
        j["A"] = matrix_to_json(op.left);
        break;
    case OpKind::Counterexample:
        j["kind"] = "counterexample";
        break;
    case OpKind::Stacked: {
        j["kind"] = "stacked";
        Json parts = Json::array();
        for (const auto& part : op.parts) parts.push_back(operator_to_json(part));
        j["parts"] = parts;
        break;
    }
    }
    return j;
}

LinearOperatorSpec operator_from_json(const Json& j) {
    if (!j.is_object()) parse_fail("operator", "expected an object");
    if (!j.contains("kind") || !j.at("kind").is_string()) parse_fail("kind", "missing or not a string");
    const std::string kind = j.at("kind").get<std::string>();

    if (kind == "counterexample") return LinearOperatorSpec::counterexample();

    if (kind == "dense") {
        const Index n = index_at(j, "n");
        const Index p = index_at(j, "p");
        if (!j.contains("matrix")) parse_fail("matrix", "missing");
        return LinearOperatorSpec::dense_op(matrix_from_json(j.at("matrix"), "matrix"), n, p);
    }
    if (kind == "entry_mask") {
        const Index n = index_at(j, "n");
        const Index p = index_at(j, "p");
        if (!j.contains("indices") || !j.at("indices").is_array())
            parse_fail("indices", "missing or not an array");
        std::vector<std::pair<Index, Index>> mask;
        for (const auto& pair : j.at("indices")) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
                parse_fail("indices", "entries must be 1-based [i, j] pairs");
            mask.emplace_back(pair[0].get<Index>() - 1, pair[1].get<Index>() - 1);
        }
        return LinearOperatorSpec::entry_mask(std::move(mask), n, p);
    }
    if (kind == "left_mul") {
        const Index p = index_at(j, "p");
        if (!j.contains("A")) parse_fail("A", "missing");
        Matrix A = matrix_from_json(j.at("A"), "A");
        if (j.contains("n") && index_at(j, "n") != A.cols())
            parse_fail("n", "must equal the column count of A");
        return LinearOperatorSpec::left_mul(std::move(A), p);
    }
    if (kind == "stacked") {
        if (!j.contains("parts") || !j.at("parts").is_array())
            parse_fail("parts", "missing or not an array");
        std::vector<LinearOperatorSpec> parts;
        for (const auto& part : j.at("parts")) parts.push_back(operator_from_json(part));
        return LinearOperatorSpec::stacked(std::move(parts));
    }
    parse_fail("kind", "unknown operator kind \"" + kind + "\"");
}

Json instance_to_json(const ProblemInstance& inst) {
    Json j = operator_to_json(inst.op);
    j["b"] = std::vector<double>(inst.b.data(), inst.b.data() + inst.b.size());
    if (inst.lambda) j["lambda"] = *inst.lambda;
    return j;
}

ProblemInstance instance_from_json(const Json& j) {
    ProblemInstance inst;
    inst.op = operator_from_json(j);
    inst.b = vector_at(j, "b");
    if (inst.b.size() != inst.op.m)
        parse_fail("b", "length must match the operator codomain");
    if (j.contains("lambda")) {
        const double lambda = number_at(j, "lambda");
        if (!(lambda > 0)) parse_fail("lambda", "must be positive");
        inst.lambda = lambda;
    }
    return inst;
}

ProblemInstance read_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) parse_fail(path, "malformed JSON");
    return instance_from_json(j);
}

Json solve_report_to_json(const SolveReport& rep) {
    Json j;
    j["X"] = matrix_to_json(rep.X);
    j["nuclear_norm"] = rep.nuclear_norm;
    j["primal_residual"] = rep.primal_residual;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    j["objective"] = rep.objective;
    return j;
}

Json certificate_to_json(const NonUniquenessCertificate& cert, const SubdiffFrame* frame) {
    Json j;
    j["M"] = matrix_to_json(cert.M);
    j["R"] = matrix_to_json(cert.R);
    j["eps_hat"] = cert.eps_hat;
    if (frame) {
        Json f;
        f["U"] = matrix_to_json(frame->U);
        f["V"] = matrix_to_json(frame->V);
        f["r"] = frame->rank;
        j["frame"] = f;
    }
    return j;
}

Json uniqueness_report_to_json(const UniquenessReport& rep, const SubdiffFrame* frame) {
    Json j;
    j["verdict"] = to_string(rep.verdict);
    j["decided_by"] = to_string(rep.decided_by);
    if (std::isfinite(rep.assumption.ri.gamma_star))
        j["gamma_star"] = rep.assumption.ri.gamma_star;
    else
        j["gamma_star"] = nullptr;
    j["ri_status"] = to_string(rep.assumption.ri.status);
    j["parallel_span"] = rep.assumption.parallel_span;
    j["parallel_span_rank"] = rep.assumption.parallel_span_rank;
    j["feasibility_residual"] = rep.feasibility_residual;
    j["optimality_residual"] = rep.optimality_residual;
    if (rep.certificate) j["certificate"] = certificate_to_json(*rep.certificate, frame);
    if (rep.second_solution) j["second_solution"] = matrix_to_json(*rep.second_solution);
    j["search"] = Json{{"starts", rep.search_starts},
                       {"best_violation", rep.search_best_violation}};
    if (!rep.note.empty()) j["note"] = rep.note;
    return j;
}

} // namespace nucert
