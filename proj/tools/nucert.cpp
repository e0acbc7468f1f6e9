#include "nucert/certify.hpp"
#include "nucert/io.hpp"
#include "nucert/rng.hpp"
#include "nucert/solver.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace nucert;

constexpr std::uint64_t kDefaultSeed = 20240817;

struct CommonOpts {
    std::string instance;
    std::string xbar;
    std::string out;
    double lambda = 0.0;
    double tol = 1e-8;
    std::uint64_t seed = kDefaultSeed;
    int starts = 32;
    bool csv = false;
};

ProblemInstance builtin_counterexample_instance() {
    ProblemInstance inst;
    inst.op = LinearOperatorSpec::counterexample();
    inst.b = Vector::Zero(8);
    inst.b[0] = 1.0;
    return inst;
}

Matrix builtin_counterexample_solution() {
    Matrix X = Matrix::Zero(2, 2);
    X(0, 0) = 1.0;
    return X;
}

ProblemInstance load_instance(const std::string& path) {
    if (path == "counterexample") return builtin_counterexample_instance();
    return read_instance_file(path);
}

void emit(const Json& j, const CommonOpts& opts, const Matrix* primary) {
    std::string text;
    if (opts.csv && primary) text = matrix_to_csv(*primary);
    else text = j.dump(2) + "\n";
    std::cout << text;
    if (!opts.out.empty()) {
        std::ofstream out(opts.out);
        if (!out) throw std::runtime_error("cannot write output file: " + opts.out);
        out << text;
    }
}

int run_solve(const CommonOpts& opts, bool regularized) {
    ProblemInstance inst = load_instance(opts.instance);
    SolverConfig cfg;
    cfg.seed = opts.seed == kDefaultSeed ? 0 : opts.seed;
    SolveReport rep;
    if (regularized) {
        double lambda = opts.lambda > 0 ? opts.lambda : inst.lambda.value_or(0.0);
        if (!(lambda > 0))
            throw std::runtime_error("parse error in \"lambda\": required for solve-reg");
        rep = solve_regularized(inst.op, inst.b, lambda, cfg);
    } else {
        rep = solve_affine(inst.op, inst.b, cfg);
    }
    emit(solve_report_to_json(rep), opts, &rep.X);
    return 0;
}

int run_certify(const CommonOpts& opts) {
    const ProblemInstance inst = load_instance(opts.instance);

    CertifyConfig cfg;
    cfg.tol = opts.tol;
    cfg.search.tol = opts.tol;
    cfg.search.starts = opts.starts;
    cfg.search.seed = opts.seed;

    Matrix Xbar;
    if (!opts.xbar.empty()) {
        Xbar = read_matrix_file(opts.xbar);
    } else if (opts.instance == "counterexample") {
        Xbar = builtin_counterexample_solution();
    } else {
        SolverConfig scfg;
        scfg.max_iter = 50000;
        const SolveReport sol = solve_affine(inst.op, inst.b, scfg);
        Xbar = sol.X;
        cfg.svd_opts.rank_tol = 1e-6;  // solver-accuracy ranks
        cfg.feas_tol = 1e-6;
    }

    const UniquenessReport rep = certify_uniqueness(inst.op, inst.b, Xbar, cfg);
    const SubdiffFrame fr = SubdiffFrame::from(
        Xbar.rows() >= Xbar.cols() ? Xbar : Matrix(Xbar.transpose()), cfg.svd_opts);
    emit(uniqueness_report_to_json(rep, &fr), opts,
         rep.second_solution ? &*rep.second_solution : nullptr);
    return rep.verdict == Verdict::Inconclusive ? 1 : 0;
}

int run_flat(const CommonOpts& opts, const std::string& path_a, const std::string& path_b) {
    Matrix A = read_matrix_file(path_a);
    Matrix B = read_matrix_file(path_b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw std::runtime_error("parse error in \"" + path_b + "\": shape mismatch");
    const bool transposed = A.rows() < A.cols();
    if (transposed) {
        A.transposeInPlace();
        B.transposeInPlace();
    }
    Json j;
    j["flat"] = is_flat_segment(A, B, opts.tol);
    j["transposed"] = transposed;
    const auto U = common_polarizer(A, B, opts.tol);
    std::optional<Matrix> polarizer;
    if (U) {
        polarizer = *U;
        j["common_polarizer"] = matrix_to_json(*U);
    } else {
        j["common_polarizer"] = nullptr;
    }
    emit(j, opts, polarizer ? &*polarizer : nullptr);
    return 0;
}

int run_polarize(const CommonOpts& opts, const std::string& path) {
    const Matrix X = read_matrix_file(path);
    const Matrix U = polarize(X);
    Json j;
    j["U"] = matrix_to_json(U);
    j["min_eig"] = min_eig_sym(Matrix(X * U.transpose()));
    emit(j, opts, &U);
    return 0;
}

// Pinned regression of the built-in example; every closed-form quantity the
// construction promises must reproduce, otherwise the command fails loudly.
int run_counterexample(const CommonOpts& opts) {
    const ProblemInstance inst = builtin_counterexample_instance();
    const Matrix Xbar = builtin_counterexample_solution();

    Json checks = Json::array();
    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok, double value) {
        checks.push_back(Json{{"name", name}, {"ok", ok}, {"value", value}});
        all_ok &= ok;
    };

    const double feas = (apply(inst.op, Xbar) - inst.b).norm();
    check("feasibility A(Xbar) = b", feas <= 1e-12, feas);

    Rng rng(opts.seed);
    double adj_defect = 0;
    for (int t = 0; t < 16; ++t) {
        const Vector y = rng.gaussian_vector(8);
        const Matrix Y = unvec_rm(y.head(4), 2, 2);
        const Matrix Z = unvec_rm(y.tail(4), 2, 2);
        Matrix Bt(2, 2);
        Bt << 1, 0, 1, 0;
        adj_defect = std::max(adj_defect,
                              (adjoint(inst.op, y) - (Bt * Y + skew_part(Z))).norm());
    }
    check("adjoint closed form", adj_defect <= 1e-12, adj_defect);

    const auto kb = kernel_basis(inst.op);
    Matrix Kref(2, 2);
    Kref << 1, -1, -1, 1;
    Kref /= 2.0;
    const double kernel_align =
        kb.size() == 1 ? std::abs(inner(kb[0], Kref)) : 0.0;
    check("kernel = span([1,-1;-1,1])", std::abs(kernel_align - 1.0) <= 1e-9, kernel_align);

    const auto rb = range_adjoint_basis(inst.op);
    double range_defect = kb.size() == 1 && rb.size() == 3 ? 0.0 : 1.0;
    for (const auto& Bm : rb)
        range_defect = std::max(range_defect == 1.0 ? 1.0 : 0.0,
                                std::abs(Bm(0, 0) - Bm(1, 0) - Bm(0, 1) + Bm(1, 1)));
    check("rge A* = {[t,s;t,s]} + skew (dim 3)", range_defect <= 1e-9, range_defect);

    const SubdiffFrame fr = SubdiffFrame::from(Xbar);
    bool beta_interval = true;
    for (const double beta : {-1.0, 0.0, 1.0}) {
        Matrix Y = Matrix::Zero(2, 2);
        Y(0, 0) = 1;
        Y(1, 1) = beta;
        const auto v = subgrad_check(fr, Xbar, Y, 1e-10);
        beta_interval &= v.member && (v.ri_member == (std::abs(beta) < 1.0));
    }
    {
        Matrix Y = Matrix::Zero(2, 2);
        Y(0, 0) = 1;
        Y(1, 1) = 2;
        beta_interval &= !subgrad_check(fr, Xbar, Y, 1e-10).member;
    }
    check("subdifferential = {diag(1,beta) : |beta| <= 1}", beta_interval, 0.0);

    const auto [span_ok, span_rank] = check_parallel_span(inst.op, Xbar);
    check("parallel span condition (ii)", span_ok, static_cast<double>(span_rank));

    const RiReport ri = check_ri_intersection(inst.op, Xbar);
    check("gamma_star = 1 (boundary point beta = -1)",
          std::abs(ri.gamma_star - 1.0) <= 1e-6 && ri.status != RiStatus::Holds,
          ri.gamma_star);
    check("witness beta = -1",
          ri.witness_R.size() == 1 && std::abs(ri.witness_R(0, 0) + 1.0) <= 1e-5,
          ri.witness_R.size() == 1 ? ri.witness_R(0, 0) : 0.0);

    const WConeFrame wf{fr};
    const bool rejected = !w_membership(wf, kb.empty() ? Kref : kb[0], 1e-8).has_value() &&
                          !w_membership(wf, Matrix(-(kb.empty() ? Kref : kb[0])), 1e-8).has_value();
    check("kernel direction not in W(Xbar) for R = +1 or -1", rejected, 0.0);

    const UniquenessReport rep = certify_uniqueness(inst.op, inst.b, Xbar);
    check("verdict Unique via exhaustive search",
          rep.verdict == Verdict::Unique && rep.decided_by == DecidedBy::ExhaustiveSearch,
          0.0);
    check("optimality residual", rep.optimality_residual <= 1e-8, rep.optimality_residual);

    Json j;
    j["all_ok"] = all_ok;
    j["checks"] = checks;
    j["report"] = uniqueness_report_to_json(rep, &fr);
    emit(j, opts, nullptr);
    return all_ok ? 0 : 1;
}

struct Battery {
    std::string name;
    int pass = 0;
    int fail = 0;
};

Battery battery_von_neumann(std::uint64_t seed) {
    Battery b{"von_neumann_inequality"};
    Rng rng(seed);
    for (int t = 0; t < 500; ++t) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 5);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        const Matrix X = rng.gaussian_matrix(n, p);
        const Matrix Y = rng.gaussian_matrix(n, p);
        (von_neumann_gap(X, Y) >= -1e-9 * (1 + X.norm() * Y.norm())) ? ++b.pass : ++b.fail;
    }
    return b;
}

Battery battery_adjoint(std::uint64_t seed) {
    Battery b{"adjoint_consistency"};
    Rng rng(seed + 1);
    for (int t = 0; t < 400; ++t) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 3);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        LinearOperatorSpec op;
        switch (t % 4) {
        case 0:
            op = LinearOperatorSpec::dense_op(
                rng.gaussian_matrix(1 + static_cast<Index>(rng.uniform() * (n * p)), n * p), n, p);
            break;
        case 1: {
            std::vector<std::pair<Index, Index>> idx;
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < p; ++j)
                    if (rng.uniform() < 0.5) idx.emplace_back(i, j);
            if (idx.empty()) idx.emplace_back(0, 0);
            op = LinearOperatorSpec::entry_mask(std::move(idx), n, p);
            break;
        }
        case 2:
            op = LinearOperatorSpec::left_mul(
                rng.gaussian_matrix(1 + static_cast<Index>(rng.uniform() * n), n), p);
            break;
        default:
            op = LinearOperatorSpec::counterexample();
        }
        const Matrix X = rng.gaussian_matrix(op.n, op.p);
        const Vector y = rng.gaussian_vector(op.m);
        const double defect = std::abs(apply(op, X).dot(y) - inner(X, adjoint(op, y)));
        (defect <= 1e-10 * (1 + X.norm() * y.norm())) ? ++b.pass : ++b.fail;
    }
    return b;
}

Battery battery_polarizer(std::uint64_t seed) {
    Battery b{"polarizer_equivalence"};
    Rng rng(seed + 2);
    for (int t = 0; t < 200; ++t) {
        const Index p = 1 + static_cast<Index>(rng.uniform() * 4);
        const Index n = p + static_cast<Index>(rng.uniform() * 3);
        const Index r = 1 + static_cast<Index>(rng.uniform() * p);
        const Matrix U0 = rng.stiefel(n, std::min(r, p));
        const Matrix V0 = rng.stiefel(p, std::min(r, p));
        Vector s(std::min(r, p));
        for (Index i = 0; i < s.size(); ++i) s[i] = 0.5 + rng.uniform();
        const Matrix X = U0 * s.asDiagonal() * V0.transpose();
        const SubdiffFrame fr = SubdiffFrame::from(X);

        Matrix U;
        if (t % 2 == 0) {
            Matrix K = Matrix::Zero(n, p);
            K.topLeftCorner(fr.rank, fr.rank).setIdentity();
            if (p > fr.rank)
                K.bottomRightCorner(n - fr.rank, p - fr.rank) = rng.stiefel(n - fr.rank, p - fr.rank);
            U = fr.U * K * fr.V.transpose();
        } else {
            U = rng.stiefel(n, p);
        }
        const bool member = subgrad_check(fr, X, U, 1e-8).member;
        const bool pairing = std::abs(inner(U, X) - fr.nuclear()) <= 1e-8 * (1 + fr.nuclear());
        const bool polar = is_polarizer(X, U, 1e-8);
        (member == pairing && pairing == polar) ? ++b.pass : ++b.fail;
    }
    return b;
}

Battery battery_flats(std::uint64_t seed) {
    Battery b{"flats_theorem"};
    Rng rng(seed + 3);
    for (int t = 0; t < 50; ++t) {
        const Index p = 2 + static_cast<Index>(rng.uniform() * 3);
        const Index n = p + static_cast<Index>(rng.uniform() * 2);
        const Matrix U = rng.orthogonal(n);
        const Matrix V = rng.orthogonal(p);
        Vector s(p), w(p);
        for (Index i = 0; i < p; ++i) {
            s[i] = rng.uniform();
            w[i] = rng.uniform();
        }
        w *= s.sum() / w.sum();
        Matrix S = Matrix::Zero(n, p), W = Matrix::Zero(n, p);
        S.topRows(p) = Matrix(s.asDiagonal());
        W.topRows(p) = Matrix(w.asDiagonal());
        const Matrix X1 = U * S * V.transpose();
        const Matrix X2 = U * W * V.transpose();
        const bool flat_ok = is_flat_segment(X1, X2, 1e-8) &&
                             common_polarizer(X1, X2, 1e-8).has_value();
        const bool perturbed_fails =
            !is_flat_segment(X1, Matrix(X2 + 0.1 * rng.gaussian_matrix(n, p)), 1e-8);
        (flat_ok && perturbed_fails) ? ++b.pass : ++b.fail;
    }
    return b;
}

Battery battery_prox(std::uint64_t seed) {
    Battery b{"prox_optimality"};
    Rng rng(seed + 4);
    for (int t = 0; t < 30; ++t) {
        const Matrix X = rng.gaussian_matrix(4, 3);
        const double tau = rng.uniform() * 2;
        const Matrix P = prox_nuclear(X, tau);
        const double best = tau * nuclear_norm(P) + 0.5 * (P - X).squaredNorm();
        bool ok = true;
        for (int probe = 0; probe < 20; ++probe) {
            const Matrix Z = P + 0.5 * rng.gaussian_matrix(4, 3);
            ok &= best <= tau * nuclear_norm(Z) + 0.5 * (Z - X).squaredNorm() + 1e-10;
        }
        ok ? ++b.pass : ++b.fail;
    }
    return b;
}

Battery battery_round_trip(std::uint64_t seed) {
    Battery b{"certificate_round_trip"};
    Rng rng(seed + 5);
    int tried = 0;
    for (int t = 0; t < 100 && tried < 25; ++t) {
        const Index p = 2 + static_cast<Index>(rng.uniform() * 2);
        const Index n = p + static_cast<Index>(rng.uniform() * 2);
        const Index r = 1 + static_cast<Index>(rng.uniform() * (p - 1));
        const Matrix U0 = rng.stiefel(n, r);
        const Matrix V0 = rng.stiefel(p, r);
        Vector s(r);
        for (Index i = 0; i < r; ++i) s[i] = 0.5 + rng.uniform();
        const Matrix Xbar = U0 * s.asDiagonal() * V0.transpose();
        const SubdiffFrame fr = SubdiffFrame::from(Xbar);
        if (fr.rank != r) continue;

        NonUniquenessCertificate cert;
        cert.R = rng.stiefel(n - r, p - r);
        Matrix D0 = Matrix::Zero(p - r, p - r);
        for (Index i = 0; i < p - r; ++i) D0(i, i) = 0.2 + rng.uniform();
        const Matrix P22 = cert.R * D0 * cert.R.transpose();
        cert.M = Matrix::Zero(n, n);
        cert.M.topLeftCorner(r, r) =
            -(P22.trace() / static_cast<double>(r)) * Matrix::Identity(r, r);
        cert.M.bottomRightCorner(n - r, n - r) = P22;
        Vector sig = Vector::Zero(n);
        sig.head(fr.sigma.size()) = fr.sigma;
        for (Index i = fr.rank; i < n; ++i) sig[i] = 0;
        cert.eps_hat = eps_hat(sig, cert.M);
        if (!(cert.eps_hat > 1e-6)) continue;
        ++tried;

        bool ok = false;
        try {
            const Matrix Xhat = second_solution(Xbar, cert);
            NonUniquenessCertificate back = extract_certificate(Xbar, Xhat, 1e-7);
            back.eps_hat = std::min(back.eps_hat, 1.0);
            const Matrix Xhat2 = second_solution(Xbar, back);
            const Matrix T1 = Xhat - Xbar, T2 = Xhat2 - Xbar;
            const Matrix resid = T2 - (inner(T2, T1) / T1.squaredNorm()) * T1;
            ok = resid.norm() <= 1e-7 * (1 + T2.norm());
        } catch (const std::exception&) {
            ok = false;
        }
        ok ? ++b.pass : ++b.fail;
    }
    return b;
}

int run_harness(const CommonOpts& opts) {
    const std::vector<Battery> batteries = {
        battery_von_neumann(opts.seed), battery_adjoint(opts.seed),
        battery_polarizer(opts.seed),   battery_flats(opts.seed),
        battery_prox(opts.seed),        battery_round_trip(opts.seed),
    };
    Json j;
    j["seed"] = opts.seed;
    Json arr = Json::array();
    bool all_ok = true;
    for (const auto& b : batteries) {
        arr.push_back(Json{{"name", b.name}, {"pass", b.pass}, {"fail", b.fail}});
        all_ok &= b.fail == 0;
    }
    j["batteries"] = arr;
    j["all_pass"] = all_ok;
    emit(j, opts, nullptr);
    return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nuclear norm minimization with uniqueness certification"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string flat_a, flat_b, polarize_path;

    auto add_common = [&](CLI::App* cmd, bool with_instance) {
        if (with_instance)
            cmd->add_option("--instance", opts.instance,
                            "instance JSON path, or \"counterexample\"")
                ->required();
        cmd->add_option("--out", opts.out, "also write the output to this path");
        cmd->add_option("--tol", opts.tol, "decision tolerance");
        cmd->add_option("--seed", opts.seed, "seed for randomized pieces");
        cmd->add_option("--starts", opts.starts, "multistart budget");
        cmd->add_flag("--csv", opts.csv, "emit the primary matrix as CSV");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the affine-constrained problem");
    add_common(solve, true);
    CLI::App* solve_reg = app.add_subcommand("solve-reg", "solve the regularized problem");
    add_common(solve_reg, true);
    solve_reg->add_option("--lambda", opts.lambda, "regularization weight");
    CLI::App* certify = app.add_subcommand("certify", "certify uniqueness of a solution");
    add_common(certify, true);
    certify->add_option("--xbar", opts.xbar, "candidate solution (else solve first)");
    CLI::App* flat = app.add_subcommand("flat", "test two matrices for a flat segment");
    flat->add_option("A", flat_a, "first matrix (CSV or JSON)")->required();
    flat->add_option("B", flat_b, "second matrix (CSV or JSON)")->required();
    add_common(flat, false);
    CLI::App* polar = app.add_subcommand("polarize", "compute a polarizer of a matrix");
    polar->add_option("X", polarize_path, "matrix (CSV or JSON)")->required();
    add_common(polar, false);
    CLI::App* counter = app.add_subcommand("counterexample",
                                           "run the built-in example regression");
    add_common(counter, false);
    CLI::App* harness = app.add_subcommand("harness", "run the seeded property batteries");
    add_common(harness, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (solve->parsed()) return run_solve(opts, false);
        if (solve_reg->parsed()) return run_solve(opts, true);
        if (certify->parsed()) return run_certify(opts);
        if (flat->parsed()) return run_flat(opts, flat_a, flat_b);
        if (polar->parsed()) return run_polarize(opts, polarize_path);
        if (counter->parsed()) return run_counterexample(opts);
        if (harness->parsed()) return run_harness(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
