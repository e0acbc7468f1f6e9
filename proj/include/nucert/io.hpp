#pragma once

#include "nucert/certify.hpp"
#include "nucert/operators.hpp"
#include "nucert/solver.hpp"

#include <nlohmann/json_fwd.hpp>
#include <string>

namespace nucert {

using Json = nlohmann::json;

/// Matrix object: {"rows": n, "cols": p, "data": [row-major reals]}.
Json matrix_to_json(const Matrix& X);
Matrix matrix_from_json(const Json& j, const char* field);

/// Reads CSV (one row per line) or the JSON matrix object, sniffing by the
/// first non-space character.
Matrix read_matrix_text(const std::string& text, const char* what);
Matrix read_matrix_file(const std::string& path);

std::string matrix_to_csv(const Matrix& X);

Json operator_to_json(const LinearOperatorSpec& op);
LinearOperatorSpec operator_from_json(const Json& j);

/// Instance JSON: operator fields plus "b" and optional "lambda".
Json instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const Json& j);
ProblemInstance read_instance_file(const std::string& path);

Json solve_report_to_json(const SolveReport& rep);
Json certificate_to_json(const NonUniquenessCertificate& cert, const SubdiffFrame* frame);
Json uniqueness_report_to_json(const UniquenessReport& rep, const SubdiffFrame* frame);

} // namespace nucert
