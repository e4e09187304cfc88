#pragma once

// Serialization: JSON specs for good functions, potentials, grids and
// problems; GridField binary and CSV; solution sidecars; report tables.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "brenier/grid.hpp"
#include "brenier/increments.hpp"
#include "brenier/potential.hpp"
#include "brenier/symcalc.hpp"
#include "brenier/transport.hpp"
#include "brenier/verify.hpp"

namespace brenier {

using Json = nlohmann::json;

/// {"kind": "trace" | "lambda_max" | "sum_top_k" | "pnorm_positive" |
/// "hk_variant" | "anisotropic", "dim": d, "k" | "p": number, "Y": row-major,
/// "normalization": "multiplicative" | "additive"}.
Json to_json(const GoodFunction& f);
GoodFunction good_function_from_json(const Json& j);
/// Accepts GoodFunction::name() output plus the short forms "S_k" and "N_p".
GoodFunction good_function_from_name(const std::string& name, int dim);

Json to_json(const Box& box);
Json to_json(const GridSpec& grid);
/// {"low": [...], "high": [...], "n": [...]} or {"dim", "low", "high", "n"}
/// with scalar bounds for cubes.
GridSpec grid_from_json(const Json& j);

/// Analytic and mollified forms serialize losslessly; grid potentials do not
/// (UnsupportedKind). Input also accepts "gaussian" {mean, cov},
/// "isotropic_gaussian" {dim, sigma} and "truncated_mollified" {base, t,
/// radius, grid}.
Json to_json(const Potential& v);
Potential potential_from_json(const Json& j);

/// Either {"registry": id, "scale": s} or an explicit problem with mu, nu,
/// mu_grid, nu_grid, solver, entropic, central_fraction and optional
/// dual_grid / support_radius.
ProblemEntry problem_from_json(const Json& j);

Json to_json(const SolverDiagnostics& d);
Json to_json(const BoundReport& r);

/// Little-endian: "BGF1", u32 dim, then per axis (f64 low, f64 high, u64 n),
/// u64 count, count f64 values.
void write_grid_field(std::ostream& os, const GridField& f);
GridField read_grid_field(std::istream& is);
void save_grid_field(const std::string& path, const GridField& f);
GridField load_grid_field(const std::string& path);
/// Header x0[,x1,x2],value; masked nodes are written as inf.
void write_grid_field_csv(std::ostream& os, const GridField& f);

/// <stem>.phi.bgf, <stem>.T<a>.bgf per component and <stem>.json with
/// {iterations, marginal_error, epsilon_ladder, push_tol}.
void save_solution(const std::string& stem, const BrenierSolution& sol);

void write_inequality_csv(std::ostream& os, const InequalityReport& r);
void write_decay_csv(std::ostream& os, const DecayReport& r);
/// One row per report: problem, f, lambda_v, inv_lambda_w, bound, sup,
/// ratio, margin, verdict, seconds.
void write_summary_csv(std::ostream& os, const std::vector<BoundReport>& reports);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace brenier
