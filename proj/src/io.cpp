#include "brenier/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <regex>

#include "brenier/approx.hpp"
#include "brenier/error.hpp"

namespace brenier {

namespace {

static_assert(std::endian::native == std::endian::little, "GridField binary I/O assumes a little-endian host");

Json vec_json(const Vector& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Vector json_vec(const Json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field + ": expected an array of numbers");
    Vector v(int(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "]: expected a number");
        v(int(i)) = j[i].get<double>();
    }
    return v;
}

Json mat_json(const Matrix& m) {
    Json a = Json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 0; k < m.cols(); ++k) a.push_back(m(i, k));
    return a;
}

Matrix json_mat(const Json& j, int dim, const std::string& field) {
    Vector v = json_vec(j, field);
    if (v.size() != dim * dim)
        throw ConfigError(field + ": expected " + std::to_string(dim * dim) + " row-major entries");
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) m(i, k) = v(i * dim + k);
    return m;
}

SymMatrix json_sym(const Json& j, int dim, const std::string& field) {
    Vector v = json_vec(j, field);
    if (v.size() != dim * dim)
        throw ConfigError(field + ": expected " + std::to_string(dim * dim) + " row-major entries");
    try {
        return SymMatrix::from_row_major(dim, std::span<const double>(v.data(), std::size_t(v.size())));
    } catch (const ContractViolation& e) {
        throw ConfigError(field + ": " + e.what());
    }
}

const Json& field_of(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

double number_of(const Json& j, const char* key, const std::string& where) {
    const Json& v = field_of(j, key, where);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int int_of(const Json& j, const char* key, const std::string& where) {
    const Json& v = field_of(j, key, where);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

std::string string_of(const Json& j, const char* key, const std::string& where) {
    const Json& v = field_of(j, key, where);
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("grid field: truncated input");
    return v;
}

Box box_from_json(const Json& j, const std::string& where) {
    Vector lo = json_vec(field_of(j, "low", where), where + ".low");
    Vector hi = json_vec(field_of(j, "high", where), where + ".high");
    if (lo.size() != hi.size() || lo.size() < 1 || lo.size() > 3)
        throw ConfigError(where + ": low and high need 1 to 3 matching entries");
    Box b;
    b.dim = int(lo.size());
    for (int a = 0; a < b.dim; ++a) {
        if (!(hi(a) > lo(a))) throw ConfigError(where + ": empty box");
        b.low[a] = lo(a);
        b.high[a] = hi(a);
    }
    return b;
}

}  // namespace

Json to_json(const GoodFunction& f) {
    Json j;
    j["dim"] = f.dim();
    switch (f.kind()) {
        case GoodKind::Trace: j["kind"] = "trace"; break;
        case GoodKind::LambdaMax: j["kind"] = "lambda_max"; break;
        case GoodKind::SumTopK:
            j["kind"] = "sum_top_k";
            j["k"] = f.k();
            break;
        case GoodKind::PNormPositive:
            j["kind"] = "pnorm_positive";
            j["p"] = f.p();
            break;
        case GoodKind::HkVariant:
            j["kind"] = "hk_variant";
            j["k"] = f.k();
            j["normalization"] = f.normalization() == HkNormalization::Additive ? "additive" : "multiplicative";
            break;
        case GoodKind::Anisotropic:
            j["kind"] = "anisotropic";
            j["Y"] = f.weight().row_major();
            break;
    }
    return j;
}

GoodFunction good_function_from_json(const Json& j) {
    const std::string w = "good function";
    std::string kind = string_of(j, "kind", w);
    try {
        if (kind == "anisotropic") {
            int dim = j.contains("dim") ? int_of(j, "dim", w) : 0;
            const Json& y = field_of(j, "Y", w);
            if (dim == 0) dim = int(std::lround(std::sqrt(double(y.size()))));
            return GoodFunction::anisotropic(json_sym(y, dim, w + ".Y"));
        }
        int dim = int_of(j, "dim", w);
        if (kind == "trace") return GoodFunction::trace(dim);
        if (kind == "lambda_max") return GoodFunction::lambda_max(dim);
        if (kind == "sum_top_k") return GoodFunction::sum_top_k(dim, int_of(j, "k", w));
        if (kind == "pnorm_positive") return GoodFunction::pnorm_positive(dim, number_of(j, "p", w));
        if (kind == "hk_variant") {
            std::string norm = j.contains("normalization") ? string_of(j, "normalization", w) : "multiplicative";
            if (norm != "multiplicative" && norm != "additive")
                throw ConfigError(w + ".normalization: expected 'multiplicative' or 'additive'");
            return GoodFunction::hk_variant(dim, int_of(j, "k", w),
                                            norm == "additive" ? HkNormalization::Additive
                                                               : HkNormalization::Multiplicative);
        }
    } catch (const ContractViolation& e) {
        throw ConfigError(w + ": " + e.what());
    }
    throw ConfigError(w + ".kind: unknown kind '" + kind + "'");
}

GoodFunction good_function_from_name(const std::string& name, int dim) {
    static const std::regex call(R"(^([a-z_]+)\(([0-9.]+)(?:,(multiplicative|additive))?\)$)");
    static const std::regex shorthand(R"(^([SN])_([0-9.]+)$)");
    std::smatch m;
    try {
        if (name == "trace") return GoodFunction::trace(dim);
        if (name == "lambda_max") return GoodFunction::lambda_max(dim);
        if (std::regex_match(name, m, shorthand)) {
            if (m[1] == "S") return GoodFunction::sum_top_k(dim, std::stoi(m[2]));
            return GoodFunction::pnorm_positive(dim, std::stod(m[2]));
        }
        if (std::regex_match(name, m, call)) {
            if (m[1] == "sum_top_k" && !m[3].matched) return GoodFunction::sum_top_k(dim, std::stoi(m[2]));
            if (m[1] == "pnorm_positive" && !m[3].matched) return GoodFunction::pnorm_positive(dim, std::stod(m[2]));
            if (m[1] == "hk_variant")
                return GoodFunction::hk_variant(dim, std::stoi(m[2]),
                                                m[3] == "additive" ? HkNormalization::Additive
                                                                   : HkNormalization::Multiplicative);
        }
    } catch (const ContractViolation& e) {
        throw ConfigError("good function '" + name + "': " + e.what());
    }
    throw ConfigError("unknown good function '" + name + "'");
}

Json to_json(const Box& box) {
    Json lo = Json::array(), hi = Json::array();
    for (int a = 0; a < box.dim; ++a) {
        lo.push_back(box.low[a]);
        hi.push_back(box.high[a]);
    }
    return Json{{"low", lo}, {"high", hi}};
}

Json to_json(const GridSpec& grid) {
    Json j = to_json(grid.box());
    Json n = Json::array();
    for (int a = 0; a < grid.dim(); ++a) n.push_back(grid.n(a));
    j["n"] = n;
    return j;
}

GridSpec grid_from_json(const Json& j) {
    const std::string w = "grid";
    if (j.is_object() && j.contains("dim")) {
        int dim = int_of(j, "dim", w);
        if (dim < 1 || dim > 3) throw ConfigError("grid.dim: expected 1, 2 or 3");
        double lo = number_of(j, "low", w), hi = number_of(j, "high", w);
        int n = int_of(j, "n", w);
        if (!(hi > lo) || n < 3) throw ConfigError("grid: need high > low and n >= 3");
        return GridSpec::cube(dim, lo, hi, std::size_t(n));
    }
    Box b = box_from_json(j, w);
    Vector n = json_vec(field_of(j, "n", w), "grid.n");
    if (n.size() != b.dim) throw ConfigError("grid.n: expected one count per axis");
    std::array<std::size_t, 3> counts{1, 1, 1};
    for (int a = 0; a < b.dim; ++a) {
        if (n(a) < 3 || n(a) != std::floor(n(a))) throw ConfigError("grid.n: counts must be integers >= 3");
        counts[a] = std::size_t(n(a));
    }
    return GridSpec(b, counts);
}

Json to_json(const Potential& v) {
    Json j;
    j["dim"] = v.dim();
    switch (v.form()) {
        case Potential::Form::Analytic: {
            j["form"] = "analytic";
            j["Q"] = v.quad_matrix().row_major();
            j["q"] = vec_json(v.quad_linear());
            j["offset"] = v.offset();
            if (v.perturbation() != Perturbation::None)
                j["perturbation"] = Json{{"kind", perturbation_name(v.perturbation())},
                                         {"amplitude", v.amplitude()},
                                         {"L", mat_json(v.pert_matrix())},
                                         {"shift", vec_json(v.pert_shift())}};
            if (v.domain().dim > 0) j["domain"] = to_json(v.domain());
            break;
        }
        case Potential::Form::Mollified: {
            j["form"] = "mollified";
            j["base"] = to_json(v.base()[0]);
            Json offs = Json::array();
            for (const auto& z : v.offsets()) offs.push_back(vec_json(z));
            j["offsets"] = offs;
            j["weights"] = v.weights();
            j["constant"] = v.offset();
            if (v.support_radius()) j["radius"] = *v.support_radius();
            break;
        }
        case Potential::Form::Grid:
            throw UnsupportedKind("grid potentials serialize through the GridField binary format");
    }
    return j;
}

Potential potential_from_json(const Json& j) {
    const std::string w = "potential";
    std::string form = string_of(j, "form", w);
    try {
        if (form == "isotropic_gaussian")
            return Potential::isotropic_gaussian(int_of(j, "dim", w), number_of(j, "sigma", w));
        if (form == "gaussian") {
            Vector mean = json_vec(field_of(j, "mean", w), w + ".mean");
            return Potential::gaussian(mean, json_sym(field_of(j, "cov", w), int(mean.size()), w + ".cov"));
        }
        if (form == "analytic") {
            int dim = int_of(j, "dim", w);
            Vector q = j.contains("q") ? json_vec(j.at("q"), w + ".q") : Vector::Zero(dim);
            double offset = j.contains("offset") ? number_of(j, "offset", w) : 0.0;
            Potential p = Potential::quadratic(json_sym(field_of(j, "Q", w), dim, w + ".Q"), q, offset);
            if (j.contains("perturbation")) {
                const Json& pj = j.at("perturbation");
                const std::string pw = w + ".perturbation";
                Matrix l = pj.contains("L") ? json_mat(pj.at("L"), dim, pw + ".L") : Matrix();
                Vector s = pj.contains("shift") ? json_vec(pj.at("shift"), pw + ".shift") : Vector();
                p = p.with_perturbation(perturbation_from_name(string_of(pj, "kind", pw)),
                                        number_of(pj, "amplitude", pw), l, s);
            }
            if (j.contains("domain")) p = p.with_domain(box_from_json(j.at("domain"), w + ".domain"));
            return p;
        }
        if (form == "mollified") {
            Potential base = potential_from_json(field_of(j, "base", w));
            std::vector<Vector> offs;
            for (const auto& z : field_of(j, "offsets", w)) offs.push_back(json_vec(z, w + ".offsets"));
            Vector wts = json_vec(field_of(j, "weights", w), w + ".weights");
            std::optional<double> radius;
            if (j.contains("radius")) radius = number_of(j, "radius", w);
            return Potential::mollified(base, std::move(offs), std::vector<double>(wts.data(), wts.data() + wts.size()),
                                        j.contains("constant") ? number_of(j, "constant", w) : 0.0, radius);
        }
        if (form == "truncated_mollified") {
            Potential base = potential_from_json(field_of(j, "base", w));
            GridSpec g = grid_from_json(field_of(j, "grid", w));
            Mollifier m = Mollifier::bump(g, number_of(j, "t", w));
            return truncate_and_mollify_w(base, m, number_of(j, "radius", w), g).potential;
        }
    } catch (const ContractViolation& e) {
        throw ConfigError(w + ": " + e.what());
    }
    throw ConfigError(w + ".form: unknown form '" + form + "'");
}

ProblemEntry problem_from_json(const Json& j) {
    const std::string w = "problem";
    if (!j.is_object()) throw ConfigError("problem: expected an object");
    if (j.contains("registry")) {
        double scale = j.contains("scale") ? number_of(j, "scale", w) : 1.0;
        return registry_entry(string_of(j, "registry", w), scale);
    }
    ProblemEntry e;
    e.id = j.contains("id") ? string_of(j, "id", w) : "custom";
    e.description = j.contains("description") ? string_of(j, "description", w) : "";
    TransportProblem& p = e.problem;
    p.mu = potential_from_json(field_of(j, "mu", w));
    p.nu = potential_from_json(field_of(j, "nu", w));
    p.mu_grid = grid_from_json(field_of(j, "mu_grid", w));
    p.nu_grid = grid_from_json(field_of(j, "nu_grid", w));
    if (p.mu.dim() != p.nu.dim() || p.mu_grid.dim() != p.mu.dim() || p.nu_grid.dim() != p.mu.dim())
        throw ConfigError("problem: mu, nu and their grids must share one dimension");
    std::string solver = j.contains("solver") ? string_of(j, "solver", w) : (p.mu.dim() == 1 ? "quantile1d" : "entropic");
    if (solver == "quantile1d")
        p.solver = SolverKind::Quantile1D;
    else if (solver == "entropic")
        p.solver = SolverKind::Entropic;
    else
        throw ConfigError("problem.solver: expected 'quantile1d' or 'entropic'");
    if (j.contains("entropic")) {
        const Json& ej = j.at("entropic");
        const std::string ew = "problem.entropic";
        if (ej.contains("epsilons")) {
            Vector eps = json_vec(ej.at("epsilons"), ew + ".epsilons");
            p.entropic.epsilons.assign(eps.data(), eps.data() + eps.size());
        }
        if (ej.contains("max_iters")) p.entropic.max_iters = int_of(ej, "max_iters", ew);
        if (ej.contains("tol")) p.entropic.tol = number_of(ej, "tol", ew);
        if (ej.contains("relaxation")) p.entropic.relaxation = number_of(ej, "relaxation", ew);
        if (ej.contains("extrapolate")) p.entropic.extrapolate = ej.at("extrapolate").get<bool>();
        if (ej.contains("levels")) p.entropic.levels = int_of(ej, "levels", ew);
    }
    if (j.contains("central_fraction")) p.central_fraction = number_of(j, "central_fraction", w);
    if (j.contains("dual_grid")) {
        e.dual_grids = {p.nu_grid, grid_from_json(j.at("dual_grid"))};
    } else {
        // Gradients of W over the central half of its grid.
        Box b;
        b.dim = p.nu_grid.dim();
        for (std::size_t i = 0; i < p.nu_grid.size(); ++i) {
            Vector y = p.nu_grid.point(i);
            if (!p.nu_grid.box().central(0.5).contains(y) || !p.nu.in_support(y)) continue;
            Vector g = p.nu.gradient(y);
            for (int a = 0; a < b.dim; ++a) {
                b.low[a] = std::min(b.low[a], g(a));
                b.high[a] = std::max(b.high[a], g(a));
            }
        }
        std::array<std::size_t, 3> n{1, 1, 1};
        for (int a = 0; a < b.dim; ++a) {
            if (!(b.high[a] > b.low[a])) throw ConfigError("problem: cannot infer a dual grid; give dual_grid");
            n[a] = p.nu_grid.dim() == 1 ? 801 : 61;
        }
        e.dual_grids = {p.nu_grid, GridSpec(b, n)};
    }
    if (j.contains("support_radius")) e.support_radius = number_of(j, "support_radius", w);
    else e.support_radius = p.nu.support_radius();
    return e;
}

Json to_json(const SolverDiagnostics& d) {
    return Json{{"solver", d.solver},
                {"iterations", d.iterations},
                {"marginal_errors", d.marginal_errors},
                {"epsilon_ladder", d.epsilon_ladder},
                {"marginal_error", d.marginal_error},
                {"push_tol", d.push_tol},
                {"extrapolation_shift", d.extrapolation_shift}};
}

Json to_json(const BoundReport& r) {
    Json j{{"problem", r.problem_id},
           {"f", r.f_name},
           {"Lambda_V", r.lambda_v},
           {"inv_lambda_W", r.inv_lambda_w},
           {"bound", r.bound},
           {"sup_f_hessian_phi", r.sup},
           {"ratio", r.ratio},
           {"argmax", vec_json(r.argmax)},
           {"verdict", verdict_name(r.verdict)},
           {"seconds", r.seconds},
           {"solver", to_json(r.solver)}};
    j["margins"] = Json{{"Lambda_V", r.margins.lambda_v},
                        {"inv_lambda_W", r.margins.inv_lambda_w},
                        {"sup_stencil", r.margins.sup_stencil},
                        {"sup_extrapolation", r.margins.sup_extrapolation},
                        {"sup_resolution", r.margins.sup_resolution},
                        {"marginal", r.margins.marginal},
                        {"total_relative", r.margins.total},
                        {"note", "sup taken over the central box of the grid; no tail bound outside it"}};
    if (r.exact_sup) j["exact_sup"] = *r.exact_sup;
    return j;
}

void write_grid_field(std::ostream& os, const GridField& f) {
    const GridSpec& g = f.spec();
    os.write("BGF1", 4);
    put<std::uint32_t>(os, std::uint32_t(g.dim()));
    for (int a = 0; a < g.dim(); ++a) {
        put<double>(os, g.box().low[a]);
        put<double>(os, g.box().high[a]);
        put<std::uint64_t>(os, g.n(a));
    }
    put<std::uint64_t>(os, f.size());
    os.write(reinterpret_cast<const char*>(f.values().data()), std::streamsize(f.size() * sizeof(double)));
    if (!os) throw ConfigError("grid field: write failed");
}

GridField read_grid_field(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "BGF1", 4) != 0) throw ConfigError("grid field: bad magic");
    auto dim = get<std::uint32_t>(is);
    if (dim < 1 || dim > 3) throw ConfigError("grid field: bad dimension");
    Box b;
    b.dim = int(dim);
    std::array<std::size_t, 3> n{1, 1, 1};
    for (int a = 0; a < b.dim; ++a) {
        b.low[a] = get<double>(is);
        b.high[a] = get<double>(is);
        n[a] = std::size_t(get<std::uint64_t>(is));
    }
    GridSpec g(b, n);
    auto count = get<std::uint64_t>(is);
    if (count != g.size()) throw ConfigError("grid field: value count does not match the grid");
    std::vector<double> values(count);
    if (!is.read(reinterpret_cast<char*>(values.data()), std::streamsize(count * sizeof(double))))
        throw ConfigError("grid field: truncated input");
    return GridField(g, std::move(values));
}

void save_grid_field(const std::string& path, const GridField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    write_grid_field(os, f);
}

GridField load_grid_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    return read_grid_field(is);
}

void write_grid_field_csv(std::ostream& os, const GridField& f) {
    const GridSpec& g = f.spec();
    os << std::setprecision(17);
    for (int a = 0; a < g.dim(); ++a) os << "x" << a << ",";
    os << "value\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vector x = g.point(i);
        for (int a = 0; a < g.dim(); ++a) os << x(a) << ",";
        if (f.masked(i))
            os << "inf\n";
        else
            os << f[i] << "\n";
    }
}

void save_solution(const std::string& stem, const BrenierSolution& sol) {
    save_grid_field(stem + ".phi.bgf", sol.potential);
    for (std::size_t c = 0; c < sol.map.size(); ++c) save_grid_field(stem + ".T" + std::to_string(c) + ".bgf", sol.map[c]);
    write_json_file(stem + ".json", Json{{"iterations", sol.meta.iterations},
                                         {"marginal_error", sol.meta.marginal_error},
                                         {"epsilon_ladder", sol.meta.epsilon_ladder},
                                         {"push_tol", sol.meta.push_tol}});
}

void write_inequality_csv(std::ostream& os, const InequalityReport& r) {
    os << std::setprecision(17);
    int dim = r.rows.empty() ? 1 : int(r.rows.front().x.size());
    for (int a = 0; a < dim; ++a) os << "x" << a << ",";
    os << "eps,lhs,rhs,slack\n";
    for (const auto& row : r.rows) {
        for (int a = 0; a < row.x.size(); ++a) os << row.x(a) << ",";
        os << row.eps << "," << row.lhs << "," << row.rhs << "," << row.slack << "\n";
    }
}

void write_decay_csv(std::ostream& os, const DecayReport& r) {
    os << std::setprecision(17) << "r,j,radial,angular\n";
    for (const auto& row : r.rows) os << row.radius << "," << r.j << "," << row.radial << "," << row.angular << "\n";
}

void write_summary_csv(std::ostream& os, const std::vector<BoundReport>& reports) {
    os << std::setprecision(10) << "problem,f,lambda_v,inv_lambda_w,bound,sup,ratio,margin,verdict,seconds\n";
    for (const auto& r : reports)
        os << r.problem_id << ",\"" << r.f_name << "\"," << r.lambda_v << "," << r.inv_lambda_w << "," << r.bound << ","
           << r.sup << "," << r.ratio << "," << r.margins.total << "," << verdict_name(r.verdict) << "," << r.seconds
           << "\n";
}

Json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(is);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

}  // namespace brenier
