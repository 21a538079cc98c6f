#include "resopt/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "resopt/errors.hpp"
#include "resopt/util.hpp"

namespace resopt {

const char* region_name(Region r) {
    switch (r) {
        case Region::Matrix: return "matrix";
        case Region::ProppedFracture: return "propped";
        case Region::UnproppedFracture: return "unpropped";
    }
    return "unknown";
}

namespace {

// Symmetric positive-definite banded matrix, lower storage:
// entry(i, d) = A(i, i - d), d in [0, bw]. Cholesky without pivoting.
class BandedSpd {
public:
    BandedSpd(int n, int bw) : n_(n), bw_(bw), a_(static_cast<std::size_t>(n) * (bw + 1), 0.0) {}

    double& at(int i, int j) { // requires i >= j, i - j <= bw
        return a_[static_cast<std::size_t>(i) * (bw_ + 1) + (i - j)];
    }
    double get(int i, int j) const {
        if (i < j) std::swap(i, j);
        if (i - j > bw_) return 0.0;
        return a_[static_cast<std::size_t>(i) * (bw_ + 1) + (i - j)];
    }

    // In-place LL^T factorization of a copy; returns false on a non-positive pivot.
    bool factorize() {
        l_ = a_;
        auto L = [&](int i, int j) -> double& {
            return l_[static_cast<std::size_t>(i) * (bw_ + 1) + (i - j)];
        };
        for (int j = 0; j < n_; ++j) {
            double d = L(j, j);
            const int kmin = std::max(0, j - bw_);
            for (int k = kmin; k < j; ++k) d -= L(j, k) * L(j, k);
            if (!(d > 0.0)) return false;
            const double ld = std::sqrt(d);
            L(j, j) = ld;
            const int imax = std::min(n_ - 1, j + bw_);
            for (int i = j + 1; i <= imax; ++i) {
                double s = L(i, j);
                const int k0 = std::max({0, i - bw_, j - bw_});
                for (int k = k0; k < j; ++k) s -= L(i, k) * L(j, k);
                L(i, j) = s / ld;
            }
        }
        return true;
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        auto L = [&](int i, int j) {
            return l_[static_cast<std::size_t>(i) * (bw_ + 1) + (i - j)];
        };
        std::vector<double> y(n_);
        for (int i = 0; i < n_; ++i) {
            double s = b[i];
            const int k0 = std::max(0, i - bw_);
            for (int k = k0; k < i; ++k) s -= L(i, k) * y[k];
            y[i] = s / L(i, i);
        }
        std::vector<double> x(n_);
        for (int i = n_ - 1; i >= 0; --i) {
            double s = y[i];
            const int kmax = std::min(n_ - 1, i + bw_);
            for (int k = i + 1; k <= kmax; ++k) s -= L(k, i) * x[k];
            x[i] = s / L(i, i);
        }
        return x;
    }

    // ||b - A x||_inf / max(||b||_inf, eps)
    double relative_residual(const std::vector<double>& x, const std::vector<double>& b) const {
        double rmax = 0.0, bmax = 0.0;
        for (int i = 0; i < n_; ++i) {
            double ax = 0.0;
            const int jmin = std::max(0, i - bw_);
            const int jmax = std::min(n_ - 1, i + bw_);
            for (int j = jmin; j <= jmax; ++j) ax += get(i, j) * x[j];
            rmax = std::max(rmax, std::abs(b[i] - ax));
            bmax = std::max(bmax, std::abs(b[i]));
        }
        return rmax / std::max(bmax, 1e-300);
    }

private:
    int n_, bw_;
    std::vector<double> a_, l_;
};

struct FlowSolve {
    std::vector<double> pressure;
    double well_rate = 0.0; // m^3/s, positive = production
};

// Backward-Euler finite-volume pressure solve at fixed permeability.
// Two-point flux with harmonic inter-cell transmissibility.
FlowSolve solve_pressure(const ReservoirModel& model, const std::vector<double>& p_old,
                         std::span<const double> k_field, double dt_s, double bhp_pa,
                         bool well_on) {
    const Grid& g = model.grid;
    const int n = g.cell_count();
    const int bw = g.ny > 1 ? g.ny : 1;
    BandedSpd A(n, std::min(bw, n - 1 > 0 ? bw : 0));

    const double V = g.cell_volume();
    const double inv_mu = 1.0 / model.fluid.mu;
    std::vector<double> b(n, 0.0);

    for (int i = 0; i < n; ++i) {
        const double acc = model.phi_cell[i] * model.fluid.ct * V / dt_s;
        A.at(i, i) += acc;
        b[i] += acc * p_old[i];
    }

    auto add_face = [&](int i, int j, double half_i, double half_j) {
        const double denom = half_i + half_j;
        if (denom <= 0.0) return;
        const double lam = (half_i * half_j / denom) * inv_mu;
        if (i < j) std::swap(i, j);
        A.at(i, i) += lam;
        A.at(j, j) += lam;
        A.at(i, j) -= lam;
    };

    const double hx = 2.0 * g.dy * g.thickness / g.dx; // half-transmissibility geometry, x faces
    const double hy = 2.0 * g.dx * g.thickness / g.dy;
    for (int ix = 0; ix < g.nx; ++ix) {
        for (int iy = 0; iy < g.ny; ++iy) {
            const int i = g.index(ix, iy);
            if (ix + 1 < g.nx) add_face(i, g.index(ix + 1, iy), hx * k_field[i],
                                        hx * k_field[g.index(ix + 1, iy)]);
            if (iy + 1 < g.ny) add_face(i, g.index(ix, iy + 1), hy * k_field[i],
                                        hy * k_field[g.index(ix, iy + 1)]);
        }
    }

    const int w = model.well.cell_index;
    const double well_lam = model.well.well_index_WI * k_field[w] * inv_mu;
    if (well_on) {
        A.at(w, w) += well_lam;
        b[w] += well_lam * bhp_pa;
    }

    if (!A.factorize())
        throw NumericError("pressure solve: non-positive pivot in banded Cholesky", 1.0);
    FlowSolve out;
    out.pressure = A.solve(b);
    const double res = A.relative_residual(out.pressure, b);
    if (res > model.lin_solver_tol)
        throw NumericError("pressure solve: relative residual " + fmt_g17(res) +
                               " above tolerance " + fmt_g17(model.lin_solver_tol),
                           res);
    out.well_rate = well_on ? well_lam * (out.pressure[w] - bhp_pa) : 0.0;
    return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("model config: key '" + key + "' " + what);
}

} // namespace

void ModelConfig::validate() const {
    require(nx >= 1, "nx", "must be >= 1");
    require(ny >= 1, "ny", "must be >= 1");
    require(dx_m > 0, "dx_m", "must be > 0");
    require(dy_m > 0, "dy_m", "must be > 0");
    require(thickness_m > 0, "thickness_m", "must be > 0");
    require(p_init_pa > 0 && std::isfinite(p_init_pa), "p_init_pa", "must be positive and finite");
    require(p_floor_pa > 0 && p_floor_pa < p_init_pa, "p_floor_pa", "must be in (0, p_init_pa)");
    require(p_ceiling_pa > p_init_pa, "p_ceiling_pa", "must be > p_init_pa");
    require(phi_matrix > 0 && phi_matrix < 1, "phi_matrix", "must be in (0, 1)");
    require(phi_propped > 0 && phi_propped < 1, "phi_propped", "must be in (0, 1)");
    require(phi_unpropped > 0 && phi_unpropped < 1, "phi_unpropped", "must be in (0, 1)");
    require(k0_matrix_m2 > 0, "k0_matrix_m2", "must be > 0");
    require(k0_propped_m2 > 0, "k0_propped_m2", "must be > 0");
    require(k0_unpropped_m2 > 0, "k0_unpropped_m2", "must be > 0");
    require(alpha_matrix_painv >= 0, "alpha_matrix_painv", "must be >= 0");
    require(alpha_propped_painv >= 0, "alpha_propped_painv", "must be >= 0");
    require(alpha_unpropped_painv >= 0, "alpha_unpropped_painv", "must be >= 0");
    require(mu_pas > 0, "mu_pas", "must be > 0");
    require(ct_painv > 0, "ct_painv", "must be > 0");
    require(rho_ref_kgm3 > 0, "rho_ref_kgm3", "must be > 0");
    require(biot_b > 0 && biot_b <= 1, "biot_b", "must be in (0, 1]");
    require(poisson_nu >= 0 && poisson_nu < 0.5, "poisson_nu", "must be in [0, 0.5)");
    require(youngs_e_pa > 0, "youngs_e_pa", "must be > 0");
    require(halo_width >= 0, "halo_width", "must be >= 0");
    require(well_index_m > 0, "well_index_m", "must be > 0");
    require(coupling_tol_pa > 0, "coupling_tol_pa", "must be > 0");
    require(coupling_max_iter >= 1, "coupling_max_iter", "must be >= 1");
    require(substeps_per_control >= 1, "substeps_per_control", "must be >= 1");
    require(lin_solver_tol > 0, "lin_solver_tol", "must be > 0");
}

namespace {

using FieldSetter = std::function<void(ModelConfig&, const std::string&)>;

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("model config: key '" + key + "' has non-numeric value '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    const double x = parse_double(key, v);
    if (x != std::floor(x)) throw ConfigError("model config: key '" + key + "' must be an integer");
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("model config: key '" + key + "' must be a boolean (0/1/true/false)");
}

const std::map<std::string, FieldSetter>& config_setters() {
    static const std::map<std::string, FieldSetter> setters = {
        {"nx", [](ModelConfig& c, const std::string& v) { c.nx = parse_int("nx", v); }},
        {"ny", [](ModelConfig& c, const std::string& v) { c.ny = parse_int("ny", v); }},
        {"dx_m", [](ModelConfig& c, const std::string& v) { c.dx_m = parse_double("dx_m", v); }},
        {"dy_m", [](ModelConfig& c, const std::string& v) { c.dy_m = parse_double("dy_m", v); }},
        {"thickness_m",
         [](ModelConfig& c, const std::string& v) { c.thickness_m = parse_double("thickness_m", v); }},
        {"p_init_pa",
         [](ModelConfig& c, const std::string& v) { c.p_init_pa = parse_double("p_init_pa", v); }},
        {"p_floor_pa",
         [](ModelConfig& c, const std::string& v) { c.p_floor_pa = parse_double("p_floor_pa", v); }},
        {"p_ceiling_pa",
         [](ModelConfig& c, const std::string& v) { c.p_ceiling_pa = parse_double("p_ceiling_pa", v); }},
        {"phi_matrix",
         [](ModelConfig& c, const std::string& v) { c.phi_matrix = parse_double("phi_matrix", v); }},
        {"phi_propped",
         [](ModelConfig& c, const std::string& v) { c.phi_propped = parse_double("phi_propped", v); }},
        {"phi_unpropped",
         [](ModelConfig& c, const std::string& v) { c.phi_unpropped = parse_double("phi_unpropped", v); }},
        {"k0_matrix_m2",
         [](ModelConfig& c, const std::string& v) { c.k0_matrix_m2 = parse_double("k0_matrix_m2", v); }},
        {"k0_propped_m2",
         [](ModelConfig& c, const std::string& v) { c.k0_propped_m2 = parse_double("k0_propped_m2", v); }},
        {"k0_unpropped_m2",
         [](ModelConfig& c, const std::string& v) { c.k0_unpropped_m2 = parse_double("k0_unpropped_m2", v); }},
        {"alpha_matrix_painv",
         [](ModelConfig& c, const std::string& v) { c.alpha_matrix_painv = parse_double("alpha_matrix_painv", v); }},
        {"alpha_propped_painv",
         [](ModelConfig& c, const std::string& v) { c.alpha_propped_painv = parse_double("alpha_propped_painv", v); }},
        {"alpha_unpropped_painv",
         [](ModelConfig& c, const std::string& v) { c.alpha_unpropped_painv = parse_double("alpha_unpropped_painv", v); }},
        {"mu_pas", [](ModelConfig& c, const std::string& v) { c.mu_pas = parse_double("mu_pas", v); }},
        {"ct_painv",
         [](ModelConfig& c, const std::string& v) { c.ct_painv = parse_double("ct_painv", v); }},
        {"rho_ref_kgm3",
         [](ModelConfig& c, const std::string& v) { c.rho_ref_kgm3 = parse_double("rho_ref_kgm3", v); }},
        {"biot_b", [](ModelConfig& c, const std::string& v) { c.biot_b = parse_double("biot_b", v); }},
        {"poisson_nu",
         [](ModelConfig& c, const std::string& v) { c.poisson_nu = parse_double("poisson_nu", v); }},
        {"youngs_e_pa",
         [](ModelConfig& c, const std::string& v) { c.youngs_e_pa = parse_double("youngs_e_pa", v); }},
        {"frac_col", [](ModelConfig& c, const std::string& v) { c.frac_col = parse_int("frac_col", v); }},
        {"halo_width",
         [](ModelConfig& c, const std::string& v) { c.halo_width = parse_int("halo_width", v); }},
        {"well_ix", [](ModelConfig& c, const std::string& v) { c.well_ix = parse_int("well_ix", v); }},
        {"well_iy", [](ModelConfig& c, const std::string& v) { c.well_iy = parse_int("well_iy", v); }},
        {"well_index_m",
         [](ModelConfig& c, const std::string& v) { c.well_index_m = parse_double("well_index_m", v); }},
        {"rate_clamp",
         [](ModelConfig& c, const std::string& v) { c.rate_clamp = parse_bool("rate_clamp", v); }},
        {"coupling_tol_pa",
         [](ModelConfig& c, const std::string& v) { c.coupling_tol_pa = parse_double("coupling_tol_pa", v); }},
        {"coupling_max_iter",
         [](ModelConfig& c, const std::string& v) { c.coupling_max_iter = parse_int("coupling_max_iter", v); }},
        {"substeps_per_control",
         [](ModelConfig& c, const std::string& v) { c.substeps_per_control = parse_int("substeps_per_control", v); }},
        {"lin_solver_tol",
         [](ModelConfig& c, const std::string& v) { c.lin_solver_tol = parse_double("lin_solver_tol", v); }},
    };
    return setters;
}

} // namespace

std::string ModelConfig::canonical_text() const {
    std::ostringstream out;
    out << "nx " << nx << "\nny " << ny << "\ndx_m " << fmt_g17(dx_m) << "\ndy_m " << fmt_g17(dy_m)
        << "\nthickness_m " << fmt_g17(thickness_m) << "\np_init_pa " << fmt_g17(p_init_pa)
        << "\np_floor_pa " << fmt_g17(p_floor_pa) << "\np_ceiling_pa " << fmt_g17(p_ceiling_pa)
        << "\nphi_matrix " << fmt_g17(phi_matrix) << "\nphi_propped " << fmt_g17(phi_propped)
        << "\nphi_unpropped " << fmt_g17(phi_unpropped) << "\nk0_matrix_m2 " << fmt_g17(k0_matrix_m2)
        << "\nk0_propped_m2 " << fmt_g17(k0_propped_m2) << "\nk0_unpropped_m2 "
        << fmt_g17(k0_unpropped_m2) << "\nalpha_matrix_painv " << fmt_g17(alpha_matrix_painv)
        << "\nalpha_propped_painv " << fmt_g17(alpha_propped_painv) << "\nalpha_unpropped_painv "
        << fmt_g17(alpha_unpropped_painv) << "\nmu_pas " << fmt_g17(mu_pas) << "\nct_painv "
        << fmt_g17(ct_painv) << "\nrho_ref_kgm3 " << fmt_g17(rho_ref_kgm3) << "\nbiot_b "
        << fmt_g17(biot_b) << "\npoisson_nu " << fmt_g17(poisson_nu) << "\nyoungs_e_pa "
        << fmt_g17(youngs_e_pa) << "\nfrac_col " << frac_col << "\nhalo_width " << halo_width
        << "\nwell_ix " << well_ix << "\nwell_iy " << well_iy << "\nwell_index_m "
        << fmt_g17(well_index_m) << "\nrate_clamp " << (rate_clamp ? 1 : 0) << "\ncoupling_tol_pa "
        << fmt_g17(coupling_tol_pa) << "\ncoupling_max_iter " << coupling_max_iter
        << "\nsubsteps_per_control " << substeps_per_control << "\nlin_solver_tol "
        << fmt_g17(lin_solver_tol) << "\n";
    return out.str();
}

std::string ModelConfig::fingerprint() const { return hex64(fnv1a64(canonical_text())); }

ModelConfig ModelConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model config: " + path);
    ModelConfig cfg;
    const auto& setters = config_setters();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::string eq;
        ss >> eq;
        std::string value;
        if (eq == "=") {
            ss >> value;
        } else {
            value = eq; // "key value" form
        }
        if (value.empty())
            throw ConfigError("model config: line " + std::to_string(lineno) + ": key '" + key +
                              "' has no value");
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("model config: line " + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        it->second(cfg, value);
    }
    cfg.validate();
    return cfg;
}

void ModelConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    std::istringstream canon(canonical_text());
    std::string key, value;
    while (canon >> key >> value) out << key << " = " << value << "\n";
}

const RegionProps& ReservoirModel::props(Region r) const {
    switch (r) {
        case Region::ProppedFracture: return propped;
        case Region::UnproppedFracture: return unpropped;
        default: return matrix;
    }
}

ReservoirState ReservoirModel::initial_state() const {
    ReservoirState s;
    const int n = grid.cell_count();
    s.pressure.assign(n, p_init);
    s.dsigma_eff.assign(n, 0.0);
    s.k_current = k0_cell;
    return s;
}

ReservoirModel build_model(const ModelConfig& config) {
    config.validate();

    ReservoirModel m;
    m.grid = Grid{config.nx, config.ny, config.dx_m, config.dy_m, config.thickness_m};
    m.matrix = RegionProps{config.k0_matrix_m2, config.alpha_matrix_painv, config.phi_matrix};
    m.propped = RegionProps{config.k0_propped_m2, config.alpha_propped_painv, config.phi_propped};
    m.unpropped =
        RegionProps{config.k0_unpropped_m2, config.alpha_unpropped_painv, config.phi_unpropped};
    m.fluid = FluidProps{config.mu_pas, config.ct_painv, config.rho_ref_kgm3};
    m.geomech = GeomechParams{config.biot_b, config.poisson_nu, config.youngs_e_pa};
    m.p_init = config.p_init_pa;
    m.p_floor = config.p_floor_pa;
    m.p_ceiling = config.p_ceiling_pa;
    m.coupling_tol = config.coupling_tol_pa;
    m.coupling_max_iter = config.coupling_max_iter;
    m.substeps_per_control = config.substeps_per_control;
    m.lin_solver_tol = config.lin_solver_tol;
    m.config_fingerprint = config.fingerprint();

    const int frac_col = config.frac_col >= 0 ? config.frac_col : config.nx / 2;
    if (frac_col >= config.nx)
        throw ConfigError("model config: key 'frac_col' outside grid (nx = " +
                          std::to_string(config.nx) + ")");

    const int n = m.grid.cell_count();
    m.region_of_cell.resize(n);
    for (int ix = 0; ix < config.nx; ++ix) {
        Region r = Region::Matrix;
        const int dist = std::abs(ix - frac_col);
        if (dist == 0)
            r = Region::ProppedFracture;
        else if (dist <= config.halo_width)
            r = Region::UnproppedFracture;
        for (int iy = 0; iy < config.ny; ++iy) m.region_of_cell[m.grid.index(ix, iy)] = r;
    }

    const int well_ix = config.well_ix >= 0 ? config.well_ix : frac_col;
    const int well_iy = config.well_iy >= 0 ? config.well_iy : config.ny / 2;
    if (well_ix >= config.nx || well_iy >= config.ny)
        throw ConfigError("model config: key 'well_ix'/'well_iy' outside grid");
    const int well_cell = m.grid.index(well_ix, well_iy);
    if (m.region_of_cell[well_cell] != Region::ProppedFracture)
        throw ConfigError("model config: key 'well_ix' places the well in a " +
                          std::string(region_name(m.region_of_cell[well_cell])) +
                          " cell; it must lie in the propped fracture");
    m.well = WellSpec{well_cell, config.well_index_m, config.rate_clamp};

    m.k0_cell.resize(n);
    m.alpha_cell.resize(n);
    m.phi_cell.resize(n);
    for (int i = 0; i < n; ++i) {
        const RegionProps& p = m.props(m.region_of_cell[i]);
        m.k0_cell[i] = p.k0;
        m.alpha_cell[i] = p.alpha;
        m.phi_cell[i] = p.phi;
    }
    return m;
}

double update_permeability(double k0, double alpha, double dsigma_eff) {
    if (alpha == 0.0) return k0;
    return k0 * std::exp(-alpha * dsigma_eff);
}

std::vector<double> effective_stress_update(std::span<const double> pressure, double p_init,
                                            double eta) {
    std::vector<double> dsig(pressure.size());
    for (std::size_t i = 0; i < pressure.size(); ++i) dsig[i] = eta * (p_init - pressure[i]);
    return dsig;
}

std::pair<ReservoirState, double> step_flow(const ReservoirState& state, double dt_s, double bhp_pa,
                                            std::span<const double> k_field,
                                            const ReservoirModel& model) {
    if (!(dt_s > 0.0)) throw ArgumentError("step_flow: dt must be > 0");
    if (!(bhp_pa >= model.p_floor && bhp_pa <= model.p_ceiling))
        throw ArgumentError("step_flow: bhp outside [p_floor, p_ceiling]");
    const int n = model.grid.cell_count();
    if (static_cast<int>(k_field.size()) != n)
        throw ArgumentError("step_flow: k_field size does not match grid");
    for (double k : k_field)
        if (!(k > 0.0)) throw ArgumentError("step_flow: k_field must be positive");

    FlowSolve fs = solve_pressure(model, state.pressure, k_field, dt_s, bhp_pa, true);
    if (fs.well_rate < 0.0 && model.well.rate_clamp_nonnegative) {
        // Drawdown reversed: producing well shut in rather than allowed to inject.
        fs = solve_pressure(model, state.pressure, k_field, dt_s, bhp_pa, false);
        fs.well_rate = 0.0;
    }

    const double production = fs.well_rate * dt_s;
    ReservoirState next;
    next.pressure = std::move(fs.pressure);
    next.dsigma_eff = state.dsigma_eff;
    next.k_current.assign(k_field.begin(), k_field.end());
    next.time_s = state.time_s + dt_s;
    next.cumulative_oil_m3 = state.cumulative_oil_m3 + production;
    return {std::move(next), production};
}

CoupledStepResult coupled_step(const ReservoirState& state, double dt_s, double bhp_pa,
                               const ReservoirModel& model, double tol_pa, int max_iter) {
    if (!(tol_pa > 0.0)) throw ArgumentError("coupled_step: tol must be > 0");
    if (max_iter < 1) throw ArgumentError("coupled_step: max_iter must be >= 1");

    const int n = model.grid.cell_count();
    const double eta = model.geomech.eta();
    std::vector<double> k_iter = state.k_current;
    std::vector<double> p_prev;
    double last_change = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= max_iter; ++it) {
        auto [trial, production] = step_flow(state, dt_s, bhp_pa, k_iter, model);
        std::vector<double> dsig = effective_stress_update(trial.pressure, model.p_init, eta);
        for (int i = 0; i < n; ++i)
            k_iter[i] = update_permeability(model.k0_cell[i], model.alpha_cell[i], dsig[i]);

        if (!p_prev.empty()) {
            double change = 0.0;
            for (int i = 0; i < n; ++i)
                change = std::max(change, std::abs(trial.pressure[i] - p_prev[i]));
            last_change = change;
            if (change < tol_pa) {
                trial.dsigma_eff = std::move(dsig);
                trial.k_current = k_iter;
                return CoupledStepResult{std::move(trial), production, it, change};
            }
        }
        p_prev = trial.pressure;
    }
    throw CouplingError("coupled_step: no convergence within " + std::to_string(max_iter) +
                            " iterations (last pressure change " + fmt_g17(last_change) + " Pa)",
                        last_change);
}

SimulationResult simulate(const ReservoirModel& model, const ControlTrajectory& trajectory,
                          int substeps_per_control) {
    trajectory.validate_shape();
    if (substeps_per_control < 1) throw ArgumentError("simulate: substeps_per_control must be >= 1");
    for (double bhp : trajectory.values)
        if (!(bhp >= model.p_floor && bhp <= model.p_ceiling))
            throw ArgumentError("simulate: trajectory BHP outside [p_floor, p_ceiling]");

    const std::size_t steps = trajectory.size();
    SimulationResult result;
    result.cumulative_per_control_step.reserve(steps);
    result.rate_series.reserve(steps * substeps_per_control);
    result.coupling_iterations.reserve(steps * substeps_per_control);

    ReservoirState state = model.initial_state();
    double t_days = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double end_days = trajectory.step_end_times[t];
        const double dt_s = (end_days - t_days) * 86400.0 / substeps_per_control;
        for (int s = 0; s < substeps_per_control; ++s) {
            try {
                CoupledStepResult sub = coupled_step(state, dt_s, trajectory.values[t], model,
                                                     model.coupling_tol, model.coupling_max_iter);
                state = std::move(sub.state);
                result.rate_series.push_back(sub.production_m3 / dt_s);
                result.coupling_iterations.push_back(sub.iterations);
            } catch (const CouplingError& e) {
                throw CouplingError("simulate: control step " + std::to_string(t + 1) + ": " +
                                        e.what(),
                                    e.last_change_pa());
            } catch (const NumericError& e) {
                throw NumericError("simulate: control step " + std::to_string(t + 1) + ": " +
                                       e.what(),
                                   e.residual());
            }
        }
        result.cumulative_per_control_step.push_back(state.cumulative_oil_m3);
        t_days = end_days;
    }

    // Global closure: produced volume vs compressibility-weighted depletion.
    // Volumes below solver noise (relative to the model's compressible
    // capacity) count as zero rather than producing a 0/0 ratio.
    const double V = model.grid.cell_volume();
    double depletion = 0.0, capacity = 0.0;
    for (int i = 0; i < model.grid.cell_count(); ++i) {
        depletion += model.phi_cell[i] * model.fluid.ct * V * (model.p_init - state.pressure[i]);
        capacity += model.phi_cell[i] * model.fluid.ct * V * model.p_init;
    }
    const double produced = state.cumulative_oil_m3;
    const double scale = std::max(std::abs(produced), std::abs(depletion));
    result.mass_balance_error =
        scale > 1e-9 * capacity ? std::abs(produced - depletion) / scale : 0.0;

    result.final_state = std::move(state);
    return result;
}

void write_simulation_csv(const std::string& path, const SimulationResult& result,
                          const ControlTrajectory& trajectory) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "step,time_days,bhp_pa,step_oil_m3,cum_oil_m3,coupling_iters\n";
    const std::size_t steps = result.cumulative_per_control_step.size();
    const std::size_t substeps = steps ? result.coupling_iterations.size() / steps : 0;
    double prev_cum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double cum = result.cumulative_per_control_step[t];
        int iters = 0;
        for (std::size_t s = 0; s < substeps; ++s)
            iters += result.coupling_iterations[t * substeps + s];
        out << (t + 1) << ',' << fmt_g17(trajectory.step_end_times[t]) << ','
            << fmt_g17(trajectory.values[t]) << ',' << fmt_g17(cum - prev_cum) << ',' << fmt_g17(cum)
            << ',' << iters << '\n';
        prev_cum = cum;
    }
}

std::vector<StressScenario> default_scenarios() {
    return {{"flow-only", 0.0}, {"low", 1e-8}, {"medium", 5e-8}, {"high", 1e-7}};
}

ModelConfig apply_scenario(ModelConfig config, double alpha_base) {
    config.alpha_matrix_painv = alpha_base;
    config.alpha_propped_painv = 2.0 * alpha_base;
    config.alpha_unpropped_painv = 4.0 * alpha_base;
    return config;
}

void BaselineTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open for writing: " + path);
    out << "scenario";
    for (std::size_t t = 0; t < time_days.size(); ++t) out << ",cum_m3_step_" << (t + 1);
    out << '\n';
    for (std::size_t r = 0; r < scenario.size(); ++r) {
        out << scenario[r];
        for (double c : cumulative[r]) out << ',' << fmt_g17(c);
        out << '\n';
    }
}

BaselineTable baseline_study(const std::vector<std::pair<std::string, ModelConfig>>& presets,
                             const ControlTrajectory& trajectory) {
    BaselineTable table;
    table.time_days = trajectory.step_end_times;
    for (const auto& [name, cfg] : presets) {
        const ReservoirModel model = build_model(cfg);
        const SimulationResult res = simulate(model, trajectory, cfg.substeps_per_control);
        table.scenario.push_back(name);
        table.cumulative.push_back(res.cumulative_per_control_step);
    }
    return table;
}

} // namespace resopt
