#pragma once

// Named experiments driven by a flat config; each writes CSV/JSON artifacts and a run manifest.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatband/approx_models.hpp"
#include "flatband/errors.hpp"
#include "flatband/gaussian.hpp"
#include "flatband/interactions.hpp"
#include "flatband/io.hpp"
#include "flatband/kernel.hpp"
#include "flatband/lindblad.hpp"
#include "flatband/wannier.hpp"

namespace flatband {

inline constexpr const char* library_version = "0.1.0";

struct ExperimentKey {
    std::string name;
    std::string fallback;  ///< empty: required
    std::string help;

    bool required() const { return fallback.empty(); }
};

struct ExperimentInfo {
    std::string name;
    std::string reproduces;   ///< figure or table of the reference results
    std::string description;
    std::vector<ExperimentKey> keys;

    std::vector<std::string> required_keys() const {
        std::vector<std::string> out;
        for (const auto& k : keys)
            if (k.required()) out.push_back(k.name);
        return out;
    }
};

struct RunResult {
    std::string experiment;
    std::filesystem::path output_dir;
    std::vector<std::string> files;        ///< relative to output_dir, manifest last
    Config resolved;                       ///< every parameter, defaults filled in
    nlohmann::ordered_json diagnostics;
};

namespace detail {

using json = nlohmann::ordered_json;

/// Output sink for one run: collects file names and diagnostics.
struct RunContext {
    const ExperimentInfo& info;
    Config params;
    std::filesystem::path dir;
    std::vector<std::string> files;
    json diagnostics = json::object();

    void write(const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        files.push_back(name);
    }

    void write_csv(const std::string& name, CsvTable csv) {
        csv.comment("experiment", info.name);
        write(name, csv.str());
    }

    LogConvention convention() const { return log_convention_from_string(params.text("convention")); }
};

inline std::vector<ExperimentKey> kernel_keys() {
    return {{"gamma_A", "1", "A-sublattice loss rate"}, {"cutoff", "10", "kernel range"}};
}

inline std::vector<ExperimentKey> gaussian_keys() {
    auto k = kernel_keys();
    k.push_back({"M", "30", "half width of the Wannier chain"});
    k.push_back({"corr_range", "full", "correlation band kept in the Lyapunov solve, or full"});
    k.push_back({"detuning", "0", "drive detuning"});
    return k;
}

inline std::vector<ExperimentKey> drive_keys() {
    return {{"drive", "coherent", "coherent or incoherent"},
            {"omega_W", "1", "coherent drive amplitude on the central Wannier state"},
            {"P", "0.01", "incoherent pump rate on one lattice site"},
            {"pump_sublattice", "B", "pumped sublattice"},
            {"pump_cell", "0", "pumped unit cell"},
            {"r_max", "12", "Wannier table radius"}};
}

inline std::vector<ExperimentKey> interacting_keys() {
    auto k = std::vector<ExperimentKey>{{"gamma_A", "1", "A-sublattice loss rate"},
                                        {"cutoff", "3", "kernel range"},
                                        {"n_sites", "7", "odd chain length"},
                                        {"omega_W", "1", "coherent drive on the central Wannier state"},
                                        {"U2_scale", "1", "multiplies the derived U2"},
                                        {"U3_scale", "1", "multiplies the derived U3"},
                                        {"U0", "0", "on-site repulsion (inert under the hard-core truncation)"},
                                        {"points", "64", "quadrature nodes per axis for the coupling ratios"}};
    return k;
}

template <class... Lists>
std::vector<ExperimentKey> concat(std::vector<ExperimentKey> first, const Lists&... rest) {
    (first.insert(first.end(), rest.begin(), rest.end()), ...);
    return first;
}

inline DissipationKernel kernel_from(const Config& p, double kappa) {
    return sawtooth_kernel(p.number("gamma_A"), kappa, p.integer("cutoff"));
}

inline GaussianOptions gaussian_options(const RunContext& ctx) {
    GaussianOptions o;
    o.half_width = ctx.params.integer("M");
    const std::string cr = ctx.params.text("corr_range");
    if (cr != "full") o.corr_range = ctx.params.integer("corr_range");
    o.convention = ctx.convention();
    return o;
}

struct DriveSetup {
    DriveSpec drive;
    std::optional<WannierTable> table;
};

inline DriveSetup drive_from(const Config& p, const std::string& kind) {
    DriveSetup d;
    d.drive.detuning = p.number_or("detuning", 0.0);
    if (kind == "coherent") {
        d.drive.coherent[0] = cplx(p.number("omega_W"), 0.0);
    } else if (kind == "incoherent") {
        d.drive.incoherent.push_back({sublattice_from_string(p.text("pump_sublattice")), p.integer("pump_cell"), p.number("P")});
        d.table = sawtooth_wannier_table(p.integer("r_max"));
    } else {
        throw ConfigInvalid("drive must be coherent or incoherent, got '" + kind + "'");
    }
    return d;
}

inline json report_json(const SteadyStateReport& r) {
    json j;
    j["condition_number"] = r.condition_number;
    j["first_residual"] = r.first_residual;
    j["second_residual"] = r.second_residual;
    j["spectral_abscissa"] = r.spectral_abscissa;
    j["narrow_window"] = r.narrow_window;
    j["hermiticity_error"] = r.validity.hermiticity_error;
    j["min_eigenvalue"] = r.validity.min_eigenvalue;
    j["cauchy_schwarz_excess"] = r.validity.cauchy_schwarz_excess;
    json xi = json::object();
    for (const auto& [i, v] : r.xi) xi[std::to_string(i)] = std::isfinite(v) ? json(v) : json("inf");
    j["xi"] = xi;
    return j;
}

inline void density_profiles(RunContext& ctx, const std::string& kind) {
    const Config& p = ctx.params;
    const DriveSetup setup = drive_from(p, kind);
    CsvTable csv({"kappa", "site", "N", "N_over_N0"});
    csv.comment("drive", kind);
    json reports = json::object();
    for (double kappa : p.numbers("kappa")) {
        const auto rep = gaussian_steady_state(kernel_from(p, kappa), setup.drive, gaussian_options(ctx),
                                               setup.table ? &*setup.table : nullptr);
        const Geometry& geo = rep.state.geometry;
        for (int i = 0; i < geo.size(); ++i) csv.add_row({kappa, (long long)geo.site(i), rep.densities(i), rep.normalized(i)});
        reports[format_double(kappa)] = report_json(rep);
    }
    ctx.write_csv("density_profile.csv", std::move(csv));
    json report;
    report["convention"] = to_string(ctx.convention());
    report["kappa"] = reports;
    ctx.write("density_report.json", report.dump(2) + "\n");
    ctx.diagnostics["reports"] = reports;
}

inline TruncatedCouplings coupling_ratios(int points) {
    InteractionQuadrature q;
    q.points = points;
    TruncatedCouplings c;
    c.U0 = u_eff(Sublattice::B, 0, 0, 0, q);
    c.U1 = 4.0 * u_eff(Sublattice::B, 1, 1, 0, q);
    c.U2 = 4.0 * u_eff(Sublattice::B, 2, 2, 0, q);
    c.U3 = 2.0 * u_eff(Sublattice::B, -1, 0, 1, q);
    return c;
}

/// Absolute couplings for a given U1 with the other terms fixed by the B-sublattice ratios.
inline TruncatedCouplings couplings_for(const TruncatedCouplings& ratios, double U1, const Config& p) {
    const double UB = U1 / ratios.U1;
    TruncatedCouplings c = ratios.scaled(UB);
    c.U0 = p.number("U0");
    c.U1 = U1;
    c.U2 *= p.number("U2_scale");
    c.U3 *= p.number("U3_scale");
    return c;
}

inline TruncatedLindbladProblem interacting_problem(const Config& p, double kappa, const TruncatedCouplings& c) {
    DriveSpec drive;
    drive.coherent[0] = cplx(p.number("omega_W"), 0.0);
    return {kernel_from(p, kappa), p.integer("n_sites"), c, drive, std::nullopt};
}

inline json dense_json(const DenseSteadyState& s) {
    json j;
    j["method"] = s.method;
    j["iterations"] = s.iterations;
    j["residual"] = s.residual;
    j["trace_error"] = s.trace_error;
    j["min_eigenvalue"] = s.min_eigenvalue;
    j["hermiticity_error"] = s.hermiticity_error;
    return j;
}

// ---- experiments ----

inline void run_kernel_table(RunContext& ctx) {
    const Config& p = ctx.params;
    const int lmax = p.integer("l_max");
    if (lmax < 0) throw ConfigInvalid("l_max must be >= 0");
    CsvTable csv({"kappa", "l", "f_l", "f_numeric", "gamma_l_over_gamma_A"});
    double max_dev = 0.0;
    for (double kappa : p.numbers("kappa")) {
        const auto k = kernel_from(p, kappa);
        for (int l = 0; l <= lmax; ++l) {
            const double fn = f_numeric(l);
            max_dev = std::max(max_dev, std::abs(fn - f_sawtooth(l)));
            csv.add_row({kappa, (long long)l, f_sawtooth(l), fn, k.relative_rate(l)});
        }
        ctx.write_csv("kernel_kappa_" + format_double(kappa) + ".csv", kernel_csv(k));
    }
    ctx.write_csv("kernel_table.csv", std::move(csv));
    ctx.diagnostics["max_closed_form_deviation"] = max_dev;
}

inline void run_wannier_table(RunContext& ctx) {
    const Config& p = ctx.params;
    const std::string lattice = p.text("lattice");
    const int r_max = p.integer("r_max");
    std::optional<WannierTable> table;
    if (lattice == "sawtooth") table = sawtooth_wannier_table(r_max);
    else if (lattice == "lieb") table = lieb_wannier_table(p.number("a"), r_max);
    else throw ConfigInvalid("lattice must be sawtooth or lieb, got '" + lattice + "'");
    ctx.write_csv("wannier.csv", wannier_csv(*table));
    const Eigen::MatrixXd d = orthogonality_defect(*table);
    ctx.diagnostics["max_orthogonality_defect"] = d.cwiseAbs().maxCoeff();
}

inline void run_site_basis_profile(RunContext& ctx) {
    const Config& p = ctx.params;
    const std::string kind = p.text("drive");
    DriveSetup setup = drive_from(p, kind);
    const WannierTable table = setup.table ? *setup.table : sawtooth_wannier_table(p.integer("r_max"));
    CsvTable csv({"kappa", "sublattice", "cell", "N"});
    csv.comment("drive", kind);
    for (double kappa : p.numbers("kappa")) {
        const auto rep = gaussian_steady_state(kernel_from(p, kappa), setup.drive, gaussian_options(ctx), &table);
        const SiteDensities sd = site_basis_densities(rep.state, table);
        for (const auto& [s, vals] : sd.values)
            for (std::size_t i = 0; i < vals.size(); ++i)
                csv.add_row({kappa, std::string(to_string(s)), (long long)(sd.first_cell + static_cast<int>(i)), vals[i]});
        ctx.diagnostics["kappa"][format_double(kappa)] = report_json(rep);
    }
    ctx.write_csv("site_basis_profile.csv", std::move(csv));
}

inline void run_g1_map(RunContext& ctx) {
    const Config& p = ctx.params;
    const std::string kind = p.text("drive");
    const DriveSetup setup = drive_from(p, kind);
    const double kappa = p.number("kappa");
    const auto rep = gaussian_steady_state(kernel_from(p, kappa), setup.drive, gaussian_options(ctx),
                                           setup.table ? &*setup.table : nullptr);
    const G1Map g = g1(rep.state);
    const int range = p.integer("range");
    CsvTable csv({"j", "l", "re_g1", "im_g1"});
    csv.comment("drive", kind);
    csv.comment("kappa", kappa);
    for (int j = -range; j <= range; ++j)
        for (int l = -range; l <= range; ++l)
            if (g.contains(j) && g.contains(l)) csv.add_row({(long long)j, (long long)l, g(j, l).real(), g(j, l).imag()});
    ctx.write_csv("g1_map.csv", std::move(csv));
    ctx.diagnostics["report"] = report_json(rep);
}

inline void run_xi_sweep(RunContext& ctx) {
    const Config& p = ctx.params;
    const int site = p.integer("site");
    const cplx omega(p.number("omega_W"), 0.0);
    const LogConvention conv = ctx.convention();
    DriveSpec drive;
    drive.coherent[0] = omega;
    drive.detuning = p.number("detuning");
    CsvTable csv({"kappa", "xi_exact", "xi_effective", "xi_direct", "diffusion_shape"});
    csv.comment("site", std::to_string(site));
    csv.comment("convention", to_string(conv));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    json failures = json::array();
    auto guarded = [&](const char* what, double kappa, auto&& f) {
        try {
            return f();
        } catch (const Error& e) {
            failures.push_back({{"kappa", kappa}, {"model", what}, {"error", e.what()}});
            return nan;
        }
    };
    for (double kappa : p.numbers("kappa")) {
        const auto k = kernel_from(p, kappa);
        const auto rep = gaussian_steady_state(k, drive, gaussian_options(ctx));
        const double exact = decay_length(rep.state, site, conv);
        const double eff = guarded("effective_drive", kappa, [&] { return effective_drive_model(site, k, omega, conv).xi; });
        const double direct = guarded("direct", kappa, [&] { return direct_model(site, k, omega, conv).xi; });
        const double diff = guarded("diffusion", kappa, [&] { return diffusion_xi_shape(k).xi; });
        csv.add_row({kappa, exact, eff, direct, diff});
    }
    ctx.write_csv("xi_sweep.csv", std::move(csv));
    ctx.diagnostics["model_failures"] = failures;
}

inline void run_lieb_couplings(RunContext& ctx) {
    const Config& p = ctx.params;
    const int jmax = p.integer("j_max");
    const double kp = p.number("kappa_prime");
    CsvTable csv({"a", "j", "f_j", "c_overlap", "gamma_j_over_gamma_C"});
    double defect = 0.0;
    for (double a : p.numbers("a")) {
        const auto k = lieb_kernel(p.number("gamma_C"), kp, a, std::max(jmax, 1));
        for (int j = 0; j <= jmax; ++j) {
            const double f = lieb_f(j, a), c = lieb_c_overlap(j, a);
            defect = std::max(defect, std::abs(f + c - (j == 0 ? 1.0 : 0.0)));
            csv.add_row({a, (long long)j, f, c, k.relative_rate(j)});
        }
    }
    csv.comment("kappa_prime", kp);
    ctx.write_csv("lieb_couplings.csv", std::move(csv));
    ctx.diagnostics["max_sum_rule_defect"] = defect;
}

inline void run_interaction_table(RunContext& ctx) {
    const Config& p = ctx.params;
    InteractionQuadrature q;
    q.points = p.integer("points");
    q.tolerance = p.number("tolerance");
    q.constraint = momentum_constraint_from_string(p.text("constraint"));
    const auto table = build_interaction_table(p.integer("bound"), {Sublattice::A, Sublattice::B}, q);
    CsvTable csv({"sublattice", "j", "l", "m", "value"});
    csv.comment("points", std::to_string(q.points));
    csv.comment("constraint", to_string(q.constraint));
    for (const auto& [key, v] : table.entries())
        csv.add_row({std::string(to_string(key.first)), (long long)key.second[0], (long long)key.second[1],
                     (long long)key.second[2], v});
    ctx.write_csv("interaction_table.csv", std::move(csv));
    const TruncatedCouplings c = truncated_couplings(table);
    json cj = {{"U0", c.U0}, {"U1", c.U1}, {"U2", c.U2}, {"U3", c.U3}, {"unit", "U_B"}};
    ctx.write("couplings.json", cj.dump(2) + "\n");
    ctx.diagnostics["max_refinement_delta"] = table.max_refinement_delta();
}

inline void run_truncation_threshold_map(RunContext& ctx) {
    const Config& p = ctx.params;
    const double gamma0 = p.number("gamma0");
    const int cutoff = p.integer("fock_cutoff");
    CsvTable csv({"U0", "omega", "g2_moment", "occupation", "fock_cutoff"});
    csv.comment("gamma0", gamma0);
    for (double om : p.numbers("omega"))
        for (double u : p.numbers("U0")) {
            const ThresholdResult r = truncation_threshold(u, gamma0, om, cutoff);
            csv.add_row({u, om, r.value, r.occupation, (long long)r.cutoff});
        }
    ctx.write_csv("truncation_threshold.csv", std::move(csv));
}

inline void run_interacting_profile(RunContext& ctx) {
    const Config& p = ctx.params;
    const double kappa = p.number("kappa");
    const TruncatedCouplings c = couplings_for(coupling_ratios(p.integer("points")), p.number("U1"), p);
    const auto s = steady_state(interacting_problem(p, kappa, c));
    CsvTable csv({"site", "N", "N_over_N0"});
    csv.comment("kappa", kappa);
    csv.comment("U1", c.U1);
    csv.comment("U2", c.U2);
    csv.comment("U3", c.U3);
    const double n0 = s.density(0);
    for (int i = 0; i < s.densities.size(); ++i) {
        const double n = s.densities(i);
        csv.add_row({(long long)(i - s.center), n, n0 > 0.0 ? n / n0 : 0.0});
    }
    ctx.write_csv("interacting_profile.csv", std::move(csv));
    json rep = dense_json(s);
    rep["U1"] = c.U1;
    rep["U2"] = c.U2;
    rep["U3"] = c.U3;
    rep["f"] = nonlocal_fraction(s);
    ctx.write("interacting_report.json", rep.dump(2) + "\n");
    ctx.diagnostics["solver"] = rep;
}

inline void run_f_vs_kappa_U1(RunContext& ctx) {
    const Config& p = ctx.params;
    const TruncatedCouplings ratios = coupling_ratios(p.integer("points"));
    CsvTable csv({"kappa", "U1", "U2", "U3", "f", "residual"});
    json solves = json::array();
    for (double kappa : p.numbers("kappa"))
        for (double u1 : p.numbers("U1")) {
            const TruncatedCouplings c = couplings_for(ratios, u1, p);
            const auto s = steady_state(interacting_problem(p, kappa, c));
            csv.add_row({kappa, c.U1, c.U2, c.U3, nonlocal_fraction(s), s.residual});
            solves.push_back(dense_json(s));
        }
    ctx.write_csv("f_vs_kappa_U1.csv", std::move(csv));
    ctx.diagnostics["solves"] = solves;
}

struct Registered {
    ExperimentInfo info;
    std::function<void(RunContext&)> run;
};

inline const std::vector<Registered>& registry() {
    static const std::vector<Registered> entries = [] {
        const std::vector<ExperimentKey> kappa_list{{"kappa", "", "loss asymmetry gamma_B/gamma_A, comma list"}};
        std::vector<Registered> r{
            {{"density_profile_coherent", "Wannier density profiles under coherent drive",
              "Gaussian steady-state N_i for a coherently driven central Wannier state",
              concat(kappa_list, gaussian_keys(), std::vector<ExperimentKey>{{"omega_W", "1", "drive amplitude"}})},
             [](RunContext& c) { density_profiles(c, "coherent"); }},
            {{"density_profile_incoherent", "Wannier density profiles under incoherent site pumping",
              "Gaussian steady-state N_i for a single incoherently pumped lattice site",
              concat(kappa_list, gaussian_keys(),
                     std::vector<ExperimentKey>{{"P", "", "pump rate"},
                                                {"pump_sublattice", "B", "pumped sublattice"},
                                                {"pump_cell", "0", "pumped unit cell"},
                                                {"r_max", "12", "Wannier table radius"}})},
             [](RunContext& c) { density_profiles(c, "incoherent"); }},
            {{"f_vs_kappa_U1", "non-local fraction versus kappa and cross-Kerr strength",
              "hard-core chain sweep of f over kappa and U1",
              concat(std::vector<ExperimentKey>{{"kappa", "0.8,0.5,0.2", "loss asymmetry list"},
                                                {"U1", "10,30,100", "cross-Kerr strengths in units of gamma_A"}},
                     interacting_keys())},
             run_f_vs_kappa_U1},
            {{"g1_map", "first-order coherence map", "g1(j, l) of the Gaussian steady state",
              concat(std::vector<ExperimentKey>{{"kappa", "", "loss asymmetry"}, {"range", "8", "largest |j|, |l|"}},
                     gaussian_keys(), drive_keys())},
             run_g1_map},
            {{"interacting_profile", "interacting density profile on the hard-core chain",
              "dense Lindblad steady state with cross-Kerr and density-assisted hopping",
              concat(std::vector<ExperimentKey>{{"kappa", "", "loss asymmetry"},
                                                {"U1", "", "cross-Kerr strength in units of gamma_A"}},
                     interacting_keys())},
             run_interacting_profile},
            {{"interaction_table", "effective interaction coefficient table",
              "U_eff(j', l', m') on both sublattices and the truncated couplings",
              {{"points", "64", "quadrature nodes per axis"},
               {"bound", "2", "largest index magnitude"},
               {"tolerance", "1e-6", "allowed change when the grid is doubled"},
               {"constraint", "top_hat", "momentum constraint: top_hat or wrapped"}}},
             run_interaction_table},
            {{"kernel_table", "geometric factors and kernel rates table",
              "f_l (closed form and quadrature) and gamma_l/gamma_A",
              concat(kappa_list, kernel_keys(), std::vector<ExperimentKey>{{"l_max", "5", "largest l listed"}})},
             run_kernel_table},
            {{"lieb_couplings", "Lieb-lattice kernel couplings versus a",
              "f_j(a), the C-sublattice overlap and gamma_j/gamma_C",
              {{"a", "0.5,1,2,4", "Lieb parameter list"},
               {"kappa_prime", "0", "loss asymmetry"},
               {"gamma_C", "1", "C-sublattice loss rate"},
               {"j_max", "5", "largest j listed"}}},
             run_lieb_couplings},
            {{"site_basis_profile", "site-basis density profile",
              "Gaussian steady state projected onto the lattice sites",
              concat(kappa_list, gaussian_keys(), drive_keys())},
             run_site_basis_profile},
            {{"truncation_threshold_map", "hard-core truncation validity map",
              "<a^dag a^dag a a> of a driven Kerr mode over U0 and drive strength",
              {{"U0", "0.5,1,2,4", "on-site interaction list"},
               {"omega", "1", "drive amplitude list"},
               {"gamma0", "1", "on-site loss rate"},
               {"fock_cutoff", "8", "initial Fock cutoff"}}},
             run_truncation_threshold_map},
            {{"wannier_table", "Wannier coefficient table", "Wannier coefficients on both flat-band sublattices",
              {{"lattice", "sawtooth", "sawtooth or lieb"}, {"r_max", "12", "table radius"}, {"a", "2", "Lieb parameter"}}},
             run_wannier_table},
            {{"xi_sweep", "decay length versus kappa",
              "exact (Gaussian), effective-drive, direct and diffusion decay lengths",
              concat(std::vector<ExperimentKey>{{"kappa", "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95", "loss asymmetry list"},
                                                {"site", "4", "site j of xi_j"},
                                                {"omega_W", "1", "drive amplitude"}},
                     gaussian_keys())},
             run_xi_sweep},
        };
        std::sort(r.begin(), r.end(), [](const Registered& a, const Registered& b) { return a.info.name < b.info.name; });
        return r;
    }();
    return entries;
}

inline const Registered& find_experiment(const std::string& name) {
    for (const auto& e : registry())
        if (e.info.name == name) return e;
    throw ConfigInvalid("unknown experiment '" + name + "'");
}

} // namespace detail

/// Alphabetized experiment metadata.
inline std::vector<ExperimentInfo> list_experiments() {
    std::vector<ExperimentInfo> out;
    for (const auto& e : detail::registry()) out.push_back(e.info);
    return out;
}

inline std::string format_listing() {
    std::string out;
    for (const auto& info : list_experiments()) {
        out += info.name + "\n  reproduces: " + info.reproduces + "\n  " + info.description + "\n  required:";
        const auto req = info.required_keys();
        if (req.empty()) out += " (none)";
        for (const auto& k : req) out += " " + k;
        out += "\n  optional:";
        for (const auto& k : info.keys)
            if (!k.required()) out += " " + k.name + "=" + k.fallback;
        out += "\n";
    }
    return out;
}

/// Fills defaults and validates keys. `experiment`, `output_dir` and `convention` are common to all.
inline Config resolve_config(const Config& raw) {
    if (!raw.has("experiment")) throw ConfigInvalid("missing required key 'experiment'");
    const auto& entry = detail::find_experiment(raw.text("experiment"));
    std::set<std::string> allowed{"experiment", "output_dir", "convention"};
    Config out;
    out.set("experiment", entry.info.name);
    out.set("convention", raw.text_or("convention", "natural"));
    log_convention_from_string(out.text("convention"));
    if (raw.has("output_dir")) out.set("output_dir", raw.text("output_dir"));
    for (const auto& k : entry.info.keys) {
        allowed.insert(k.name);
        if (raw.has(k.name)) {
            if (raw.text(k.name).empty()) throw ConfigInvalid("key '" + k.name + "' has an empty value");
            out.set(k.name, raw.text(k.name));
        } else if (k.required()) {
            throw ConfigInvalid("missing required key '" + k.name + "' for experiment " + entry.info.name);
        } else {
            out.set(k.name, k.fallback);
        }
    }
    raw.reject_unknown(allowed);
    return out;
}

/// Runs one experiment; writes its artifacts and manifest.json into the output directory
/// (`output_dir` override, else the config value, else "out/<experiment>").
inline RunResult run_experiment(const Config& raw, const std::optional<std::filesystem::path>& output_dir = std::nullopt) {
    Config params = resolve_config(raw);
    const auto& entry = detail::find_experiment(params.text("experiment"));
    const std::filesystem::path dir =
        output_dir ? *output_dir : std::filesystem::path(params.text_or("output_dir", "out/" + entry.info.name));
    params.set("output_dir", dir.string());

    detail::RunContext ctx{entry.info, params, dir, {}};
    try {
        entry.run(ctx);
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw ExperimentFailed(entry.info.name, e);
    }

    detail::json manifest;
    manifest["experiment"] = entry.info.name;
    manifest["reproduces"] = entry.info.reproduces;
    manifest["library_version"] = library_version;
    manifest["parameters"] = params.values();
    manifest["outputs"] = ctx.files;
    manifest["diagnostics"] = ctx.diagnostics;
    ctx.write("manifest.json", manifest.dump(2) + "\n");
    return {entry.info.name, dir, ctx.files, params, ctx.diagnostics};
}

/// Config stored in a manifest written by run_experiment.
inline Config config_from_manifest(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.contains("parameters") || !j["parameters"].is_object()) throw ConfigInvalid("manifest has no parameters object");
    std::map<std::string, std::string> values;
    for (const auto& [k, v] : j["parameters"].items()) {
        if (!v.is_string()) throw ConfigInvalid("manifest parameter '" + k + "' is not a string");
        values[k] = v.get<std::string>();
    }
    return Config(std::move(values));
}

/// Reads a `key = value` config, or a manifest.json from an earlier run.
inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return config_from_manifest(text);
    return Config::parse(text);
}

} // namespace flatband
