// Acceptance criteria runner. Prints one PASS/FAIL line per criterion.
//
//   acceptance                      run all, exit 1 if any criterion fails
//   acceptance --criterion N        run one
//   acceptance --criterion N --expect-fail
//                                   exit 0 only if criterion N is measured and fails

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "flatband/flatband.hpp"

using namespace flatband;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_seconds;
    std::function<Outcome()> run;
};

// Validity records shared with criterion 14.
struct ValidityLog {
    int dense = 0, gaussian = 0;
    double worst_trace = 0.0, worst_min_eig = 0.0, worst_residual = 0.0;
    double worst_herm = 0.0, worst_psd = 0.0, worst_cs = 0.0;

    void add(const DenseSteadyState& s) {
        ++dense;
        worst_trace = std::max(worst_trace, s.trace_error);
        worst_min_eig = std::min(worst_min_eig, s.min_eigenvalue);
        worst_residual = std::max(worst_residual, s.residual);
    }
    void add(const SteadyStateReport& r) {
        ++gaussian;
        worst_herm = std::max(worst_herm, r.validity.hermiticity_error);
        worst_psd = std::min(worst_psd, r.validity.min_eigenvalue);
        worst_cs = std::max(worst_cs, r.validity.cauchy_schwarz_excess);
    }
};

ValidityLog validity;

std::string fmt(double x, int digits = 4) {
    std::ostringstream ss;
    ss.precision(digits);
    ss << x;
    return ss.str();
}

DriveSpec coherent(double omega) {
    DriveSpec d;
    d.coherent[0] = {omega, 0.0};
    return d;
}

DriveSpec pumped(double P) {
    DriveSpec d;
    d.incoherent.push_back({Sublattice::B, 0, P});
    return d;
}

SteadyStateReport gaussian(double kappa, const DriveSpec& d, int M = 30, int cutoff = 10,
                           const WannierTable* table = nullptr) {
    GaussianOptions o;
    o.half_width = M;
    auto r = gaussian_steady_state(sawtooth_kernel(1.0, kappa, cutoff), d, o, table);
    validity.add(r);
    return r;
}

DenseSteadyState dense(double kappa, const DriveSpec& d, TruncatedCouplings c = {},
                       std::optional<WannierTable> table = std::nullopt) {
    TruncatedLindbladProblem p{sawtooth_kernel(1.0, kappa, 3)};
    p.n_sites = 7;
    p.drive = d;
    p.couplings = c;
    p.table = std::move(table);
    auto s = steady_state(p);
    validity.add(s);
    return s;
}

// Max relative deviation of dense vs Gaussian densities over sites with N_i > 1e-8.
double cross_deviation(const DenseSteadyState& s, const SteadyStateReport& g) {
    double worst = 0.0;
    for (int i = -s.center; i <= s.center; ++i) {
        const double ng = g.state.density(i);
        if (ng > 1e-8) worst = std::max(worst, std::abs(s.density(i) / ng - 1.0));
    }
    return worst;
}

Outcome c01_kernel_table() {
    // l, f_l, gamma_l/gamma_A at kappa = 0.1, 0.5 as printed
    const double ref[6][3] = {{0.57735, 0.4803840, 0.7113240},       {-0.154701, 0.1392809, 0.0773505},
                              {0.0414519, -0.0373060, -0.0207259},   {-0.011107, 0.0099963, 0.0055535},
                              {0.00297611, -0.0026785, -0.0014881},  {-0.000797447, 0.0007177, 0.0003987}};
    // Printed precision of each f entry; kernel columns carry 7 decimals.
    const double f_half_ulp[6] = {5e-6, 5e-7, 5e-8, 5e-7, 5e-9, 5e-10};
    const auto k1 = sawtooth_kernel(1.0, 0.1), k5 = sawtooth_kernel(1.0, 0.5);
    int bad = 0;
    std::string worst;
    for (int l = 0; l <= 5; ++l) {
        const double got[3] = {f_sawtooth(l), k1.relative_rate(l), k5.relative_rate(l)};
        for (int c = 0; c < 3; ++c) {
            const double tol = c == 0 ? std::max(1e-6, f_half_ulp[l]) : 1e-6;
            const double d = std::abs(got[c] - ref[l][c]);
            if (d > tol) {
                ++bad;
                worst += " l=" + std::to_string(l) + " col=" + std::to_string(c) + " got " + fmt(got[c], 8) + " vs " +
                         fmt(ref[l][c], 8);
            }
        }
    }
    return {bad == 0, std::to_string(18 - bad) + "/18 entries within 1e-6" + (bad ? ";" + worst : "")};
}

Outcome c02_closed_form() {
    double worst = 0.0;
    for (int l = -10; l <= 10; ++l) worst = std::max(worst, std::abs(f_sawtooth(l) - f_numeric(l)));
    return {worst <= 1e-10, "max |closed - quadrature| = " + fmt(worst)};
}

Outcome c03_orthogonality() {
    const auto d = orthogonality_defect(sawtooth_wannier_table(12));
    const double worst = d.cwiseAbs().maxCoeff();
    return {worst <= 1e-8, "max defect |j-k|<=6 = " + fmt(worst)};
}

Outcome c04_lieb() {
    double eq = 0.0, id = 0.0;
    for (int j = 0; j <= 5; ++j) {
        eq = std::max(eq, std::abs(lieb_f(j, 2.0) - f_sawtooth(j)));
        id = std::max(id, std::abs(lieb_f(j, 2.0) + lieb_c_overlap(j, 2.0) - (j == 0 ? 1.0 : 0.0)));
    }
    return {eq <= 1e-8 && id <= 1e-8, "max |lieb_f - f| = " + fmt(eq) + ", sum rule defect = " + fmt(id)};
}

Outcome c05_direct() {
    double lo = 1e300, hi = -1e300;
    for (int i = 1; i <= 19; ++i) {
        const double xi = direct_model(4, sawtooth_kernel(1.0, 0.05 * i), {1.0, 0.0}).xi;
        lo = std::min(lo, xi);
        hi = std::max(hi, xi);
    }
    const bool ok = std::abs(lo - 0.3797) <= 0.005 && hi - lo <= 1e-12;
    return {ok, "xi = " + fmt(lo, 6) + ", spread over kappa = " + fmt(hi - lo)};
}

double xi4(double kappa) { return decay_length(gaussian(kappa, coherent(1.0)).state, 4); }

Outcome c06_exact_limit() {
    const double x95 = xi4(0.95);
    std::vector<double> xs;
    for (int i = 1; i <= 9; ++i) xs.push_back(xi4(0.1 * i));
    bool decreasing = true;
    for (std::size_t i = 1; i < xs.size(); ++i) decreasing = decreasing && xs[i] < xs[i - 1];
    const bool ratio = xs.front() > 2.0 * xs.back();
    const double rel = std::abs(x95 - 0.38) / 0.38;
    return {rel <= 0.10 && decreasing && ratio, "xi4(0.95) = " + fmt(x95) + " (" + fmt(100 * rel, 3) +
                                                    "% from 0.38), decreasing = " + (decreasing ? "yes" : "no") +
                                                    ", xi4(0.1)/xi4(0.9) = " + fmt(xs.front() / xs.back())};
}

Outcome c07_effective() {
    double worst = 0.0;
    for (int i = 4; i <= 9; ++i) {
        const double kappa = 0.1 * i;
        const double eff = effective_drive_model(4, sawtooth_kernel(1.0, kappa), {1.0, 0.0}).xi;
        worst = std::max(worst, std::abs(eff - xi4(kappa)) / xi4(kappa));
    }
    const double e05 = effective_drive_model(4, sawtooth_kernel(1.0, 0.05), {1.0, 0.0}).xi;
    const double x05 = xi4(0.05);
    return {worst <= 0.15 && e05 < x05, "max rel dev on [0.4, 0.9] = " + fmt(100 * worst, 3) + "%, kappa=0.05: " +
                                            fmt(e05) + " < " + fmt(x05)};
}

Outcome c08_coherent_g1() {
    const auto g = g1(gaussian(0.2, coherent(1.0)).state);
    double worst = 0.0;
    for (int j = -8; j <= 8; ++j)
        for (int l = -8; l <= 8; ++l) {
            const double expect = (std::abs(j - l) % 2) ? -1.0 : 1.0;
            worst = std::max(worst, std::abs(g(j, l) - cplx(expect, 0.0)));
        }
    return {worst <= 1e-6, "max |g1 - (-1)^|j-l|| = " + fmt(worst)};
}

Outcome c09_incoherent_g1() {
    const WannierTable table = sawtooth_wannier_table(12);
    const auto rep = gaussian(0.1, pumped(0.01), 30, 10, &table);
    const auto g = g1(rep.state);
    double around = 0.0, along = 0.0;
    for (int l = 1; l <= 6; ++l) around += std::abs(g(0, l)) + std::abs(g(0, -l));
    around /= 12.0;
    for (int j = 2; j <= 6; ++j) along += std::abs(g(j, j + 1));
    along /= 5.0;
    const auto small = gaussian(0.1, pumped(0.01), 3, 3, &table);
    const auto s = dense(0.1, pumped(0.01), {}, table);
    const double dev = cross_deviation(s, small);
    return {around < along && dev <= 0.05, "mean|g1(0,l)| = " + fmt(around) + " vs mean|g1(j,j+1)| = " + fmt(along) +
                                               "; dense vs Gaussian max rel dev = " + fmt(100 * dev, 3) +
                                               "% (N_0 = " + fmt(s.density(0)) + ")"};
}

Outcome c10_interactions() {
    struct Ref {
        Sublattice s;
        int j, l, m;
        double value;
    };
    // Magnitudes as printed.
    const Ref refs[] = {{Sublattice::B, 0, 0, 0, 0.191937}, {Sublattice::B, 1, 1, 0, 0.033196},
                        {Sublattice::B, 2, 2, 0, 0.013613}, {Sublattice::B, -1, 0, 1, 0.011298},
                        {Sublattice::B, 2, 1, 0, 0.009605}, {Sublattice::A, 0, 0, 0, 0.028032},
                        {Sublattice::A, 1, 1, 0, 0.007568}, {Sublattice::A, 2, 1, 0, 0.000748},
                        {Sublattice::A, 2, 2, 0, 0.000582}};
    InteractionQuadrature q;
    q.points = 64;
    int ok = 0;
    std::string misses;
    for (const auto& r : refs) {
        const double v = u_eff(r.s, r.j, r.l, r.m, q);
        if (std::abs(std::abs(v) - r.value) <= 5e-5) {
            ++ok;
        } else {
            misses += std::string(" ") + to_string(r.s) + "(" + std::to_string(r.j) + "," + std::to_string(r.l) + "," +
                      std::to_string(r.m) + ")=" + fmt(v, 6) + " vs " + fmt(r.value, 6);
        }
    }
    TruncatedCouplings c;
    c.U0 = u_eff(Sublattice::B, 0, 0, 0, q);
    c.U1 = 4.0 * u_eff(Sublattice::B, 1, 1, 0, q);
    c.U2 = 4.0 * u_eff(Sublattice::B, 2, 2, 0, q);
    c.U3 = 2.0 * u_eff(Sublattice::B, -1, 0, 1, q);
    const bool couplings = std::abs(c.U0 - 0.192) <= 0.002 && std::abs(c.U1 - 0.133) <= 0.002 &&
                           std::abs(c.U2 - 0.054) <= 0.002 && std::abs(std::abs(c.U3) - 0.023) <= 0.002;
    return {ok == 9 && couplings, std::to_string(ok) + "/9 table entries to 4 decimals;" + misses + "; U0..U3 = " +
                                      fmt(c.U0) + ", " + fmt(c.U1) + ", " + fmt(c.U2) + ", " + fmt(c.U3) +
                                      (couplings ? " (within 0.002)" : " (outside 0.002)")};
}

Outcome c11_threshold() {
    std::vector<double> v;
    for (double u : {0.5, 1.0, 2.0, 4.0}) v.push_back(truncation_threshold(u, 1.0, 1.0).value);
    const bool mono = v[0] > v[1] && v[1] > v[2] && v[2] > v[3];
    return {v[2] <= 1e-4 && mono, "<a+a+aa>(U0=2) = " + fmt(v[2]) + " (limit 1e-4), monotone = " + (mono ? "yes" : "no")};
}

Outcome c12_mobility() {
    InteractionQuadrature q;
    const double r1 = 4.0 * u_eff(Sublattice::B, 1, 1, 0, q);
    const double r2 = 4.0 * u_eff(Sublattice::B, 2, 2, 0, q);
    const double r3 = 2.0 * u_eff(Sublattice::B, -1, 0, 1, q);
    auto f_at = [&](double kappa, double U1, bool drop_u2) {
        const double UB = U1 / r1;
        TruncatedCouplings c{0.0, U1, drop_u2 ? 0.0 : r2 * UB, r3 * UB};
        return nonlocal_fraction(dense(kappa, coherent(1.0), c));
    };
    const double fk8 = f_at(0.8, 10, false), fk5 = f_at(0.5, 10, false), fk2 = f_at(0.2, 10, false);
    const double fu30 = f_at(0.2, 30, false), fu100 = f_at(0.2, 100, false);
    const double fnu2 = f_at(0.2, 10, true);
    const bool kappa_mono = fk8 < fk5 && fk5 < fk2;
    const bool u_mono = fk2 > fu30 && fu30 > fu100;
    const double spread_k = std::max({fk8, fk5, fk2}) - std::min({fk8, fk5, fk2});
    const double spread_u = std::max({fk2, fu30, fu100}) - std::min({fk2, fu30, fu100});
    const double du2 = std::abs(fnu2 - fk2);
    return {kappa_mono && u_mono && spread_u < spread_k && du2 < 5e-2,
            "f(kappa=.8,.5,.2) = " + fmt(fk8) + ", " + fmt(fk5) + ", " + fmt(fk2) + "; f(U1=10,30,100) = " + fmt(fk2) +
                ", " + fmt(fu30) + ", " + fmt(fu100) + "; |df(U2=0)| = " + fmt(du2)};
}

Outcome c13_cross_solver() {
    const auto s = dense(0.3, coherent(0.1));
    const auto g = gaussian(0.3, coherent(0.1), 3, 3);
    const double dev = cross_deviation(s, g);
    return {dev <= 0.02, "max rel dev = " + fmt(100 * dev, 3) + "% (limit 2%), max N = " + fmt(s.densities.maxCoeff())};
}

Outcome c14_validity() {
    // Own suite so the criterion also stands alone; adds to whatever earlier criteria recorded.
    const WannierTable table = sawtooth_wannier_table(12);
    for (double k : {0.1, 0.5, 0.9}) gaussian(k, coherent(1.0));
    for (double k : {0.1, 0.5}) gaussian(k, pumped(0.01), 30, 10, &table);
    dense(0.3, coherent(0.1));
    dense(0.1, pumped(0.01), {}, table);
    dense(0.2, coherent(1.0), {0.0, 10.0, 4.1, -1.7});
    const ValidityLog& v = validity;
    const bool ok = v.worst_trace <= 1e-10 && v.worst_min_eig >= -1e-8 && v.worst_residual <= 1e-8 &&
                    v.worst_herm <= 1e-10 && v.worst_psd >= -1e-10 && v.worst_cs <= 1e-10;
    return {ok, std::to_string(v.dense) + " dense: trace " + fmt(v.worst_trace) + ", min eig " + fmt(v.worst_min_eig) +
                    ", residual " + fmt(v.worst_residual) + "; " + std::to_string(v.gaussian) +
                    " Gaussian: herm " + fmt(v.worst_herm) + ", min eig " + fmt(v.worst_psd) + ", CS excess " +
                    fmt(v.worst_cs)};
}

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "kernel tables", 1, c01_kernel_table},
        {2, "closed form vs quadrature", 1, c02_closed_form},
        {3, "Wannier orthogonality", 5, c03_orthogonality},
        {4, "Lieb equivalence", 5, c04_lieb},
        {5, "direct-model decay length", 1, c05_direct},
        {6, "exact-solver limit", 30, c06_exact_limit},
        {7, "effective-drive model", 30, c07_effective},
        {8, "coherent-drive coherence", 10, c08_coherent_g1},
        {9, "incoherent-pump coherence", 60, c09_incoherent_g1},
        {10, "interaction tables", 120, c10_interactions},
        {11, "truncation threshold", 5, c11_threshold},
        {12, "interacting mobility trends", 600, c12_mobility},
        {13, "noninteracting cross-solver", 300, c13_cross_solver},
        {14, "steady-state validity", 600, c14_validity},
    };
    return all;
}

// 0 pass, 1 fail, 2 error
int run(const Criterion& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    bool error = false;
    try {
        o = c.run();
    } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
        error = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time && !error;
    char head[128];
    std::snprintf(head, sizeof head, "[%s] %2d %-30s %8.2f s / %g s  ", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), secs,
                  c.limit_seconds);
    std::cout << head << o.detail << (in_time ? "" : " (over time limit)") << std::endl;
    return error ? 2 : (pass ? 0 : 1);
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    bool expect_fail = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
        else if (a == "--expect-fail") expect_fail = true;
        else {
            std::cerr << "usage: acceptance [--criterion N [--expect-fail]]\n";
            return 2;
        }
    }
    if (only) {
        for (const auto& c : criteria()) {
            if (c.id != only) continue;
            const int rc = run(c);
            if (!expect_fail) return rc;
            if (rc == 1) {
                std::cout << "criterion " << only << " fails as recorded in the known-failure list" << std::endl;
                return 0;
            }
            std::cout << "criterion " << only << (rc == 0 ? " now passes; drop it from the known-failure list" : " errored")
                      << std::endl;
            return 1;
        }
        std::cerr << "no criterion " << only << "\n";
        return 2;
    }
    int failed = 0;
    for (const auto& c : criteria()) failed += run(c) != 0;
    std::cout << (criteria().size() - static_cast<std::size_t>(failed)) << "/" << criteria().size() << " criteria pass"
              << std::endl;
    return failed ? 1 : 0;
}
