#pragma once

// Non-interacting steady states from the closed first- and second-moment equations.
//
// Dissipator convention: a channel X with rate c contributes c (2 X rho X^dag - {X^dag X, rho}).
// Loss enters as sum_jk Gamma_jk (2 W_j rho W_k^dag - ...), Gamma_jk = gamma_{k-j}; a site pump
// P_{x,i} on x_i = sum_j w_x(r_i - r_j) W_j gives sum_jk G_jk (2 W_j^dag rho W_k - ...) with
// G_jk = sum_{x,i} P_{x,i} w_x(r_i - r_j) w_x(r_i - r_k). The moment equations read
//
//   d<W>/dt = -(A + i Delta) <W> + s,          s_i = -(i/2) conj(Omega_i),
//   dC/dt   = -(A C + C A) + S(<W>) + 2 G,     C_ij = <W_i^dag W_j>,
//
// with A = Gamma - G real symmetric and S_ij = (i/2)(Omega_i <W_j> - conj(Omega_j) conj(<W_i>)).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "flatband/errors.hpp"
#include "flatband/kernel.hpp"
#include "flatband/wannier.hpp"

namespace flatband {

using cplx = std::complex<double>;

enum class LogConvention { natural, log10 };

inline const char* to_string(LogConvention c) { return c == LogConvention::natural ? "natural" : "log10"; }

inline LogConvention log_convention_from_string(const std::string& s) {
    if (s == "natural" || s == "ln") return LogConvention::natural;
    if (s == "log10") return LogConvention::log10;
    throw InvalidSpec("unknown log convention '" + s + "' (expected natural or log10)");
}

/// Incoherent pump of rate P on one lattice site (sublattice x, unit cell i).
struct SitePump {
    Sublattice sublattice = Sublattice::B;
    int cell = 0;
    double rate = 0.0;
};

struct DriveSpec {
    std::map<int, cplx> coherent;     ///< Wannier site -> Omega_W
    std::vector<SitePump> incoherent;
    double detuning = 0.0;

    bool empty() const {
        return coherent.empty() && std::none_of(incoherent.begin(), incoherent.end(),
                                                [](const SitePump& p) { return p.rate != 0.0; });
    }

    void validate() const {
        for (const auto& [site, omega] : coherent) {
            if (!std::isfinite(omega.real()) || !std::isfinite(omega.imag())) {
                throw InvalidSpec("coherent drive at site " + std::to_string(site) + " is not finite");
            }
        }
        for (const auto& p : incoherent) {
            if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) throw InvalidSpec("pump rates must be finite and >= 0");
        }
        if (!std::isfinite(detuning)) throw InvalidSpec("detuning must be finite");
    }
};

/// Wannier sites -M..M stored at indices 0..2M.
struct Geometry {
    int half_width = 30;
    int size() const { return 2 * half_width + 1; }
    int index(int site) const { return site + half_width; }
    int site(int index) const { return index - half_width; }
    bool contains(int site) const { return site >= -half_width && site <= half_width; }
};

struct Drift {
    Geometry geometry;
    Eigen::MatrixXd loss;        ///< Gamma window
    Eigen::MatrixXd gain;        ///< pump kernel G, zero without pumping
    double detuning = 0.0;
    Eigen::VectorXcd source;     ///< s_i = -(i/2) conj(Omega_i)
    Eigen::VectorXcd omega;      ///< Omega_i on the grid
    bool narrow_window = false;  ///< 2M+1 < 4 cutoff: boundary effects may be visible

    /// A = Gamma - G.
    Eigen::MatrixXd damping() const { return loss - gain; }

    /// A + i Delta, the first-moment drift.
    Eigen::MatrixXcd matrix() const {
        Eigen::MatrixXcd d = damping().cast<cplx>();
        d.diagonal().array() += cplx(0.0, detuning);
        return d;
    }
};

/// G_jk for site pumps projected on the flat band.
inline Eigen::MatrixXd pump_gain_matrix(const std::vector<SitePump>& pumps, const WannierTable& table,
                                        const Geometry& geo) {
    const int n = geo.size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (const auto& p : pumps) {
        if (p.rate == 0.0) continue;
        Eigen::VectorXd w(n);
        for (int j = 0; j < n; ++j) w(j) = table(p.sublattice, p.cell - geo.site(j));
        g += p.rate * w * w.transpose();
    }
    return g;
}

/// Builds the drift. `table` is needed only when the drive contains site pumps.
inline Drift build_drift(const DissipationKernel& kernel, const DriveSpec& drive, int half_width,
                         const WannierTable* table = nullptr) {
    drive.validate();
    Geometry geo{half_width};
    if (half_width < 0 || geo.size() < 2 * kernel.cutoff() + 1) {
        throw InvalidSpec("lattice of " + std::to_string(geo.size()) + " Wannier sites cannot hold kernel cutoff " +
                          std::to_string(kernel.cutoff()));
    }
    Drift d;
    d.geometry = geo;
    d.narrow_window = geo.size() < 4 * kernel.cutoff();
    d.loss = kernel.toeplitz(geo.size());
    d.detuning = drive.detuning;
    d.omega = Eigen::VectorXcd::Zero(geo.size());
    for (const auto& [site, om] : drive.coherent) {
        if (!geo.contains(site)) throw InvalidSpec("drive site " + std::to_string(site) + " outside the lattice");
        d.omega(geo.index(site)) = om;
    }
    d.source = (cplx(0.0, -0.5) * d.omega.conjugate()).eval();
    const bool pumped = std::any_of(drive.incoherent.begin(), drive.incoherent.end(),
                                    [](const SitePump& p) { return p.rate != 0.0; });
    if (pumped) {
        if (table == nullptr) throw InvalidSpec("incoherent pumping needs a Wannier table");
        d.gain = pump_gain_matrix(drive.incoherent, *table, geo);
    } else {
        d.gain = Eigen::MatrixXd::Zero(geo.size(), geo.size());
    }
    return d;
}

/// Spectral abscissa of the linear dynamics, max Re eig(-(Gamma - G)). Negative means stable.
inline double stability_check(const Drift& drift) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(drift.damping(), Eigen::EigenvaluesOnly);
    return -eig.eigenvalues().minCoeff();
}

struct FirstMoments {
    Eigen::VectorXcd values;
    double condition_number = 0.0;
    double residual = 0.0;   ///< ||D x - s|| / max(||s||, tiny)
};

inline constexpr double singular_drift_condition = 1e12;

inline FirstMoments solve_first_moments(const Drift& drift) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(drift.damping());
    const Eigen::VectorXd lam = eig.eigenvalues();
    double smax = 0.0, smin = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
        const double s = std::abs(cplx(lam(k), drift.detuning));
        smax = std::max(smax, s);
        smin = std::min(smin, s);
    }
    FirstMoments out;
    out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(out.condition_number < singular_drift_condition)) {
        throw SingularDrift("drift condition number " + std::to_string(out.condition_number) +
                            " (near-dark state)");
    }
    const Eigen::MatrixXcd V = eig.eigenvectors().cast<cplx>();
    Eigen::VectorXcd y = V.adjoint() * drift.source;
    for (Eigen::Index k = 0; k < lam.size(); ++k) y(k) /= cplx(lam(k), drift.detuning);
    out.values = V * y;
    const double snorm = drift.source.norm();
    out.residual = (drift.matrix() * out.values - drift.source).norm() / std::max(snorm, 1e-300);
    return out;
}

/// Right-hand side S + 2G of the second-moment equation.
inline Eigen::MatrixXcd second_moment_source(const Drift& drift, const Eigen::VectorXcd& first) {
    const Eigen::VectorXcd& om = drift.omega;
    Eigen::MatrixXcd rhs = cplx(0.0, 0.5) * (om * first.transpose() - first.conjugate() * om.adjoint());
    rhs += 2.0 * drift.gain.cast<cplx>();
    return rhs;
}

struct SecondMomentOptions {
    std::optional<int> corr_range;  ///< keep |i-j| <= corr_range; exact full solve when empty
};

struct SecondMoments {
    Eigen::MatrixXcd values;
    double residual = 0.0;   ///< max-norm residual of the (possibly banded) equation
};

namespace detail {

inline SecondMoments lyapunov_exact(const Eigen::MatrixXd& A, const Eigen::MatrixXcd& rhs) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    const Eigen::VectorXd lam = eig.eigenvalues();
    const Eigen::MatrixXcd V = eig.eigenvectors().cast<cplx>();
    Eigen::MatrixXcd y = V.transpose() * rhs * V;
    for (Eigen::Index a = 0; a < y.rows(); ++a)
        for (Eigen::Index b = 0; b < y.cols(); ++b) y(a, b) /= (lam(a) + lam(b));
    SecondMoments out;
    out.values = V * y * V.transpose();
    const Eigen::MatrixXcd Ac = A.cast<cplx>();
    out.residual = (Ac * out.values + out.values * Ac - rhs).cwiseAbs().maxCoeff();
    return out;
}

// Solves (A C + C A)_ij = rhs_ij on the band |i-j| <= R with C_ij = 0 outside it.
inline SecondMoments lyapunov_banded(const Eigen::MatrixXd& A, const Eigen::MatrixXcd& rhs, int R) {
    const int n = static_cast<int>(A.rows());
    std::vector<std::pair<int, int>> cells;
    Eigen::MatrixXi id = Eigen::MatrixXi::Constant(n, n, -1);
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - R); j <= std::min(n - 1, i + R); ++j) {
            id(i, j) = static_cast<int>(cells.size());
            cells.emplace_back(i, j);
        }
    std::vector<Eigen::Triplet<cplx>> trip;
    Eigen::VectorXcd b(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto [i, j] = cells[r];
        b(static_cast<Eigen::Index>(r)) = rhs(i, j);
        for (int k = 0; k < n; ++k) {
            if (A(i, k) != 0.0 && id(k, j) >= 0) trip.emplace_back(static_cast<int>(r), id(k, j), A(i, k));
            if (A(k, j) != 0.0 && id(i, k) >= 0) trip.emplace_back(static_cast<int>(r), id(i, k), A(k, j));
        }
    }
    Eigen::SparseMatrix<cplx> M(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(cells.size()));
    M.setFromTriplets(trip.begin(), trip.end());
    M.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success) throw SingularDrift("banded second-moment system is singular");
    const Eigen::VectorXcd x = lu.solve(b);
    SecondMoments out;
    out.values = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t r = 0; r < cells.size(); ++r) out.values(cells[r].first, cells[r].second) = x(static_cast<Eigen::Index>(r));
    out.residual = (M * x - b).cwiseAbs().maxCoeff();
    return out;
}

} // namespace detail

inline SecondMoments solve_second_moments(const Drift& drift, const Eigen::VectorXcd& first,
                                          const SecondMomentOptions& opts = {}) {
    const double abscissa = stability_check(drift);
    if (!(abscissa < 0.0)) {
        throw UnstablePump("gain-shifted drift has spectral abscissa " + std::to_string(abscissa) + " >= 0");
    }
    const Eigen::MatrixXcd rhs = second_moment_source(drift, first);
    SecondMoments out = opts.corr_range && *opts.corr_range < drift.geometry.size() - 1
                            ? detail::lyapunov_banded(drift.damping(), rhs, *opts.corr_range)
                            : detail::lyapunov_exact(drift.damping(), rhs);
    out.values = (0.5 * (out.values + out.values.adjoint())).eval();
    return out;
}

struct MomentState {
    Geometry geometry;
    Eigen::VectorXcd first;
    Eigen::MatrixXcd second;

    Eigen::VectorXd densities() const { return second.diagonal().real(); }
    double density(int site) const { return second(geometry.index(site), geometry.index(site)).real(); }
    cplx correlation(int i, int j) const { return second(geometry.index(i), geometry.index(j)); }
};

/// Per-site densities on both flat-band sublattices by projection of C through the Wannier table.
struct SiteDensities {
    int first_cell = 0;
    std::map<Sublattice, std::vector<double>> values;

    double at(Sublattice s, int cell) const { return values.at(s).at(static_cast<std::size_t>(cell - first_cell)); }
    int last_cell() const {
        return first_cell + static_cast<int>(values.empty() ? 0 : values.begin()->second.size()) - 1;
    }
};

/// Projects onto cells [-M - pad, M + pad]; pad defaults to the table radius so that the total
/// site-basis number equals the total Wannier number.
inline SiteDensities site_basis_densities(const MomentState& state, const WannierTable& table,
                                          std::optional<int> pad = std::nullopt) {
    const Geometry& geo = state.geometry;
    const int p = pad.value_or(table.r_max());
    const int n = geo.size();
    SiteDensities out;
    out.first_cell = -geo.half_width - p;
    for (Sublattice s : table.sublattices()) {
        auto& v = out.values[s];
        for (int cell = -geo.half_width - p; cell <= geo.half_width + p; ++cell) {
            Eigen::VectorXd w(n);
            for (int j = 0; j < n; ++j) w(j) = table(s, cell - geo.site(j));
            v.push_back((w.cast<cplx>().transpose() * state.second * w.cast<cplx>()).value().real());
        }
    }
    return out;
}

inline constexpr double zero_density_threshold = 1e-30;

/// g1(j, l) = C_jl / sqrt(C_jj C_ll) over sites with density above 1e-30.
class G1Map {
public:
    G1Map(Geometry geo, std::vector<int> sites, Eigen::MatrixXcd values)
        : geo_(geo), sites_(std::move(sites)), values_(std::move(values)) {
        pos_.assign(static_cast<std::size_t>(geo_.size()), -1);
        for (std::size_t k = 0; k < sites_.size(); ++k) pos_[static_cast<std::size_t>(geo_.index(sites_[k]))] = static_cast<int>(k);
    }

    const std::vector<int>& sites() const noexcept { return sites_; }
    const Eigen::MatrixXcd& matrix() const noexcept { return values_; }
    bool contains(int site) const { return geo_.contains(site) && pos_[static_cast<std::size_t>(geo_.index(site))] >= 0; }

    cplx operator()(int j, int l) const {
        return values_(position(j), position(l));
    }

private:
    int position(int site) const {
        if (!contains(site)) throw ZeroDensitySite("site " + std::to_string(site) + " has no density, g1 undefined");
        return pos_[static_cast<std::size_t>(geo_.index(site))];
    }

    Geometry geo_;
    std::vector<int> sites_;
    Eigen::MatrixXcd values_;
    std::vector<int> pos_;
};

inline G1Map g1(const MomentState& state) {
    const Geometry& geo = state.geometry;
    std::vector<int> sites;
    for (int idx = 0; idx < geo.size(); ++idx) {
        if (state.second(idx, idx).real() > zero_density_threshold) sites.push_back(geo.site(idx));
    }
    const auto m = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXcd v(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) {
            const int ia = geo.index(sites[static_cast<std::size_t>(a)]);
            const int ib = geo.index(sites[static_cast<std::size_t>(b)]);
            v(a, b) = state.second(ia, ib) / std::sqrt(state.second(ia, ia).real() * state.second(ib, ib).real());
        }
    }
    return G1Map(geo, std::move(sites), std::move(v));
}

/// xi = 1 / |log N_i - log N_next|; +infinity when the two densities coincide.
inline double decay_length(double n_i, double n_next, LogConvention convention = LogConvention::natural) {
    if (!(n_i > 0.0) || !(n_next > 0.0)) {
        throw NonPositiveDensity("decay length needs positive densities, got " + std::to_string(n_i) + ", " +
                                 std::to_string(n_next));
    }
    const double diff = convention == LogConvention::natural ? std::log(n_i) - std::log(n_next)
                                                             : std::log10(n_i) - std::log10(n_next);
    if (diff == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / std::abs(diff);
}

/// xi_i from the density profile of a moment state, using N_i and N_{i+1}.
inline double decay_length(const MomentState& state, int site, LogConvention convention = LogConvention::natural) {
    if (site < 1 || !state.geometry.contains(site + 1)) {
        throw InvalidSpec("decay length site " + std::to_string(site) + " outside 1..M-1");
    }
    return decay_length(state.density(site), state.density(site + 1), convention);
}

/// Hermiticity, positivity and Cauchy-Schwarz diagnostics of a second-moment matrix.
struct MomentValidity {
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    double min_density = 0.0;
    double cauchy_schwarz_excess = 0.0;   ///< max(|C_ij|^2 - C_ii C_jj)

    bool ok(double tol = 1e-10) const {
        return hermiticity_error <= tol && min_eigenvalue >= -tol && min_density >= -1e-12 &&
               cauchy_schwarz_excess <= tol;
    }
};

inline MomentValidity check_moments(const Eigen::MatrixXcd& C) {
    MomentValidity v;
    v.hermiticity_error = (C - C.adjoint()).cwiseAbs().maxCoeff();
    const Eigen::MatrixXcd h = 0.5 * (C + C.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
    v.min_eigenvalue = eig.eigenvalues().minCoeff();
    v.min_density = C.diagonal().real().minCoeff();
    double excess = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < C.rows(); ++i)
        for (Eigen::Index j = 0; j < C.cols(); ++j)
            excess = std::max(excess, std::norm(C(i, j)) - C(i, i).real() * C(j, j).real());
    v.cauchy_schwarz_excess = excess;
    return v;
}

struct GaussianOptions {
    int half_width = 30;
    std::optional<int> corr_range;
    LogConvention convention = LogConvention::natural;
};

struct SteadyStateReport {
    MomentState state;
    Eigen::VectorXd densities;
    Eigen::VectorXd normalized;         ///< N_i / N_0 (N_i / max N when N_0 = 0)
    std::map<int, double> xi;           ///< i >= 1 with both densities positive
    LogConvention convention = LogConvention::natural;
    double condition_number = 0.0;
    double first_residual = 0.0;
    double second_residual = 0.0;
    double spectral_abscissa = 0.0;
    bool narrow_window = false;
    MomentValidity validity;
};

inline SteadyStateReport gaussian_steady_state(const DissipationKernel& kernel, const DriveSpec& drive,
                                               const GaussianOptions& opts = {}, const WannierTable* table = nullptr) {
    const Drift drift = build_drift(kernel, drive, opts.half_width, table);
    SteadyStateReport rep;
    rep.spectral_abscissa = stability_check(drift);
    rep.narrow_window = drift.narrow_window;
    FirstMoments first;
    if (drift.omega.isZero(0.0)) {
        first.values = Eigen::VectorXcd::Zero(drift.geometry.size());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(drift.damping(), Eigen::EigenvaluesOnly);
        const Eigen::VectorXd lam = eig.eigenvalues().cwiseAbs();
        first.condition_number = lam.maxCoeff() / lam.minCoeff();
    } else {
        first = solve_first_moments(drift);
    }
    const SecondMoments second = solve_second_moments(drift, first.values, {opts.corr_range});
    rep.state = MomentState{drift.geometry, first.values, second.values};
    rep.condition_number = first.condition_number;
    rep.first_residual = first.residual;
    rep.second_residual = second.residual;
    rep.convention = opts.convention;
    rep.densities = rep.state.densities();
    const double n0 = rep.state.density(0);
    const double norm = n0 > 0.0 ? n0 : rep.densities.maxCoeff();
    rep.normalized = norm > 0.0 ? Eigen::VectorXd(rep.densities / norm) : rep.densities;
    for (int i = 1; i < opts.half_width; ++i) {
        const double a = rep.state.density(i), b = rep.state.density(i + 1);
        if (a > 0.0 && b > 0.0) rep.xi[i] = decay_length(a, b, opts.convention);
    }
    rep.validity = check_moments(second.values);
    return rep;
}

/// Site amplitudes Omega_{X,j} = Omega_W w_X(r_0 - r_j) that realize a drive of the Wannier state at r_0.
inline std::map<std::pair<Sublattice, int>, cplx> wannier_drive_site_amplitudes(const WannierTable& table, int center,
                                                                                cplx omega_W) {
    std::map<std::pair<Sublattice, int>, cplx> out;
    for (Sublattice s : table.sublattices())
        for (int r = -table.r_max(); r <= table.r_max(); ++r) out[{s, center - r}] = omega_W * table(s, r);
    return out;
}

/// Explicit RK4 integration of the moment equations from `start` over time `t` in steps of `dt`.
inline MomentState integrate_moments(const Drift& drift, MomentState start, double t, double dt) {
    if (!(dt > 0.0) || !(t >= 0.0)) throw InvalidSpec("integration needs dt > 0 and t >= 0");
    const Eigen::MatrixXcd D = drift.matrix();
    const Eigen::MatrixXcd Dc = D.conjugate();
    const Eigen::MatrixXcd gain2 = 2.0 * drift.gain.cast<cplx>();
    auto rhs = [&](const Eigen::VectorXcd& w, const Eigen::MatrixXcd& C, Eigen::VectorXcd& dw, Eigen::MatrixXcd& dC) {
        dw = -D * w + drift.source;
        dC = -(Dc * C + C * D.transpose());
        dC += cplx(0.0, 0.5) * (drift.omega * w.transpose() - w.conjugate() * drift.omega.adjoint());
        dC += gain2;
    };
    const auto steps = static_cast<long>(std::ceil(t / dt - 1e-12));
    const double h = steps > 0 ? t / static_cast<double>(steps) : 0.0;
    Eigen::VectorXcd w = start.first, k1w, k2w, k3w, k4w;
    Eigen::MatrixXcd C = start.second, k1C, k2C, k3C, k4C;
    for (long s = 0; s < steps; ++s) {
        rhs(w, C, k1w, k1C);
        rhs(w + 0.5 * h * k1w, C + 0.5 * h * k1C, k2w, k2C);
        rhs(w + 0.5 * h * k2w, C + 0.5 * h * k2C, k3w, k3C);
        rhs(w + h * k3w, C + h * k3C, k4w, k4C);
        w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        C += (h / 6.0) * (k1C + 2.0 * k2C + 2.0 * k3C + k4C);
    }
    start.first = w;
    start.second = C;
    return start;
}

inline MomentState vacuum_state(const Geometry& geo) {
    return {geo, Eigen::VectorXcd::Zero(geo.size()), Eigen::MatrixXcd::Zero(geo.size(), geo.size())};
}

} // namespace flatband
