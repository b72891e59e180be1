#pragma once

// Effective Wannier-basis interactions of the sawtooth flat band.
//
// On-site Hubbard terms U_X x^dag x^dag x x become sum_i U^X_{j'l'm'} W_i^dag W_{i+j'}^dag W_{i+l'} W_{i+m'}
// with U^X_{j'l'm'} = sum_n w_X(n) w_X(n-j') w_X(n-l') w_X(n-m'). In momentum space this is a 3D
// integral once momentum conservation k = -(k'+q+q') is used to eliminate k.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "flatband/errors.hpp"
#include "flatband/wannier.hpp"

namespace flatband {

using Triple = std::array<int, 3>;

/// How momentum conservation k = -(k'+q+q') is imposed.
///  wrapped:  k folded back into [-pi, pi); equals the real-space sum over Wannier coefficients.
///  top_hat:  the literal top-hat, region |k'+q+q'| <= pi only (umklapp terms dropped).
enum class MomentumConstraint { wrapped, top_hat };

inline const char* to_string(MomentumConstraint c) { return c == MomentumConstraint::wrapped ? "wrapped" : "top_hat"; }

inline MomentumConstraint momentum_constraint_from_string(const std::string& s) {
    if (s == "wrapped") return MomentumConstraint::wrapped;
    if (s == "top_hat") return MomentumConstraint::top_hat;
    throw InvalidSpec("unknown momentum constraint '" + s + "' (expected wrapped or top_hat)");
}

struct InteractionQuadrature {
    int points = 64;           ///< grid points (or Gauss nodes) per axis
    double tolerance = 1e-6;   ///< allowed change on doubling the grid
    bool check = true;
    MomentumConstraint constraint = MomentumConstraint::top_hat;
};

namespace detail {

// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
        const double v = eig.eigenvectors()(0, i);
        w[static_cast<std::size_t>(i)] = 2.0 * v * v;
    }
    return {x, w};
}

inline double interaction_weight(Sublattice s, double kp, double q, double qp) {
    const double sum = kp + q + qp;
    double v = 1.0 / std::sqrt((std::cos(sum) + 2.0) * (std::cos(kp) + 2.0) * (std::cos(q) + 2.0) * (std::cos(qp) + 2.0));
    if (s == Sublattice::A) v *= 4.0 * std::cos(sum / 2.0) * std::cos(kp / 2.0) * std::cos(q / 2.0) * std::cos(qp / 2.0);
    return v;
}

inline double u_eff_wrapped(Sublattice s, const Triple& idx, int n) {
    const double h = 2.0 * std::numbers::pi / n;
    const auto [j, l, m] = idx;
    double sum = 0.0;
    for (int a = 0; a < n; ++a) {
        const double ka = -std::numbers::pi + h * a;
        for (int b = 0; b < n; ++b) {
            const double kb = -std::numbers::pi + h * b;
            for (int c = 0; c < n; ++c) {
                const double kc = -std::numbers::pi + h * c;
                sum += interaction_weight(s, ka, kb, kc) * std::cos(ka * j + kb * l + kc * m);
            }
        }
    }
    return sum / (static_cast<double>(n) * n * n);
}

// Region |k'+q+q'| <= pi in variables (s = q+q', q, k'): for fixed s both q and k' range over
// intervals of length 2pi - |s|, so each half s < 0, s > 0 is a box after an affine map.
inline double u_eff_top_hat(Sublattice s, const Triple& idx, int n) {
    const auto [x, w] = gauss_legendre(n);
    const double pi = std::numbers::pi;
    const auto [j, l, m] = idx;
    double total = 0.0;
    for (int half = 0; half < 2; ++half) {
        const double s_lo = half == 0 ? -2.0 * pi : 0.0;
        for (int a = 0; a < n; ++a) {
            const double sv = s_lo + pi * (x[static_cast<std::size_t>(a)] + 1.0);
            const double ws = pi * w[static_cast<std::size_t>(a)];
            const double q_lo = half == 0 ? -pi : sv - pi;
            const double k_lo = half == 0 ? -pi - sv : -pi;
            const double len = 2.0 * pi - std::abs(sv);
            double inner = 0.0;
            for (int b = 0; b < n; ++b) {
                const double q = q_lo + 0.5 * len * (x[static_cast<std::size_t>(b)] + 1.0);
                for (int c = 0; c < n; ++c) {
                    const double kp = k_lo + 0.5 * len * (x[static_cast<std::size_t>(c)] + 1.0);
                    const double qp = sv - q;
                    inner += w[static_cast<std::size_t>(b)] * w[static_cast<std::size_t>(c)] *
                             interaction_weight(s, kp, q, qp) * std::cos(kp * j + q * l + qp * m);
                }
            }
            total += ws * 0.25 * len * len * inner;
        }
    }
    return total / std::pow(2.0 * pi, 3);
}

inline double u_eff_grid(Sublattice s, const Triple& idx, int n, MomentumConstraint c) {
    return c == MomentumConstraint::wrapped ? u_eff_wrapped(s, idx, n) : u_eff_top_hat(s, idx, n);
}

inline void require_sawtooth_sublattice(Sublattice s) {
    if (s != Sublattice::A && s != Sublattice::B) throw InvalidSpec("interaction coefficients exist for A and B only");
}

} // namespace detail

struct UEffResult {
    double value = 0.0;
    double refinement_delta = 0.0;
};

/// U^eff_{j'l'm'} / U_X by tensor-product quadrature, checked by doubling the points per axis.
inline UEffResult u_eff_checked(Sublattice s, const Triple& idx, const InteractionQuadrature& q = {}) {
    detail::require_sawtooth_sublattice(s);
    if (q.points < 4) throw InvalidSpec("interaction quadrature needs >= 4 points per axis");
    UEffResult r;
    r.value = detail::u_eff_grid(s, idx, q.points, q.constraint);
    if (q.check) {
        const double fine = detail::u_eff_grid(s, idx, 2 * q.points, q.constraint);
        r.refinement_delta = std::abs(fine - r.value);
        if (!(r.refinement_delta <= q.tolerance)) {
            throw QuadratureNotConverged("u_eff grid " + std::to_string(q.points) + "^3 -> " +
                                         std::to_string(2 * q.points) + "^3 changed by " +
                                         std::to_string(r.refinement_delta));
        }
    }
    return r;
}

inline double u_eff(Sublattice s, int j, int l, int m, const InteractionQuadrature& q = {}) {
    return u_eff_checked(s, {j, l, m}, q).value;
}

/// Same coefficient from the real-space Wannier table, sum_n w(n) w(n-j') w(n-l') w(n-m').
inline double u_eff_real_space(const WannierTable& table, Sublattice s, int j, int l, int m) {
    const int rm = table.r_max();
    double sum = 0.0;
    for (int n = -rm - 2; n <= rm + 2; ++n) sum += table(s, n) * table(s, n - j) * table(s, n - l) * table(s, n - m);
    return sum;
}

/// Canonical representative of the symmetry class of (j', l', m'): sorted, and for B also the
/// lexicographically smaller of the tuple and its negation.
inline Triple canonical_triple(Sublattice s, Triple t) {
    std::sort(t.begin(), t.end());
    if (s == Sublattice::B) {
        Triple neg{-t[2], -t[1], -t[0]};
        if (neg < t) t = neg;
    }
    return t;
}

class InteractionTable {
public:
    InteractionTable(int index_bound, std::map<std::pair<Sublattice, Triple>, double> entries, double max_delta)
        : bound_(index_bound), entries_(std::move(entries)), max_delta_(max_delta) {}

    int index_bound() const noexcept { return bound_; }
    double max_refinement_delta() const noexcept { return max_delta_; }

    bool contains(Sublattice s, int j, int l, int m) const {
        return std::abs(j) <= bound_ && std::abs(l) <= bound_ && std::abs(m) <= bound_ &&
               entries_.count({s, canonical_triple(s, {j, l, m})}) > 0;
    }

    double at(Sublattice s, int j, int l, int m) const {
        if (!contains(s, j, l, m)) {
            throw MissingEntry(std::string("no interaction entry ") + to_string(s) + "(" + std::to_string(j) + "," +
                               std::to_string(l) + "," + std::to_string(m) + ")");
        }
        return entries_.at({s, canonical_triple(s, {j, l, m})});
    }

    /// Canonical entries, one per symmetry class.
    const std::map<std::pair<Sublattice, Triple>, double>& entries() const noexcept { return entries_; }

private:
    int bound_;
    std::map<std::pair<Sublattice, Triple>, double> entries_;
    double max_delta_;
};

/// Table over all symmetry classes with indices in [-bound, bound] for the given sublattices.
inline InteractionTable build_interaction_table(int bound = 2, std::vector<Sublattice> sublattices = {Sublattice::A, Sublattice::B},
                                                const InteractionQuadrature& q = {}) {
    if (bound < 0) throw InvalidSpec("index bound must be >= 0");
    std::map<std::pair<Sublattice, Triple>, double> entries;
    double max_delta = 0.0;
    for (Sublattice s : sublattices) {
        detail::require_sawtooth_sublattice(s);
        for (int j = -bound; j <= bound; ++j)
            for (int l = j; l <= bound; ++l)
                for (int m = l; m <= bound; ++m) {
                    const Triple c = canonical_triple(s, {j, l, m});
                    if (entries.count({s, c})) continue;
                    const UEffResult r = u_eff_checked(s, c, q);
                    entries[{s, c}] = r.value;
                    max_delta = std::max(max_delta, r.refinement_delta);
                }
    }
    return InteractionTable(bound, std::move(entries), max_delta);
}

/// Hard-core couplings in units of U_X: on-site, two cross-Kerr ranges and density-assisted hopping.
struct TruncatedCouplings {
    double U0 = 0.0;
    double U1 = 0.0;
    double U2 = 0.0;
    double U3 = 0.0;

    TruncatedCouplings scaled(double factor) const { return {U0 * factor, U1 * factor, U2 * factor, U3 * factor}; }
};

inline TruncatedCouplings truncated_couplings(const InteractionTable& table, Sublattice s = Sublattice::B) {
    TruncatedCouplings c;
    c.U0 = table.at(s, 0, 0, 0);
    c.U1 = 4.0 * table.at(s, 1, 1, 0);
    c.U2 = 4.0 * table.at(s, 2, 2, 0);
    c.U3 = 2.0 * table.at(s, -1, 0, 1);
    return c;
}

/// Tuples (i, j', l', m') whose term W_i^dag W_{i+j'}^dag W_{i+l'} W_{i+m'} equals the normal-ordered
/// operator with creation sites `created` and annihilation sites `annihilated` (bosonic reordering).
inline std::vector<std::array<int, 4>> realizing_tuples(std::array<int, 2> created, std::array<int, 2> annihilated,
                                                        int bound) {
    std::sort(created.begin(), created.end());
    std::sort(annihilated.begin(), annihilated.end());
    std::vector<std::array<int, 4>> out;
    const int lo = std::min(created[0], annihilated[0]) - bound;
    const int hi = std::max(created[1], annihilated[1]) + bound;
    for (int i = lo; i <= hi; ++i)
        for (int j = -bound; j <= bound; ++j)
            for (int l = -bound; l <= bound; ++l)
                for (int m = -bound; m <= bound; ++m) {
                    std::array<int, 2> c{i, i + j}, a{i + l, i + m};
                    std::sort(c.begin(), c.end());
                    std::sort(a.begin(), a.end());
                    if (c == created && a == annihilated) out.push_back({i, j, l, m});
                }
    return out;
}

struct ThresholdResult {
    double value = 0.0;      ///< <a^dag a^dag a a>
    double occupation = 0.0; ///< <a^dag a>
    int cutoff = 0;          ///< Fock cutoff of the returned value
};

namespace detail {

// Steady state of H = U a^dag a^dag a a + (omega/2)(a + a^dag), loss gamma (2 a rho a^dag - {a^dag a, rho}),
// in a Fock space of dimension `dim`. Returns the density matrix.
inline Eigen::MatrixXcd kerr_steady_state(double U, double gamma, double omega, int dim) {
    using cplx = std::complex<double>;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    const Eigen::MatrixXcd ad = a.adjoint();
    const Eigen::MatrixXcd H = U * ad * ad * a * a + 0.5 * omega * (a + ad);
    const Eigen::MatrixXcd K = cplx(0.0, -1.0) * H - gamma * ad * a;
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(dim, dim);
    // vec(A rho B) = (B^T kron A) vec(rho)
    auto kron = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
        Eigen::MatrixXcd out(x.rows() * y.rows(), x.cols() * y.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
        return out;
    };
    Eigen::MatrixXcd L = kron(I, K) + kron(K.conjugate(), I) + 2.0 * gamma * kron(a.conjugate(), a);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim * dim);
    // replace the first equation by the trace condition
    L.row(0).setZero();
    for (int n = 0; n < dim; ++n) L(0, n * dim + n) = 1.0;
    rhs(0) = 1.0;
    const Eigen::VectorXcd x = L.partialPivLu().solve(rhs);
    Eigen::MatrixXcd rho = Eigen::Map<const Eigen::MatrixXcd>(x.data(), dim, dim);
    return 0.5 * (rho + rho.adjoint());
}

} // namespace detail

/// <W^dag W^dag W W> of an isolated driven Kerr site, the bound on double occupation of the pumped
/// Wannier state. The cutoff is doubled (up to 32) until the value changes by less than 1%.
inline ThresholdResult truncation_threshold(double U0, double gamma0, double omega, int cutoff = 8) {
    if (!(gamma0 > 0.0) || !(omega > 0.0)) throw InvalidSpec("truncation threshold needs gamma0 > 0 and omega > 0");
    if (!(U0 >= 0.0) || !std::isfinite(U0)) throw InvalidSpec("U0 must be finite and >= 0");
    if (cutoff < 8) throw InvalidSpec("Fock cutoff must be >= 8");
    constexpr int max_cutoff = 32;
    auto evaluate = [&](int dim) {
        const Eigen::MatrixXcd rho = detail::kerr_steady_state(U0, gamma0, omega, dim);
        ThresholdResult r;
        r.cutoff = dim;
        for (int n = 0; n < dim; ++n) {
            const double p = rho(n, n).real();
            r.occupation += n * p;
            r.value += static_cast<double>(n) * (n - 1) * p;
        }
        return r;
    };
    ThresholdResult cur = evaluate(cutoff);
    for (int dim = 2 * cutoff; dim <= max_cutoff; dim *= 2) {
        const ThresholdResult next = evaluate(dim);
        if (std::abs(next.value - cur.value) <= 0.01 * std::abs(next.value)) return cur;
        cur = next;
    }
    throw FockCutoffInsufficient("Fock cutoff " + std::to_string(max_cutoff) + " not converged for U0 = " +
                                 std::to_string(U0));
}

} // namespace flatband
