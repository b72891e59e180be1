#pragma once

// Flat-band Wannier coefficients for the sawtooth (A, B) and Lieb (B, C) lattices.
//
// Site operators expand as x_i^dag = sum_j w_X(r_i - r_j) W_j^dag (+ other bands). Every
// coefficient is the Fourier transform of a smooth periodic function, evaluated with the
// periodic trapezoid rule and checked by grid doubling.
//
// Half-cell offsets: the sawtooth A coefficient carries an e^{ik/2} factor, i.e. A sites sit
// at r - 1/2 relative to B sites; the Lieb C coefficient carries e^{ik/2} the other way
// (C sites at r + 1/2). Both are folded into real cosine integrals.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flatband/errors.hpp"
#include "flatband/lattice.hpp"
#include "flatband/quadrature.hpp"

namespace flatband {

enum class Sublattice { A, B, C };

inline const char* to_string(Sublattice s) {
    switch (s) {
    case Sublattice::A: return "A";
    case Sublattice::B: return "B";
    case Sublattice::C: return "C";
    }
    return "?";
}

inline Sublattice sublattice_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Sublattice::A;
    if (s == "B" || s == "b") return Sublattice::B;
    if (s == "C" || s == "c") return Sublattice::C;
    throw InvalidSpec("unknown sublattice '" + s + "'");
}

/// Sublattices carrying flat-band weight.
inline std::array<Sublattice, 2> flat_band_sublattices(LatticeKind kind) {
    return kind == LatticeKind::sawtooth ? std::array{Sublattice::A, Sublattice::B}
                                         : std::array{Sublattice::B, Sublattice::C};
}

namespace detail {

inline void require_sublattice(LatticeKind kind, Sublattice s) {
    const auto subs = flat_band_sublattices(kind);
    if (s != subs[0] && s != subs[1]) {
        throw InvalidSpec(std::string("sublattice ") + to_string(s) + " has no flat-band weight on the " +
                          to_string(kind) + " lattice");
    }
}

} // namespace detail

/// Sawtooth Wannier coefficient w_A(r) or w_B(r); independent of t on the flat band.
inline double sawtooth_wannier(Sublattice sublattice, int r, const QuadratureOptions& opts = {}) {
    detail::require_sublattice(LatticeKind::sawtooth, sublattice);
    const double rr = static_cast<double>(r);
    if (sublattice == Sublattice::B) {
        // -(1/2pi) int e^{-ikr} / sqrt(cos k + 2); even in r, evaluated at |r|.
        const double ar = std::abs(rr);
        auto f = [ar](double k) { return std::cos(k * ar) / std::sqrt(std::cos(k) + 2.0); };
        return -quad::periodic_mean_checked(f, opts, "w_B(" + std::to_string(r) + ")").value;
    }
    // (sqrt2/2pi) int cos(k/2) e^{-ik(r - 1/2)} / sqrt(cos k + 2); the cosine part is
    // (1/2)[cos(kr) + cos(k(r-1))], which is periodic and smooth.
    auto f = [rr](double k) {
        return 0.5 * (std::cos(k * rr) + std::cos(k * (rr - 1.0))) / std::sqrt(std::cos(k) + 2.0);
    };
    return std::numbers::sqrt2 * quad::periodic_mean_checked(f, opts, "w_A(" + std::to_string(r) + ")").value;
}

/// Lieb Wannier coefficient w_B(r) or w_C(r) for a flat-band spec; depends only on a = (2J/g)^2.
/// Normalized with 1/(2pi) so that the Wannier states are orthonormal.
inline double lieb_wannier(Sublattice sublattice, int r, const LiebSpec& spec, const QuadratureOptions& opts = {}) {
    detail::require_sublattice(LatticeKind::lieb, sublattice);
    spec.validate();
    if (!spec.flat_band()) throw FlatBandViolation("lieb Wannier states need omega_B == omega_C");
    const double a = spec.a();
    const double rr = static_cast<double>(r);
    if (sublattice == Sublattice::B) {
        const double ar = std::abs(rr);
        auto f = [a, ar](double k) {
            const double c = std::cos(k / 2.0);
            return std::cos(k * ar) / std::sqrt(1.0 + a * c * c);
        };
        return quad::periodic_mean_checked(f, opts, "lieb w_B(" + std::to_string(r) + ")").value;
    }
    // C amplitude of the flat-band Bloch vector: -sqrt(a) cos(k/2) e^{ik/2} / sqrt(1 + a cos^2(k/2)).
    const double sa = std::sqrt(a);
    auto f = [a, rr](double k) {
        const double c = std::cos(k / 2.0);
        return 0.5 * (std::cos(k * (rr + 1.0)) + std::cos(k * rr)) / std::sqrt(1.0 + a * c * c);
    };
    return -sa * quad::periodic_mean_checked(f, opts, "lieb w_C(" + std::to_string(r) + ")").value;
}

/// Immutable table of Wannier coefficients for -r_max <= r <= r_max on both flat-band sublattices.
class WannierTable {
public:
    WannierTable(LatticeKind kind, int r_max, std::optional<double> lieb_a,
                 std::map<Sublattice, std::vector<double>> coefficients)
        : kind_(kind), r_max_(r_max), lieb_a_(lieb_a), coefficients_(std::move(coefficients)) {}

    LatticeKind lattice_kind() const noexcept { return kind_; }
    int r_max() const noexcept { return r_max_; }
    std::optional<double> lieb_a() const noexcept { return lieb_a_; }
    std::array<Sublattice, 2> sublattices() const { return flat_band_sublattices(kind_); }

    /// Position offset of the sublattice site relative to the unit-cell index, in lattice spacings.
    double half_cell_offset(Sublattice s) const {
        if (kind_ == LatticeKind::sawtooth) return s == Sublattice::A ? -0.5 : 0.0;
        return s == Sublattice::C ? 0.5 : 0.0;
    }

    double at(Sublattice s, int r) const {
        if (r < -r_max_ || r > r_max_) {
            throw std::out_of_range("Wannier coefficient r=" + std::to_string(r) + " beyond r_max=" +
                                    std::to_string(r_max_));
        }
        return coefficients_.at(s)[static_cast<std::size_t>(r + r_max_)];
    }

    /// Coefficient, or 0 beyond the truncation radius.
    double operator()(Sublattice s, int r) const {
        if (r < -r_max_ || r > r_max_) return 0.0;
        return coefficients_.at(s)[static_cast<std::size_t>(r + r_max_)];
    }

private:
    LatticeKind kind_;
    int r_max_;
    std::optional<double> lieb_a_;
    std::map<Sublattice, std::vector<double>> coefficients_;
};

inline WannierTable sawtooth_wannier_table(int r_max = 12, const QuadratureOptions& opts = {}) {
    if (r_max < 1) throw InvalidSpec("r_max must be >= 1");
    std::map<Sublattice, std::vector<double>> coeffs;
    for (Sublattice s : flat_band_sublattices(LatticeKind::sawtooth)) {
        auto& v = coeffs[s];
        v.resize(static_cast<std::size_t>(2 * r_max + 1));
        for (int r = -r_max; r <= r_max; ++r) {
            v[static_cast<std::size_t>(r + r_max)] = sawtooth_wannier(s, r, opts);
        }
    }
    return WannierTable(LatticeKind::sawtooth, r_max, std::nullopt, std::move(coeffs));
}

inline WannierTable lieb_wannier_table(const LiebSpec& spec, int r_max = 12, const QuadratureOptions& opts = {}) {
    if (r_max < 1) throw InvalidSpec("r_max must be >= 1");
    std::map<Sublattice, std::vector<double>> coeffs;
    for (Sublattice s : flat_band_sublattices(LatticeKind::lieb)) {
        auto& v = coeffs[s];
        v.resize(static_cast<std::size_t>(2 * r_max + 1));
        for (int r = -r_max; r <= r_max; ++r) {
            v[static_cast<std::size_t>(r + r_max)] = lieb_wannier(s, r, spec, opts);
        }
    }
    return WannierTable(LatticeKind::lieb, r_max, spec.a(), std::move(coeffs));
}

/// Lieb table parameterized directly by a = (2J/g)^2.
inline WannierTable lieb_wannier_table(double a, int r_max = 12, const QuadratureOptions& opts = {}) {
    if (!(a > 0.0)) throw InvalidSpec("lieb parameter a must be positive");
    LiebSpec spec;
    spec.g = 1.0;
    spec.J = std::sqrt(a) / 2.0;
    return lieb_wannier_table(spec, r_max, opts);
}

/// D_{jk} = sum_i sum_X w_X(r_j - r_i) w_X(r_k - r_i) - delta_{jk} for j = 0 and 0 <= k <= r_max/2.
/// The table is translation invariant, so the matrix is Toeplitz: entry (j, k) depends on k - j only,
/// and the returned matrix covers |j - k| <= r_max/2.
inline Eigen::MatrixXd orthogonality_defect(const WannierTable& table) {
    const int span = table.r_max() / 2;
    const int n = span + 1;
    Eigen::MatrixXd defect(n, n);
    const int rm = table.r_max();
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            double sum = 0.0;
            for (int i = -2 * rm; i <= 2 * rm; ++i) {
                for (Sublattice s : table.sublattices()) sum += table(s, j - i) * table(s, k - i);
            }
            defect(j, k) = sum - (j == k ? 1.0 : 0.0);
        }
    }
    return defect;
}

/// Overlap sum_i w_X(r_i) w_X(r_i - l) for one sublattice from the table.
inline double wannier_autocorrelation(const WannierTable& table, Sublattice s, int l) {
    double sum = 0.0;
    const int rm = table.r_max();
    for (int i = -rm - std::abs(l); i <= rm + std::abs(l); ++i) sum += table(s, i) * table(s, i - l);
    return sum;
}

} // namespace flatband
