#pragma once

// Sawtooth and one-dimensional Lieb lattices: Bloch bands and flat-band conditions.
// Lengths are in units of the lattice spacing; positions are integer unit-cell indices.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "flatband/errors.hpp"

namespace flatband {

enum class LatticeKind { sawtooth, lieb };

inline const char* to_string(LatticeKind kind) {
    return kind == LatticeKind::sawtooth ? "sawtooth" : "lieb";
}

struct SawtoothSpec {
    double omega0 = 0.0;   ///< on-site energy
    double t = 1.0;        ///< B-B hopping
    double t_prime = std::numbers::sqrt2;  ///< A-B hopping
    int n_cells = 61;
    double rel_tol = 1e-12;

    void validate() const {
        if (n_cells < 3) throw InvalidSpec("sawtooth n_cells must be >= 3, got " + std::to_string(n_cells));
        if (!std::isfinite(omega0) || !std::isfinite(t) || !std::isfinite(t_prime)) {
            throw InvalidSpec("sawtooth parameters must be finite");
        }
    }

    /// t' = sqrt(2) t within rel_tol * |t|.
    bool flat_band() const { return std::abs(t_prime - std::numbers::sqrt2 * t) <= rel_tol * std::abs(t); }
};

struct LiebSpec {
    double omega_A = 0.0;
    double omega_B = 0.0;
    double omega_C = 0.0;
    double J = 1.0;  ///< chain hopping
    double g = 1.0;  ///< decoration hopping
    int n_cells = 61;
    double rel_tol = 1e-12;

    void validate() const {
        if (n_cells < 3) throw InvalidSpec("lieb n_cells must be >= 3, got " + std::to_string(n_cells));
        if (g == 0.0 || !std::isfinite(a())) throw InvalidSpec("lieb decoration hopping g must be nonzero");
    }

    bool flat_band() const {
        const double scale = std::max({std::abs(omega_B), std::abs(omega_C), 1.0});
        return std::abs(omega_B - omega_C) <= rel_tol * scale;
    }

    /// a = (2J/g)^2, the single parameter the flat-band Wannier states depend on.
    double a() const { return (2.0 * J / g) * (2.0 * J / g); }
};

/// Band energies at one wavenumber, ascending.
struct SawtoothBands {
    double lower;
    double upper;
};

struct LiebBands {
    std::array<double, 3> energies;           ///< ascending
    std::optional<std::size_t> flat_index;    ///< position of the flat band in `energies`, if present
};

inline SawtoothBands sawtooth_bands(const SawtoothSpec& spec, double k) {
    const double c = std::cos(k);
    const double root = std::sqrt(spec.t * spec.t * c * c + 2.0 * spec.t_prime * spec.t_prime * (1.0 + c));
    const double mid = spec.omega0 + spec.t * c;
    return {mid - root, mid + root};
}

namespace detail {

// Real roots of the characteristic cubic of a Hermitian 3x3 matrix, trigonometric form.
inline std::array<double, 3> hermitian3_eigenvalues(double d0, double d1, double d2, double h01sq, double h02sq,
                                                    double h12sq, double re_triple) {
    // lambda^3 - p1 lambda^2 + p2 lambda - p3 = 0
    const double p1 = d0 + d1 + d2;
    const double p2 = d0 * d1 + d0 * d2 + d1 * d2 - h01sq - h02sq - h12sq;
    const double p3 = d0 * d1 * d2 + 2.0 * re_triple - d0 * h12sq - d1 * h02sq - d2 * h01sq;
    const double shift = p1 / 3.0;
    // depressed cubic x^3 + P x + Q with lambda = x + shift
    const double P = p2 - p1 * p1 / 3.0;
    const double Q = -2.0 * p1 * p1 * p1 / 27.0 + p1 * p2 / 3.0 - p3;
    std::array<double, 3> out{};
    if (P >= 0.0) {
        out.fill(shift);  // triple root
        return out;
    }
    const double m = 2.0 * std::sqrt(-P / 3.0);
    double arg = 3.0 * Q / (P * m);
    arg = std::clamp(arg, -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) {
        out[j] = shift + m * std::cos(theta - 2.0 * std::numbers::pi * j / 3.0);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

inline LiebBands lieb_bands(const LiebSpec& spec, double k) {
    const double chain_sq = 2.0 * spec.J * spec.J * (1.0 + std::cos(k));  // |J(1 + e^{ik})|^2
    const double g_sq = spec.g * spec.g;
    LiebBands bands{};
    if (spec.flat_band()) {
        const double half_gap = (spec.omega_A - spec.omega_B) / 2.0;
        const double root = std::sqrt(half_gap * half_gap + chain_sq + g_sq);
        const double mid = (spec.omega_A + spec.omega_B) / 2.0;
        bands.energies = {mid - root, spec.omega_B, mid + root};
        std::sort(bands.energies.begin(), bands.energies.end());
        const auto it = std::find(bands.energies.begin(), bands.energies.end(), spec.omega_B);
        bands.flat_index = static_cast<std::size_t>(it - bands.energies.begin());
        return bands;
    }
    // B and C are not coupled, so the triple product H01 H12 H20 vanishes.
    bands.energies =
        detail::hermitian3_eigenvalues(spec.omega_A, spec.omega_B, spec.omega_C, chain_sq, g_sq, 0.0, 0.0);
    return bands;
}

/// Energy of the flat band: omega0 - 2t (sawtooth) or omega_B (Lieb).
inline double flat_band_energy(const SawtoothSpec& spec) {
    if (!spec.flat_band()) {
        throw FlatBandViolation("sawtooth band is not flat: t' = " + std::to_string(spec.t_prime) +
                                ", sqrt(2) t = " + std::to_string(std::numbers::sqrt2 * spec.t));
    }
    return spec.omega0 - 2.0 * spec.t;
}

inline double flat_band_energy(const LiebSpec& spec) {
    if (!spec.flat_band()) {
        throw FlatBandViolation("lieb band is not flat: omega_B != omega_C");
    }
    return spec.omega_B;
}

} // namespace flatband
