#pragma once

// Analytic mobility models for a coherently driven Wannier state at the origin: nearest-neighbour
// diffusion, direct non-local coupling to the pumped site, and the effective-drive model.

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <string>

#include "flatband/errors.hpp"
#include "flatband/gaussian.hpp"
#include "flatband/kernel.hpp"

namespace flatband {

enum class ModelKind { diffusion, direct, effective_drive };

inline const char* to_string(ModelKind m) {
    switch (m) {
    case ModelKind::diffusion: return "diffusion";
    case ModelKind::direct: return "direct";
    case ModelKind::effective_drive: return "effective_drive";
    }
    return "?";
}

struct ModelPrediction {
    ModelKind model = ModelKind::direct;
    double xi = 0.0;                       ///< +infinity as the unbounded sentinel
    std::map<std::string, double> aux;
};

namespace detail {

// gamma_l = -e f_l for l != 0 with e = (1 - kappa) * reference rate; returns e.
inline double offdiagonal_scale(const DissipationKernel& k) { return (1.0 - k.kappa()) * k.reference_rate(); }

inline double xi_from_ratio(double ratio, LogConvention c) {
    const double r = std::abs(ratio);
    const double lg = c == LogConvention::natural ? std::log(r) : std::log10(r);
    if (lg == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (2.0 * std::abs(lg));
}

} // namespace detail

/// Xi(kappa) up to a constant: sqrt(gamma_1 / gamma_0).
inline ModelPrediction diffusion_xi_shape(const DissipationKernel& kernel) {
    const double g0 = kernel.rate(0), g1 = kernel.rate(1);
    if (g1 < 0.0) throw NegativeHoppingRate("gamma_1 = " + std::to_string(g1) + " < 0, no diffusion mapping");
    ModelPrediction p;
    p.model = ModelKind::diffusion;
    p.xi = std::sqrt(g1 / g0);
    p.aux["gamma_0"] = g0;
    p.aux["gamma_1"] = g1;
    return p;
}

/// Two-site model of site j coupled to the pumped site only through gamma_j.
/// aux: density, density_approx (gamma_j^2 |Omega|^2 / (4 gamma_0^4)).
inline ModelPrediction direct_model(int j, const DissipationKernel& kernel, std::complex<double> omega,
                                    LogConvention convention = LogConvention::natural) {
    if (j == 0) throw InvalidSpec("direct model needs j != 0");
    const int aj = std::abs(j);
    const double g0 = kernel.rate(0), gj = kernel.rate(aj);
    if (!(g0 > std::abs(gj))) throw InvalidSpec("direct model needs gamma_0 > |gamma_j|");
    const double om2 = std::norm(omega);
    const double den = g0 * g0 - gj * gj;
    ModelPrediction p;
    p.model = ModelKind::direct;
    p.aux["density"] = gj * gj * om2 / (4.0 * den * den);
    p.aux["density_approx"] = gj * gj * om2 / (4.0 * g0 * g0 * g0 * g0);
    // gamma_{j+1}/gamma_j = f_{j+1}/f_j, defined also where both rates vanish.
    p.xi = detail::xi_from_ratio(kernel.geometric(aj + 1) / kernel.geometric(aj), convention);
    return p;
}

/// Pumped site fixed by its nearest neighbours, then acting as a drive on the pair (j, j+1).
/// aux: W0_re, W0_im, Wj_re, Wj_im, Wj1_re, Wj1_im, density_j, density_j1, omega_eff_j, omega_eff_j1.
inline ModelPrediction effective_drive_model(int j, const DissipationKernel& kernel, std::complex<double> omega,
                                             LogConvention convention = LogConvention::natural) {
    if (j < 2) throw InvalidSpec("effective drive model needs j >= 2");
    const double g0 = kernel.rate(0), g1 = kernel.rate(1);
    const double gj = kernel.untruncated_rate(j), gj1 = kernel.untruncated_rate(j + 1);
    const double pumped_den = g0 * g0 - 2.0 * g1 * g1;
    if (std::abs(pumped_den) <= 1e-14 * g0 * g0) throw DegenerateDenominator("gamma_0^2 = 2 gamma_1^2");
    const double pair_det = g0 * g0 - g1 * g1;
    if (std::abs(pair_det) <= 1e-14 * g0 * g0) throw DegenerateDenominator("gamma_0^2 = gamma_1^2");

    const cplx w0 = cplx(0.0, -1.0) * g0 * std::conj(omega) / (2.0 * pumped_den);
    const cplx wj = -w0 * (g0 * gj - g1 * gj1) / pair_det;
    const cplx wj1 = -w0 * (g0 * gj1 - g1 * gj) / pair_det;

    // Ratio in terms of f to stay finite at kappa = 1.
    const double e = detail::offdiagonal_scale(kernel);
    const double fj = kernel.geometric(j), fj1 = kernel.geometric(j + 1), f1 = kernel.geometric(1);
    const double num = g0 * fj + e * f1 * fj1;
    const double den = e * f1 * fj + g0 * fj1;
    if (std::abs(den) <= 1e-14 * std::abs(num) || num == 0.0) {
        throw DegenerateDenominator("gamma_1 gamma_j - gamma_0 gamma_{j+1} vanishes");
    }

    ModelPrediction p;
    p.model = ModelKind::effective_drive;
    p.xi = detail::xi_from_ratio(num / den, convention);
    p.aux["W0_re"] = w0.real();
    p.aux["W0_im"] = w0.imag();
    p.aux["Wj_re"] = wj.real();
    p.aux["Wj_im"] = wj.imag();
    p.aux["Wj1_re"] = wj1.real();
    p.aux["Wj1_im"] = wj1.imag();
    p.aux["density_j"] = std::norm(wj);
    p.aux["density_j1"] = std::norm(wj1);
    p.aux["omega_eff_j"] = g0 * gj * std::abs(omega) / pumped_den;
    p.aux["omega_eff_j1"] = g0 * gj1 * std::abs(omega) / pumped_den;
    return p;
}

} // namespace flatband
