#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "flatband/approx_models.hpp"
#include "flatband/kernel.hpp"
#include "flatband/lattice.hpp"
#include "flatband/wannier.hpp"

using namespace flatband;

namespace {

// Composite Simpson on [-pi, pi], independent of the library quadrature.
template <class F>
double simpson_mean(F f, int n = 20000) {
    const double a = -std::numbers::pi, h = 2.0 * std::numbers::pi / n;
    double s = f(a) + f(-a);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0 / (2.0 * std::numbers::pi);
}

} // namespace

TEST(Lattice, SawtoothFlatBandAtSqrt2) {
    SawtoothSpec spec;
    for (double k : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
        EXPECT_NEAR(sawtooth_bands(spec, k).lower, flat_band_energy(spec), 1e-12);
    }
}

TEST(Lattice, SawtoothOffTuningIsNotFlat) {
    SawtoothSpec spec;
    spec.t_prime = 1.2;
    EXPECT_FALSE(spec.flat_band());
    EXPECT_THROW(flat_band_energy(spec), FlatBandViolation);
    EXPECT_GT(std::abs(sawtooth_bands(spec, 0.0).lower - sawtooth_bands(spec, 2.0).lower), 0.1);
}

TEST(Lattice, LiebDetunedBandsMatchEigenSolver) {
    LiebSpec spec;
    spec.omega_A = 0.3;
    spec.omega_B = -0.2;
    spec.omega_C = 0.5;
    spec.J = 0.7;
    spec.g = 1.1;
    for (double k : {0.0, 1.3, 2.9}) {
        Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
        h(0, 0) = spec.omega_A;
        h(1, 1) = spec.omega_B;
        h(2, 2) = spec.omega_C;
        h(0, 1) = spec.J * (1.0 + std::polar(1.0, k));
        h(1, 0) = std::conj(h(0, 1));
        h(0, 2) = h(2, 0) = spec.g;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> eig(h);
        const auto b = lieb_bands(spec, k);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(b.energies[i], eig.eigenvalues()(i), 1e-10);
        EXPECT_FALSE(b.flat_index.has_value());
    }
}

TEST(Lattice, LiebFlatBandWhenDegenerate) {
    LiebSpec spec;
    for (double k : {-2.0, 0.3, 1.7}) {
        const auto b = lieb_bands(spec, k);
        ASSERT_TRUE(b.flat_index.has_value());
        EXPECT_NEAR(b.energies[*b.flat_index], flat_band_energy(spec), 1e-10);
    }
}

TEST(Kernel, GeometricFactorsSatisfyRecurrence) {
    // (cos k + 2) F(k) = 1  =>  (f_{l+1} + f_{l-1}) / 2 + 2 f_l = delta_{l0}
    for (int l = -8; l <= 8; ++l) {
        const double lhs = 0.5 * (f_sawtooth(l + 1) + f_sawtooth(l - 1)) + 2.0 * f_sawtooth(l);
        EXPECT_NEAR(lhs, l == 0 ? 1.0 : 0.0, 1e-14) << l;
    }
}

TEST(Kernel, QuadratureMatchesIndependentSimpson) {
    for (int l : {0, 1, 4, 9}) {
        const double ref = simpson_mean([l](double k) { return std::cos(k * l) / (std::cos(k) + 2.0); });
        EXPECT_NEAR(f_numeric(l), ref, 1e-12);
    }
}

TEST(Kernel, RatesFromFormula) {
    const auto k = sawtooth_kernel(2.0, 0.3, 6);
    const double f0 = 1.0 / std::sqrt(3.0), f1 = (std::sqrt(3.0) - 2.0) / std::sqrt(3.0);
    EXPECT_NEAR(k.rate(0), 2.0 * (2.0 * f0 + f1 - 0.7 * f0), 1e-14);
    EXPECT_NEAR(k.rate(1), -2.0 * 0.7 * f1, 1e-14);
    EXPECT_EQ(k.rate(7), 0.0);
    EXPECT_EQ(k.rate(-3), k.rate(3));
}

TEST(Kernel, UniformLossIsLocal) {
    const auto k = sawtooth_kernel(1.0, 1.0);
    EXPECT_NEAR(k.rate(0), 1.0, 1e-14);
    for (int l = 1; l <= 10; ++l) EXPECT_EQ(k.rate(l), 0.0);
}

TEST(Kernel, SymbolMatchesBlochProjection) {
    // Sum_l gamma_l e^{ikl} = gamma_A [(2 f_0 + f_1) - (1 - kappa) / (cos k + 2)] for an untruncated kernel.
    const double kappa = 0.4;
    const auto kern = sawtooth_kernel(1.0, kappa, 40);
    for (double k : {0.0, 1.0, 2.5, std::numbers::pi}) {
        double sym = 0.0;
        for (int l = -40; l <= 40; ++l) sym += kern.rate(l) * std::cos(k * l);
        const double expect = (2.0 * f_sawtooth(0) + f_sawtooth(1)) - (1.0 - kappa) / (std::cos(k) + 2.0);
        EXPECT_NEAR(sym, expect, 1e-12);
    }
}

TEST(Kernel, InvalidArguments) {
    EXPECT_THROW(sawtooth_kernel(0.0, 0.5), InvalidSpec);
    EXPECT_THROW(sawtooth_kernel(1.0, -0.1), InvalidSpec);
    EXPECT_THROW(sawtooth_kernel(1.0, 0.5, 0), InvalidSpec);
    EXPECT_THROW(lieb_f(1, 0.0), InvalidSpec);
}

TEST(Kernel, JumpDecompositionReconstructsWindow) {
    const auto k = sawtooth_kernel(1.0, 0.2, 3);
    const auto jd = jump_decomposition(k, 9);
    EXPECT_GE(jd.min_eigenvalue, 0.0);
    EXPECT_LT((jd.reconstructed - k.toeplitz(9)).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& j : jd.jumps) EXPECT_NEAR(j.coefficients.norm(), 1.0, 1e-12);
    EXPECT_THROW(jump_decomposition(k, 5), InvalidSpec);
}

TEST(Kernel, NegativeWindowRejected) {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(decompose_rates(m, 1.0), KernelNotPositive);
    const auto raw = decompose_rates(m, 1.0, false);
    EXPECT_NEAR(raw.min_eigenvalue, -1.0, 1e-12);
}

TEST(Wannier, AutocorrelationEqualsGeometricFactor) {
    const auto t = sawtooth_wannier_table(16);
    for (int l = 0; l <= 5; ++l) EXPECT_NEAR(wannier_autocorrelation(t, Sublattice::B, l), f_sawtooth(l), 1e-10) << l;
}

TEST(Wannier, OrthonormalAndSymmetric) {
    const auto t = sawtooth_wannier_table(12);
    EXPECT_LT(orthogonality_defect(t).cwiseAbs().maxCoeff(), 1e-8);
    for (int r = 1; r <= 12; ++r) EXPECT_NEAR(t(Sublattice::B, r), t(Sublattice::B, -r), 1e-14);
    EXPECT_EQ(t(Sublattice::B, 40), 0.0);
    EXPECT_THROW(t.at(Sublattice::B, 13), std::out_of_range);
}

TEST(Wannier, MatchesSimpsonOracle) {
    for (int r : {0, 1, 3, 7}) {
        const double ref = -simpson_mean([r](double k) { return std::cos(k * r) / std::sqrt(std::cos(k) + 2.0); });
        EXPECT_NEAR(sawtooth_wannier(Sublattice::B, r), ref, 1e-11) << r;
    }
}

TEST(Wannier, TailDecaysAtFlatBandRate) {
    // w_B(r) ~ (2 - sqrt3)^r / sqrt(r) for large r.
    const auto t = sawtooth_wannier_table(16);
    const double ratio = std::abs(t(Sublattice::B, 13) / t(Sublattice::B, 12));
    EXPECT_NEAR(ratio, (2.0 - std::sqrt(3.0)) * std::sqrt(12.0 / 13.0), 2e-3);
}

TEST(Wannier, LiebTableOrthonormal) {
    const auto t = lieb_wannier_table(2.0, 12);
    EXPECT_LT(orthogonality_defect(t).cwiseAbs().maxCoeff(), 1e-8);
    for (int j = 0; j <= 4; ++j) EXPECT_NEAR(wannier_autocorrelation(t, Sublattice::B, j), lieb_f(j, 2.0), 1e-9);
}

TEST(Wannier, LiebRejectsSawtoothSublatticeA) {
    EXPECT_THROW(detail::require_sublattice(LatticeKind::lieb, Sublattice::A), InvalidSpec);
}

TEST(Lieb, ReducesToSawtoothAtAEqualsTwo) {
    for (int j = 0; j <= 5; ++j) EXPECT_NEAR(lieb_f(j, 2.0), f_sawtooth(j), 1e-12);
}

TEST(Lieb, SumRuleAndSimpsonOracle) {
    for (double a : {0.5, 3.0}) {
        for (int j = 0; j <= 4; ++j) {
            EXPECT_NEAR(lieb_f(j, a) + lieb_c_overlap(j, a), j == 0 ? 1.0 : 0.0, 1e-12);
            const double ref = simpson_mean([a, j](double k) {
                const double c = std::cos(k / 2.0);
                return std::cos(k * j) / (1.0 + a * c * c);
            });
            EXPECT_NEAR(lieb_f(j, a), ref, 1e-11);
        }
    }
}

TEST(ApproxModels, DirectDecayLengthClosedForm) {
    const double expect = 1.0 / (2.0 * std::log(2.0 + std::sqrt(3.0)));
    for (double kappa : {0.1, 0.6}) {
        const auto p = direct_model(3, sawtooth_kernel(1.0, kappa), {1.0, 0.0});
        EXPECT_NEAR(p.xi, expect, 1e-12);
    }
    const auto p10 = direct_model(3, sawtooth_kernel(1.0, 0.3), {1.0, 0.0}, LogConvention::log10);
    EXPECT_NEAR(p10.xi, 1.0 / (2.0 * std::log10(2.0 + std::sqrt(3.0))), 1e-12);
}

TEST(ApproxModels, DirectDensityFromTwoSiteSolve) {
    const auto k = sawtooth_kernel(1.0, 0.3);
    const double g0 = k.rate(0), g2 = k.rate(2);
    Eigen::Matrix2cd D;
    D << g0, g2, g2, g0;
    Eigen::Vector2cd s(cplx(0, -0.5) * 0.8, 0.0);
    const Eigen::Vector2cd w = D.lu().solve(s);
    EXPECT_NEAR(direct_model(2, k, {0.8, 0.0}).aux.at("density"), std::norm(w(1)), 1e-14);
}

TEST(ApproxModels, EffectiveDriveMatchesThreeSiteSolve) {
    const auto k = sawtooth_kernel(1.0, 0.5);
    const cplx omega(1.0, 0.0);
    Eigen::Matrix3cd D;
    D << k.rate(0), k.rate(1), 0.0, k.rate(1), k.rate(0), k.rate(1), 0.0, k.rate(1), k.rate(0);
    Eigen::Vector3cd s(0.0, cplx(0, -0.5) * std::conj(omega), 0.0);
    const Eigen::Vector3cd w = D.lu().solve(s);
    const auto p = effective_drive_model(4, k, omega);
    EXPECT_NEAR(p.aux.at("W0_re"), w(1).real(), 1e-14);
    EXPECT_NEAR(p.aux.at("W0_im"), w(1).imag(), 1e-14);
}

TEST(ApproxModels, EffectiveDriveFiniteAtUniformLoss) {
    const auto p = effective_drive_model(4, sawtooth_kernel(1.0, 1.0), {1.0, 0.0});
    EXPECT_NEAR(p.xi, 1.0 / (2.0 * std::log(2.0 + std::sqrt(3.0))), 1e-12);
    EXPECT_THROW(effective_drive_model(1, sawtooth_kernel(1.0, 0.5), {1.0, 0.0}), InvalidSpec);
}

TEST(ApproxModels, DiffusionShape) {
    const auto k = sawtooth_kernel(1.0, 0.2);
    EXPECT_NEAR(diffusion_xi_shape(k).xi, std::sqrt(k.rate(1) / k.rate(0)), 1e-15);
    EXPECT_THROW(diffusion_xi_shape(sawtooth_kernel(1.0, 1.5)), NegativeHoppingRate);
}
