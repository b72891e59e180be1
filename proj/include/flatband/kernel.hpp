#pragma once

// Non-local dissipation kernels gamma_l in the Wannier basis.
//
// Local losses gamma_A, gamma_B on the two sawtooth sublattices become a translation-invariant
// rate matrix Gamma_{j,j+l} = gamma_l between Wannier states. With kappa = gamma_B / gamma_A,
//
//   gamma_0 / gamma_A = (2 f_0 + f_1) - (1 - kappa) f_0,
//   gamma_l / gamma_A = -(1 - kappa) f_l            (l != 0),
//
// where f_l = (sqrt3 - 2)^|l| / sqrt3. The Lieb analogue is gamma_j / gamma_C =
// delta_{j0} - (1 - kappa') f_j(a), with f_j(a) given by a periodic integral.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flatband/errors.hpp"
#include "flatband/lattice.hpp"
#include "flatband/quadrature.hpp"

namespace flatband {

inline constexpr double sqrt3 = std::numbers::sqrt3;

/// f_l = (sqrt3 - 2)^|l| / sqrt3, closed form.
inline double f_sawtooth(int l) {
    return std::pow(sqrt3 - 2.0, std::abs(l)) / sqrt3;
}

/// f_l = (1/2pi) int cos(kl) / (cos k + 2) dk by quadrature.
inline double f_numeric(int l, const QuadratureOptions& opts = {}) {
    const double al = std::abs(static_cast<double>(l));
    auto f = [al](double k) { return std::cos(k * al) / (std::cos(k) + 2.0); };
    return quad::periodic_mean_checked(f, opts, "f_numeric(" + std::to_string(l) + ")").value;
}

/// Lieb geometric factor f_j(a) = (1/2pi) int cos(kj) / (1 + a cos^2(k/2)) dk, the B-sublattice
/// Wannier autocorrelation; equals the regularized hypergeometric 3F2~(1/2,1,1; 1+j,1-j; -a).
inline double lieb_f(int j, double a, const QuadratureOptions& opts = {}) {
    if (!(a > 0.0)) throw InvalidSpec("lieb_f needs a > 0");
    const double aj = std::abs(static_cast<double>(j));
    auto f = [a, aj](double k) {
        const double c = std::cos(k / 2.0);
        return std::cos(k * aj) / (1.0 + a * c * c);
    };
    return quad::periodic_mean_checked(f, opts, "lieb_f(" + std::to_string(j) + ")").value;
}

/// C-sublattice autocorrelation (1/2pi) int a cos^2(k/2) cos(kj) / (1 + a cos^2(k/2)) dk, equal to
/// (a/2) 3F2~(1,3/2,2; 2+j,2-j; -a). Together with lieb_f it sums to delta_{j0}.
inline double lieb_c_overlap(int j, double a, const QuadratureOptions& opts = {}) {
    if (!(a > 0.0)) throw InvalidSpec("lieb_c_overlap needs a > 0");
    const double aj = std::abs(static_cast<double>(j));
    auto f = [a, aj](double k) {
        const double c2 = a * std::cos(k / 2.0) * std::cos(k / 2.0);
        return c2 * std::cos(k * aj) / (1.0 + c2);
    };
    return quad::periodic_mean_checked(f, opts, "lieb_c_overlap(" + std::to_string(j) + ")").value;
}

/// Translation-invariant Wannier-basis dissipation kernel, truncated beyond `cutoff`.
class DissipationKernel {
public:
    /// `geometric[l]` holds f_l for 0 <= l <= cutoff + 1 (one past the cutoff is kept for the
    /// decay-length models); `reference_rate` is gamma_A (sawtooth) or gamma_C (Lieb).
    DissipationKernel(LatticeKind lattice, double reference_rate, double kappa, int cutoff,
                      std::vector<double> geometric, std::optional<double> lieb_a)
        : lattice_(lattice), reference_rate_(reference_rate), kappa_(kappa), cutoff_(cutoff),
          geometric_(std::move(geometric)), lieb_a_(lieb_a) {
        rates_.resize(static_cast<std::size_t>(cutoff_) + 1);
        for (int l = 0; l <= cutoff_; ++l) rates_[static_cast<std::size_t>(l)] = untruncated_rate(l);
    }

    LatticeKind lattice() const noexcept { return lattice_; }
    double reference_rate() const noexcept { return reference_rate_; }
    double gamma_A() const noexcept { return reference_rate_; }
    double kappa() const noexcept { return kappa_; }
    int cutoff() const noexcept { return cutoff_; }
    std::optional<double> lieb_a() const noexcept { return lieb_a_; }

    /// gamma_l; zero for |l| > cutoff.
    double rate(int l) const {
        const int al = std::abs(l);
        return al > cutoff_ ? 0.0 : rates_[static_cast<std::size_t>(al)];
    }

    /// gamma_l / reference rate.
    double relative_rate(int l) const { return rate(l) / reference_rate_; }

    /// Geometric factor f_l (not truncated at the cutoff, available up to cutoff + 1).
    double geometric(int l) const {
        const int al = std::abs(l);
        if (al >= static_cast<int>(geometric_.size())) {
            throw std::out_of_range("geometric factor l=" + std::to_string(l) + " not stored");
        }
        return geometric_[static_cast<std::size_t>(al)];
    }

    /// gamma_l as given by the kernel formula, ignoring the cutoff (|l| <= cutoff + 1).
    double untruncated_rate(int l) const {
        const int al = std::abs(l);
        const double f = geometric(al);
        if (lattice_ == LatticeKind::sawtooth) {
            if (al == 0) return reference_rate_ * ((2.0 * f + geometric(1)) - (1.0 - kappa_) * f);
            return -reference_rate_ * (1.0 - kappa_) * f;
        }
        return reference_rate_ * ((al == 0 ? 1.0 : 0.0) - (1.0 - kappa_) * f);
    }

    /// Toeplitz window Gamma_{ij} = gamma_{j-i} over `size` consecutive Wannier states.
    Eigen::MatrixXd toeplitz(int size) const {
        Eigen::MatrixXd m(size, size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) m(i, j) = rate(j - i);
        return m;
    }

private:
    LatticeKind lattice_;
    double reference_rate_;
    double kappa_;
    int cutoff_;
    std::vector<double> geometric_;
    std::optional<double> lieb_a_;
    std::vector<double> rates_;
};

namespace detail {

inline void validate_kernel_args(double reference_rate, double kappa, int cutoff) {
    if (!(reference_rate > 0.0)) throw InvalidSpec("reference dissipation rate must be > 0");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InvalidSpec("kappa must be finite and >= 0");
    if (cutoff < 1) throw InvalidSpec("kernel cutoff must be >= 1");
}

} // namespace detail

/// Sawtooth kernel from the closed-form geometric factors.
inline DissipationKernel sawtooth_kernel(double gamma_A, double kappa, int cutoff = 10) {
    detail::validate_kernel_args(gamma_A, kappa, cutoff);
    std::vector<double> f(static_cast<std::size_t>(std::max(cutoff, 1)) + 2);
    for (std::size_t l = 0; l < f.size(); ++l) f[l] = f_sawtooth(static_cast<int>(l));
    return DissipationKernel(LatticeKind::sawtooth, gamma_A, kappa, cutoff, std::move(f), std::nullopt);
}

/// Lieb kernel gamma_j / gamma_C = delta_{j0} - (1 - kappa') f_j(a), f_j(a) by quadrature.
inline DissipationKernel lieb_kernel(double gamma_C, double kappa_prime, double a, int cutoff = 10,
                                     const QuadratureOptions& opts = {}) {
    detail::validate_kernel_args(gamma_C, kappa_prime, cutoff);
    if (!(a > 0.0)) throw InvalidSpec("lieb parameter a must be positive");
    std::vector<double> f(static_cast<std::size_t>(cutoff) + 2);
    for (std::size_t l = 0; l < f.size(); ++l) f[l] = lieb_f(static_cast<int>(l), a, opts);
    return DissipationKernel(LatticeKind::lieb, gamma_C, kappa_prime, cutoff, std::move(f), a);
}

inline DissipationKernel lieb_kernel(double gamma_C, double kappa_prime, const LiebSpec& spec, int cutoff = 10,
                                     const QuadratureOptions& opts = {}) {
    spec.validate();
    if (!spec.flat_band()) throw FlatBandViolation("lieb kernel needs omega_B == omega_C");
    return lieb_kernel(gamma_C, kappa_prime, spec.a(), cutoff, opts);
}

struct Jump {
    double rate = 0.0;              ///< >= 0 after clipping
    Eigen::VectorXd coefficients;   ///< unit-norm Wannier-site amplitudes of the jump operator
};

struct JumpDecomposition {
    std::vector<Jump> jumps;
    double min_eigenvalue = 0.0;     ///< before clipping
    double clipped_change = 0.0;     ///< max |Gamma_clipped - Gamma| over the window
    Eigen::MatrixXd reconstructed;   ///< sum_a rate_a v_a v_a^T
};

/// Diagonal form of a symmetric rate matrix: sum_a r_a v_a v_a^T. Eigenvalues in [-tol, 0) are
/// clipped to zero (tol = 1e-8 * reference_rate); with `clip` false they are kept as they are.
inline JumpDecomposition decompose_rates(const Eigen::MatrixXd& rates, double reference_rate, bool clip = true) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rates);
    const double tol = 1e-8 * reference_rate;
    const auto n = rates.rows();
    JumpDecomposition out;
    out.min_eigenvalue = n > 0 ? eig.eigenvalues().minCoeff() : 0.0;
    if (clip && out.min_eigenvalue < -tol) {
        throw KernelNotPositive("rate window of size " + std::to_string(n) + " has eigenvalue " +
                                std::to_string(out.min_eigenvalue));
    }
    out.reconstructed = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const double r = clip ? std::max(0.0, eig.eigenvalues()(a)) : eig.eigenvalues()(a);
        const Eigen::VectorXd v = eig.eigenvectors().col(a);
        out.reconstructed += r * v * v.transpose();
        out.jumps.push_back({r, v});
    }
    out.clipped_change = n > 0 ? (out.reconstructed - rates).cwiseAbs().maxCoeff() : 0.0;
    return out;
}

/// Diagonalizes the Toeplitz window so the dissipator takes diagonal Lindblad form
/// sum_a r_a (2 L_a rho L_a^dag - {L_a^dag L_a, rho}) with L_a = sum_j v_{a,j} W_j.
inline JumpDecomposition jump_decomposition(const DissipationKernel& kernel, int window_size) {
    if (window_size < 2 * kernel.cutoff() + 1) {
        throw InvalidSpec("jump window " + std::to_string(window_size) + " smaller than 2*cutoff+1 = " +
                          std::to_string(2 * kernel.cutoff() + 1));
    }
    return decompose_rates(kernel.toeplitz(window_size), kernel.reference_rate());
}

} // namespace flatband
