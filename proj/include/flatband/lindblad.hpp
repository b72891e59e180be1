#pragma once

// Hard-core (at most one excitation per Wannier site) master equation on a short chain.
//
//   H = Delta sum n_i + (1/2) sum (Omega_i s_i + conj(Omega_i) s_i^dag)
//       + U1 sum n_i n_{i+1} + U2 sum n_i n_{i+2} + U3 sum (s_{i-1}^dag n_i s_{i+1} + h.c.)
//
// s_i lowers site i; operators on different sites commute. Loss and pump use the jump form of the
// rate windows, L(rho) = K rho + rho K^dag + sum_a 2 r_a L_a rho L_a^dag + sum_b 2 p_b L_b^dag rho L_b,
// K = -iH - sum_a r_a L_a^dag L_a - sum_b p_b L_b L_b^dag. The on-site term U0 vanishes identically
// in the hard-core space.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>

#include "flatband/errors.hpp"
#include "flatband/gaussian.hpp"
#include "flatband/interactions.hpp"
#include "flatband/kernel.hpp"
#include "flatband/wannier.hpp"

namespace flatband {

inline constexpr int max_dense_sites = 12;

struct TruncatedLindbladProblem {
    DissipationKernel kernel;
    int n_sites = 7;
    TruncatedCouplings couplings;          ///< absolute values, same units as the kernel rates
    DriveSpec drive;
    std::optional<WannierTable> table;     ///< needed for site pumps

    int center() const { return n_sites / 2; }

    void validate() const {
        if (n_sites < 1) throw InvalidSpec("n_sites must be >= 1");
        if (n_sites > max_dense_sites) {
            throw DimensionTooLarge("n_sites = " + std::to_string(n_sites) + " exceeds " +
                                    std::to_string(max_dense_sites));
        }
        if (n_sites % 2 == 0) throw InvalidSpec("n_sites must be odd so that the pumped site is central");
        drive.validate();
        for (const auto& [site, om] : drive.coherent) {
            if (std::abs(site) > center()) throw InvalidSpec("drive site " + std::to_string(site) + " outside the chain");
        }
        const bool pumped = std::any_of(drive.incoherent.begin(), drive.incoherent.end(),
                                        [](const SitePump& p) { return p.rate != 0.0; });
        if (pumped && !table) throw InvalidSpec("site pumps need a Wannier table");
        for (double u : {couplings.U0, couplings.U1, couplings.U2, couplings.U3}) {
            if (!std::isfinite(u)) throw InvalidSpec("interaction couplings must be finite");
        }
    }
};

struct LindbladOptions {
    std::size_t dense_limit = 1024;  ///< largest superoperator dimension solved by dense L^dag L
    double tolerance = 1e-13;        ///< iterative relative tolerance
    int max_iterations = 4000;
    int restart = 80;
    bool clip_rates = true;          ///< clip slightly negative kernel eigenvalues
};

using SparseC = Eigen::SparseMatrix<cplx>;

/// Operators of the chain and the generator pieces, in the 2^n occupation basis (bit i = site i).
class Liouvillian {
public:
    explicit Liouvillian(const TruncatedLindbladProblem& p, bool clip_rates = true) : problem_(p) {
        p.validate();
        n_ = p.n_sites;
        dim_ = Eigen::Index{1} << n_;
        build_site_operators();
        build_hamiltonian();
        build_jumps(clip_rates);
        SparseC k = cplx(0.0, -1.0) * hamiltonian_;
        for (std::size_t a = 0; a < loss_.size(); ++a) k -= loss_rates_[a] * SparseC(loss_[a].adjoint() * loss_[a]);
        for (std::size_t b = 0; b < gain_.size(); ++b) k -= gain_rates_[b] * SparseC(gain_[b] * gain_[b].adjoint());
        effective_ = Eigen::MatrixXcd(k);
    }

    const TruncatedLindbladProblem& problem() const noexcept { return problem_; }
    int n_sites() const noexcept { return n_; }
    Eigen::Index hilbert_dim() const noexcept { return dim_; }
    Eigen::Index dim() const noexcept { return dim_ * dim_; }

    const SparseC& lowering(int i) const { return lower_.at(static_cast<std::size_t>(i)); }
    const SparseC& number(int i) const { return number_.at(static_cast<std::size_t>(i)); }
    const SparseC& hamiltonian() const noexcept { return hamiltonian_; }
    const Eigen::MatrixXcd& effective() const noexcept { return effective_; }
    const std::vector<double>& loss_rates() const noexcept { return loss_rates_; }
    const std::vector<SparseC>& loss_operators() const noexcept { return loss_; }
    double min_kernel_eigenvalue() const noexcept { return min_kernel_eigenvalue_; }

    /// L(rho) for a d x d density matrix.
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const {
        Eigen::MatrixXcd out = effective_ * rho + rho * effective_.adjoint();
        for (std::size_t a = 0; a < loss_.size(); ++a) {
            const Eigen::MatrixXcd lr = loss_[a] * rho;
            out += (2.0 * loss_rates_[a]) * (lr * loss_[a].adjoint());
        }
        for (std::size_t b = 0; b < gain_.size(); ++b) {
            const SparseC up = gain_[b].adjoint();
            const Eigen::MatrixXcd ur = up * rho;
            out += (2.0 * gain_rates_[b]) * (ur * gain_[b]);
        }
        return out;
    }

    /// Column-major superoperator, vec(A rho B) = (B^T kron A) vec(rho).
    SparseC superoperator() const {
        const SparseC I = identity();
        const SparseC K(effective_.sparseView(0.0, 0.0));
        SparseC L = kron(I, K) + kron(SparseC(K.conjugate()), I);
        for (std::size_t a = 0; a < loss_.size(); ++a) {
            L += (2.0 * loss_rates_[a]) * kron(SparseC(loss_[a].conjugate()), loss_[a]);
        }
        for (std::size_t b = 0; b < gain_.size(); ++b) {
            L += (2.0 * gain_rates_[b]) * kron(SparseC(gain_[b].transpose()), SparseC(gain_[b].adjoint()));
        }
        L.prune(cplx(0.0, 0.0));
        return L;
    }

    Eigen::MatrixXcd dense() const {
        if (dim() > 4096) throw DimensionTooLarge("dense superoperator of dimension " + std::to_string(dim()));
        return Eigen::MatrixXcd(superoperator());
    }

    /// Norm scale used for residual acceptance: largest rate, coupling or drive amplitude.
    double scale() const {
        double s = problem_.kernel.reference_rate();
        for (double u : {problem_.couplings.U1, problem_.couplings.U2, problem_.couplings.U3}) s = std::max(s, std::abs(u));
        for (const auto& [site, om] : problem_.drive.coherent) s = std::max(s, std::abs(om));
        s = std::max(s, std::abs(problem_.drive.detuning));
        for (double p : gain_rates_) s = std::max(s, p);
        return s;
    }

    SparseC identity() const {
        SparseC I(dim_, dim_);
        I.setIdentity();
        return I;
    }

    static SparseC kron(const SparseC& A, const SparseC& B) {
        SparseC out(A.rows() * B.rows(), A.cols() * B.cols());
        std::vector<Eigen::Triplet<cplx>> t;
        t.reserve(static_cast<std::size_t>(A.nonZeros() * B.nonZeros()));
        for (int ka = 0; ka < A.outerSize(); ++ka)
            for (SparseC::InnerIterator ia(A, ka); ia; ++ia)
                for (int kb = 0; kb < B.outerSize(); ++kb)
                    for (SparseC::InnerIterator ib(B, kb); ib; ++ib)
                        t.emplace_back(static_cast<int>(ia.row() * B.rows() + ib.row()),
                                       static_cast<int>(ia.col() * B.cols() + ib.col()), ia.value() * ib.value());
        out.setFromTriplets(t.begin(), t.end());
        return out;
    }

private:
    void build_site_operators() {
        for (int i = 0; i < n_; ++i) {
            std::vector<Eigen::Triplet<cplx>> lo, nu;
            for (Eigen::Index s = 0; s < dim_; ++s) {
                if ((s >> i) & 1) {
                    lo.emplace_back(static_cast<int>(s & ~(Eigen::Index{1} << i)), static_cast<int>(s), 1.0);
                    nu.emplace_back(static_cast<int>(s), static_cast<int>(s), 1.0);
                }
            }
            SparseC l(dim_, dim_), n(dim_, dim_);
            l.setFromTriplets(lo.begin(), lo.end());
            n.setFromTriplets(nu.begin(), nu.end());
            lower_.push_back(l);
            number_.push_back(n);
        }
    }

    void build_hamiltonian() {
        const auto& p = problem_;
        SparseC h(dim_, dim_);
        for (int i = 0; i < n_; ++i) h += p.drive.detuning * number_[static_cast<std::size_t>(i)];
        for (const auto& [site, om] : p.drive.coherent) {
            const SparseC& s = lower_[static_cast<std::size_t>(site + p.center())];
            h += 0.5 * (om * s + std::conj(om) * SparseC(s.adjoint()));
        }
        for (int i = 0; i + 1 < n_; ++i) h += p.couplings.U1 * SparseC(number_[static_cast<std::size_t>(i)] * number_[static_cast<std::size_t>(i + 1)]);
        for (int i = 0; i + 2 < n_; ++i) h += p.couplings.U2 * SparseC(number_[static_cast<std::size_t>(i)] * number_[static_cast<std::size_t>(i + 2)]);
        for (int i = 1; i + 1 < n_; ++i) {
            const SparseC hop = SparseC(lower_[static_cast<std::size_t>(i - 1)].adjoint()) * number_[static_cast<std::size_t>(i)] * lower_[static_cast<std::size_t>(i + 1)];
            h += p.couplings.U3 * SparseC(hop + SparseC(hop.adjoint()));
        }
        h.prune(cplx(0.0, 0.0));
        hamiltonian_ = h;
    }

    SparseC combine(const Eigen::VectorXd& v) const {
        SparseC op(dim_, dim_);
        for (int j = 0; j < n_; ++j)
            if (v(j) != 0.0) op += v(j) * lower_[static_cast<std::size_t>(j)];
        return op;
    }

    void build_jumps(bool clip) {
        const auto& p = problem_;
        const Eigen::MatrixXd window = p.kernel.toeplitz(n_);
        const JumpDecomposition loss = decompose_rates(window, p.kernel.reference_rate(), clip);
        min_kernel_eigenvalue_ = loss.min_eigenvalue;
        for (const auto& j : loss.jumps) {
            if (j.rate == 0.0) continue;
            loss_rates_.push_back(j.rate);
            loss_.push_back(combine(j.coefficients));
        }
        const bool pumped = std::any_of(p.drive.incoherent.begin(), p.drive.incoherent.end(),
                                        [](const SitePump& s) { return s.rate != 0.0; });
        if (!pumped) return;
        const Eigen::MatrixXd G = pump_gain_matrix(p.drive.incoherent, *p.table, Geometry{p.center()});
        const JumpDecomposition gain = decompose_rates(G, std::max(G.cwiseAbs().maxCoeff(), 1e-300));
        for (const auto& j : gain.jumps) {
            if (j.rate <= 1e-14 * G.cwiseAbs().maxCoeff()) continue;
            gain_rates_.push_back(j.rate);
            gain_.push_back(combine(j.coefficients));
        }
    }

    TruncatedLindbladProblem problem_;
    int n_ = 0;
    Eigen::Index dim_ = 0;
    std::vector<SparseC> lower_, number_;
    SparseC hamiltonian_;
    std::vector<double> loss_rates_, gain_rates_;
    std::vector<SparseC> loss_, gain_;
    Eigen::MatrixXcd effective_;
    double min_kernel_eigenvalue_ = 0.0;
};

inline Liouvillian build_liouvillian(const TruncatedLindbladProblem& problem, bool clip_rates = true) {
    return Liouvillian(problem, clip_rates);
}

namespace detail {

// x -> vec(L(rho)) + mu tr(rho) vec(I/d): nonsingular when the steady state is unique.
class BorderedLiouvillian;

} // namespace detail
} // namespace flatband

namespace Eigen::internal {
template <>
struct traits<flatband::detail::BorderedLiouvillian> : public traits<Eigen::SparseMatrix<std::complex<double>>> {};
} // namespace Eigen::internal

namespace flatband::detail {

class BorderedLiouvillian : public Eigen::EigenBase<BorderedLiouvillian> {
public:
    using Scalar = cplx;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    BorderedLiouvillian(const Liouvillian& l, double mu) : l_(&l), mu_(mu) {}

    Eigen::Index rows() const { return l_->dim(); }
    Eigen::Index cols() const { return l_->dim(); }

    template <typename Rhs>
    Eigen::Product<BorderedLiouvillian, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<BorderedLiouvillian, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
        const Eigen::Index d = l_->hilbert_dim();
        const Eigen::Map<const Eigen::MatrixXcd> rho(x.data(), d, d);
        Eigen::MatrixXcd out = l_->apply(rho);
        out.diagonal().array() += mu_ * rho.trace() / static_cast<double>(d);
        return Eigen::Map<const Eigen::VectorXcd>(out.data(), out.size());
    }

private:
    const Liouvillian* l_;
    double mu_;
};

// Inverse of Y -> K_s Y + Y K_s^dag with K_s = K - s I, by Schur decomposition of K_s.
class SylvesterPreconditioner {
public:
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };

    SylvesterPreconditioner() = default;

    void setup(const Eigen::MatrixXcd& K, double shift) {
        Eigen::MatrixXcd ks = K;
        ks.diagonal().array() -= shift;
        Eigen::ComplexSchur<Eigen::MatrixXcd> schur(ks);
        U_ = schur.matrixU();
        T_ = schur.matrixT();
        d_ = K.rows();
    }

    template <typename M>
    SylvesterPreconditioner& analyzePattern(const M&) { return *this; }
    template <typename M>
    SylvesterPreconditioner& factorize(const M&) { return *this; }
    template <typename M>
    SylvesterPreconditioner& compute(const M&) { return *this; }

    Eigen::ComputationInfo info() const { return Eigen::Success; }

    template <typename Rhs>
    Eigen::VectorXcd solve(const Eigen::MatrixBase<Rhs>& b) const {
        const Eigen::VectorXcd bv = b;
        const Eigen::Map<const Eigen::MatrixXcd> B(bv.data(), d_, d_);
        Eigen::MatrixXcd Bt = U_.adjoint() * B * U_;
        Eigen::MatrixXcd Y(d_, d_);
        for (Eigen::Index j = d_ - 1; j >= 0; --j) {
            Eigen::VectorXcd rhs = Bt.col(j);
            for (Eigen::Index k = j + 1; k < d_; ++k) rhs -= std::conj(T_(j, k)) * Y.col(k);
            const cplx shift = std::conj(T_(j, j));
            for (Eigen::Index i = d_ - 1; i >= 0; --i) {
                cplx acc = rhs(i);
                for (Eigen::Index m = i + 1; m < d_; ++m) acc -= T_(i, m) * Y(m, j);
                Y(i, j) = acc / (T_(i, i) + shift);
            }
        }
        const Eigen::MatrixXcd out = U_ * Y * U_.adjoint();
        return Eigen::Map<const Eigen::VectorXcd>(out.data(), out.size());
    }

private:
    Eigen::MatrixXcd U_, T_;
    Eigen::Index d_ = 0;
};

} // namespace flatband::detail

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<flatband::detail::BorderedLiouvillian, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<flatband::detail::BorderedLiouvillian, Rhs,
                                generic_product_impl<flatband::detail::BorderedLiouvillian, Rhs>> {
    using Scalar = typename Product<flatband::detail::BorderedLiouvillian, Rhs>::Scalar;

    template <typename Dest>
    static void scaleAndAddTo(Dest& dst, const flatband::detail::BorderedLiouvillian& lhs, const Rhs& rhs,
                              const Scalar& alpha) {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
} // namespace Eigen::internal

namespace flatband {

struct DenseSteadyState {
    Eigen::MatrixXcd rho;
    Eigen::VectorXd densities;       ///< N_i, index 0 is the leftmost site
    Eigen::MatrixXcd correlations;   ///< <s_j^dag s_l>
    double residual = 0.0;           ///< ||L(rho)||_F
    double residual_scale = 1.0;     ///< acceptance scale for the residual
    double trace_error = 0.0;
    double min_eigenvalue = 0.0;
    double hermiticity_error = 0.0;
    double eigen_gap = std::numeric_limits<double>::quiet_NaN();  ///< dense path only
    std::string method;
    long iterations = 0;
    int center = 0;

    double density(int site) const { return densities(site + center); }

    bool valid(double trace_tol = 1e-10, double eig_tol = 1e-8, double res_tol = 1e-8) const {
        return trace_error <= trace_tol && min_eigenvalue >= -eig_tol && residual <= res_tol * residual_scale;
    }
};

namespace detail {

inline void fill_observables(const Liouvillian& L, DenseSteadyState& s) {
    const int n = L.n_sites();
    const Eigen::Index d = L.hilbert_dim();
    s.center = L.problem().center();
    s.densities.resize(n);
    s.correlations.resize(n, n);
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            // Tr(rho s_j^dag s_l) = sum over basis states t with site l occupied, target t' = s_j^dag s_l t
            cplx acc = 0.0;
            for (Eigen::Index t = 0; t < d; ++t) {
                if (!((t >> l) & 1)) continue;
                const Eigen::Index mid = t & ~(Eigen::Index{1} << l);
                if ((mid >> j) & 1) continue;
                const Eigen::Index out = mid | (Eigen::Index{1} << j);
                acc += s.rho(t, out);
            }
            s.correlations(j, l) = acc;
        }
        s.densities(j) = s.correlations(j, j).real();
    }
}

inline void finalize(const Liouvillian& L, Eigen::MatrixXcd rho, DenseSteadyState& s) {
    rho = 0.5 * (rho + rho.adjoint());
    const cplx tr = rho.trace();
    if (std::abs(tr) == 0.0) throw SteadyStateNotConverged("steady-state candidate has zero trace");
    rho /= tr;
    s.rho = rho;
    s.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
    s.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(rho, Eigen::EigenvaluesOnly);
    s.min_eigenvalue = eig.eigenvalues().minCoeff();
    s.residual = L.apply(rho).norm();
    s.residual_scale = L.scale();
    fill_observables(L, s);
}

} // namespace detail

inline constexpr double degenerate_gap = 1e-12;

/// Steady state: smallest eigenvector of L^dag L for small systems, otherwise GMRES on the
/// trace-bordered generator with a Sylvester preconditioner.
inline DenseSteadyState steady_state(const Liouvillian& L, const LindbladOptions& opts = {}) {
    DenseSteadyState s;
    const Eigen::Index d = L.hilbert_dim();
    if (static_cast<std::size_t>(L.dim()) <= opts.dense_limit) {
        const Eigen::MatrixXcd M = L.dense();
        const Eigen::MatrixXcd MtM = M.adjoint() * M;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(MtM);
        const double scale2 = std::max(1.0, L.scale() * L.scale());
        if (M.rows() > 1) {
            s.eigen_gap = eig.eigenvalues()(1) - eig.eigenvalues()(0);
            if (s.eigen_gap <= degenerate_gap * scale2) {
                throw DegenerateSteadyState("two smallest eigenvalues of L^dag L differ by " + std::to_string(s.eigen_gap));
            }
        }
        const Eigen::VectorXcd v = eig.eigenvectors().col(0);
        s.method = "dense";
        detail::finalize(L, Eigen::Map<const Eigen::MatrixXcd>(v.data(), d, d), s);
        return s;
    }
    const double mu = L.scale();
    detail::BorderedLiouvillian op(L, mu);
    Eigen::GMRES<detail::BorderedLiouvillian, detail::SylvesterPreconditioner> gmres;
    gmres.preconditioner().setup(L.effective(), L.problem().kernel.rate(0));
    gmres.compute(op);
    gmres.setTolerance(opts.tolerance);
    gmres.setMaxIterations(opts.max_iterations);
    gmres.set_restart(opts.restart);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(L.dim());
    for (Eigen::Index i = 0; i < d; ++i) rhs(i * d + i) = mu / static_cast<double>(d);
    const Eigen::VectorXcd x = gmres.solve(rhs);
    s.method = "gmres";
    s.iterations = static_cast<long>(gmres.iterations());
    detail::finalize(L, Eigen::Map<const Eigen::MatrixXcd>(x.data(), d, d), s);
    if (!(s.residual <= 1e-8 * s.residual_scale)) {
        throw SteadyStateNotConverged("GMRES stopped after " + std::to_string(s.iterations) + " iterations with residual " +
                                      std::to_string(s.residual));
    }
    return s;
}

inline DenseSteadyState steady_state(const TruncatedLindbladProblem& problem, const LindbladOptions& opts = {}) {
    return steady_state(build_liouvillian(problem, opts.clip_rates), opts);
}

/// f = sum_{i != 0} N_i / sum_i N_i.
inline double nonlocal_fraction(const DenseSteadyState& s) {
    const double total = s.densities.sum();
    if (!(total > 0.0)) throw ZeroTotalDensity("total density is " + std::to_string(total));
    return (total - s.density(0)) / total;
}

/// Moment-state view (first moments left at zero) so the Gaussian g1 and decay-length helpers apply.
inline MomentState as_moment_state(const DenseSteadyState& s) {
    Geometry geo{s.center};
    return {geo, Eigen::VectorXcd::Zero(geo.size()), s.correlations};
}

} // namespace flatband
