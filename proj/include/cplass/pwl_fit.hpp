#pragma once

// Continuous piecewise-linear least squares on the hinge basis
//   [1, t, (t - tau_1)_+, ..., (t - tau_{k-1})_+].
// Time in the design is measured from the trajectory origin t0.

#include "cplass/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

namespace cplass {

template <typename Scalar>
using DesignMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Fits whose smallest |R_ii| falls below this fraction of the largest are degenerate.
inline constexpr double kRankTolerance = 1e-10;

/// Design matrix for arbitrary changepoint times (absolute, strictly increasing, inside (t0, t0+T)).
template <typename Scalar>
DesignMatrix<Scalar> build_design(const BasicTrajectory<Scalar>& traj, const std::vector<Scalar>& taus) {
    const Index n = traj.size();
    for (std::size_t j = 0; j < taus.size(); ++j) {
        if (!(taus[j] > traj.t0() && taus[j] < traj.t0() + traj.duration()))
            throw InvalidChangepoints("changepoint time outside (t0, t0 + T)");
        if (j > 0 && !(taus[j] > taus[j - 1])) throw InvalidChangepoints("changepoint times must be strictly increasing");
    }
    DesignMatrix<Scalar> X(n, static_cast<Index>(taus.size()) + 2);
    for (Index i = 0; i < n; ++i) {
        const Scalar t = traj.time(i + 1);
        X(i, 0) = Scalar(1);
        X(i, 1) = traj.local_time(i + 1);
        for (std::size_t j = 0; j < taus.size(); ++j)
            X(i, static_cast<Index>(j) + 2) = t > taus[j] ? t - taus[j] : Scalar(0);
    }
    return X;
}

/// Design matrix for grid changepoints; hinge entries are formed as (i - M_j) * dt.
template <typename Scalar>
DesignMatrix<Scalar> build_design(const BasicTrajectory<Scalar>& traj, const ChangepointVector& r) {
    if (r.n() != traj.size()) throw DimensionMismatch("changepoint vector length does not match trajectory");
    const Index n = traj.size();
    const auto& idx = r.indices();
    DesignMatrix<Scalar> X = DesignMatrix<Scalar>::Zero(n, r.count() + 2);
    X.col(0).setOnes();
    for (Index i = 0; i < n; ++i) X(i, 1) = traj.local_time(i + 1);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Index c = static_cast<Index>(j) + 2;
        for (Index i = idx[j] + 1; i <= n; ++i) X(i - 1, c) = Scalar(i - idx[j]) * traj.dt();
    }
    return X;
}

namespace detail {

template <typename Scalar>
BasicSegmentation<Scalar> assemble(const BasicTrajectory<Scalar>& traj, const ChangepointVector& r,
                                   const DesignMatrix<Scalar>& coef, Scalar rss) {
    using Seg = BasicSegmentation<Scalar>;
    Seg seg;
    seg.n = traj.size();
    seg.d = traj.dims();
    seg.dt = traj.dt();
    seg.t0 = traj.t0();
    seg.change_indices = r.indices();
    seg.tau = cp_vector_to_times<Scalar>(r, traj.dt(), traj.t0());
    const Index k = r.segments();
    seg.intercept = coef.row(0).transpose();
    seg.W = coef.bottomRows(k);
    seg.V.resize(k, seg.d);
    seg.V.row(0) = seg.W.row(0);
    for (Index j = 1; j < k; ++j) seg.V.row(j) = seg.V.row(j - 1) + seg.W.row(j);
    seg.speeds = seg.V.rowwise().norm();
    seg.durations.resize(k);
    Index prev = 0;
    for (Index j = 0; j < k; ++j) {
        const Index next = j + 1 < k ? r.indices()[static_cast<std::size_t>(j)] : seg.n;
        seg.durations(j) = Scalar(next - prev) * traj.dt();
        prev = next;
    }
    seg.rss = rss;
    seg.sigma2_hat = rss / Scalar(seg.d * seg.n);
    return seg;
}

}  // namespace detail

/// Least-squares fit for the given changepoints, or nullopt when the design is degenerate.
/// One column-pivoted Householder factorization serves all d dimensions.
template <typename Scalar>
std::optional<BasicSegmentation<Scalar>> try_fit(const BasicTrajectory<Scalar>& traj, const ChangepointVector& r) {
    if (r.n() != traj.size()) throw DimensionMismatch("changepoint vector length does not match trajectory");
    if (traj.size() < r.segments() + 1) return std::nullopt;

    const DesignMatrix<Scalar> X = build_design(traj, r);
    const Eigen::ColPivHouseholderQR<DesignMatrix<Scalar>> qr(X);
    const auto diag = qr.matrixQR().diagonal().cwiseAbs();
    const Scalar largest = diag.maxCoeff();
    if (!(largest > Scalar(0)) || diag.minCoeff() < Scalar(kRankTolerance) * largest) return std::nullopt;

    const auto& Y = traj.positions();
    const DesignMatrix<Scalar> coef = qr.solve(Y);
    const Scalar rss = (Y - X * coef).squaredNorm();
    return detail::assemble(traj, r, coef, rss);
}

/// Exact continuous piecewise-linear MLE given the changepoints. Throws DegenerateFit.
template <typename Scalar>
BasicSegmentation<Scalar> fit_given_changepoints(const BasicTrajectory<Scalar>& traj, const ChangepointVector& r) {
    auto fit = try_fit(traj, r);
    if (!fit) throw DegenerateFit("hinge design is rank deficient for the given changepoints");
    return std::move(*fit);
}

/// Same least-squares problem solved on the equivalent knot-value basis: the fit is the
/// linear interpolant of its values at 0, M_1, ..., M_{k-1}, n (grid indices). The Gram
/// matrix of that basis is tridiagonal and its entries have closed forms, so with prefix
/// sums of the data a fit costs O(n d) for the residuals plus O(k d) for the solve,
/// instead of O(n k^2) for the QR route. RSS is always taken from explicit residuals.
/// Holds scratch buffers, so one instance per thread.
template <typename Scalar>
class KnotFitter {
public:
    explicit KnotFitter(const BasicTrajectory<Scalar>& traj) : traj_(&traj) {
        const Index n = traj.size(), d = traj.dims();
        s0_ = Acc::Zero(n + 1, d);
        s1_ = Acc::Zero(n + 1, d);
        const auto& Y = traj.positions();
        for (Index i = 1; i <= n; ++i) {
            for (Index c = 0; c < d; ++c) {
                const long double y = static_cast<long double>(Y(i - 1, c));
                s0_(i, c) = s0_(i - 1, c) + y;
                s1_(i, c) = s1_(i - 1, c) + static_cast<long double>(i) * y;
            }
        }
    }

    const BasicTrajectory<Scalar>& trajectory() const { return *traj_; }

    /// Knot values ((k+1) x d) and RSS, or nullopt when the fit is degenerate.
    std::optional<std::pair<RowMatrix<Scalar>, Scalar>> solve(const ChangepointVector& r) const {
        const Index n = traj_->size(), d = traj_->dims();
        if (r.n() != n) throw DimensionMismatch("changepoint vector length does not match trajectory");
        const Index k = r.segments();
        if (n < k + 1) return std::nullopt;
        knots_.resize(static_cast<std::size_t>(k) + 1);
        knots_[0] = 0;
        for (Index j = 1; j < k; ++j) knots_[static_cast<std::size_t>(j)] = r.indices()[static_cast<std::size_t>(j - 1)];
        knots_[static_cast<std::size_t>(k)] = n;

        // diag / off-diagonal of the Gram matrix and the right-hand side
        diag_.assign(static_cast<std::size_t>(k) + 1, 0.0L);
        off_.assign(static_cast<std::size_t>(k), 0.0L);
        rhs_.resize(k + 1, d);
        rhs_.setZero();
        for (Index j = 0; j < k; ++j) {
            const Index a = knots_[static_cast<std::size_t>(j)], b = knots_[static_cast<std::size_t>(j) + 1];
            const long double L = static_cast<long double>(b - a);
            const long double su = (L + 1) / 2;                      // sum of u
            const long double su2 = (L + 1) * (2 * L + 1) / (6 * L); // sum of u^2
            diag_[static_cast<std::size_t>(j)] += L - 2 * su + su2;
            off_[static_cast<std::size_t>(j)] = su - su2;
            diag_[static_cast<std::size_t>(j) + 1] += su2;
            for (Index c = 0; c < d; ++c) {
                const long double sy = s0_(b, c) - s0_(a, c);
                const long double suy = (s1_(b, c) - s1_(a, c) - static_cast<long double>(a) * sy) / L;
                rhs_(j, c) += sy - suy;
                rhs_(j + 1, c) += suy;
            }
        }
        long double largest = 0;
        for (auto v : diag_) largest = std::max(largest, v);
        // LDL^T of the tridiagonal system
        for (Index j = 0; j <= k; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (j > 0) {
                const long double l = off_[jj - 1] / diag_[jj - 1];
                diag_[jj] -= l * off_[jj - 1];
                for (Index c = 0; c < d; ++c) rhs_(j, c) -= l * rhs_(j - 1, c);
            }
            if (!(diag_[jj] > static_cast<long double>(kRankTolerance) * largest)) return std::nullopt;
        }
        RowMatrix<Scalar> coef(k + 1, d);
        for (Index j = k; j >= 0; --j) {
            const auto jj = static_cast<std::size_t>(j);
            for (Index c = 0; c < d; ++c) {
                long double v = rhs_(j, c);
                if (j < k) v -= off_[jj] * static_cast<long double>(coef(j + 1, c));
                coef(j, c) = static_cast<Scalar>(v / diag_[jj]);
            }
        }
        const auto& Y = traj_->positions();
        Scalar rss(0);
        for (Index j = 0; j < k; ++j) {
            const Index a = knots_[static_cast<std::size_t>(j)], b = knots_[static_cast<std::size_t>(j) + 1];
            const Scalar inv = Scalar(1) / Scalar(b - a);
            for (Index i = a + 1; i <= b; ++i) {
                const Scalar u = Scalar(i - a) * inv;
                for (Index c = 0; c < d; ++c) {
                    const Scalar e = Y(i - 1, c) - (coef(j, c) + u * (coef(j + 1, c) - coef(j, c)));
                    rss += e * e;
                }
            }
        }
        return std::make_pair(std::move(coef), rss);
    }

    std::optional<BasicSegmentation<Scalar>> fit(const ChangepointVector& r) const {
        auto sol = solve(r);
        if (!sol) return std::nullopt;
        const auto& [c, rss] = *sol;
        const Index k = r.segments(), d = traj_->dims();
        DesignMatrix<Scalar> coef(k + 1, d);
        coef.row(0) = c.row(0);
        for (Index j = 0; j < k; ++j) {
            const Scalar len = Scalar(knots_[static_cast<std::size_t>(j) + 1] - knots_[static_cast<std::size_t>(j)]) * traj_->dt();
            coef.row(j + 1) = (c.row(j + 1) - c.row(j)) / len;
        }
        for (Index j = k; j > 1; --j) coef.row(j) -= coef.row(j - 1);
        return detail::assemble(*traj_, r, coef, rss);
    }

private:
    using Acc = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const BasicTrajectory<Scalar>* traj_;
    Acc s0_, s1_;
    mutable std::vector<Index> knots_;
    mutable std::vector<long double> diag_, off_;
    mutable Acc rhs_;
};

/// Fitted signal at every observation time, n x d.
template <typename Scalar>
RowMatrix<Scalar> fitted_values(const BasicTrajectory<Scalar>& traj, const BasicSegmentation<Scalar>& seg) {
    if (seg.n != traj.size() || seg.d != traj.dims())
        throw DimensionMismatch("segmentation does not match trajectory");
    const DesignMatrix<Scalar> X = build_design(traj, seg.tau);
    DesignMatrix<Scalar> coef(seg.segments() + 1, seg.d);
    coef.row(0) = seg.intercept.transpose();
    coef.bottomRows(seg.segments()) = seg.W;
    return X * coef;
}

/// Residual sum of squares of a segmentation against the trajectory.
template <typename Scalar>
Scalar rss_of(const BasicTrajectory<Scalar>& traj, const BasicSegmentation<Scalar>& seg) {
    if (std::abs(static_cast<double>(seg.dt - traj.dt())) > 1e-12 * static_cast<double>(traj.dt()))
        throw DimensionMismatch("segmentation grid does not match trajectory");
    return (traj.positions() - fitted_values(traj, seg)).squaredNorm();
}

}  // namespace cplass
