#pragma once

// Shared domain types. Units are seconds and micrometres throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cplass {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidChangepoints : public Error {
public:
    using Error::Error;
};

/// The hinge design is numerically rank deficient for the requested changepoints.
class DegenerateFit : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Trajectory

/// Positions observed on the uniform grid t_i = t0 + i*dt, i = 1..n.
/// Row i-1 of `positions()` holds the d coordinates observed at t_i.
template <typename Scalar>
class BasicTrajectory {
public:
    using Matrix = RowMatrix<Scalar>;

    BasicTrajectory() = default;

    BasicTrajectory(Scalar dt, Matrix positions, Scalar t0 = Scalar(0))
        : dt_(dt), t0_(t0), positions_(std::move(positions)) {
        if (!(dt_ > Scalar(0)) || !std::isfinite(static_cast<double>(dt_)))
            throw InvalidArgument("trajectory: dt must be positive and finite");
        if (positions_.rows() < 2)
            throw InvalidArgument("trajectory: need at least 2 observations");
        if (positions_.cols() < 1)
            throw InvalidArgument("trajectory: need at least 1 dimension");
        if (!positions_.allFinite())
            throw InvalidArgument("trajectory: positions must be finite");
    }

    Index size() const { return positions_.rows(); }
    Index dims() const { return positions_.cols(); }
    Scalar dt() const { return dt_; }
    Scalar t0() const { return t0_; }
    const Matrix& positions() const { return positions_; }

    /// Observation time t_i for 1-based index i.
    Scalar time(Index i) const { return t0_ + Scalar(i) * dt_; }
    /// Time measured from the origin t0, i.e. i*dt.
    Scalar local_time(Index i) const { return Scalar(i) * dt_; }
    /// Total duration T = n*dt.
    Scalar duration() const { return Scalar(size()) * dt_; }

    template <typename Other>
    BasicTrajectory<Other> cast() const {
        return BasicTrajectory<Other>(Other(dt_), positions_.template cast<Other>(), Other(t0_));
    }

private:
    Scalar dt_{1};
    Scalar t0_{0};
    Matrix positions_;
};

using Trajectory = BasicTrajectory<double>;

// ---------------------------------------------------------------------------
// ChangepointVector

/// Binary vector r of length n-1 stored as its sorted set of 1-based indices.
/// Index i set means the velocity changes at t_i, between observations i and i+1.
class ChangepointVector {
public:
    ChangepointVector() = default;

    explicit ChangepointVector(Index n) : n_(n) {
        if (n < 2) throw InvalidArgument("changepoint vector: n must be >= 2");
    }

    ChangepointVector(Index n, std::vector<Index> indices) : ChangepointVector(n) {
        std::sort(indices.begin(), indices.end());
        for (std::size_t j = 0; j < indices.size(); ++j) {
            if (indices[j] < 1 || indices[j] > n - 1)
                throw InvalidChangepoints("changepoint index out of range [1, n-1]");
            if (j > 0 && indices[j] == indices[j - 1])
                throw InvalidChangepoints("duplicate changepoint index");
        }
        indices_ = std::move(indices);
    }

    static ChangepointVector from_bits(const std::vector<bool>& bits) {
        ChangepointVector r(static_cast<Index>(bits.size()) + 1);
        for (std::size_t b = 0; b < bits.size(); ++b)
            if (bits[b]) r.indices_.push_back(static_cast<Index>(b) + 1);
        return r;
    }

    /// Bits r_1..r_{n-1} (element b holds r_{b+1}).
    std::vector<bool> to_bits() const {
        std::vector<bool> bits(static_cast<std::size_t>(n_ - 1), false);
        for (Index i : indices_) bits[static_cast<std::size_t>(i - 1)] = true;
        return bits;
    }

    Index n() const { return n_; }
    /// Number of slots, n - 1.
    Index slots() const { return n_ - 1; }
    /// |r|.
    Index count() const { return static_cast<Index>(indices_.size()); }
    /// Number of clear slots, n - 1 - |r|.
    Index free_count() const { return slots() - count(); }
    /// k = |r| + 1.
    Index segments() const { return count() + 1; }
    bool empty() const { return indices_.empty(); }

    /// Sorted changepoint indices M_1 < ... < M_{|r|}.
    const std::vector<Index>& indices() const { return indices_; }

    bool test(Index i) const { return std::binary_search(indices_.begin(), indices_.end(), i); }

    void set(Index i) {
        check_slot(i);
        auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
        if (it == indices_.end() || *it != i) indices_.insert(it, i);
    }

    void reset(Index i) {
        check_slot(i);
        auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
        if (it != indices_.end() && *it == i) indices_.erase(it);
    }

    void flip(Index i) { test(i) ? reset(i) : set(i); }

    /// The q-th clear slot (0-based q), in increasing order.
    Index free_slot(Index q) const {
        Index candidate = q + 1;
        for (Index m : indices_) {
            if (m <= candidate)
                ++candidate;
            else
                break;
        }
        return candidate;
    }

    /// Segment lengths d_j = M_j - M_{j-1} with M_0 = 0 and M_k = n.
    std::vector<Index> segment_lengths() const {
        std::vector<Index> lengths;
        lengths.reserve(indices_.size() + 1);
        Index prev = 0;
        for (Index m : indices_) {
            lengths.push_back(m - prev);
            prev = m;
        }
        lengths.push_back(n_ - prev);
        return lengths;
    }

    friend bool operator==(const ChangepointVector&, const ChangepointVector&) = default;

private:
    void check_slot(Index i) const {
        if (i < 1 || i > n_ - 1) throw InvalidChangepoints("changepoint index out of range [1, n-1]");
    }

    Index n_ = 2;
    std::vector<Index> indices_;
};

struct ChangepointVectorHash {
    std::size_t operator()(const ChangepointVector& r) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(r.n());
        for (Index i : r.indices()) {
            h ^= static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

/// Changepoint times tau_j = t0 + M_j * dt.
template <typename Scalar = double>
std::vector<Scalar> cp_vector_to_times(const ChangepointVector& r, Scalar dt, Scalar t0 = Scalar(0)) {
    std::vector<Scalar> taus;
    taus.reserve(r.indices().size());
    for (Index m : r.indices()) taus.push_back(t0 + Scalar(m) * dt);
    return taus;
}

/// Inverse of cp_vector_to_times for times on (or within half a step of) the grid.
template <typename Scalar = double>
ChangepointVector times_to_cp_vector(const std::vector<Scalar>& taus, Index n, Scalar dt, Scalar t0 = Scalar(0)) {
    std::vector<Index> idx;
    idx.reserve(taus.size());
    for (Scalar tau : taus) idx.push_back(static_cast<Index>(std::llround(static_cast<double>((tau - t0) / dt))));
    return ChangepointVector(n, std::move(idx));
}

/// rho = d(k+1)+1, the parameter count of a k-segment model in d dimensions.
constexpr Index parameter_count(Index num_changepoints, Index dims) { return dims * (num_changepoints + 2) + 1; }

// ---------------------------------------------------------------------------
// Segmentation

/// Continuous piecewise-linear fit. Segment j runs from tau_{j-1} to tau_j
/// with tau_0 = t0 and tau_k = t0 + n*dt.
template <typename Scalar>
struct BasicSegmentation {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = RowMatrix<Scalar>;

    Index n = 0;
    Index d = 0;
    Scalar dt{0};
    Scalar t0{0};
    std::vector<Index> change_indices;
    std::vector<Scalar> tau;
    Vector intercept;   // anchor at t0
    Matrix W;           // k x d velocity differences, W.row(0) = V.row(0)
    Matrix V;           // k x d segment velocities
    Vector speeds;      // ||V_j||
    Vector durations;   // seconds
    Scalar rss{0};
    Scalar sigma2_hat{0};

    Index segments() const { return V.rows(); }
    Index num_changepoints() const { return static_cast<Index>(tau.size()); }
    Scalar total_time() const { return Scalar(n) * dt; }

    ChangepointVector changepoints() const { return ChangepointVector(n, change_indices); }

    /// Boundary times tau_0..tau_k.
    std::vector<Scalar> boundaries() const {
        std::vector<Scalar> b;
        b.reserve(tau.size() + 2);
        b.push_back(t0);
        b.insert(b.end(), tau.begin(), tau.end());
        b.push_back(t0 + total_time());
        return b;
    }

    /// Anchor location at the start of every segment (recursive anchor formula).
    Matrix segment_anchors() const {
        Matrix a(segments(), d);
        const auto b = boundaries();
        a.row(0) = intercept.transpose();
        for (Index j = 1; j < segments(); ++j)
            a.row(j) = a.row(j - 1) + V.row(j - 1) * (b[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j - 1)]);
        return a;
    }

    /// Signal value at time t evaluated with the formula of segment j (0-based).
    Vector signal_in_segment(Index j, Scalar t) const {
        const auto b = boundaries();
        const Matrix a = segment_anchors();
        return (a.row(j) + V.row(j) * (t - b[static_cast<std::size_t>(j)])).transpose();
    }

    /// Signal value at time t (the segment containing t, left-closed).
    Vector signal(Scalar t) const {
        Index j = 0;
        while (j + 1 < segments() && t > tau[static_cast<std::size_t>(j)]) ++j;
        return signal_in_segment(j, t);
    }
};

using Segmentation = BasicSegmentation<double>;

// ---------------------------------------------------------------------------
// Configuration

struct ScoreConfig {
    double gamma = 1.01;
    double s_cap = 5.0;
    bool speed_penalty_enabled = true;
    /// Multiplier on the speed hinge. Anything other than 1 departs from the criterion.
    double speed_penalty_weight = 1.0;
    std::optional<Index> k_max;

    void validate() const {
        if (!(gamma > 1.0)) throw InvalidArgument("score config: gamma must be > 1");
        if (!(s_cap > 0.0)) throw InvalidArgument("score config: s_cap must be > 0");
        if (!(speed_penalty_weight >= 0.0)) throw InvalidArgument("score config: speed penalty weight must be >= 0");
        if (k_max && *k_max < 1) throw InvalidArgument("score config: k_max must be >= 1");
    }
};

struct McmcConfig {
    double lambda = 1.0;
    double u1 = 0.25;
    double u2 = 0.375;
    double u3 = 0.5;
    std::int64_t t_max = 20000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lambda > 0.0)) throw InvalidArgument("mcmc config: lambda must be > 0");
        if (!(0.0 < u1 && u1 < u2 && u2 < u3 && u3 < 1.0))
            throw InvalidArgument("mcmc config: need 0 < u1 < u2 < u3 < 1");
        if (t_max < 1) throw InvalidArgument("mcmc config: t_max must be >= 1");
    }

    /// Iteration budget guidance for a path of n observations.
    static std::int64_t recommended_iterations(Index n) {
        return std::max<std::int64_t>(20000, 100 * static_cast<std::int64_t>(n));
    }
};

// ---------------------------------------------------------------------------
// Chain trace

enum class ProposalKind : int { Initial = 0, New = 1, BirthDeath = 2, SegmentBD = 3, Shift = 4 };

struct IterationRecord {
    std::int64_t iteration = 0;
    double score = kMinusInfinity;
    bool accepted = false;
    ProposalKind kind = ProposalKind::Initial;
    Index num_changepoints = 0;
};

struct ChainTrace {
    std::vector<IterationRecord> records;
    ChangepointVector best_r;
    double best_score = kMinusInfinity;
    std::int64_t best_iteration = 0;
};

}  // namespace cplass
