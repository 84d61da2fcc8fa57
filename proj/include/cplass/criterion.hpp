#pragma once

#include "cplass/pwl_fit.hpp"
#include "cplass/types.hpp"

#include <optional>
#include <span>

namespace cplass {

/// Decomposition of score(r) = -(nd/2) log RSS - (log n)^gamma * rho - sum_j h(s_j - s_cap).
/// Logarithms are natural. A degenerate fit has total = -inf and the other terms NaN.
struct ScoreBreakdown {
    double log_rss_term = kMinusInfinity;
    double ssic_term = 0.0;
    double speed_term = 0.0;
    double total = kMinusInfinity;
    Index rho = 0;

    bool degenerate() const { return total == kMinusInfinity; }
};

/// RSS values below this are clamped before taking the log (noiseless data only).
inline constexpr double kMinRss = 1e-300;

/// Relative part of the RSS floor: RSS is clamped to at least this times sum(y^2), about
/// the size of the rounding error of any fit. Without it, rounding noise on on-model data
/// decides between equally perfect fits.
inline constexpr double kRelativeRssFloor = 1e4 * 0x1p-52 * 0x1p-52;

/// max(kMinRss, kRelativeRssFloor * sum of squared positions).
double rss_floor(const Trajectory& traj);

/// (log n)^gamma * rho with rho = d(|r|+2)+1.
double ssic_penalty(Index n, Index d, Index num_changepoints, double gamma);

/// Sum of max(0, s_j - s_cap), scaled by the configured weight; 0 when the speed penalty is off.
double speed_penalty(std::span<const double> speeds, const ScoreConfig& cfg);

/// pen(r). Throws DimensionMismatch unless speeds.size() == |r| + 1.
double penalty(const ChangepointVector& r, std::span<const double> speeds, const ScoreConfig& cfg, Index n, Index d);

/// Criterion of an already fitted segmentation.
ScoreBreakdown score_of_fit(const Segmentation& fit, const ScoreConfig& cfg, double min_rss = kMinRss);

/// Fits (traj, r) and evaluates the criterion; degenerate fits give total = -inf.
ScoreBreakdown score(const Trajectory& traj, const ChangepointVector& r, const ScoreConfig& cfg);

struct ScoredFit {
    ScoreBreakdown breakdown;
    std::optional<Segmentation> fit;
};

ScoredFit score_with_fit(const Trajectory& traj, const ChangepointVector& r, const ScoreConfig& cfg);

/// Repeated scoring of one trajectory (prefix sums are built once). One per thread.
class Scorer {
public:
    Scorer(const Trajectory& traj, const ScoreConfig& cfg) : fitter_(traj), cfg_(cfg), floor_(rss_floor(traj)) {
        cfg_.validate();
    }

    ScoreBreakdown operator()(const ChangepointVector& r) const { return scored(r).breakdown; }
    ScoredFit scored(const ChangepointVector& r) const;

    const ScoreConfig& config() const { return cfg_; }
    const Trajectory& trajectory() const { return fitter_.trajectory(); }

private:
    KnotFitter<double> fitter_;
    ScoreConfig cfg_;
    double floor_;
};

}  // namespace cplass
