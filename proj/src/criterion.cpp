#include "cplass/criterion.hpp"

#include "cplass/pwl_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cplass {

double ssic_penalty(Index n, Index d, Index num_changepoints, double gamma) {
    if (n < 2) throw InvalidArgument("ssic penalty: n must be >= 2");
    return std::pow(std::log(static_cast<double>(n)), gamma) * static_cast<double>(parameter_count(num_changepoints, d));
}

double speed_penalty(std::span<const double> speeds, const ScoreConfig& cfg) {
    if (!cfg.speed_penalty_enabled) return 0.0;
    double total = 0.0;
    for (double s : speeds) total += std::max(0.0, s - cfg.s_cap);
    return cfg.speed_penalty_weight * total;
}

double penalty(const ChangepointVector& r, std::span<const double> speeds, const ScoreConfig& cfg, Index n, Index d) {
    if (static_cast<Index>(speeds.size()) != r.segments())
        throw DimensionMismatch("penalty: expected one speed per segment");
    return ssic_penalty(n, d, r.count(), cfg.gamma) + speed_penalty(speeds, cfg);
}

double rss_floor(const Trajectory& traj) {
    return std::max(kMinRss, kRelativeRssFloor * traj.positions().squaredNorm());
}

ScoreBreakdown score_of_fit(const Segmentation& fit, const ScoreConfig& cfg, double min_rss) {
    ScoreBreakdown b;
    const double nd = static_cast<double>(fit.n * fit.d);
    b.rho = parameter_count(fit.num_changepoints(), fit.d);
    b.log_rss_term = -0.5 * nd * std::log(std::max(fit.rss, min_rss));
    b.ssic_term = ssic_penalty(fit.n, fit.d, fit.num_changepoints(), cfg.gamma);
    b.speed_term = speed_penalty(std::span<const double>(fit.speeds.data(), static_cast<std::size_t>(fit.speeds.size())), cfg);
    b.total = b.log_rss_term - b.ssic_term - b.speed_term;
    return b;
}

ScoredFit Scorer::scored(const ChangepointVector& r) const {
    ScoredFit out;
    out.fit = fitter_.fit(r);
    if (!out.fit) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out.breakdown = ScoreBreakdown{nan, nan, nan, kMinusInfinity, parameter_count(r.count(), trajectory().dims())};
        return out;
    }
    out.breakdown = score_of_fit(*out.fit, cfg_, floor_);
    return out;
}

ScoredFit score_with_fit(const Trajectory& traj, const ChangepointVector& r, const ScoreConfig& cfg) {
    return Scorer(traj, cfg).scored(r);
}

ScoreBreakdown score(const Trajectory& traj, const ChangepointVector& r, const ScoreConfig& cfg) {
    return score_with_fit(traj, r, cfg).breakdown;
}

}  // namespace cplass
