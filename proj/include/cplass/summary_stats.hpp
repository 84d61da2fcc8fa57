#pragma once

// Population statistics over segmentations: cumulative speed allocation,
// maximum sustained speed ECDF, duration-weighted KDE and path bootstrap.

#include "cplass/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cplass {

struct SegmentRecord {
    double speed = 0.0;     // um/s
    double duration = 0.0;  // s
    std::int64_t path_id = 0;
};

class SegmentPool {
public:
    SegmentPool() = default;

    void add(double speed, double duration, std::int64_t path_id);
    void add(const Segmentation& seg, std::int64_t path_id);

    static SegmentPool from(std::span<const Segmentation> paths);

    const std::vector<SegmentRecord>& records() const { return records_; }
    bool empty() const { return records_.empty(); }
    double total_time() const { return total_time_; }
    double max_speed() const;

private:
    std::vector<SegmentRecord> records_;
    double total_time_ = 0.0;
};

/// Plot metadata only: speeds under this are drawn as stationary. No statistic uses it.
inline constexpr double kStationarySpeedThreshold = 0.1;

/// `points` speeds evenly spaced on [0, 1.05 * max_speed].
std::vector<double> default_speed_grid(double max_speed, std::size_t points = 512);

struct CsaCurve {
    std::vector<double> grid;
    std::vector<double> values;
};

/// CSA(s) = sum of durations with speed <= s over the total duration.
CsaCurve csa(const SegmentPool& pool, std::span<const double> grid);

/// Right-continuous empirical CDF.
class Ecdf {
public:
    Ecdf() = default;
    explicit Ecdf(std::vector<double> samples);

    double operator()(double x) const;
    const std::vector<double>& samples() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

/// Per path, the largest speed among segments lasting at least min_duration
/// (paths with no such segment are dropped).
std::vector<double> max_sustained_speeds(std::span<const Segmentation> paths, double min_duration);

/// ECDF of max_sustained_speeds; throws EmptyInput when every path is dropped.
Ecdf max_speed_ecdf(std::span<const Segmentation> paths, double min_duration);

/// Largest absolute difference between two ECDFs over the union of their jump points.
double ks_distance(const Ecdf& a, const Ecdf& b);

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> density;

    double integral() const;
    /// Interior strict local maxima on the grid.
    std::size_t modes() const;
};

/// Silverman-type bandwidth computed from duration-weighted speeds.
double silverman_bandwidth(const SegmentPool& pool);

/// Gaussian KDE of speeds with weights duration / total duration.
DensityCurve weighted_kde(const SegmentPool& pool, double bandwidth, std::span<const double> grid);

/// Same, on 512 points spanning [min - 5h, max + 5h].
DensityCurve weighted_kde(const SegmentPool& pool, double bandwidth);

double trapezoid(std::span<const double> x, std::span<const double> y);

enum class BootstrapStatistic { Csa, MaxSpeedEcdf };

struct BootstrapEnsemble {
    std::vector<double> grid;
    std::vector<double> point;               // statistic on the original paths
    std::vector<std::vector<double>> curves; // one per resample

    /// Pointwise envelope of the resampled curves.
    std::vector<double> lower() const;
    std::vector<double> upper() const;
};

/// Path indices drawn (with replacement) for resample b.
std::vector<std::size_t> bootstrap_indices(std::size_t num_paths, std::uint64_t seed, std::size_t b);

/// Statistic evaluated on a grid for a set of paths.
std::vector<double> evaluate_statistic(std::span<const Segmentation> paths, BootstrapStatistic statistic,
                                       std::span<const double> grid, double min_duration);

BootstrapEnsemble bootstrap_ensemble(std::span<const Segmentation> paths, BootstrapStatistic statistic,
                                     std::size_t n_boot, std::uint64_t seed, std::span<const double> grid,
                                     double min_duration = 0.6, std::size_t threads = 1);

/// max_i |a_i - b_i|.
double sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace cplass
