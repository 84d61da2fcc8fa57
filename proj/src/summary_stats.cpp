#include "cplass/summary_stats.hpp"

#include "cplass/parallel.hpp"
#include "cplass/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cplass {

void SegmentPool::add(double speed, double duration, std::int64_t path_id) {
    if (!std::isfinite(speed) || speed < 0.0) throw InvalidArgument("segment speed must be finite and >= 0");
    if (!std::isfinite(duration) || duration <= 0.0) throw InvalidArgument("segment duration must be > 0");
    records_.push_back({speed, duration, path_id});
    total_time_ += duration;
}

void SegmentPool::add(const Segmentation& seg, std::int64_t path_id) {
    if (seg.speeds.size() != seg.durations.size()) throw DimensionMismatch("speeds and durations differ in length");
    for (Index j = 0; j < seg.speeds.size(); ++j) add(seg.speeds(j), seg.durations(j), path_id);
}

SegmentPool SegmentPool::from(std::span<const Segmentation> paths) {
    SegmentPool pool;
    for (std::size_t i = 0; i < paths.size(); ++i) pool.add(paths[i], static_cast<std::int64_t>(i));
    return pool;
}

double SegmentPool::max_speed() const {
    if (records_.empty()) throw EmptyInput("empty segment pool");
    double m = 0.0;
    for (const auto& r : records_) m = std::max(m, r.speed);
    return m;
}

std::vector<double> default_speed_grid(double max_speed, std::size_t points) {
    if (points < 2) throw InvalidArgument("speed grid needs at least 2 points");
    if (!(max_speed >= 0.0)) throw InvalidArgument("max speed must be >= 0");
    const double hi = max_speed > 0.0 ? 1.05 * max_speed : 1.0;
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = hi * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

CsaCurve csa(const SegmentPool& pool, std::span<const double> grid) {
    if (pool.empty()) throw EmptyInput("CSA of an empty pool");
    std::vector<SegmentRecord> recs = pool.records();
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.speed < b.speed; });
    std::vector<double> speeds(recs.size()), cum(recs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        acc += recs[i].duration;
        speeds[i] = recs[i].speed;
        cum[i] = acc;
    }
    CsaCurve out;
    out.grid.assign(grid.begin(), grid.end());
    out.values.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto k = static_cast<std::size_t>(std::upper_bound(speeds.begin(), speeds.end(), grid[g]) - speeds.begin());
        out.values[g] = k == 0 ? 0.0 : (k == cum.size() ? 1.0 : cum[k - 1] / acc);
    }
    return out;
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
    if (sorted_.empty()) throw EmptyInput("ECDF without samples");
    const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
    return static_cast<double>(k) / static_cast<double>(sorted_.size());
}

std::vector<double> max_sustained_speeds(std::span<const Segmentation> paths, double min_duration) {
    std::vector<double> out;
    for (const auto& seg : paths) {
        double best = -1.0;
        for (Index j = 0; j < seg.speeds.size(); ++j)
            if (seg.durations(j) >= min_duration) best = std::max(best, seg.speeds(j));
        if (best >= 0.0) out.push_back(best);
    }
    return out;
}

Ecdf max_speed_ecdf(std::span<const Segmentation> paths, double min_duration) {
    auto v = max_sustained_speeds(paths, min_duration);
    if (v.empty()) throw EmptyInput("no path has a segment lasting at least " + std::to_string(min_duration) + " s");
    return Ecdf(std::move(v));
}

double ks_distance(const Ecdf& a, const Ecdf& b) {
    double d = 0.0;
    for (const auto* e : {&a, &b})
        for (double x : e->samples()) d = std::max(d, std::abs(a(x) - b(x)));
    return d;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("trapezoid: x and y differ in length");
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

double DensityCurve::integral() const { return trapezoid(grid, density); }

std::size_t DensityCurve::modes() const {
    std::size_t m = 0;
    for (std::size_t i = 1; i + 1 < density.size(); ++i) {
        if (density[i] <= density[i - 1]) continue;
        // a flat top counts once, at its right edge
        std::size_t j = i;
        while (j + 1 < density.size() && density[j + 1] == density[i]) ++j;
        if (j + 1 < density.size() && density[j + 1] < density[i]) ++m;
        i = j;
    }
    return m;
}

namespace {

double weighted_quantile(const std::vector<std::pair<double, double>>& sorted_sw, double total, double q) {
    double acc = 0.0;
    for (const auto& [s, w] : sorted_sw) {
        acc += w;
        if (acc >= q * total) return s;
    }
    return sorted_sw.back().first;
}

}  // namespace

double silverman_bandwidth(const SegmentPool& pool) {
    if (pool.empty()) throw EmptyInput("bandwidth of an empty pool");
    std::vector<std::pair<double, double>> sw;
    double W = 0.0, W2 = 0.0, mean = 0.0;
    for (const auto& r : pool.records()) {
        sw.emplace_back(r.speed, r.duration);
        W += r.duration;
        W2 += r.duration * r.duration;
        mean += r.duration * r.speed;
    }
    mean /= W;
    double var = 0.0;
    for (const auto& [s, w] : sw) var += w * (s - mean) * (s - mean);
    const double sd = std::sqrt(var / W);
    std::sort(sw.begin(), sw.end());
    const double iqr = weighted_quantile(sw, W, 0.75) - weighted_quantile(sw, W, 0.25);
    const double n_eff = W * W / W2;
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(1e-3, 0.1 * std::abs(mean));  // all speeds equal
    return 0.9 * spread * std::pow(n_eff, -0.2);
}

DensityCurve weighted_kde(const SegmentPool& pool, double bandwidth, std::span<const double> grid) {
    if (pool.empty()) throw EmptyInput("KDE of an empty pool");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InvalidArgument("KDE bandwidth must be > 0");
    const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi) * pool.total_time());
    DensityCurve out;
    out.grid.assign(grid.begin(), grid.end());
    out.density.assign(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (const auto& r : pool.records()) {
            const double z = (grid[g] - r.speed) / bandwidth;
            acc += r.duration * std::exp(-0.5 * z * z);
        }
        out.density[g] = acc * norm;
    }
    return out;
}

DensityCurve weighted_kde(const SegmentPool& pool, double bandwidth) {
    if (pool.empty()) throw EmptyInput("KDE of an empty pool");
    double lo = pool.records().front().speed, hi = lo;
    for (const auto& r : pool.records()) {
        lo = std::min(lo, r.speed);
        hi = std::max(hi, r.speed);
    }
    lo -= 5.0 * bandwidth;
    hi += 5.0 * bandwidth;
    std::vector<double> g(512);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / 511.0;
    return weighted_kde(pool, bandwidth, g);
}

std::vector<double> BootstrapEnsemble::lower() const {
    if (curves.empty()) return point;
    auto out = curves.front();
    for (const auto& c : curves)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], c[i]);
    return out;
}

std::vector<double> BootstrapEnsemble::upper() const {
    if (curves.empty()) return point;
    auto out = curves.front();
    for (const auto& c : curves)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], c[i]);
    return out;
}

std::vector<std::size_t> bootstrap_indices(std::size_t num_paths, std::uint64_t seed, std::size_t b) {
    if (num_paths == 0) throw EmptyInput("bootstrap over zero paths");
    Rng rng(derive_seed(seed, b));
    std::vector<std::size_t> idx(num_paths);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(static_cast<std::int64_t>(num_paths)));
    return idx;
}

std::vector<double> evaluate_statistic(std::span<const Segmentation> paths, BootstrapStatistic statistic,
                                       std::span<const double> grid, double min_duration) {
    if (statistic == BootstrapStatistic::Csa) return csa(SegmentPool::from(paths), grid).values;
    const Ecdf e = max_speed_ecdf(paths, min_duration);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = e(grid[i]);
    return out;
}

BootstrapEnsemble bootstrap_ensemble(std::span<const Segmentation> paths, BootstrapStatistic statistic,
                                     std::size_t n_boot, std::uint64_t seed, std::span<const double> grid,
                                     double min_duration, std::size_t threads) {
    if (paths.empty()) throw EmptyInput("bootstrap over zero paths");
    if (n_boot < 1) throw InvalidArgument("bootstrap needs at least one resample");
    BootstrapEnsemble ens;
    ens.grid.assign(grid.begin(), grid.end());
    ens.point = evaluate_statistic(paths, statistic, grid, min_duration);
    ens.curves.resize(n_boot);
    parallel_for(n_boot, threads, [&](std::size_t b) {
        const auto idx = bootstrap_indices(paths.size(), seed, b);
        std::vector<Segmentation> sample;
        sample.reserve(idx.size());
        for (auto i : idx) sample.push_back(paths[i]);
        ens.curves[b] = evaluate_statistic(sample, statistic, grid, min_duration);
    });
    return ens;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("sup_distance: curves differ in length");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace cplass
