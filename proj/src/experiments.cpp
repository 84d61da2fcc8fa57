#include "cplass/experiments.hpp"

#include "cplass/parallel.hpp"
#include "cplass/pwl_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cplass {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double fraction(const std::vector<Index>& counts, auto pred) {
    if (counts.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto hits = std::count_if(counts.begin(), counts.end(), pred);
    return static_cast<double>(hits) / static_cast<double>(counts.size());
}

}  // namespace

std::int64_t ExperimentConfig::iterations_for(Index n) const {
    return scale_iterations ? McmcConfig::recommended_iterations(n) : mcmc.t_max;
}

void ExperimentConfig::validate() const {
    score.validate();
    mcmc.validate();
    if (threads < 1) throw InvalidArgument("experiment config: threads must be >= 1");
}

CplassResult detect(const Trajectory& traj, const ExperimentConfig& cfg, std::uint64_t chain_seed,
                    std::optional<ScoreConfig> score_override) {
    McmcConfig m = cfg.mcmc;
    m.seed = chain_seed;
    m.t_max = cfg.iterations_for(traj.size());
    return cplass::cplass(traj, score_override ? *score_override : cfg.score, m);
}

bool matches_truth(std::span<const double> tau_hat, std::span<const double> tau_true, double tol) {
    if (tau_hat.size() != tau_true.size()) return false;
    return max_location_error(tau_hat, tau_true) <= tol;
}

double max_location_error(std::span<const double> tau_hat, std::span<const double> tau_true) {
    if (tau_hat.size() != tau_true.size()) throw DimensionMismatch("location error needs equal changepoint counts");
    std::vector<double> a(tau_hat.begin(), tau_hat.end()), b(tau_true.begin(), tau_true.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

// ---- score profiles -------------------------------------------------------

Index ScoreProfile::argmax() const {
    if (scores.empty()) throw EmptyInput("empty score profile");
    return indices[static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin())];
}

ScoreProfile score_profile(const Trajectory& traj, const ChangepointVector& base, Index first, Index last,
                           const ScoreConfig& cfg) {
    if (base.n() != traj.size()) throw DimensionMismatch("profile base does not match trajectory");
    if (first < 1 || last > traj.size() - 1 || first > last) throw InvalidArgument("profile index range out of bounds");
    const Scorer scorer(traj, cfg);
    ScoreProfile out;
    out.base_score = scorer(base).total;
    for (Index i = first; i <= last; ++i) {
        out.indices.push_back(i);
        if (base.test(i)) {
            out.scores.push_back(kMinusInfinity);
            continue;
        }
        ChangepointVector r = base;
        r.set(i);
        out.scores.push_back(scorer(r).total);
    }
    return out;
}

std::pair<Index, Index> ScoreSurface::argmax() const {
    std::pair<Index, Index> best{-1, -1};
    double v = kMinusInfinity;
    for (Index i = 0; i < values.rows(); ++i)
        for (Index j = i + 1; j < values.cols(); ++j)
            if (values(i, j) > v) {
                v = values(i, j);
                best = {i, j};
            }
    return best;
}

std::size_t ScoreSurface::strict_local_maxima() const {
    std::size_t count = 0;
    const Index m = values.rows();
    for (Index i = 0; i < m; ++i) {
        for (Index j = i + 1; j < m; ++j) {
            const double v = values(i, j);
            if (!std::isfinite(v)) continue;
            bool is_max = true;
            const Index nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& p : nb) {
                if (p[0] < 0 || p[1] >= m || p[0] >= p[1]) continue;
                const double w = values(p[0], p[1]);
                if (std::isfinite(w) && !(v > w)) is_max = false;
            }
            if (is_max) ++count;
        }
    }
    return count;
}

ScoreSurface score_surface_2cp(const Trajectory& traj, Index stride, const ScoreConfig& cfg) {
    if (stride < 1) throw InvalidArgument("surface stride must be >= 1");
    const Index n = traj.size();
    const Scorer scorer(traj, cfg);
    ScoreSurface out;
    for (Index i = 1; i <= n - 1; i += stride) out.grid.push_back(i);
    const auto m = static_cast<Index>(out.grid.size());
    out.empty_score = scorer(ChangepointVector(n, {})).total;
    out.values = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
    for (Index a = 0; a < m; ++a)
        for (Index b = a + 1; b < m; ++b)
            out.values(a, b) = scorer(ChangepointVector(n, {out.grid[a], out.grid[b]})).total - out.empty_score;
    return out;
}

// ---- gamma sweep ----------------------------------------------------------

double GammaSweepRow::alt_detection_rate() const {
    return fraction(alt_counts, [](Index c) { return c == 2; });
}

double GammaSweepRow::null_false_positive_rate() const {
    return fraction(null_counts, [](Index c) { return c > 0; });
}

std::vector<GammaSweepRow> gamma_sweep(char panel, std::span<const double> gammas, Index replicates,
                                       const ExperimentConfig& cfg, bool with_and_without_penalty) {
    cfg.validate();
    if (replicates < 1) throw InvalidArgument("gamma sweep: replicates must be >= 1");
    const std::uint64_t master = cfg.mcmc.seed;
    const auto reps = static_cast<std::size_t>(replicates);
    std::vector<Trajectory> alt, null;
    for (std::size_t j = 0; j < reps; ++j) {
        alt.push_back(simulate_piecewise(setups::gamma_panel(panel, true), derive_seed(master, streams::kPath, j)).trajectory);
        null.push_back(simulate_piecewise(setups::gamma_panel(panel, false), derive_seed(master, streams::kNullPath, j)).trajectory);
    }

    std::vector<GammaSweepRow> rows;
    for (double g : gammas) {
        for (bool pen : {true, false}) {
            if (!pen && !with_and_without_penalty) continue;
            GammaSweepRow row;
            row.gamma = g;
            row.speed_penalty = pen;
            row.alt_counts.resize(reps);
            row.null_counts.resize(reps);
            rows.push_back(std::move(row));
        }
    }
    const std::size_t jobs = rows.size() * reps * 2;
    parallel_for(jobs, cfg.threads, [&](std::size_t job) {
        auto& row = rows[job / (2 * reps)];
        const std::size_t rest = job % (2 * reps);
        const bool is_alt = rest < reps;
        const std::size_t j = rest % reps;
        ScoreConfig sc = cfg.score;
        sc.gamma = row.gamma;
        sc.speed_penalty_enabled = row.speed_penalty;
        const auto seed = derive_seed(master, is_alt ? streams::kChain : streams::kNullChain, j);
        const auto res = detect(is_alt ? alt[j] : null[j], cfg, seed, sc);
        (is_alt ? row.alt_counts : row.null_counts)[j] = res.segmentation.num_changepoints();
    });
    return rows;
}

// ---- power grid -----------------------------------------------------------

std::vector<double> default_power_durations() {
    std::vector<double> v(20);
    for (int i = 0; i < 20; ++i) v[static_cast<std::size_t>(i)] = 0.05 * (i + 1);
    return v;
}

std::vector<double> default_power_speeds() {
    std::vector<double> v(20);
    for (int i = 0; i < 20; ++i) v[static_cast<std::size_t>(i)] = 0.01 * (i + 1);
    return v;
}

namespace {

Index power_replicate_count(double duration, double speed, Index rep, const ExperimentConfig& cfg,
                            std::uint64_t cell_id) {
    const std::uint64_t master = derive_seed(cfg.mcmc.seed, cell_id);
    const auto path = simulate_piecewise(setups::power_cell(duration, speed), derive_seed(master, streams::kPath, rep));
    const auto res = detect(path.trajectory, cfg, derive_seed(master, streams::kChain, rep));
    return res.segmentation.num_changepoints();
}

}  // namespace

double power_cell_p_correct(double duration, double speed, Index replicates, const ExperimentConfig& cfg,
                            std::uint64_t cell_id) {
    cfg.validate();
    if (replicates < 1) throw InvalidArgument("power grid: replicates must be >= 1");
    std::vector<Index> counts(static_cast<std::size_t>(replicates));
    parallel_for(counts.size(), cfg.threads, [&](std::size_t r) {
        counts[r] = power_replicate_count(duration, speed, static_cast<Index>(r), cfg, cell_id);
    });
    return fraction(counts, [](Index c) { return c == 2; });
}

PowerGridResult power_grid(std::span<const double> durations, std::span<const double> speeds, Index replicates,
                           const ExperimentConfig& cfg) {
    cfg.validate();
    if (replicates < 1) throw InvalidArgument("power grid: replicates must be >= 1");
    PowerGridResult out;
    out.durations.assign(durations.begin(), durations.end());
    out.speeds.assign(speeds.begin(), speeds.end());
    out.replicates = replicates;
    const std::size_t nd = durations.size(), ns = speeds.size(), reps = static_cast<std::size_t>(replicates);
    std::vector<Index> counts(nd * ns * reps);
    parallel_for(counts.size(), cfg.threads, [&](std::size_t job) {
        const std::size_t cell = job / reps;
        counts[job] = power_replicate_count(durations[cell / ns], speeds[cell % ns], static_cast<Index>(job % reps),
                                            cfg, cell);
    });
    out.p_correct.resize(static_cast<Index>(nd), static_cast<Index>(ns));
    for (std::size_t cell = 0; cell < nd * ns; ++cell) {
        std::vector<Index> c(counts.begin() + static_cast<std::ptrdiff_t>(cell * reps),
                             counts.begin() + static_cast<std::ptrdiff_t>((cell + 1) * reps));
        out.p_correct(static_cast<Index>(cell / ns), static_cast<Index>(cell % ns)) =
            fraction(c, [](Index x) { return x == 2; });
    }
    return out;
}

// ---- consistency ----------------------------------------------------------

std::vector<ConsistencyRow> consistency_trend(std::span<const Index> n_values, Index replicates,
                                              const ExperimentConfig& cfg) {
    cfg.validate();
    if (replicates < 1) throw InvalidArgument("consistency: replicates must be >= 1");
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] <= n_values[i - 1]) throw InvalidArgument("consistency: n values must increase");
    const auto reps = static_cast<std::size_t>(replicates);
    std::vector<double> errors(n_values.size() * reps);
    std::vector<Index> counts(n_values.size() * reps);
    parallel_for(errors.size(), cfg.threads, [&](std::size_t job) {
        const std::size_t row = job / reps, rep = job % reps;
        const PiecewiseTruth truth = setups::consistency_truth(n_values[row]);
        const std::uint64_t master = derive_seed(cfg.mcmc.seed, row);
        const auto path = simulate_piecewise(truth, derive_seed(master, streams::kPath, rep));
        const auto res = detect(path.trajectory, cfg, derive_seed(master, streams::kChain, rep));
        counts[job] = res.segmentation.num_changepoints();
        errors[job] = res.segmentation.tau.size() == truth.tau_true.size()
                          ? max_location_error(res.segmentation.tau, truth.tau_true)
                          : std::numeric_limits<double>::quiet_NaN();
    });
    std::vector<ConsistencyRow> rows;
    for (std::size_t row = 0; row < n_values.size(); ++row) {
        ConsistencyRow r;
        r.n = n_values[row];
        r.replicates = replicates;
        r.iterations = cfg.iterations_for(r.n);
        std::vector<double> ok;
        Index correct = 0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const double e = errors[row * reps + rep];
            if (!std::isnan(e)) {
                ok.push_back(e);
                ++correct;
            }
        }
        r.k_correct_fraction = static_cast<double>(correct) / static_cast<double>(reps);
        r.median_max_error = median(ok);
        rows.push_back(r);
    }
    return rows;
}

// ---- type-3 necessity -----------------------------------------------------

bool Type3Study::ordering_holds() const {
    return score_pair > score_empty && score_empty > score_first && score_empty > score_second;
}

double Type3Study::median_full() const {
    return median(std::vector<double>(full_hits.begin(), full_hits.end()));
}

double Type3Study::median_restricted() const {
    return median(std::vector<double>(restricted_hits.begin(), restricted_hits.end()));
}

std::int64_t first_hitting_iteration(const Trajectory& traj, const std::vector<Index>& truth, Index tol_steps,
                                     const ScoreConfig& cfg, const McmcConfig& mcfg, const ProposalWeights& weights,
                                     std::int64_t cap) {
    auto hit = [&](const ChangepointVector& r) {
        if (r.count() != static_cast<Index>(truth.size())) return false;
        for (std::size_t j = 0; j < truth.size(); ++j)
            if (std::abs(r.indices()[j] - truth[j]) > tol_steps) return false;
        return true;
    };
    Chain chain(traj, cfg, mcfg, weights, ChangepointVector(traj.size(), {}));
    if (hit(chain.state())) return 0;
    while (chain.iteration() < cap) {
        chain.step();
        if (hit(chain.state())) return chain.iteration();
    }
    return cap;
}

Type3Study type3_necessity(double sigma, Index seeds, std::int64_t cap, const ExperimentConfig& cfg) {
    cfg.validate();
    if (seeds < 1 || cap < 1) throw InvalidArgument("type-3 study: seeds and cap must be >= 1");
    const PiecewiseTruth truth = setups::short_fast_segment(sigma);
    const auto path = simulate_piecewise(truth, derive_seed(cfg.mcmc.seed, streams::kPath, 0));
    const Trajectory& traj = path.trajectory;
    const auto& idx = path.truth.change_indices;
    const Scorer scorer(traj, cfg.score);

    Type3Study out;
    out.cap = cap;
    const Index n = traj.size();
    out.score_empty = scorer(ChangepointVector(n, {})).total;
    out.score_pair = scorer(ChangepointVector(n, idx)).total;
    out.score_first = scorer(ChangepointVector(n, {idx[0]})).total;
    out.score_second = scorer(ChangepointVector(n, {idx[1]})).total;

    const auto full = ProposalWeights::from(cfg.mcmc);
    const auto restricted = full.without_segment_moves();
    const auto s = static_cast<std::size_t>(seeds);
    out.full_hits.resize(s);
    out.restricted_hits.resize(s);
    parallel_for(2 * s, cfg.threads, [&](std::size_t job) {
        McmcConfig m = cfg.mcmc;
        m.seed = derive_seed(cfg.mcmc.seed, streams::kChain, job % s);
        m.t_max = cap;
        const bool is_full = job < s;
        (is_full ? out.full_hits : out.restricted_hits)[job % s] =
            first_hitting_iteration(traj, idx, 10, cfg.score, m, is_full ? full : restricted, cap);
    });
    return out;
}

// ---- two-state studies ----------------------------------------------------

double SpeedPenaltyStudy::agreement() const {
    if (counts_on.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t same = 0;
    for (std::size_t i = 0; i < counts_on.size(); ++i) same += counts_on[i] == counts_off[i];
    return static_cast<double>(same) / static_cast<double>(counts_on.size());
}

SpeedPenaltyStudy speed_penalty_study(const TwoStateParams& params, Index paths, const ExperimentConfig& cfg) {
    cfg.validate();
    params.validate();
    if (paths < 1) throw InvalidArgument("speed penalty study: paths must be >= 1");
    const auto p = static_cast<std::size_t>(paths);
    std::vector<Trajectory> trajs;
    for (std::size_t i = 0; i < p; ++i)
        trajs.push_back(simulate_two_state(params, derive_seed(cfg.mcmc.seed, streams::kPath, i)).trajectory);
    SpeedPenaltyStudy out;
    out.counts_on.resize(p);
    out.counts_off.resize(p);
    std::vector<double> max_on(p, 0.0);
    parallel_for(2 * p, cfg.threads, [&](std::size_t job) {
        const std::size_t i = job % p;
        const bool on = job < p;
        ScoreConfig sc = cfg.score;
        sc.speed_penalty_enabled = on;
        const auto res = detect(trajs[i], cfg, derive_seed(cfg.mcmc.seed, streams::kChain, i), sc);
        (on ? out.counts_on : out.counts_off)[i] = res.segmentation.num_changepoints();
        if (on) max_on[i] = res.segmentation.speeds.maxCoeff();
    });
    out.max_speed_on = *std::max_element(max_on.begin(), max_on.end());
    return out;
}

CsaStudy csa_study(const TwoStateParams& params, Index paths, Index n_boot, const ExperimentConfig& cfg,
                   double min_duration) {
    cfg.validate();
    params.validate();
    if (paths < 1 || n_boot < 1) throw InvalidArgument("csa study: paths and n_boot must be >= 1");
    const auto p = static_cast<std::size_t>(paths);
    std::vector<Segmentation> inferred(p), truth(p);
    parallel_for(p, cfg.threads, [&](std::size_t i) {
        const auto path = simulate_two_state(params, derive_seed(cfg.mcmc.seed, streams::kPath, i));
        truth[i] = path.truth;
        inferred[i] = detect(path.trajectory, cfg, derive_seed(cfg.mcmc.seed, streams::kChain, i)).segmentation;
    });
    const auto pool_inf = SegmentPool::from(inferred);
    const auto pool_true = SegmentPool::from(truth);
    CsaStudy out;
    out.grid = default_speed_grid(std::max(pool_inf.max_speed(), pool_true.max_speed()));
    const auto ens = bootstrap_ensemble(inferred, BootstrapStatistic::Csa, static_cast<std::size_t>(n_boot),
                                        derive_seed(cfg.mcmc.seed, streams::kBootstrap), out.grid, min_duration,
                                        cfg.threads);
    out.inferred = ens.point;
    out.truth = csa(pool_true, out.grid).values;
    out.lower = ens.lower();
    out.upper = ens.upper();
    out.sup_distance = sup_distance(out.inferred, out.truth);
    std::size_t inside = 0;
    for (std::size_t g = 0; g < out.grid.size(); ++g) inside += out.lower[g] <= out.truth[g] && out.truth[g] <= out.upper[g];
    out.coverage = static_cast<double>(inside) / static_cast<double>(out.grid.size());
    try {
        out.ks_max_speed = ks_distance(max_speed_ecdf(inferred, min_duration), max_speed_ecdf(truth, min_duration));
    } catch (const EmptyInput&) {
        out.ks_max_speed = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace cplass
