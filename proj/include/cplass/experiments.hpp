#pragma once

// Scripted numerical studies. Every function is a pure function of its inputs:
// replicate seeds come from derive_seed(master, stream, index) and never from
// scheduling order, so any thread count gives identical tables.

#include "cplass/criterion.hpp"
#include "cplass/sampler.hpp"
#include "cplass/simulate.hpp"
#include "cplass/summary_stats.hpp"
#include "cplass/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cplass {

struct ExperimentConfig {
    ScoreConfig score;
    McmcConfig mcmc;           // mcmc.seed is the master seed
    bool scale_iterations = false;  // use McmcConfig::recommended_iterations(n) instead of mcmc.t_max
    std::size_t threads = 1;

    std::int64_t iterations_for(Index n) const;
    void validate() const;
};

/// Seed streams; fixed so that tables stay reproducible across versions.
namespace streams {
inline constexpr std::uint64_t kPath = 1;
inline constexpr std::uint64_t kChain = 2;
inline constexpr std::uint64_t kNullPath = 3;
inline constexpr std::uint64_t kNullChain = 4;
inline constexpr std::uint64_t kBootstrap = 5;
}  // namespace streams

/// Runs one chain on traj with the given seed and the config's iteration budget.
CplassResult detect(const Trajectory& traj, const ExperimentConfig& cfg, std::uint64_t chain_seed,
                    std::optional<ScoreConfig> score_override = std::nullopt);

/// True when both sets have the same size and sorted elements pair up within tol seconds.
bool matches_truth(std::span<const double> tau_hat, std::span<const double> tau_true, double tol);

/// Largest |tau_hat_i - tau_i| after sorting; requires equal sizes.
double max_location_error(std::span<const double> tau_hat, std::span<const double> tau_true);

// ---- score profiles -------------------------------------------------------

struct ScoreProfile {
    double base_score = kMinusInfinity;
    std::vector<Index> indices;
    std::vector<double> scores;  // -inf where the index is already set or the fit is degenerate

    /// Index with the largest score (first on ties).
    Index argmax() const;
};

/// Score of base with each index in [first, last] added.
ScoreProfile score_profile(const Trajectory& traj, const ChangepointVector& base, Index first, Index last,
                           const ScoreConfig& cfg);

struct ScoreSurface {
    std::vector<Index> grid;        // candidate indices 1, 1+stride, ...
    Eigen::MatrixXd values;         // score({i,j}) - score(empty) for i < j, NaN elsewhere
    double empty_score = kMinusInfinity;

    std::pair<Index, Index> argmax() const;  // grid indices (not positions)
    /// Cells strictly above all existing 4-neighbours (upper triangle only).
    std::size_t strict_local_maxima() const;
};

ScoreSurface score_surface_2cp(const Trajectory& traj, Index stride, const ScoreConfig& cfg);

// ---- gamma sweep ----------------------------------------------------------

struct GammaSweepRow {
    double gamma = 0.0;
    bool speed_penalty = true;
    std::vector<Index> alt_counts;   // detected changepoints per alternative path
    std::vector<Index> null_counts;  // per null path

    double alt_detection_rate() const;     // fraction with exactly 2
    double null_false_positive_rate() const;  // fraction with > 0
};

/// Both hypotheses of a panel; the same paths and chain seeds are reused for every gamma.
std::vector<GammaSweepRow> gamma_sweep(char panel, std::span<const double> gammas, Index replicates,
                                       const ExperimentConfig& cfg, bool with_and_without_penalty = true);

// ---- power grid -----------------------------------------------------------

struct PowerGridResult {
    std::vector<double> durations;  // seconds
    std::vector<double> speeds;     // um/s
    Eigen::MatrixXd p_correct;      // durations x speeds
    Index replicates = 0;
};

std::vector<double> default_power_durations();  // 0.05 .. 1.0 step 0.05
std::vector<double> default_power_speeds();     // 0.01 .. 0.2 step 0.01

PowerGridResult power_grid(std::span<const double> durations, std::span<const double> speeds, Index replicates,
                           const ExperimentConfig& cfg);

/// P_correct of a single (duration, speed) cell; seeds match the full grid only when the
/// caller passes the cell's position in it.
double power_cell_p_correct(double duration, double speed, Index replicates, const ExperimentConfig& cfg,
                            std::uint64_t cell_id);

// ---- consistency ----------------------------------------------------------

struct ConsistencyRow {
    Index n = 0;
    Index replicates = 0;
    std::int64_t iterations = 0;
    double k_correct_fraction = 0.0;
    /// Median max location error (seconds) over replicates with the right count; NaN if none.
    double median_max_error = 0.0;
};

std::vector<ConsistencyRow> consistency_trend(std::span<const Index> n_values, Index replicates,
                                              const ExperimentConfig& cfg);

// ---- type-3 necessity -----------------------------------------------------

struct Type3Study {
    double score_empty = kMinusInfinity;
    double score_pair = kMinusInfinity;
    double score_first = kMinusInfinity;   // only the first true changepoint
    double score_second = kMinusInfinity;  // only the second
    std::int64_t cap = 0;
    std::vector<std::int64_t> full_hits;        // first-hit iteration per seed (cap if censored)
    std::vector<std::int64_t> restricted_hits;  // same without segment birth/death

    bool ordering_holds() const;
    double median_full() const;
    double median_restricted() const;
};

/// First iteration at which a chain started from the empty vector holds exactly the true
/// changepoints, each within tol_steps grid steps. Returns cap when never reached.
std::int64_t first_hitting_iteration(const Trajectory& traj, const std::vector<Index>& truth, Index tol_steps,
                                     const ScoreConfig& cfg, const McmcConfig& mcfg, const ProposalWeights& weights,
                                     std::int64_t cap);

Type3Study type3_necessity(double sigma, Index seeds, std::int64_t cap, const ExperimentConfig& cfg);

// ---- speed penalty and CSA studies on the two-state model -------------------

struct SpeedPenaltyStudy {
    std::vector<Index> counts_on;
    std::vector<Index> counts_off;
    double max_speed_on = 0.0;  // largest segment speed returned with the penalty on

    double agreement() const;
};

SpeedPenaltyStudy speed_penalty_study(const TwoStateParams& params, Index paths, const ExperimentConfig& cfg);

struct CsaStudy {
    std::vector<double> grid;
    std::vector<double> inferred;
    std::vector<double> truth;
    std::vector<double> lower;  // bootstrap envelope of the inferred curve
    std::vector<double> upper;
    double sup_distance = 0.0;
    double coverage = 0.0;      // fraction of grid points with truth inside [lower, upper]
    double ks_max_speed = 0.0;  // KS distance between inferred and true max-sustained-speed ECDFs
};

CsaStudy csa_study(const TwoStateParams& params, Index paths, Index n_boot, const ExperimentConfig& cfg,
                   double min_duration = 0.6);

}  // namespace cplass
