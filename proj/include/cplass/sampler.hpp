#pragma once

// Metropolis-Hastings search over changepoint vectors.
//
// Four kernels, each with exact per-move densities:
//   New         r' ~ iid Bernoulli(1 - exp(-lambda*dt)) on every slot
//   BirthDeath  w.p. 1/2 delete a uniform changepoint, else add a uniform empty slot
//   SegmentBD   w.p. 1/2 pick a uniform changepoint and delete it with its successor,
//               else draw an ordered pair of distinct empty slots and insert both if
//               they fall in the same segment
//   Shift       move a uniform changepoint to a uniform empty slot
// A draw that cannot be carried out (delete from an empty vector, a pair that
// straddles a changepoint, ...) is a null move with forward density 0 and is
// rejected. The null mass is what null_move_probability() reports.

#include "cplass/criterion.hpp"
#include "cplass/rng.hpp"
#include "cplass/types.hpp"

#include <cstdint>
#include <optional>
#include <unordered_map>

namespace cplass {

struct Proposal {
    ProposalKind kind = ProposalKind::New;
    ChangepointVector r_prop;
    double forward_log_density = kMinusInfinity;  // log q(r_prop | r_cur)
    double reverse_log_density = kMinusInfinity;  // log q(r_cur | r_prop)

    bool possible() const { return forward_log_density > kMinusInfinity; }
};

/// Per-slot changepoint probability 1 - exp(-lambda*dt).
double changepoint_rate(double lambda, double dt);

/// log q_new(r) = |r| log(1 - e^{-lambda dt}) - (n - 1 - |r|) lambda dt.
double new_log_density(const ChangepointVector& r, double lambda, double dt);

/// Total probability that SegmentBD inserts a segment:
/// (1/2) sum_j (d_j-1)(d_j-2) / ((n-|r|-1)(n-|r|-2)).
double segment_insertion_mass(const ChangepointVector& r);

Proposal propose_new(Rng& rng, const ChangepointVector& r_cur, double lambda, double dt);
Proposal propose_birth_death(Rng& rng, const ChangepointVector& r_cur);
Proposal propose_segment_bd(Rng& rng, const ChangepointVector& r_cur);
Proposal propose_shift(Rng& rng, const ChangepointVector& r_cur);

/// log q_kind(to | from); -inf when the kernel cannot move from `from` to `to`.
double transition_log_density(ProposalKind kind, const ChangepointVector& from, const ChangepointVector& to,
                              double lambda, double dt);

/// Probability that the kernel produces a null move from `from`.
double null_move_probability(ProposalKind kind, const ChangepointVector& from);

/// log alpha = min{0, score' - score + log q(r|r') - log q(r'|r)}, or -inf on the zero branch.
double log_acceptance(double score_cur, double score_prop, double forward_log_density, double reverse_log_density);

/// Cutpoints selecting the kernel from u ~ U[0,1). Unlike McmcConfig, equal
/// cutpoints are allowed here so a kernel can be switched off.
struct ProposalWeights {
    double u1 = 0.25;
    double u2 = 0.375;
    double u3 = 0.5;

    static ProposalWeights from(const McmcConfig& mcfg) { return {mcfg.u1, mcfg.u2, mcfg.u3}; }

    /// Same mixture with SegmentBD disabled; its mass goes to Shift.
    ProposalWeights without_segment_moves() const { return {u1, u2, u2}; }

    ProposalKind select(double u) const {
        if (u < u1) return ProposalKind::New;
        if (u < u2) return ProposalKind::BirthDeath;
        if (u < u3) return ProposalKind::SegmentBD;
        return ProposalKind::Shift;
    }

    void validate() const {
        if (!(0.0 <= u1 && u1 <= u2 && u2 <= u3 && u3 <= 1.0))
            throw InvalidArgument("proposal weights: need 0 <= u1 <= u2 <= u3 <= 1");
    }
};

/// Memoized score(r) for one trajectory and configuration.
class ScoreCache {
public:
    ScoreCache(const Trajectory& traj, const ScoreConfig& cfg, std::size_t max_entries = 1u << 21)
        : scorer_(traj, cfg), max_entries_(max_entries) {}

    double operator()(const ChangepointVector& r);

    std::size_t size() const { return table_.size(); }
    std::uint64_t evaluations() const { return evaluations_; }

private:
    Scorer scorer_;
    std::size_t max_entries_;
    std::uint64_t evaluations_ = 0;
    std::unordered_map<ChangepointVector, double, ChangepointVectorHash> table_;
};

struct StepResult {
    ChangepointVector r_next;
    double score_next = kMinusInfinity;
    IterationRecord record;
};

/// Draws one proposal from `r_cur` under the given kernel.
Proposal propose(ProposalKind kind, Rng& rng, const ChangepointVector& r_cur, double lambda, double dt);

/// One Metropolis-Hastings transition. `score_cur` must equal score(traj, r_cur, cfg).
StepResult mh_step(const ChangepointVector& r_cur, double score_cur, const Trajectory& traj, const ScoreConfig& cfg,
                   const McmcConfig& mcfg, Rng& rng, ScoreCache& cache,
                   const std::optional<ProposalWeights>& weights = std::nullopt);

/// Sequential chain with its own RNG stream and score cache.
class Chain {
public:
    Chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg);
    Chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg, ProposalWeights weights,
          std::optional<ChangepointVector> initial = std::nullopt);

    /// Runs one transition and records it.
    const IterationRecord& step();

    const ChangepointVector& state() const { return state_; }
    double current_score() const { return score_; }
    std::int64_t iteration() const { return iteration_; }
    const ChainTrace& trace() const { return trace_; }
    ChainTrace release_trace() { return std::move(trace_); }
    ScoreCache& cache() { return cache_; }

private:
    void record(const IterationRecord& rec);

    const Trajectory* traj_;
    ScoreConfig cfg_;
    McmcConfig mcfg_;
    ProposalWeights weights_;
    Rng rng_;
    ScoreCache cache_;
    ChangepointVector state_;
    double score_ = kMinusInfinity;
    std::int64_t iteration_ = 0;
    ChainTrace trace_;
};

/// Draws r^(0), retrying degenerate or over-cap draws up to 100 times before falling back to r = 0.
ChangepointVector initial_state(Rng& rng, Index n, double lambda, double dt, const ScoreConfig& cfg, ScoreCache& cache);

/// Runs t_max transitions from a Bernoulli initial state.
ChainTrace run_chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg);

struct CplassResult {
    Segmentation segmentation;
    ScoreBreakdown score;
    ChainTrace trace;
};

/// Chain followed by a refit at the highest-scoring visited state (first on ties).
CplassResult cplass(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg);

}  // namespace cplass
