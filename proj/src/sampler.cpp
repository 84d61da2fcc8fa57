#include "cplass/sampler.hpp"

#include "cplass/pwl_fit.hpp"

#include <algorithm>
#include <cmath>

namespace cplass {

namespace {

double log_inv(double x) { return -std::log(x); }

Proposal null_move(ProposalKind kind, const ChangepointVector& r_cur) {
    Proposal p;
    p.kind = kind;
    p.r_prop = r_cur;
    return p;
}

// Number of changepoints of r strictly between lo and hi.
Index count_between(const ChangepointVector& r, Index lo, Index hi) {
    const auto& idx = r.indices();
    auto first = std::upper_bound(idx.begin(), idx.end(), lo);
    auto last = std::lower_bound(idx.begin(), idx.end(), hi);
    return last > first ? static_cast<Index>(last - first) : 0;
}

// Density of deleting the consecutive pair starting at a given changepoint.
double segment_delete_log_density(const ChangepointVector& from) { return log_inv(2.0 * static_cast<double>(from.count())); }

// Density of inserting one specific unordered in-segment pair.
double segment_insert_log_density(const ChangepointVector& from) {
    const double m = static_cast<double>(from.free_count());
    return log_inv(m * (m - 1.0));
}

struct SetDiff {
    std::vector<Index> removed;  // in from, not in to
    std::vector<Index> added;    // in to, not in from
};

SetDiff set_diff(const ChangepointVector& from, const ChangepointVector& to) {
    SetDiff diff;
    std::set_difference(from.indices().begin(), from.indices().end(), to.indices().begin(), to.indices().end(),
                        std::back_inserter(diff.removed));
    std::set_difference(to.indices().begin(), to.indices().end(), from.indices().begin(), from.indices().end(),
                        std::back_inserter(diff.added));
    return diff;
}

}  // namespace

double changepoint_rate(double lambda, double dt) { return -std::expm1(-lambda * dt); }

double new_log_density(const ChangepointVector& r, double lambda, double dt) {
    const double ones = static_cast<double>(r.count());
    const double zeros = static_cast<double>(r.free_count());
    double out = -zeros * lambda * dt;
    if (r.count() > 0) out += ones * std::log(changepoint_rate(lambda, dt));
    return out;
}

double segment_insertion_mass(const ChangepointVector& r) {
    const double m = static_cast<double>(r.free_count());
    if (r.free_count() < 2) return 0.0;
    double pairs = 0.0;
    for (Index len : r.segment_lengths()) pairs += static_cast<double>(len - 1) * static_cast<double>(len - 2);
    return 0.5 * pairs / (m * (m - 1.0));
}

Proposal propose_new(Rng& rng, const ChangepointVector& r_cur, double lambda, double dt) {
    const double p = changepoint_rate(lambda, dt);
    std::vector<Index> idx;
    for (Index i = 1; i < r_cur.n(); ++i)
        if (rng.bernoulli(p)) idx.push_back(i);
    Proposal prop;
    prop.kind = ProposalKind::New;
    prop.r_prop = ChangepointVector(r_cur.n(), std::move(idx));
    prop.forward_log_density = new_log_density(prop.r_prop, lambda, dt);
    prop.reverse_log_density = new_log_density(r_cur, lambda, dt);
    return prop;
}

Proposal propose_birth_death(Rng& rng, const ChangepointVector& r_cur) {
    Proposal prop = null_move(ProposalKind::BirthDeath, r_cur);
    if (rng.uniform() < 0.5) {
        if (r_cur.empty()) return prop;
        const Index j = rng.index(r_cur.count());
        prop.r_prop.reset(r_cur.indices()[static_cast<std::size_t>(j)]);
        prop.forward_log_density = log_inv(2.0 * static_cast<double>(r_cur.count()));
        prop.reverse_log_density = log_inv(2.0 * static_cast<double>(prop.r_prop.free_count()));
    } else {
        if (r_cur.free_count() == 0) return prop;
        prop.r_prop.set(r_cur.free_slot(rng.index(r_cur.free_count())));
        prop.forward_log_density = log_inv(2.0 * static_cast<double>(r_cur.free_count()));
        prop.reverse_log_density = log_inv(2.0 * static_cast<double>(prop.r_prop.count()));
    }
    return prop;
}

Proposal propose_segment_bd(Rng& rng, const ChangepointVector& r_cur) {
    Proposal prop = null_move(ProposalKind::SegmentBD, r_cur);
    if (rng.uniform() < 0.5) {
        if (r_cur.count() < 2) return prop;
        const auto j = static_cast<std::size_t>(rng.index(r_cur.count()));
        if (j + 1 == r_cur.indices().size()) return prop;  // last changepoint has no successor
        prop.r_prop.reset(r_cur.indices()[j + 1]);
        prop.r_prop.reset(r_cur.indices()[j]);
        prop.forward_log_density = segment_delete_log_density(r_cur);
        prop.reverse_log_density = segment_insert_log_density(prop.r_prop);
    } else {
        const Index m = r_cur.free_count();
        if (m < 2) return prop;
        const Index q1 = rng.index(m);
        Index q2 = rng.index(m - 1);
        if (q2 >= q1) ++q2;
        const Index a = r_cur.free_slot(std::min(q1, q2));
        const Index b = r_cur.free_slot(std::max(q1, q2));
        if (count_between(r_cur, a, b) != 0) return prop;
        prop.r_prop.set(a);
        prop.r_prop.set(b);
        prop.forward_log_density = segment_insert_log_density(r_cur);
        prop.reverse_log_density = segment_delete_log_density(prop.r_prop);
    }
    return prop;
}

Proposal propose_shift(Rng& rng, const ChangepointVector& r_cur) {
    Proposal prop = null_move(ProposalKind::Shift, r_cur);
    if (r_cur.empty() || r_cur.free_count() == 0) return prop;
    const Index from = r_cur.indices()[static_cast<std::size_t>(rng.index(r_cur.count()))];
    const Index to = r_cur.free_slot(rng.index(r_cur.free_count()));
    prop.r_prop.reset(from);
    prop.r_prop.set(to);
    prop.forward_log_density = log_inv(static_cast<double>(r_cur.count()) * static_cast<double>(r_cur.free_count()));
    prop.reverse_log_density = prop.forward_log_density;
    return prop;
}

Proposal propose(ProposalKind kind, Rng& rng, const ChangepointVector& r_cur, double lambda, double dt) {
    switch (kind) {
        case ProposalKind::New: return propose_new(rng, r_cur, lambda, dt);
        case ProposalKind::BirthDeath: return propose_birth_death(rng, r_cur);
        case ProposalKind::SegmentBD: return propose_segment_bd(rng, r_cur);
        case ProposalKind::Shift: return propose_shift(rng, r_cur);
        case ProposalKind::Initial: break;
    }
    throw InvalidArgument("propose: not a proposal kernel");
}

double transition_log_density(ProposalKind kind, const ChangepointVector& from, const ChangepointVector& to,
                              double lambda, double dt) {
    if (from.n() != to.n()) throw DimensionMismatch("transition density: vectors of different length");
    if (kind == ProposalKind::New) return new_log_density(to, lambda, dt);

    const SetDiff diff = set_diff(from, to);
    const std::size_t nr = diff.removed.size();
    const std::size_t na = diff.added.size();
    switch (kind) {
        case ProposalKind::BirthDeath:
            if (nr == 1 && na == 0) return log_inv(2.0 * static_cast<double>(from.count()));
            if (nr == 0 && na == 1) return log_inv(2.0 * static_cast<double>(from.free_count()));
            return kMinusInfinity;
        case ProposalKind::SegmentBD:
            if (nr == 2 && na == 0 && count_between(from, diff.removed[0], diff.removed[1]) == 0)
                return segment_delete_log_density(from);
            if (nr == 0 && na == 2 && count_between(from, diff.added[0], diff.added[1]) == 0)
                return segment_insert_log_density(from);
            return kMinusInfinity;
        case ProposalKind::Shift:
            if (nr == 1 && na == 1)
                return log_inv(static_cast<double>(from.count()) * static_cast<double>(from.free_count()));
            return kMinusInfinity;
        default: break;
    }
    throw InvalidArgument("transition density: not a proposal kernel");
}

double null_move_probability(ProposalKind kind, const ChangepointVector& from) {
    const Index ones = from.count();
    const Index m = from.free_count();
    switch (kind) {
        case ProposalKind::New: return 0.0;
        case ProposalKind::BirthDeath: return 0.5 * (ones == 0) + 0.5 * (m == 0);
        case ProposalKind::SegmentBD: {
            const double del = ones < 2 ? 1.0 : 1.0 / static_cast<double>(ones);
            const double ins = m < 2 ? 1.0 : 1.0 - 2.0 * segment_insertion_mass(from);
            return 0.5 * del + 0.5 * ins;
        }
        case ProposalKind::Shift: return (ones == 0 || m == 0) ? 1.0 : 0.0;
        case ProposalKind::Initial: break;
    }
    throw InvalidArgument("null move probability: not a proposal kernel");
}

double log_acceptance(double score_cur, double score_prop, double forward_log_density, double reverse_log_density) {
    if (forward_log_density == kMinusInfinity || score_cur == kMinusInfinity) return kMinusInfinity;
    if (score_prop == kMinusInfinity || reverse_log_density == kMinusInfinity) return kMinusInfinity;
    return std::min(0.0, score_prop - score_cur + reverse_log_density - forward_log_density);
}

double ScoreCache::operator()(const ChangepointVector& r) {
    if (auto it = table_.find(r); it != table_.end()) return it->second;
    ++evaluations_;
    const double s = scorer_(r).total;
    if (table_.size() >= max_entries_) table_.clear();
    table_.emplace(r, s);
    return s;
}

StepResult mh_step(const ChangepointVector& r_cur, double score_cur, const Trajectory& traj, const ScoreConfig& cfg,
                   const McmcConfig& mcfg, Rng& rng, ScoreCache& cache, const std::optional<ProposalWeights>& weights) {
    const ProposalWeights w = weights ? *weights : ProposalWeights::from(mcfg);
    const ProposalKind kind = w.select(rng.uniform());
    Proposal prop = propose(kind, rng, r_cur, mcfg.lambda, traj.dt());
    if (cfg.k_max && prop.r_prop.segments() > *cfg.k_max) prop.forward_log_density = kMinusInfinity;

    StepResult out;
    out.record.kind = kind;
    double log_alpha = kMinusInfinity;
    double score_prop = kMinusInfinity;
    if (prop.possible()) {
        score_prop = cache(prop.r_prop);
        log_alpha = log_acceptance(score_cur, score_prop, prop.forward_log_density, prop.reverse_log_density);
    }
    const double u = rng.uniform_positive();
    const bool accept = log_alpha > kMinusInfinity && std::log(u) <= log_alpha;
    if (accept) {
        out.r_next = std::move(prop.r_prop);
        out.score_next = score_prop;
    } else {
        out.r_next = r_cur;
        out.score_next = score_cur;
    }
    out.record.accepted = accept;
    out.record.score = out.score_next;
    out.record.num_changepoints = out.r_next.count();
    return out;
}

ChangepointVector initial_state(Rng& rng, Index n, double lambda, double dt, const ScoreConfig& cfg, ScoreCache& cache) {
    const ChangepointVector zero(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        ChangepointVector r = propose_new(rng, zero, lambda, dt).r_prop;
        if (cfg.k_max && r.segments() > *cfg.k_max) continue;
        if (cache(r) > kMinusInfinity) return r;
    }
    return zero;
}

Chain::Chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg)
    : Chain(traj, cfg, mcfg, ProposalWeights::from(mcfg)) {}

Chain::Chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg, ProposalWeights weights,
             std::optional<ChangepointVector> initial)
    : traj_(&traj), cfg_(cfg), mcfg_(mcfg), weights_(weights), rng_(mcfg.seed), cache_(traj, cfg) {
    cfg_.validate();
    weights_.validate();
    if (!(mcfg_.lambda > 0.0)) throw InvalidArgument("mcmc config: lambda must be > 0");
    if (initial) {
        if (initial->n() != traj.size()) throw DimensionMismatch("initial state does not match trajectory");
        state_ = std::move(*initial);
    } else {
        state_ = initial_state(rng_, traj.size(), mcfg_.lambda, traj.dt(), cfg_, cache_);
    }
    score_ = cache_(state_);
    if (score_ == kMinusInfinity) throw DegenerateFit("initial changepoint vector gives a degenerate fit");
    if (mcfg_.t_max > 0) trace_.records.reserve(static_cast<std::size_t>(mcfg_.t_max) + 1);
    record(IterationRecord{0, score_, true, ProposalKind::Initial, state_.count()});
}

void Chain::record(const IterationRecord& rec) {
    trace_.records.push_back(rec);
    if (rec.score > trace_.best_score) {
        trace_.best_score = rec.score;
        trace_.best_r = state_;
        trace_.best_iteration = rec.iteration;
    }
}

const IterationRecord& Chain::step() {
    StepResult res = mh_step(state_, score_, *traj_, cfg_, mcfg_, rng_, cache_, weights_);
    ++iteration_;
    state_ = std::move(res.r_next);
    score_ = res.score_next;
    res.record.iteration = iteration_;
    record(res.record);
    return trace_.records.back();
}

ChainTrace run_chain(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg) {
    if (mcfg.t_max < 0) throw InvalidArgument("mcmc config: t_max must be >= 0");
    Chain chain(traj, cfg, mcfg);
    for (std::int64_t t = 0; t < mcfg.t_max; ++t) chain.step();
    return chain.release_trace();
}

CplassResult cplass(const Trajectory& traj, const ScoreConfig& cfg, const McmcConfig& mcfg) {
    CplassResult out;
    out.trace = run_chain(traj, cfg, mcfg);
    // the reported fit comes from the QR reference solver
    out.segmentation = fit_given_changepoints(traj, out.trace.best_r);
    out.score = score_of_fit(out.segmentation, cfg, rss_floor(traj));
    return out;
}

}  // namespace cplass
