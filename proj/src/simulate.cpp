#include "cplass/simulate.hpp"

#include "cplass/pwl_fit.hpp"

#include <cmath>

namespace cplass {

namespace {

// Snaps tau onto the grid when it is within rounding distance of a grid point.
double snap_to_grid(double tau, double dt) {
    const double x = tau / dt;
    const double nearest = std::round(x);
    return std::abs(x - nearest) < 1e-9 * std::max(1.0, std::abs(x)) ? nearest * dt : tau;
}

Index grid_index(double tau, double dt) {
    const double x = tau / dt;
    const double nearest = std::round(x);
    if (std::abs(x - nearest) < 1e-9 * std::max(1.0, std::abs(x))) return static_cast<Index>(nearest);
    return static_cast<Index>(std::floor(x));
}

Eigen::VectorXd random_unit(Rng& rng, Index d) {
    Eigen::VectorXd v(d);
    do {
        for (Index l = 0; l < d; ++l) v(l) = rng.normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

// Direction of the next motile stretch given the previous one.
Eigen::VectorXd next_direction(const Eigen::VectorXd& dir, const TwoStateParams& params, Rng& rng) {
    const double u = rng.uniform();
    if (u < params.p_reverse) return -dir;
    if (u < params.p_reverse + params.p_continue) return dir;
    return random_unit(rng, params.dims);
}

Index steps_for(double duration, double dt) { return std::max<Index>(1, static_cast<Index>(std::llround(duration / dt))); }

}  // namespace

void PiecewiseTruth::validate() const {
    if (n < 2) throw InvalidArgument("piecewise truth: n must be >= 2");
    if (!(dt > 0.0)) throw InvalidArgument("piecewise truth: dt must be > 0");
    if (!(sigma >= 0.0)) throw InvalidArgument("piecewise truth: sigma must be >= 0");
    if (V_true.rows() != static_cast<Index>(tau_true.size()) + 1)
        throw DimensionMismatch("piecewise truth: need one velocity row per segment");
    if (V_true.cols() < 1 || intercept_true.size() != V_true.cols())
        throw DimensionMismatch("piecewise truth: intercept and velocities disagree on dimension");
    const double T = static_cast<double>(n) * dt;
    for (std::size_t j = 0; j < tau_true.size(); ++j) {
        if (!(tau_true[j] > 0.0 && tau_true[j] < T)) throw InvalidChangepoints("piecewise truth: tau outside (0, T)");
        if (j > 0 && !(tau_true[j] > tau_true[j - 1])) throw InvalidChangepoints("piecewise truth: tau not increasing");
    }
    for (Index j = 1; j < V_true.rows(); ++j)
        if (V_true.row(j) == V_true.row(j - 1))
            throw InvalidArgument("piecewise truth: consecutive segments must have different velocities");
}

Segmentation truth_segmentation(const PiecewiseTruth& truth) {
    truth.validate();
    Segmentation seg;
    seg.n = truth.n;
    seg.d = truth.dims();
    seg.dt = truth.dt;
    seg.t0 = 0.0;
    for (double tau : truth.tau_true) {
        seg.tau.push_back(snap_to_grid(tau, truth.dt));
        seg.change_indices.push_back(grid_index(tau, truth.dt));
    }
    seg.intercept = truth.intercept_true;
    seg.V = truth.V_true;
    const Index k = seg.V.rows();
    seg.W = seg.V;
    for (Index j = 1; j < k; ++j) seg.W.row(j) = seg.V.row(j) - seg.V.row(j - 1);
    seg.speeds = seg.V.rowwise().norm();
    const auto b = seg.boundaries();
    seg.durations.resize(k);
    for (Index j = 0; j < k; ++j)
        seg.durations(j) = b[static_cast<std::size_t>(j) + 1] - b[static_cast<std::size_t>(j)];
    return seg;
}

SimulatedPath simulate_piecewise(const PiecewiseTruth& truth, std::uint64_t seed) {
    Segmentation seg = truth_segmentation(truth);
    const Index n = truth.n;
    const Index d = truth.dims();
    const Trajectory grid(truth.dt, RowMatrix<double>::Zero(n, d));
    const RowMatrix<double> signal = fitted_values(grid, seg);

    Rng rng(seed);
    RowMatrix<double> noise(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < d; ++l) noise(i, l) = rng.normal();
    RowMatrix<double> y = signal + truth.sigma * noise;

    seg.rss = (y - signal).squaredNorm();
    seg.sigma2_hat = seg.rss / static_cast<double>(n * d);
    return {Trajectory(truth.dt, std::move(y)), std::move(seg)};
}

void TwoStateParams::validate() const {
    auto prob = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (n < 2) throw InvalidArgument("two-state: n must be >= 2");
    if (!prob(p) || !prob(q) || !prob(p_reverse) || !prob(p_continue) || p_reverse + p_continue > 1.0)
        throw InvalidArgument("two-state: probabilities must lie in [0, 1]");
    if (!(alpha > 0.0 && beta > 0.0)) throw InvalidArgument("two-state: alpha and beta must be > 0");
    if (!(sigma_cargo >= 0.0 && dt > 0.0)) throw InvalidArgument("two-state: need sigma_cargo >= 0 and dt > 0");
    if (!(mean_stationary > 0.0 && mean_distance > 0.0)) throw InvalidArgument("two-state: mean durations must be > 0");
    if (dims < 1) throw InvalidArgument("two-state: dims must be >= 1");
    if (!(burn_in_factor >= 1.0)) throw InvalidArgument("two-state: burn-in factor must be >= 1");
}

std::vector<TwoStatePiece> two_state_pieces(const TwoStateParams& params, Rng& rng, Index total_steps) {
    params.validate();
    std::vector<TwoStatePiece> pieces;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(params.dims);
    bool motile = rng.bernoulli(0.5);
    std::int64_t run = 0;
    Index covered = 0;

    if (params.rule == SwitchingRule::PerSegment) {
        Eigen::VectorXd dir = random_unit(rng, params.dims);
        bool first_run = true;
        while (covered < total_steps) {
            TwoStatePiece piece;
            piece.motile = motile;
            piece.run = run;
            if (!motile) {
                piece.steps = steps_for(rng.exponential(params.mean_stationary), params.dt);
                piece.velocity = zero;
            } else {
                const double speed = rng.gamma(params.alpha, params.beta) / 1000.0;      // nm/s -> um/s
                const double distance = rng.exponential(params.mean_distance) / 1000.0;  // nm -> um
                piece.steps = steps_for(distance / speed, params.dt);
                if (!first_run) dir = next_direction(dir, params, rng);
                first_run = false;
                piece.velocity = speed * dir;
            }
            covered += piece.steps;
            pieces.push_back(std::move(piece));
            const bool next = motile ? !rng.bernoulli(params.q) : rng.bernoulli(params.p);
            if (next != motile) ++run;
            motile = next;
        }
        return pieces;
    }

    Eigen::VectorXd dir = zero;
    double speed = 0.0;
    bool entering = true;
    while (covered < total_steps) {
        TwoStatePiece piece;
        piece.motile = motile;
        piece.run = run;
        if (!motile) {
            piece.velocity = zero;
        } else {
            if (entering) {
                speed = rng.gamma(params.alpha, params.beta) / 1000.0;
                dir = random_unit(rng, params.dims);
                entering = false;
            } else {
                dir = next_direction(dir, params, rng);
            }
            piece.velocity = speed * dir;
        }
        ++covered;
        pieces.push_back(std::move(piece));
        const bool next = motile ? !rng.bernoulli(params.q) : rng.bernoulli(params.p);
        if (next != motile) {
            ++run;
            entering = next;
        }
        motile = next;
    }
    return pieces;
}

SimulatedPath simulate_two_state(const TwoStateParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    const Index n = params.n;
    const Index d = params.dims;
    const Index total = std::max<Index>(n, static_cast<Index>(std::ceil(params.burn_in_factor * static_cast<double>(n))));
    const auto pieces = two_state_pieces(params, rng, total);

    // Keep steps (total - n, total]; merge equal-velocity neighbours inside the window.
    const Index start = total - n;
    std::vector<std::pair<Index, Eigen::VectorXd>> kept;  // (steps, velocity)
    RowMatrix<double> anchor(n + 1, d);
    Eigen::VectorXd pos = Eigen::VectorXd::Zero(d);
    Index step = 0;
    for (const auto& piece : pieces) {
        for (Index s = 0; s < piece.steps && step < total; ++s, ++step) {
            if (step == start) anchor.row(0) = pos.transpose();
            pos += piece.velocity * params.dt;
            if (step >= start) {
                anchor.row(step - start + 1) = pos.transpose();
                if (!kept.empty() && kept.back().second == piece.velocity)
                    ++kept.back().first;
                else
                    kept.emplace_back(1, piece.velocity);
            }
        }
    }

    Segmentation seg;
    seg.n = n;
    seg.d = d;
    seg.dt = params.dt;
    seg.t0 = 0.0;
    const Index k = static_cast<Index>(kept.size());
    seg.V.resize(k, d);
    seg.durations.resize(k);
    Index boundary = 0;
    for (Index j = 0; j < k; ++j) {
        const auto& [steps, velocity] = kept[static_cast<std::size_t>(j)];
        seg.V.row(j) = velocity.transpose();
        seg.durations(j) = static_cast<double>(steps) * params.dt;
        boundary += steps;
        if (j + 1 < k) {
            seg.change_indices.push_back(boundary);
            seg.tau.push_back(static_cast<double>(boundary) * params.dt);
        }
    }
    seg.W = seg.V;
    for (Index j = 1; j < k; ++j) seg.W.row(j) = seg.V.row(j) - seg.V.row(j - 1);
    seg.speeds = seg.V.rowwise().norm();
    seg.intercept = anchor.row(0).transpose();

    RowMatrix<double> y = anchor.bottomRows(n);
    for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < d; ++l) y(i, l) += params.sigma_cargo * rng.normal();
    seg.rss = (y - anchor.bottomRows(n)).squaredNorm();
    seg.sigma2_hat = seg.rss / static_cast<double>(n * d);
    return {Trajectory(params.dt, std::move(y)), std::move(seg)};
}

namespace setups {

PiecewiseTruth three_segment(double dt, Index n, double tau1, double tau2, double s1, double s2, double s3, double sigma) {
    PiecewiseTruth t;
    t.dt = dt;
    t.n = n;
    t.sigma = sigma;
    t.tau_true = {tau1, tau2};
    t.V_true = RowMatrix<double>::Zero(3, 2);
    t.V_true(0, 0) = s1;
    t.V_true(1, 0) = s2;
    t.V_true(2, 0) = s3;
    t.intercept_true = Eigen::VectorXd::Zero(2);
    return t;
}

PiecewiseTruth stationary(double dt, Index n, double sigma) {
    PiecewiseTruth t;
    t.dt = dt;
    t.n = n;
    t.sigma = sigma;
    t.V_true = RowMatrix<double>::Zero(1, 2);
    t.intercept_true = Eigen::VectorXd::Zero(2);
    return t;
}

PiecewiseTruth binseg_failure() {
    PiecewiseTruth t;
    t.dt = 0.05;
    t.n = 600;
    t.sigma = 0.1;
    t.tau_true = {10.0, 20.0};
    t.V_true.resize(3, 2);
    t.V_true << 0.1, -0.1, 0.0, 0.0, -0.1, 0.1;
    t.intercept_true = Eigen::VectorXd::Zero(2);
    return t;
}

PiecewiseTruth short_fast_segment(double sigma) { return three_segment(0.01, 600, 3.0, 3.5, 0.0, 0.2, 0.0, sigma); }

PiecewiseTruth gamma_panel(char panel, bool alternative) {
    if (panel == 'A' || panel == 'a') {
        return alternative ? three_segment(0.05, 53, 1.1, 1.55, 0.0, 0.1, 0.0, 0.01) : stationary(0.05, 53, 0.01);
    }
    if (panel == 'B' || panel == 'b') {
        return alternative ? three_segment(0.05, 203, 5.0, 5.15, 0.0, 0.15, 0.0, 0.01) : stationary(0.05, 203, 0.01);
    }
    throw InvalidArgument("gamma panel must be 'A' or 'B'");
}

PiecewiseTruth power_cell(double middle_duration, double middle_speed) {
    const double dt = 0.05;
    const Index n = static_cast<Index>(std::llround((4.0 + middle_duration) / dt));
    return three_segment(dt, n, 2.0, 2.0 + middle_duration, 0.0, middle_speed, 0.0, 0.01);
}

PiecewiseTruth consistency_truth(Index n) {
    PiecewiseTruth t;
    t.n = n;
    t.dt = 10.0 / static_cast<double>(n);
    t.sigma = 0.1;
    t.tau_true = {3.0, 7.0};
    t.V_true.resize(3, 2);
    t.V_true << 0.1, 0.0, -0.05, 0.1, 0.1, 0.05;
    t.intercept_true = Eigen::VectorXd::Zero(2);
    return t;
}

}  // namespace setups

}  // namespace cplass
