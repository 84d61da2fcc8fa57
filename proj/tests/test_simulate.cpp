#include "catch2/catch_amalgamated.hpp"

#include "cplass/pwl_fit.hpp"
#include "cplass/simulate.hpp"

#include <cmath>

using namespace cplass;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

void check_truth_invariants(const Trajectory& traj, const Segmentation& truth) {
    CHECK(truth.n == traj.size());
    CHECK(truth.d == traj.dims());
    CHECK(truth.segments() == truth.num_changepoints() + 1);
    CHECK_THAT(truth.durations.sum(), WithinRel(traj.duration(), 1e-12));
    CHECK(truth.durations.minCoeff() > 0.0);
    RowMatrix<double> cum = truth.W;
    for (Index j = 1; j < cum.rows(); ++j) cum.row(j) += cum.row(j - 1);
    CHECK((cum - truth.V).cwiseAbs().maxCoeff() <= 1e-12);
    for (std::size_t j = 1; j < truth.change_indices.size(); ++j)
        CHECK(truth.change_indices[j] > truth.change_indices[j - 1]);
}

}  // namespace

TEST_CASE("noise-free piecewise path lies on the anchor") {
    auto truth = setups::three_segment(0.05, 80, 1.0, 2.5, 0.1, -0.2, 0.05, 0.0);
    truth.intercept_true << 1.0, -2.0;
    const auto path = simulate_piecewise(truth, 3);
    check_truth_invariants(path.trajectory, path.truth);
    CHECK(path.truth.change_indices == std::vector<Index>{20, 50});
    const auto fit = fit_given_changepoints(path.trajectory, path.truth.changepoints());
    CHECK(fit.rss <= 1e-24);
    CHECK((fit.V - truth.V_true).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(path.truth.rss == 0.0);
}

TEST_CASE("gamma-sweep panel truths") {
    const auto a = setups::gamma_panel('A', true);
    CHECK(a.n == 53);
    CHECK(a.dt == 0.05);
    CHECK(a.tau_true == std::vector<double>{1.1, 1.55});
    CHECK(a.V_true(1, 0) == 0.1);
    CHECK(a.sigma == 0.01);
    CHECK(truth_segmentation(a).change_indices == std::vector<Index>{22, 31});

    const auto b = setups::gamma_panel('B', true);
    CHECK(b.n == 203);
    CHECK(truth_segmentation(b).change_indices == std::vector<Index>{100, 103});
    CHECK(setups::gamma_panel('A', false).tau_true.empty());
    CHECK_THROWS_AS(setups::gamma_panel('C', true), InvalidArgument);
}

TEST_CASE("piecewise noise has the configured variance") {
    const auto truth = setups::stationary(0.05, 20, 0.3);
    double sum = 0, sum2 = 0;
    std::size_t count = 0;
    for (std::uint64_t rep = 0; rep < 10000; ++rep) {
        const auto path = simulate_piecewise(truth, derive_seed(1, rep));
        const auto& Y = path.trajectory.positions();
        for (Index i = 0; i < Y.rows(); ++i)
            for (Index c = 0; c < Y.cols(); ++c) {
                sum += Y(i, c);
                sum2 += Y(i, c) * Y(i, c);
                ++count;
            }
    }
    const double mean = sum / double(count);
    const double var = sum2 / double(count) - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK_THAT(var, WithinRel(0.09, 0.02));
}

TEST_CASE("refit error shrinks with the noise level") {
    double last = 1e300;
    for (double sigma : {1e-2, 1e-4, 1e-6}) {
        const auto truth = setups::three_segment(0.05, 200, 3.0, 6.0, 0.0, 0.3, -0.1, sigma);
        const auto path = simulate_piecewise(truth, 21);
        const auto fit = fit_given_changepoints(path.trajectory, path.truth.changepoints());
        const double err = (fit.V - truth.V_true).cwiseAbs().maxCoeff();
        CHECK(err < last);
        last = err;
    }
    CHECK(last < 1e-5);
}

TEST_CASE("invalid truths are rejected") {
    auto t = setups::three_segment(0.05, 80, 1.0, 2.5, 0.1, -0.2, 0.05, 0.0);
    t.tau_true = {2.5, 1.0};
    CHECK_THROWS_AS(simulate_piecewise(t, 1), InvalidChangepoints);
    t = setups::three_segment(0.05, 80, 1.0, 5.0, 0.1, -0.2, 0.05, 0.0);
    CHECK_THROWS_AS(simulate_piecewise(t, 1), InvalidChangepoints);
    t = setups::three_segment(0.05, 80, 1.0, 2.0, 0.1, 0.1, 0.05, 0.0);
    CHECK_THROWS_AS(simulate_piecewise(t, 1), InvalidArgument);
    t = setups::three_segment(0.05, 80, 1.0, 2.0, 0.1, -0.1, 0.05, -1.0);
    CHECK_THROWS_AS(simulate_piecewise(t, 1), InvalidArgument);
}

TEST_CASE("base two-state parameters") {
    const auto b = TwoStateParams::base();
    CHECK(b.n == 200);
    CHECK(b.p == 1.0);
    CHECK(b.q == 0.5);
    CHECK(b.alpha == 8.0);
    CHECK(b.beta == 0.02);
    CHECK(b.p_reverse == 0.3);
    CHECK(b.p_continue == 0.3);
    CHECK(b.sigma_cargo == 0.1);
    CHECK(b.dt == 0.04);
    CHECK(b.mean_distance == 300.0);
    CHECK(b.mean_stationary == 5.0);
}

TEST_CASE("per-step switching gives geometric state durations") {
    auto params = TwoStateParams::base();
    params.rule = SwitchingRule::PerStep;
    Rng rng(31);
    const auto pieces = two_state_pieces(params, rng, 400000);
    // group pieces into uninterrupted state runs
    std::vector<std::pair<bool, Index>> runs;
    for (const auto& p : pieces) {
        if (runs.empty() || p.run != pieces[&p - pieces.data() - 1].run)
            runs.emplace_back(p.motile, 0);
        runs.back().second += p.steps;
    }
    runs.pop_back();  // the last run is cut off
    double motile_time = 0;
    std::size_t motile_runs = 0;
    for (const auto& [motile, steps] : runs) {
        if (motile) {
            motile_time += double(steps) * params.dt;
            ++motile_runs;
        } else {
            CHECK(steps == 1);  // p = 1
        }
    }
    REQUIRE(motile_runs >= 100000);
    const double mean = motile_time / double(motile_runs);
    // geometric with success probability q: mean dt/q, sd dt*sqrt(1-q)/q
    const double se = params.dt * std::sqrt(1 - params.q) / params.q / std::sqrt(double(motile_runs));
    CHECK(std::fabs(mean - params.dt / params.q) <= 4 * se);
}

TEST_CASE("a process that never stops is one motile run") {
    auto params = TwoStateParams::base();
    params.rule = SwitchingRule::PerStep;
    params.q = 0.0;
    params.sigma_cargo = 0.0;
    const auto path = simulate_two_state(params, 9);
    check_truth_invariants(path.trajectory, path.truth);
    const double speed = path.truth.speeds(0);
    CHECK(speed > 0.0);
    for (Index j = 0; j < path.truth.segments(); ++j) CHECK_THAT(path.truth.speeds(j), WithinRel(speed, 1e-12));
    // every boundary is a change of direction
    for (Index j = 1; j < path.truth.segments(); ++j) CHECK(path.truth.V.row(j) != path.truth.V.row(j - 1));
    const auto fitted = fitted_values(path.trajectory, path.truth);
    CHECK((fitted - path.trajectory.positions()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("two-state truth reproduces the noise-free path") {
    auto params = TwoStateParams::base();
    params.sigma_cargo = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto path = simulate_two_state(params, seed);
        check_truth_invariants(path.trajectory, path.truth);
        const auto fitted = fitted_values(path.trajectory, path.truth);
        CHECK((fitted - path.trajectory.positions()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("simulation is deterministic in the seed") {
    const auto params = TwoStateParams::base();
    const auto a = simulate_two_state(params, 42);
    const auto b = simulate_two_state(params, 42);
    const auto c = simulate_two_state(params, 43);
    CHECK(a.trajectory.positions() == b.trajectory.positions());
    CHECK(a.truth.change_indices == b.truth.change_indices);
    CHECK(a.trajectory.positions() != c.trajectory.positions());

    const auto truth = setups::binseg_failure();
    CHECK(simulate_piecewise(truth, 5).trajectory.positions() == simulate_piecewise(truth, 5).trajectory.positions());
}

TEST_CASE("two-state motile speeds follow the configured gamma law") {
    auto params = TwoStateParams::base();
    Rng rng(77);
    const auto pieces = two_state_pieces(params, rng, 2000000);
    double sum = 0;
    std::size_t count = 0;
    for (const auto& p : pieces)
        if (p.motile) {
            sum += p.velocity.norm();
            ++count;
        }
    REQUIRE(count > 1000);
    // Gamma(8, 0.02 per nm/s) has mean 400 nm/s
    const double mean = sum / double(count);
    const double se = std::sqrt(8.0) / 0.02 / 1000.0 / std::sqrt(double(count));
    CHECK(std::fabs(mean - 0.4) <= 4 * se);
}

TEST_CASE("invalid two-state parameters are rejected") {
    auto p = TwoStateParams::base();
    p.q = 1.5;
    CHECK_THROWS_AS(simulate_two_state(p, 1), InvalidArgument);
    p = TwoStateParams::base();
    p.p_reverse = 0.8;
    p.p_continue = 0.3;
    CHECK_THROWS_AS(simulate_two_state(p, 1), InvalidArgument);
}
