#include "catch2/catch_amalgamated.hpp"

#include "cplass/pwl_fit.hpp"
#include "cplass/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace cplass;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Trajectory line_1d(const std::vector<double>& y, double dt) {
    RowMatrix<double> Y(static_cast<Index>(y.size()), 1);
    for (std::size_t i = 0; i < y.size(); ++i) Y(static_cast<Index>(i), 0) = y[i];
    return Trajectory(dt, Y);
}

ChangepointVector random_r(Rng& rng, Index n, Index max_changes) {
    ChangepointVector r(n);
    const Index m = rng.index(max_changes + 1);
    for (Index tries = 0; r.count() < m && tries < 100; ++tries) r.set(2 + rng.index(n - 2));
    return r;
}

}  // namespace

TEST_CASE("design without changepoints is a plain regression design") {
    const auto traj = line_1d({0, 0, 0}, 1.0);
    const auto X = build_design(traj, ChangepointVector(3));
    REQUIRE(X.rows() == 3);
    REQUIRE(X.cols() == 2);
    for (Index i = 0; i < 3; ++i) {
        CHECK(X(i, 0) == 1.0);
        CHECK(X(i, 1) == double(i + 1));
    }
}

TEST_CASE("hinge column") {
    const auto traj = line_1d({0, 0, 0, 0}, 1.0);
    const auto X = build_design(traj, ChangepointVector(4, {2}));
    REQUIRE(X.cols() == 3);
    CHECK(X(0, 2) == 0.0);
    CHECK(X(1, 2) == 0.0);
    CHECK(X(2, 2) == 1.0);
    CHECK(X(3, 2) == 2.0);
}

TEST_CASE("hinge columns match the indicator formula entry by entry") {
    const auto traj = line_1d({0, 0, 0, 0, 0, 0}, 0.5);
    const std::vector<double> taus{1.0, 2.0};
    const auto X = build_design(traj, taus);
    const auto Xr = build_design(traj, times_to_cp_vector(taus, 6, 0.5));
    REQUIRE(X.cols() == 4);
    for (Index i = 0; i < 6; ++i) {
        const double t = 0.5 * double(i + 1);
        CHECK(X(i, 0) == 1.0);
        CHECK(X(i, 1) == t);
        for (Index j = 0; j < 2; ++j) {
            const double tau = taus[static_cast<std::size_t>(j)];
            const double expected = t > tau ? t - tau : 0.0;
            CHECK(X(i, j + 2) == expected);
            CHECK(Xr(i, j + 2) == expected);
        }
    }
}

TEST_CASE("noiseless line is recovered exactly") {
    std::vector<double> y;
    for (int i = 1; i <= 20; ++i) y.push_back(2.0 + 0.3 * 0.1 * i);
    const auto traj = line_1d(y, 0.1);
    const auto fit = fit_given_changepoints(traj, ChangepointVector(20));
    CHECK_THAT(fit.intercept(0), WithinAbs(2.0, 1e-12));
    CHECK_THAT(fit.V(0, 0), WithinAbs(0.3, 1e-12));
    CHECK(fit.rss <= 1e-18);
}

TEST_CASE("noiseless 2-d path with one change") {
    const double dt = 0.1;
    const Index n = 60;  // T = 6 s, change at 3 s = index 30
    RowMatrix<double> Y(n, 2);
    for (Index i = 1; i <= n; ++i) {
        const double t = dt * double(i);
        const double s = t <= 3.0 ? t : 3.0;
        const double u = t <= 3.0 ? 0.0 : t - 3.0;
        Y(i - 1, 0) = 1.0 + 0.1 * s - 0.1 * u;
        Y(i - 1, 1) = -0.1 * s + 0.1 * u;
    }
    const Trajectory traj(dt, Y);
    const auto fit = fit_given_changepoints(traj, ChangepointVector(n, {30}));
    CHECK_THAT(fit.V(0, 0), WithinAbs(0.1, 1e-12));
    CHECK_THAT(fit.V(0, 1), WithinAbs(-0.1, 1e-12));
    CHECK_THAT(fit.V(1, 0), WithinAbs(-0.1, 1e-12));
    CHECK_THAT(fit.V(1, 1), WithinAbs(0.1, 1e-12));
    CHECK(fit.rss <= 1e-20);
}

TEST_CASE("hand example agrees with the exact normal equations") {
    const auto traj = line_1d({0, 1, 2, 3, 3, 3}, 1.0);
    const ChangepointVector r(6, {3});
    const auto exact = oracle::normal_equations_fit(traj, r);
    const auto fit = fit_given_changepoints(traj, r);
    CHECK(exact.rss == oracle::Rational(6, 19));
    CHECK_THAT(fit.rss, WithinRel(6.0 / 19.0, 1e-12));
    CHECK_THAT(fit.intercept(0), WithinRel(oracle::to_double(exact.coef[0][0]), 1e-12));
    for (Index j = 0; j < 2; ++j) CHECK_THAT(fit.W(j, 0), WithinRel(oracle::to_double(exact.coef[static_cast<std::size_t>(j) + 1][0]), 1e-12));

    const auto noisy = line_1d({0.1, 0.9, 2.2, 2.9, 3.05, 3.0}, 1.0);
    const auto ex2 = oracle::normal_equations_fit(noisy, r);
    const auto f2 = fit_given_changepoints(noisy, r);
    CHECK_THAT(f2.rss, WithinRel(oracle::to_double(ex2.rss), 1e-10));
    for (Index j = 0; j < 2; ++j) CHECK_THAT(f2.W(j, 0), WithinRel(oracle::to_double(ex2.coef[static_cast<std::size_t>(j) + 1][0]), 1e-10));
}

TEST_CASE("random instances agree with the exact oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const Index n = 6 + rng.index(15);
        const Index d = 1 + rng.index(3);
        const auto traj = oracle::random_trajectory(rng, n, d, 0.05);
        const auto r = random_r(rng, n, 2);
        const auto exact = oracle::normal_equations_fit(traj, r);
        const auto fit = fit_given_changepoints(traj, r);
        const auto fitted = fitted_values(traj, fit);
        for (Index i = 0; i < n; ++i)
            for (Index c = 0; c < d; ++c)
                CHECK_THAT(fitted(i, c), WithinRel(oracle::to_double(exact.fitted[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]), 1e-9));
        CHECK_THAT(fit.rss, WithinRel(oracle::to_double(exact.rss), 1e-9));
    }
}

TEST_CASE("knot-basis solver agrees with the QR fit") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 5 + rng.index(400);
        const Index d = 1 + rng.index(3);
        const auto traj = oracle::random_trajectory(rng, n, d, 0.01 * double(1 + rng.index(5)));
        const auto r = random_r(rng, n, std::min<Index>(n / 3, 30));
        const KnotFitter<double> fitter(traj);
        const auto qr = try_fit(traj, r);
        const auto kf = fitter.fit(r);
        REQUIRE(qr.has_value() == kf.has_value());
        if (!qr) continue;
        CHECK_THAT(kf->rss, WithinRel(qr->rss, 1e-8));
        const auto a = fitted_values(traj, *qr);
        const auto b = fitted_values(traj, *kf);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + a.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("perturbing a coefficient never lowers RSS") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 15;
        const auto traj = oracle::random_trajectory(rng, n, 2, 0.1);
        const auto r = random_r(rng, n, 3);
        const auto fit = fit_given_changepoints(traj, r);
        for (Index j = 0; j < fit.segments(); ++j) {
            for (Index c = 0; c < 2; ++c) {
                for (double eps : {1e-4, -1e-4}) {
                    auto p = fit;
                    p.W(j, c) += eps;
                    CHECK(rss_of(traj, p) >= fit.rss);
                }
            }
        }
    }
}

TEST_CASE("fitted signal is continuous at every changepoint") {
    Rng rng(6);
    const auto traj = oracle::random_trajectory(rng, 40, 2, 0.05);
    const auto fit = fit_given_changepoints(traj, ChangepointVector(40, {8, 19, 30}));
    for (Index j = 1; j < fit.segments(); ++j) {
        const double tau = fit.tau[static_cast<std::size_t>(j - 1)];
        const auto left = fit.signal_in_segment(j - 1, tau);
        const auto right = fit.signal_in_segment(j, tau);
        CHECK((left - right).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("segmentation invariants") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 30;
        const Index d = 1 + rng.index(3);
        const auto traj = oracle::random_trajectory(rng, n, d, 0.05);
        const auto r = random_r(rng, n, 4);
        const auto fit = fit_given_changepoints(traj, r);
        CHECK(fit.sigma2_hat * double(d * n) == Catch::Approx(fit.rss).epsilon(1e-14));
        CHECK(fit.durations.sum() == Catch::Approx(traj.duration()).epsilon(1e-12));
        CHECK(fit.durations.minCoeff() > 0.0);
        RowMatrix<double> cum = fit.W;
        for (Index j = 1; j < cum.rows(); ++j) cum.row(j) += cum.row(j - 1);
        CHECK((cum - fit.V).cwiseAbs().maxCoeff() <= 1e-12);
        for (Index j = 0; j < fit.segments(); ++j) CHECK(fit.speeds(j) == Catch::Approx(fit.V.row(j).norm()));
        CHECK_THAT(rss_of(traj, fit), WithinRel(fit.rss, 1e-10));
    }
}

TEST_CASE("adding a changepoint never increases RSS") {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const Index n = 25;
        const auto traj = oracle::random_trajectory(rng, n, 2, 0.05);
        auto r = random_r(rng, n, 3);
        const auto before = fit_given_changepoints(traj, r);
        const Index extra = 2 + rng.index(n - 2);
        if (r.test(extra)) continue;
        r.set(extra);
        const auto after = try_fit(traj, r);
        if (!after) continue;
        CHECK(after->rss <= before.rss * (1 + 1e-12) + 1e-15);
    }
}

TEST_CASE("a first segment of one observation is degenerate") {
    Rng rng(9);
    const auto traj = oracle::random_trajectory(rng, 10, 1, 0.1);
    const ChangepointVector r(10, {1});
    CHECK_FALSE(try_fit(traj, r).has_value());
    CHECK_FALSE(KnotFitter<double>(traj).fit(r).has_value());
    CHECK_THROWS_AS(fit_given_changepoints(traj, r), DegenerateFit);
}

TEST_CASE("length mismatch is rejected") {
    Rng rng(10);
    const auto traj = oracle::random_trajectory(rng, 10, 1, 0.1);
    CHECK_THROWS_AS(fit_given_changepoints(traj, ChangepointVector(9)), DimensionMismatch);
}

TEST_CASE("a shifted time origin changes coefficients but not the fit") {
    Rng rng(12);
    const auto a = oracle::random_trajectory(rng, 20, 2, 0.1);
    const Trajectory b(a.dt(), a.positions(), 7.5);
    const ChangepointVector r(20, {6, 13});
    const auto fa = fit_given_changepoints(a, r);
    const auto fb = fit_given_changepoints(b, r);
    CHECK_THAT(fb.rss, WithinRel(fa.rss, 1e-12));
    CHECK(fb.tau[0] == Catch::Approx(7.5 + 0.6));
    CHECK((fitted_values(a, fa) - fitted_values(b, fb)).cwiseAbs().maxCoeff() <= 1e-12);
}
