// Acceptance checks. `cplass_acceptance N` runs criterion N, no argument runs all.
// Each criterion prints exactly one PASS/FAIL line; the exit status is nonzero if any fails.

#include "cplass/cli.hpp"
#include "cplass/experiments.hpp"
#include "cplass/io.hpp"
#include "cplass/parallel.hpp"
#include "cplass/pwl_fit.hpp"
#include "cplass/sampler.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace cplass;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 20240601;

// tolerances and thresholds
constexpr double kFitRelTol = 1e-9;
constexpr double kExhaustiveScoreTol = 1e-9;
constexpr double kBalanceTol = 1e-10;
constexpr double kNormalizationTol = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;  // <= 0 means no runtime limit
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig experiment_config() {
    ExperimentConfig cfg;
    cfg.mcmc.seed = kMasterSeed;
    cfg.scale_iterations = true;
    cfg.threads = default_thread_count();
    return cfg;
}

double rel_err(double a, double b) {
    if (b == 0.0) return std::fabs(a);
    return std::fabs(a - b) / std::fabs(b);
}

Outcome check_fit_oracle() {
    Rng rng(derive_seed(kMasterSeed, 1));
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 4 + rng.index(17);  // 4..20
        const Index d = 1 + rng.index(3);
        const auto traj = oracle::random_trajectory(rng, n, d, 0.05);
        ChangepointVector r(n);
        const Index m = rng.index(4);
        for (Index tries = 0; r.count() < m && tries < 100; ++tries) r.set(2 + rng.index(n - 2));
        const auto exact = oracle::normal_equations_fit(traj, r);
        const auto fit = fit_given_changepoints(traj, r);
        const auto fitted = fitted_values(traj, fit);
        for (Index i = 0; i < n; ++i)
            for (Index c = 0; c < d; ++c)
                worst = std::max(worst, rel_err(fitted(i, c), oracle::to_double(exact.fitted[std::size_t(i)][std::size_t(c)])));
        worst = std::max(worst, rel_err(fit.rss, oracle::to_double(exact.rss)));
    }
    return {worst <= kFitRelTol, fmt("200 instances, worst relative error %.3g (tol %.0e)", worst, kFitRelTol)};
}

Outcome check_exhaustive_search() {
    int hits = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto truth = setups::three_segment(0.1, 12, 0.4, 0.8, 0.0, 1.0, 0.0, 0.05);
        const auto path = simulate_piecewise(truth, derive_seed(kMasterSeed, 2, i));
        ScoreConfig cfg;
        cfg.k_max = 3;
        McmcConfig mcfg;
        mcfg.t_max = 50000;
        mcfg.seed = derive_seed(kMasterSeed, 3, i);
        const auto best = oracle::exhaustive_max(path.trajectory, cfg);
        const auto res = cplass::cplass(path.trajectory, cfg, mcfg);
        hits += std::fabs(res.trace.best_score - best.best_score) <= kExhaustiveScoreTol * (1.0 + std::fabs(best.best_score));
    }
    return {hits >= 19, fmt("%d/20 chains reach the exhaustive maximum (need 19)", hits)};
}

constexpr ProposalKind kKernels[] = {ProposalKind::New, ProposalKind::BirthDeath, ProposalKind::SegmentBD,
                                     ProposalKind::Shift};

Outcome check_detailed_balance() {
    Rng rng(derive_seed(kMasterSeed, 4));
    const auto traj = oracle::random_trajectory(rng, 8, 2, 0.1);
    const ScoreConfig cfg;
    const McmcConfig mcfg;
    const Scorer scorer(traj, cfg);
    const auto states = oracle::all_states(8);
    std::vector<double> pi;
    for (const auto& r : states) pi.push_back(scorer(r).total);
    double worst = 0.0;
    std::size_t pairs = 0;
    bool support_ok = true;
    for (ProposalKind k : kKernels) {
        for (std::size_t a = 0; a < states.size(); ++a) {
            for (std::size_t b = 0; b < states.size(); ++b) {
                if (a == b || pi[a] == kMinusInfinity || pi[b] == kMinusInfinity) continue;
                const double fwd = transition_log_density(k, states[a], states[b], mcfg.lambda, traj.dt());
                const double rev = transition_log_density(k, states[b], states[a], mcfg.lambda, traj.dt());
                if (fwd == kMinusInfinity || rev == kMinusInfinity) {
                    support_ok = support_ok && fwd == rev;
                    continue;
                }
                const double lhs = pi[a] + fwd + log_acceptance(pi[a], pi[b], fwd, rev);
                const double rhs = pi[b] + rev + log_acceptance(pi[b], pi[a], rev, fwd);
                const double top = std::max(lhs, rhs);
                worst = std::max(worst, std::fabs(std::exp(lhs - top) - std::exp(rhs - top)));
                ++pairs;
            }
        }
    }
    return {support_ok && worst <= kBalanceTol,
            fmt("%zu state pairs over 4 kernels, worst |LHS-RHS|/max %.3g (tol %.0e)%s", pairs, worst, kBalanceTol,
                support_ok ? "" : ", asymmetric support")};
}

Outcome check_normalization() {
    const McmcConfig mcfg;
    double worst = 0.0;
    std::size_t checked = 0;
    for (Index n = 2; n <= 10; ++n) {
        const auto states = oracle::all_states(n);
        for (const auto& from : states) {
            for (ProposalKind k : kKernels) {
                long double total = null_move_probability(k, from);
                for (const auto& to : states) {
                    if (k != ProposalKind::New && to == from) continue;
                    const double lq = transition_log_density(k, from, to, mcfg.lambda, 0.05);
                    if (lq > kMinusInfinity) total += std::exp(static_cast<long double>(lq));
                }
                worst = std::max(worst, std::fabs(static_cast<double>(total) - 1.0));
                ++checked;
            }
        }
    }
    return {worst <= kNormalizationTol,
            fmt("%zu (state, kernel) rows at n <= 10, worst |sum - 1| %.3g (tol %.0e)", checked, worst, kNormalizationTol)};
}

Outcome check_gamma_sweep_panel_a() {
    const std::vector<double> gammas{1.01};
    const auto rows = gamma_sweep('A', gammas, 50, experiment_config(), false);
    const double alt = rows.at(0).alt_detection_rate(), null = rows.at(0).null_false_positive_rate();
    return {alt >= 0.90 && null <= 0.05,
            fmt("panel A, gamma 1.01, 50 reps: detection %.2f (need >= 0.90), false positives %.2f (need <= 0.05)", alt,
                null)};
}

Outcome check_power_corners() {
    const auto cfg = experiment_config();
    const auto ds = default_power_durations();
    const auto ss = default_power_speeds();
    auto cell = [&](std::size_t di, std::size_t si) {
        return power_cell_p_correct(ds[di], ss[si], 20, cfg, di * ss.size() + si);
    };
    struct Corner {
        std::size_t di, si;
    };
    // 0.45 s and 1.0 s, 0.08 and 0.2 um/s
    const Corner corners[] = {{8, 7}, {8, 19}, {19, 7}, {19, 19}};
    bool pass = true;
    std::string detail;
    for (const auto& c : corners) {
        const double p = cell(c.di, c.si);
        pass = pass && p >= 0.85;
        detail += fmt("(%.2f s, %.2f um/s) %.2f; ", ds[c.di], ss[c.si], p);
    }
    const double low = cell(0, 0);
    pass = pass && low <= 0.2;
    detail += fmt("(0.05 s, 0.01 um/s) %.2f; need corners >= 0.85 and low cell <= 0.2", low);
    return {pass, detail};
}

Outcome check_type3() {
    const auto study = type3_necessity(setups::kShortFastSigma, 20, 200000, experiment_config());
    const double full = study.median_full(), restricted = study.median_restricted();
    const bool ratio_ok = restricted >= 5.0 * full;
    return {study.ordering_holds() && ratio_ok,
            fmt("score order pair %.2f > empty %.2f > singles %.2f/%.2f: %s; median first hit restricted %.0f vs full "
                "%.0f, ratio %.2f (need >= 5)",
                study.score_pair, study.score_empty, study.score_first, study.score_second,
                study.ordering_holds() ? "yes" : "no", restricted, full, restricted / full)};
}

Outcome check_speed_penalty() {
    const auto cfg = experiment_config();
    const auto study = speed_penalty_study(TwoStateParams::base(), 50, cfg);
    const double agree = study.agreement();
    const double limit = 1.2 * cfg.score.s_cap;
    return {agree >= 0.9 && study.max_speed_on <= limit,
            fmt("count agreement %.2f (need >= 0.90), max speed with penalty %.3f um/s (limit %.2f)", agree,
                study.max_speed_on, limit)};
}

Outcome check_csa_fidelity() {
    const auto study = csa_study(TwoStateParams::base(), 100, 200, experiment_config());
    // reported only: the gap away from the stationary atom at speed 0
    double sup_moving = 0.0;
    for (std::size_t i = 0; i < study.grid.size(); ++i)
        if (study.grid[i] >= 0.1) sup_moving = std::max(sup_moving, std::fabs(study.inferred[i] - study.truth[i]));
    return {study.sup_distance <= 0.1 && study.coverage >= 0.9,
            fmt("sup distance %.3f (need <= 0.1), band coverage %.3f (need >= 0.9), KS of max-speed ECDF %.3f, "
                "sup over speeds >= 0.1 um/s %.3f (not scored)",
                study.sup_distance, study.coverage, study.ks_max_speed, sup_moving)};
}

Outcome check_consistency() {
    const std::vector<Index> ns{100, 400, 1600};
    const auto rows = consistency_trend(ns, 20, experiment_config());
    bool frac_ok = true, err_ok = true;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detail += fmt("n=%lld k-correct %.2f error %.4g s; ", static_cast<long long>(rows[i].n),
                      rows[i].k_correct_fraction, rows[i].median_max_error);
        if (i > 0) {
            frac_ok = frac_ok && rows[i].k_correct_fraction >= rows[i - 1].k_correct_fraction;
            err_ok = err_ok && rows[i].median_max_error < rows[i - 1].median_max_error;
        }
    }
    const bool top_ok = rows.back().k_correct_fraction >= 0.9;
    detail += fmt("nondecreasing %s, >= 0.9 at 1600 %s, error decreasing %s", frac_ok ? "yes" : "no",
                  top_ok ? "yes" : "no", err_ok ? "yes" : "no");
    return {frac_ok && top_ok && err_ok, detail};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return out;
}

Outcome check_determinism() {
    const fs::path dir = fs::temp_directory_path() / ("cplass_accept_" + std::to_string(::getpid()));
    auto p = [&](const std::string& rel) { return (dir / rel).string(); };
    const std::vector<std::vector<std::string>> commands = {
        {"simulate", "two-state", "--preset", "base", "--seed", "11", "--out", p("batch/a.csv"), "--truth", p("a.truth.json")},
        {"simulate", "two-state", "--preset", "base", "--seed", "12", "--out", p("batch/b.csv")},
        {"simulate", "piecewise", "--setup", "binseg-failure", "--seed", "13", "--out", p("batch/c.csv")},
        {"detect", "--input", p("batch/a.csv"), "--seed", "5", "--out", p("single.json"), "--trace", p("single.trace.csv")},
        {"detect", "--input", p("batch"), "--seed", "6", "--iters", "5000", "--out", p("segs")},
        {"csa", "--inputs", p("segs"), "--boot", "50", "--seed", "7", "--out", p("csa.csv")},
        {"ecdf", "--inputs", p("segs"), "--boot", "50", "--seed", "8", "--out", p("ecdf.csv")},
        {"wkde", "--inputs", p("segs"), "--out", p("wkde.csv")},
        {"score-profile", "--input", p("batch/c.csv"), "--out", p("profile.csv")},
        {"experiment", "gamma-sweep", "--reps", "4", "--gammas", "1.01,2", "--iters", "2000", "--seed", "9", "--out",
         p("gamma.csv")},
    };
    std::map<std::string, std::string> runs[2];
    const char* threads[] = {"1", "3"};
    std::string failure;
    for (int k = 0; k < 2 && failure.empty(); ++k) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        ::setenv("CPLASS_THREADS", threads[k], 1);
        for (const auto& args : commands) {
            std::ostringstream out, err;
            const int code = cli_dispatch(args, out, err);
            if (code != kExitOk) {
                failure = args[0] + " exited with " + std::to_string(code) + ": " + err.str();
                break;
            }
            runs[k]["stdout:" + args[0] + args[1]] += out.str();
        }
        if (failure.empty()) {
            const auto files = snapshot(dir);
            runs[k].insert(files.begin(), files.end());
        }
    }
    ::unsetenv("CPLASS_THREADS");
    fs::remove_all(dir);
    if (!failure.empty()) return {false, failure};
    std::size_t differ = 0;
    for (const auto& [name, bytes] : runs[0]) {
        const auto it = runs[1].find(name);
        differ += it == runs[1].end() || it->second != bytes;
    }
    differ += runs[1].size() > runs[0].size() ? runs[1].size() - runs[0].size() : 0;
    return {differ == 0, fmt("%zu outputs from %zu commands compared at CPLASS_THREADS=1 vs 3, %zu differ",
                             runs[0].size(), commands.size(), differ)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"fit matches the exact normal equations", 10, check_fit_oracle},
        {"cplass reaches the exhaustive maximum", 120, check_exhaustive_search},
        {"detailed balance at n = 8", 60, check_detailed_balance},
        {"proposal kernels are normalized", 0, check_normalization},
        {"gamma sweep panel A", 1200, check_gamma_sweep_panel_a},
        {"power grid corners", 1800, check_power_corners},
        {"segment birth/death is needed", 900, check_type3},
        {"speed penalty leaves counts alone", 1800, check_speed_penalty},
        {"CSA follows the truth", 2700, check_csa_fidelity},
        {"location error shrinks with n", 1800, check_consistency},
        {"CLI outputs independent of thread count", 0, check_determinism},
    };
    std::vector<std::size_t> which;
    if (argc > 1) {
        for (int a = 1; a < argc; ++a) {
            const int id = std::atoi(argv[a]);
            if (id < 1 || id > static_cast<int>(criteria.size())) {
                std::fprintf(stderr, "unknown criterion %s\n", argv[a]);
                return 2;
            }
            which.push_back(static_cast<std::size_t>(id - 1));
        }
    } else {
        for (std::size_t i = 0; i < criteria.size(); ++i) which.push_back(i);
    }

    int failures = 0;
    for (std::size_t i : which) {
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0 && secs > c.budget_seconds) {
            o.pass = false;
            o.detail += fmt("; over the %.0f s budget", c.budget_seconds);
        }
        std::printf("%s criterion %zu (%s): %s [%.1f s, master seed %llu]\n", o.pass ? "PASS" : "FAIL", i + 1,
                    c.name.c_str(), o.detail.c_str(), secs, static_cast<unsigned long long>(kMasterSeed));
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
