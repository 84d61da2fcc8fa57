#include "cplass/cli.hpp"

#include "cplass/experiments.hpp"
#include "cplass/io.hpp"
#include "cplass/parallel.hpp"
#include "cplass/pwl_fit.hpp"
#include "cplass/sampler.hpp"
#include "cplass/simulate.hpp"
#include "cplass/summary_stats.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <sstream>

namespace cplass {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Bad flag values found after parsing (exit code 1).
class UsageError : public Error {
public:
    using Error::Error;
};

std::string join_command(const std::vector<std::string>& args) {
    std::string s = "cplass";
    for (const auto& a : args) s += " " + a;
    return s;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(flag + ": cannot parse '" + item + "' as a number");
        }
    }
    return v;
}

// ---- shared flag groups ---------------------------------------------------

struct ScoreFlags {
    double gamma = 1.01;
    double s_cap = 5.0;
    bool no_speed_penalty = false;
    Index k_max = 0;

    void add(CLI::App* app) {
        app->add_option("--gamma", gamma, "Penalty exponent (> 1)")->capture_default_str();
        app->add_option("--s-cap", s_cap, "Speed cap in um/s")->capture_default_str();
        app->add_flag("--no-speed-penalty", no_speed_penalty, "Disable the speed penalty");
        app->add_option("--k-max", k_max, "Maximum number of segments (0 = unbounded)");
    }

    ScoreConfig config() const {
        ScoreConfig c;
        c.gamma = gamma;
        c.s_cap = s_cap;
        c.speed_penalty_enabled = !no_speed_penalty;
        if (k_max > 0) c.k_max = k_max;
        try {
            c.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

struct McmcFlags {
    double lambda = 1.0;
    std::int64_t iters = 0;
    std::uint64_t seed = 0;
    double u1 = 0.25, u2 = 0.375, u3 = 0.5;

    void add(CLI::App* app) {
        app->add_option("--lambda", lambda, "Changepoint rate of the independent proposal (per s)")->capture_default_str();
        app->add_option("--iters", iters, "MCMC iterations (default: max(20000, 100 n))");
        app->add_option("--seed", seed, "Master seed")->capture_default_str();
        app->add_option("--u1", u1, "Proposal cut point 1")->capture_default_str();
        app->add_option("--u2", u2, "Proposal cut point 2")->capture_default_str();
        app->add_option("--u3", u3, "Proposal cut point 3")->capture_default_str();
    }

    McmcConfig config(Index n) const {
        McmcConfig c;
        c.lambda = lambda;
        c.u1 = u1;
        c.u2 = u2;
        c.u3 = u3;
        c.seed = seed;
        c.t_max = iters > 0 ? iters : McmcConfig::recommended_iterations(n);
        try {
            c.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

RunManifest make_manifest(const std::vector<std::string>& args, ojson config, std::string digest, std::uint64_t seed,
                          std::optional<double> wall_clock) {
    RunManifest m;
    m.command = join_command(args);
    m.config = std::move(config);
    m.input_digest = std::move(digest);
    m.seed = seed;
    m.wall_clock_seconds = wall_clock;
    return m;
}

/// JSON files of a directory (sorted by name) or the paths themselves.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, const std::string& extension) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == extension) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            out.insert(out.end(), files.begin(), files.end());
        } else {
            if (!fs::exists(p)) throw DataError("no such file: " + in);
            out.push_back(p);
        }
    }
    if (out.empty()) throw DataError("no input files");
    return out;
}

std::string combined_digest(const std::vector<fs::path>& files) {
    if (files.size() == 1) return sha256_file(files.front());
    std::string all;
    for (const auto& f : files) all += sha256_file(f);
    return sha256_hex(all);
}

std::vector<Segmentation> load_segmentations(const std::vector<fs::path>& files) {
    std::vector<Segmentation> segs;
    for (const auto& f : files) segs.push_back(read_segmentation_json(f).segmentation);
    return segs;
}

ChangepointVector parse_indices(const std::string& text, Index n) {
    std::vector<Index> idx;
    if (!text.empty())
        for (double v : parse_list(text, "--base")) idx.push_back(static_cast<Index>(v));
    try {
        return ChangepointVector(n, idx);
    } catch (const Error& e) {
        throw UsageError(std::string("--base: ") + e.what());
    }
}

std::string curves_csv(const std::vector<double>& grid, const std::vector<std::pair<std::string, std::vector<double>>>& cols,
                       const RunManifest& manifest, const std::string& units) {
    std::string s = csv_preamble(units, &manifest);
    s += "speed";
    for (const auto& [name, _] : cols) s += "," + name;
    s += "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s += format_double(grid[i]);
        for (const auto& [_, v] : cols) s += "," + format_double(v[i]);
        s += "\n";
    }
    return s;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Continuous piecewise-linear changepoint detection for particle trajectories", "cplass"};
    app.require_subcommand(1);
    bool timing = false;
    app.add_flag("--timing", timing, "Record wall-clock time in the manifest (outputs then differ between runs)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate a trajectory with known ground truth");
    sim->require_subcommand(1);
    std::string sim_out, sim_truth;
    std::uint64_t sim_seed = 0;

    auto* pw = sim->add_subcommand("piecewise", "Continuous piecewise-linear path plus Gaussian noise");
    std::string pw_setup = "custom", pw_tau, pw_speeds, pw_panel = "A", pw_hyp = "alt";
    double pw_dt = 0.05, pw_sigma = 0.01, pw_duration = 0.5, pw_speed = 0.1;
    Index pw_n = 0;
    pw->add_option("--setup", pw_setup, "custom|binseg-failure|short-fast|gamma|power-cell|consistency")
        ->check(CLI::IsMember({"custom", "binseg-failure", "short-fast", "gamma", "power-cell", "consistency"}))
        ->capture_default_str();
    pw->add_option("--tau", pw_tau, "Changepoint times in s, comma separated (custom)");
    pw->add_option("--speeds", pw_speeds, "Segment speeds along x in um/s, comma separated (custom)");
    pw->add_option("--dt", pw_dt, "Sampling interval in s (custom)")->capture_default_str();
    pw->add_option("--n", pw_n, "Number of observations (custom, consistency)");
    pw->add_option("--sigma", pw_sigma, "Noise standard deviation in um (custom, short-fast)")->capture_default_str();
    pw->add_option("--panel", pw_panel, "A|B (gamma)")->check(CLI::IsMember({"A", "B"}));
    pw->add_option("--hypothesis", pw_hyp, "alt|null (gamma)")->check(CLI::IsMember({"alt", "null"}));
    pw->add_option("--duration", pw_duration, "Middle segment duration in s (power-cell)");
    pw->add_option("--speed", pw_speed, "Middle segment speed in um/s (power-cell)");

    auto* ts = sim->add_subcommand("two-state", "Stationary/motile cargo model");
    std::string ts_preset = "base", ts_rule = "per-segment";
    TwoStateParams tsp = TwoStateParams::base();
    ts->add_option("--preset", ts_preset, "Parameter preset")->check(CLI::IsMember({"base"}))->capture_default_str();
    ts->add_option("--n", tsp.n, "Number of observations");
    ts->add_option("--p", tsp.p, "Stationary to motile switching probability");
    ts->add_option("--q", tsp.q, "Motile to stationary switching probability");
    ts->add_option("--alpha", tsp.alpha, "Gamma shape of motile speed");
    ts->add_option("--beta", tsp.beta, "Gamma rate of motile speed per nm/s");
    ts->add_option("--sigma", tsp.sigma_cargo, "Noise standard deviation in um");
    ts->add_option("--dt", tsp.dt, "Sampling interval in s");
    ts->add_option("--rule", ts_rule, "per-segment|per-step")->check(CLI::IsMember({"per-segment", "per-step"}));

    for (auto* s : {pw, ts}) {
        s->add_option("--seed", sim_seed, "Seed")->capture_default_str();
        s->add_option("--out", sim_out, "Trajectory CSV")->required();
        s->add_option("--truth", sim_truth, "Ground-truth JSON");
    }

    // detect
    auto* det = app.add_subcommand("detect", "Detect changepoints in a trajectory CSV (or every CSV in a directory)");
    std::string det_in, det_out, det_trace;
    ScoreFlags det_score;
    McmcFlags det_mcmc;
    det->add_option("--input", det_in, "Trajectory CSV or directory")->required();
    det->add_option("--out", det_out, "Segmentation JSON (a directory in batch mode)")->required();
    det->add_option("--trace", det_trace, "Trace CSV (single-file mode; batch mode writes <name>.trace.csv)");
    det_score.add(det);
    det_mcmc.add(det);

    // score-profile / score-surface
    auto* prof = app.add_subcommand("score-profile", "Score of a base changepoint set plus one extra index");
    std::string prof_in, prof_out, prof_base;
    Index prof_first = 1, prof_last = 0;
    ScoreFlags prof_score;
    prof->add_option("--input", prof_in, "Trajectory CSV")->required();
    prof->add_option("--out", prof_out, "Output CSV")->required();
    prof->add_option("--base", prof_base, "Base changepoint indices, comma separated");
    prof->add_option("--first", prof_first, "First candidate index");
    prof->add_option("--last", prof_last, "Last candidate index (default n-1)");
    prof_score.add(prof);

    auto* surf = app.add_subcommand("score-surface", "score({i,j}) - score(empty) over index pairs");
    std::string surf_in, surf_out;
    Index surf_stride = 1;
    ScoreFlags surf_score;
    surf->add_option("--input", surf_in, "Trajectory CSV")->required();
    surf->add_option("--out", surf_out, "Output CSV")->required();
    surf->add_option("--stride", surf_stride, "Grid stride")->capture_default_str();
    surf_score.add(surf);

    // csa / ecdf / wkde
    std::vector<std::string> stat_inputs;
    std::string stat_out;
    std::size_t stat_boot = 0, stat_points = 512;
    std::uint64_t stat_seed = 0;
    double min_duration = 0.6, bandwidth = 0.0;
    auto* csa_cmd = app.add_subcommand("csa", "Cumulative speed allocation with bootstrap ensemble");
    auto* ecdf_cmd = app.add_subcommand("ecdf", "ECDF of per-path maximum sustained speed with bootstrap ensemble");
    auto* wkde_cmd = app.add_subcommand("wkde", "Duration-weighted kernel density of segment speeds");
    for (auto* s : {csa_cmd, ecdf_cmd, wkde_cmd}) {
        s->add_option("--inputs", stat_inputs, "Segmentation JSON files or directories")->required();
        s->add_option("--out", stat_out, "Output CSV")->required();
        s->add_option("--grid-points", stat_points, "Speed grid size")->capture_default_str();
    }
    for (auto* s : {csa_cmd, ecdf_cmd}) {
        s->add_option("--boot", stat_boot, "Bootstrap resamples")->capture_default_str();
        s->add_option("--seed", stat_seed, "Bootstrap seed")->capture_default_str();
    }
    ecdf_cmd->add_option("--min-duration", min_duration, "Minimum segment duration in s")->capture_default_str();
    wkde_cmd->add_option("--bandwidth", bandwidth, "Kernel bandwidth in um/s (default: weighted Silverman rule)");

    // experiments
    auto* exp = app.add_subcommand("experiment", "Scripted simulation studies");
    exp->require_subcommand(1);
    std::string exp_out;
    ScoreFlags exp_score;
    McmcFlags exp_mcmc;
    bool full_scale = false;
    auto* gs = exp->add_subcommand("gamma-sweep", "Detection rates across penalty exponents");
    std::string gs_panel = "A", gs_gammas = "1.01,1.1,1.5,2";
    Index gs_reps = 50;
    gs->add_option("--panel", gs_panel, "A|B")->check(CLI::IsMember({"A", "B"}))->capture_default_str();
    gs->add_option("--gammas", gs_gammas, "Comma separated exponents")->capture_default_str();
    gs->add_option("--reps", gs_reps, "Replicates per hypothesis")->capture_default_str();
    auto* pg = exp->add_subcommand("power-grid", "P_correct over middle-segment duration and speed");
    Index pg_reps = 10;
    pg->add_option("--reps", pg_reps, "Replicates per cell")->capture_default_str();
    auto* cons = exp->add_subcommand("consistency", "Count accuracy and location error as n grows");
    std::string cons_n = "100,400,1600";
    Index cons_reps = 20;
    cons->add_option("--n-values", cons_n, "Comma separated sample sizes")->capture_default_str();
    cons->add_option("--reps", cons_reps, "Replicates per n")->capture_default_str();
    auto* t3 = exp->add_subcommand("type3-demo", "Hitting times with and without segment birth/death moves");
    double t3_sigma = setups::kShortFastSigma;
    Index t3_seeds = 20;
    std::int64_t t3_cap = 200000;
    t3->add_option("--sigma", t3_sigma, "Noise standard deviation in um")->capture_default_str();
    t3->add_option("--seeds", t3_seeds, "Chains per variant")->capture_default_str();
    t3->add_option("--cap", t3_cap, "Iteration cap per chain")->capture_default_str();
    for (auto* s : {gs, pg, cons, t3}) {
        s->add_option("--out", exp_out, "Output CSV")->required();
        exp_score.add(s);
        exp_mcmc.add(s);
        s->add_flag("--full-scale", full_scale, "Use the full replicate counts");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const auto t_start = std::chrono::steady_clock::now();
    auto wall = [&]() -> std::optional<double> {
        if (!timing) return std::nullopt;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };
    const std::size_t threads = default_thread_count();

    try {
        if (*pw || *ts) {
            SimulatedPath path;
            ojson config;
            double sigma = 0.0;
            if (*pw) {
                PiecewiseTruth truth;
                if (pw_setup == "custom") {
                    if (pw_n < 2) throw UsageError("simulate piecewise: --n is required");
                    const auto tau = parse_list(pw_tau, "--tau");
                    const auto speeds = parse_list(pw_speeds, "--speeds");
                    if (speeds.size() != tau.size() + 1) throw UsageError("--speeds needs one value more than --tau");
                    truth.dt = pw_dt;
                    truth.n = pw_n;
                    truth.sigma = pw_sigma;
                    truth.tau_true = tau;
                    truth.V_true = RowMatrix<double>::Zero(static_cast<Index>(speeds.size()), 2);
                    for (std::size_t j = 0; j < speeds.size(); ++j) truth.V_true(static_cast<Index>(j), 0) = speeds[j];
                    truth.intercept_true = Eigen::VectorXd::Zero(2);
                } else if (pw_setup == "binseg-failure") {
                    truth = setups::binseg_failure();
                } else if (pw_setup == "short-fast") {
                    truth = setups::short_fast_segment(pw_sigma);
                } else if (pw_setup == "gamma") {
                    truth = setups::gamma_panel(pw_panel[0], pw_hyp == "alt");
                } else if (pw_setup == "power-cell") {
                    truth = setups::power_cell(pw_duration, pw_speed);
                } else {
                    if (pw_n < 2) throw UsageError("simulate piecewise: --n is required for the consistency setup");
                    truth = setups::consistency_truth(pw_n);
                }
                try {
                    truth.validate();
                } catch (const Error& e) {
                    throw UsageError(e.what());
                }
                path = simulate_piecewise(truth, sim_seed);
                sigma = truth.sigma;
                config["model"] = "piecewise";
                config["setup"] = pw_setup;
                config["dt"] = truth.dt;
                config["n"] = truth.n;
                config["sigma"] = truth.sigma;
                config["tau"] = truth.tau_true;
            } else {
                tsp.rule = ts_rule == "per-step" ? SwitchingRule::PerStep : SwitchingRule::PerSegment;
                try {
                    tsp.validate();
                } catch (const Error& e) {
                    throw UsageError(e.what());
                }
                path = simulate_two_state(tsp, sim_seed);
                sigma = tsp.sigma_cargo;
                config["model"] = "two-state";
                config["preset"] = ts_preset;
                config["n"] = tsp.n;
                config["p"] = tsp.p;
                config["q"] = tsp.q;
                config["alpha"] = tsp.alpha;
                config["beta_per_nm_s"] = tsp.beta;
                config["p_reverse"] = tsp.p_reverse;
                config["p_continue"] = tsp.p_continue;
                config["sigma"] = tsp.sigma_cargo;
                config["dt"] = tsp.dt;
                config["mean_stationary_s"] = tsp.mean_stationary;
                config["mean_distance_nm"] = tsp.mean_distance;
                config["rule"] = ts_rule;
            }
            const auto manifest = make_manifest(args, config, "", sim_seed, wall());
            write_file(sim_out, trajectory_to_csv(path.trajectory, &manifest));
            if (!sim_truth.empty()) write_file(sim_truth, truth_to_json(path.truth, sigma, manifest).dump(2) + "\n");
            return kExitOk;
        }

        if (*det) {
            const ScoreConfig sc = det_score.config();
            const fs::path in(det_in);
            if (fs::is_directory(in)) {
                const auto files = expand_inputs({det_in}, ".csv");
                parallel_for(files.size(), threads, [&](std::size_t i) {
                    const Trajectory traj = read_trajectory_csv(files[i]);
                    McmcConfig mc = det_mcmc.config(traj.size());
                    mc.seed = derive_seed(det_mcmc.seed, i);
                    const auto res = cplass::cplass(traj, sc, mc);
                    const auto manifest = make_manifest(args, config_to_json(sc, mc), sha256_file(files[i]), mc.seed, wall());
                    const fs::path stem = fs::path(det_out) / files[i].stem();
                    write_file(stem.string() + ".json", segmentation_to_json(res.segmentation, res.score, manifest).dump(2) + "\n");
                    write_file(stem.string() + ".trace.csv", trace_to_csv(res.trace, &manifest));
                });
                return kExitOk;
            }
            const Trajectory traj = read_trajectory_csv(in);
            const McmcConfig mc = det_mcmc.config(traj.size());
            const auto res = cplass::cplass(traj, sc, mc);
            const auto manifest = make_manifest(args, config_to_json(sc, mc), sha256_file(in), mc.seed, wall());
            write_file(det_out, segmentation_to_json(res.segmentation, res.score, manifest).dump(2) + "\n");
            if (!det_trace.empty()) write_file(det_trace, trace_to_csv(res.trace, &manifest));
            out << "k=" << res.segmentation.segments() << " changepoints=" << res.segmentation.num_changepoints()
                << " score=" << format_double(res.score.total) << "\n";
            return kExitOk;
        }

        if (*prof) {
            const ScoreConfig sc = prof_score.config();
            const Trajectory traj = read_trajectory_csv(prof_in);
            const ChangepointVector base = parse_indices(prof_base, traj.size());
            const Index last = prof_last > 0 ? prof_last : traj.size() - 1;
            if (prof_first < 1 || last > traj.size() - 1 || prof_first > last)
                throw UsageError("score-profile: index range outside [1, n-1]");
            const auto p = score_profile(traj, base, prof_first, last, sc);
            ojson config = config_to_json(sc);
            config["base"] = base.indices();
            const auto manifest = make_manifest(args, config, sha256_file(prof_in), 0, wall());
            std::string s = csv_preamble("index, log-score", &manifest);
            s += "# base_score: " + format_double(p.base_score) + "\n";
            s += "index,time,score\n";
            for (std::size_t i = 0; i < p.indices.size(); ++i)
                s += std::to_string(p.indices[i]) + "," + format_double(traj.time(p.indices[i])) + "," +
                     format_double(p.scores[i]) + "\n";
            write_file(prof_out, s);
            return kExitOk;
        }

        if (*surf) {
            const ScoreConfig sc = surf_score.config();
            if (surf_stride < 1) throw UsageError("--stride must be >= 1");
            const Trajectory traj = read_trajectory_csv(surf_in);
            const auto sf = score_surface_2cp(traj, surf_stride, sc);
            ojson config = config_to_json(sc);
            config["stride"] = surf_stride;
            const auto manifest = make_manifest(args, config, sha256_file(surf_in), 0, wall());
            std::string s = csv_preamble("index, index, log-score difference", &manifest);
            s += "# empty_score: " + format_double(sf.empty_score) + "\n";
            s += "i,j,delta\n";
            for (std::size_t a = 0; a < sf.grid.size(); ++a)
                for (std::size_t b = a + 1; b < sf.grid.size(); ++b)
                    s += std::to_string(sf.grid[a]) + "," + std::to_string(sf.grid[b]) + "," +
                         format_double(sf.values(static_cast<Index>(a), static_cast<Index>(b))) + "\n";
            write_file(surf_out, s);
            return kExitOk;
        }

        if (*csa_cmd || *ecdf_cmd || *wkde_cmd) {
            if (stat_points < 2) throw UsageError("--grid-points must be >= 2");
            if (min_duration < 0) throw UsageError("--min-duration must be >= 0");
            const auto files = expand_inputs(stat_inputs, ".json");
            const auto segs = load_segmentations(files);
            const auto pool = SegmentPool::from(segs);
            ojson config;
            config["inputs"] = files.size();
            config["grid_points"] = stat_points;
            if (*wkde_cmd) {
                const double h = bandwidth > 0 ? bandwidth : silverman_bandwidth(pool);
                config["bandwidth"] = h;
                const auto kde = weighted_kde(pool, h);
                const auto manifest = make_manifest(args, config, combined_digest(files), 0, wall());
                write_file(stat_out, curves_csv(kde.grid, {{"density", kde.density}}, manifest, "um/s, s/um"));
                return kExitOk;
            }
            const bool is_csa = static_cast<bool>(*csa_cmd);
            config["statistic"] = is_csa ? "csa" : "max_speed_ecdf";
            config["boot"] = stat_boot;
            if (!is_csa) config["min_duration"] = min_duration;
            const auto grid = default_speed_grid(pool.max_speed(), stat_points);
            const auto ens = bootstrap_ensemble(segs, is_csa ? BootstrapStatistic::Csa : BootstrapStatistic::MaxSpeedEcdf,
                                                stat_boot, stat_seed, grid, min_duration, threads);
            std::vector<std::pair<std::string, std::vector<double>>> cols{{is_csa ? "csa" : "ecdf", ens.point}};
            if (stat_boot > 0) {
                cols.emplace_back("lower", ens.lower());
                cols.emplace_back("upper", ens.upper());
                for (std::size_t b = 0; b < ens.curves.size(); ++b) cols.emplace_back("boot_" + std::to_string(b), ens.curves[b]);
            }
            const auto manifest = make_manifest(args, config, combined_digest(files), stat_seed, wall());
            write_file(stat_out, curves_csv(grid, cols, manifest, "um/s, fraction"));
            return kExitOk;
        }

        if (*exp) {
            ExperimentConfig ec;
            ec.score = exp_score.config();
            ec.mcmc = exp_mcmc.config(2);
            ec.scale_iterations = exp_mcmc.iters <= 0;
            ec.threads = threads;
            ojson config = config_to_json(ec.score, ec.mcmc);
            if (ec.scale_iterations) config["mcmc"]["t_max"] = "max(20000, 100 n)";
            std::string s;
            auto finish = [&](const std::string& units, const ojson& cfg) {
                const auto manifest = make_manifest(args, cfg, "", ec.mcmc.seed, wall());
                write_file(exp_out, csv_preamble(units, &manifest) + s);
                return kExitOk;
            };
            if (*gs) {
                if (full_scale) gs_reps = 200;
                const auto gammas = parse_list(gs_gammas, "--gammas");
                for (double g : gammas)
                    if (!(g > 1.0)) throw UsageError("--gammas: every exponent must be > 1");
                if (gs_reps < 1) throw UsageError("--reps must be >= 1");
                config["panel"] = gs_panel;
                config["replicates"] = gs_reps;
                const auto rows = gamma_sweep(gs_panel[0], gammas, gs_reps, ec, true);
                s += "gamma,speed_penalty,replicates,alt_detection_rate,null_false_positive_rate\n";
                for (const auto& r : rows)
                    s += format_double(r.gamma) + "," + (r.speed_penalty ? "1" : "0") + "," + std::to_string(gs_reps) + "," +
                         format_double(r.alt_detection_rate()) + "," + format_double(r.null_false_positive_rate()) + "\n";
                return finish("-, -, count, fraction, fraction", config);
            }
            if (*pg) {
                if (full_scale) pg_reps = 50;
                if (pg_reps < 1) throw UsageError("--reps must be >= 1");
                config["replicates"] = pg_reps;
                const auto res = power_grid(default_power_durations(), default_power_speeds(), pg_reps, ec);
                s += "duration,speed,p_correct\n";
                for (std::size_t i = 0; i < res.durations.size(); ++i)
                    for (std::size_t j = 0; j < res.speeds.size(); ++j)
                        s += format_double(res.durations[i]) + "," + format_double(res.speeds[j]) + "," +
                             format_double(res.p_correct(static_cast<Index>(i), static_cast<Index>(j))) + "\n";
                return finish("s, um/s, fraction", config);
            }
            if (*cons) {
                if (full_scale) cons_reps = 100;
                std::vector<Index> ns;
                for (double v : parse_list(cons_n, "--n-values")) ns.push_back(static_cast<Index>(v));
                if (cons_reps < 1) throw UsageError("--reps must be >= 1");
                config["replicates"] = cons_reps;
                config["n_values"] = ns;
                std::vector<ConsistencyRow> rows;
                try {
                    rows = consistency_trend(ns, cons_reps, ec);
                } catch (const InvalidArgument& e) {
                    throw UsageError(e.what());
                }
                s += "n,iterations,replicates,k_correct_fraction,median_max_error\n";
                for (const auto& r : rows)
                    s += std::to_string(r.n) + "," + std::to_string(r.iterations) + "," + std::to_string(r.replicates) + "," +
                         format_double(r.k_correct_fraction) + "," + format_double(r.median_max_error) + "\n";
                return finish("count, count, count, fraction, s", config);
            }
            if (*t3) {
                if (t3_seeds < 1 || t3_cap < 1) throw UsageError("--seeds and --cap must be >= 1");
                config["sigma"] = t3_sigma;
                config["seeds"] = t3_seeds;
                config["cap"] = t3_cap;
                const auto r = type3_necessity(t3_sigma, t3_seeds, t3_cap, ec);
                s += "# score_empty: " + format_double(r.score_empty) + "\n";
                s += "# score_pair: " + format_double(r.score_pair) + "\n";
                s += "# score_first_only: " + format_double(r.score_first) + "\n";
                s += "# score_second_only: " + format_double(r.score_second) + "\n";
                s += "seed_index,full_hit,restricted_hit\n";
                for (std::size_t i = 0; i < r.full_hits.size(); ++i)
                    s += std::to_string(i) + "," + std::to_string(r.full_hits[i]) + "," + std::to_string(r.restricted_hits[i]) + "\n";
                return finish("-, iteration, iteration", config);
            }
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_dispatch(args, out, err);
}

}  // namespace cplass
