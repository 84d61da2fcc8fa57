#include "cplass/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cplass {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

ParseError::ParseError(const std::string& source, std::size_t row, const std::string& what)
    : DataError(source + ": row " + std::to_string(row) + ": " + what), row_(row) {}

GridError::GridError(const std::string& source, std::size_t row, const std::string& what)
    : DataError(source + ": row " + std::to_string(row) + ": " + what), row_(row) {}

// ---- manifest -------------------------------------------------------------

ojson RunManifest::to_json() const {
    ojson j;
    j["command"] = command;
    j["config"] = config;
    j["input_digest"] = input_digest;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    if (wall_clock_seconds) j["wall_clock_seconds"] = *wall_clock_seconds;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.value("command", "");
    if (j.contains("config")) m.config = j.at("config");
    m.input_digest = j.value("input_digest", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.tool_version = j.value("tool_version", "");
    if (j.contains("wall_clock_seconds")) m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
}

// ---- bytes ----------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_preamble(const std::string& units, const RunManifest* manifest) {
    std::string s = "# units: " + units + "\n";
    if (manifest) s += "# manifest: " + manifest->to_json().dump() + "\n";
    return s;
}

// ---- trajectory CSV -------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t row) {
    const std::string t = trim(cell);
    if (t.empty()) throw ParseError(source, row, "missing value");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ParseError(source, row, "not a number: '" + t + "'");
    }
    if (used != t.size()) throw ParseError(source, row, "not a number: '" + t + "'");
    if (!std::isfinite(v)) throw ParseError(source, row, "non-finite value '" + t + "'");
    return v;
}

}  // namespace

Trajectory parse_trajectory_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t row = 0;
    std::optional<std::size_t> dims;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_numbers;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto cells = split_csv(t);
        if (!dims) {
            if (cells.size() < 2 || trim(cells[0]) != "t")
                throw ParseError(source, row, "expected header 't,x1,...,xd' or 't,x,y'");
            const bool xy = cells.size() == 3 && trim(cells[1]) == "x" && trim(cells[2]) == "y";
            if (!xy) {
                for (std::size_t c = 1; c < cells.size(); ++c)
                    if (trim(cells[c]) != "x" + std::to_string(c))
                        throw ParseError(source, row, "unexpected column name '" + trim(cells[c]) + "'");
            }
            dims = cells.size() - 1;
            continue;
        }
        if (cells.size() != *dims + 1)
            throw ParseError(source, row, "expected " + std::to_string(*dims + 1) + " values, got " + std::to_string(cells.size()));
        times.push_back(parse_cell(cells[0], source, row));
        std::vector<double> x(*dims);
        for (std::size_t c = 0; c < *dims; ++c) x[c] = parse_cell(cells[c + 1], source, row);
        rows.push_back(std::move(x));
        row_numbers.push_back(row);
    }
    if (!dims) throw ParseError(source, row, "missing header");
    if (rows.size() < 2) throw ParseError(source, row, "need at least 2 observations");

    std::vector<double> diffs(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) diffs[i - 1] = times[i] - times[i - 1];
    std::vector<double> sorted = diffs;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2), sorted.end());
    const double reference = sorted[(sorted.size() - 1) / 2];
    if (!(reference > 0.0)) throw GridError(source, row_numbers[1], "time stamps must increase");
    for (std::size_t i = 0; i < diffs.size(); ++i)
        if (std::abs(diffs[i] - reference) > kGridJitter * reference)
            throw GridError(source, row_numbers[i + 1],
                            "time step " + format_double(diffs[i]) + " differs from " + format_double(reference));

    const auto n = static_cast<Index>(rows.size());
    const double dt = (times.back() - times.front()) / static_cast<double>(n - 1);
    RowMatrix<double> Y(n, static_cast<Index>(*dims));
    for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < Y.cols(); ++c) Y(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    return Trajectory(dt, std::move(Y), times.front() - dt);
}

Trajectory read_trajectory_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return parse_trajectory_csv(in, path.string());
}

std::string trajectory_to_csv(const Trajectory& traj, const RunManifest* manifest) {
    std::string s = csv_preamble("s, um", manifest);
    s += "t";
    for (Index c = 0; c < traj.dims(); ++c) s += ",x" + std::to_string(c + 1);
    s += "\n";
    for (Index i = 0; i < traj.size(); ++i) {
        s += format_double(traj.time(i + 1));
        for (Index c = 0; c < traj.dims(); ++c) s += "," + format_double(traj.positions()(i, c));
        s += "\n";
    }
    return s;
}

// ---- configs --------------------------------------------------------------

ojson config_to_json(const ScoreConfig& cfg) {
    ojson j;
    j["gamma"] = cfg.gamma;
    j["s_cap"] = cfg.s_cap;
    j["speed_penalty"] = cfg.speed_penalty_enabled;
    j["speed_penalty_weight"] = cfg.speed_penalty_weight;
    j["k_max"] = cfg.k_max ? ojson(*cfg.k_max) : ojson(nullptr);
    return j;
}

ojson config_to_json(const McmcConfig& cfg) {
    ojson j;
    j["lambda"] = cfg.lambda;
    j["u1"] = cfg.u1;
    j["u2"] = cfg.u2;
    j["u3"] = cfg.u3;
    j["t_max"] = cfg.t_max;
    j["seed"] = cfg.seed;
    return j;
}

ojson config_to_json(const ScoreConfig& score, const McmcConfig& mcmc) {
    ojson j;
    j["score"] = config_to_json(score);
    j["mcmc"] = config_to_json(mcmc);
    return j;
}

ScoreConfig score_config_from_json(const nlohmann::json& j) {
    ScoreConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.s_cap = j.value("s_cap", c.s_cap);
    c.speed_penalty_enabled = j.value("speed_penalty", c.speed_penalty_enabled);
    c.speed_penalty_weight = j.value("speed_penalty_weight", c.speed_penalty_weight);
    if (j.contains("k_max") && !j.at("k_max").is_null()) c.k_max = j.at("k_max").get<Index>();
    return c;
}

McmcConfig mcmc_config_from_json(const nlohmann::json& j) {
    McmcConfig c;
    c.lambda = j.value("lambda", c.lambda);
    c.u1 = j.value("u1", c.u1);
    c.u2 = j.value("u2", c.u2);
    c.u3 = j.value("u3", c.u3);
    c.t_max = j.value("t_max", c.t_max);
    c.seed = j.value("seed", c.seed);
    return c;
}

// ---- segmentation JSON ----------------------------------------------------

namespace {

template <typename V>
ojson vector_json(const V& v) {
    ojson a = ojson::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

ojson matrix_json(const RowMatrix<double>& m) {
    ojson a = ojson::array();
    for (Index i = 0; i < m.rows(); ++i) {
        ojson r = ojson::array();
        for (Index c = 0; c < m.cols(); ++c) r.push_back(m(i, c));
        a.push_back(std::move(r));
    }
    return a;
}

ojson segmentation_body(const Segmentation& seg) {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["n"] = seg.n;
    j["d"] = seg.d;
    j["dt"] = seg.dt;
    j["t0"] = seg.t0;
    j["k"] = seg.segments();
    j["change_indices"] = seg.change_indices;
    j["tau"] = seg.tau;
    j["intercept"] = vector_json(seg.intercept);
    j["V"] = matrix_json(seg.V);
    j["speeds"] = vector_json(seg.speeds);
    j["durations"] = vector_json(seg.durations);
    j["rss"] = seg.rss;
    j["sigma2"] = seg.sigma2_hat;
    return j;
}

double finite_or_nan(const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

}  // namespace

ojson segmentation_to_json(const Segmentation& seg, const ScoreBreakdown& score, const RunManifest& manifest) {
    ojson j = segmentation_body(seg);
    ojson s;
    s["total"] = score.total;
    s["log_rss_term"] = score.log_rss_term;
    s["ssic_term"] = score.ssic_term;
    s["speed_term"] = score.speed_term;
    s["rho"] = score.rho;
    j["score"] = std::move(s);
    j["config"] = manifest.config;
    j["seed"] = manifest.seed;
    j["manifest"] = manifest.to_json();
    return j;
}

ojson truth_to_json(const Segmentation& truth, double sigma, const RunManifest& manifest) {
    ojson j = segmentation_body(truth);
    j["sigma"] = sigma;
    j["config"] = manifest.config;
    j["seed"] = manifest.seed;
    j["manifest"] = manifest.to_json();
    return j;
}

SegmentationDocument segmentation_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema_version")) throw SchemaError("segmentation JSON: missing schema_version");
    const std::string version = j.at("schema_version").get<std::string>();
    int major = -1;
    try {
        major = std::stoi(version.substr(0, version.find('.')));
    } catch (const std::exception&) {
        throw SchemaError("segmentation JSON: bad schema_version '" + version + "'");
    }
    if (major != kSchemaMajor) throw SchemaError("segmentation JSON: unsupported schema major version " + version);
    try {
        SegmentationDocument doc;
        Segmentation& s = doc.segmentation;
        s.n = j.at("n").get<Index>();
        s.d = j.at("d").get<Index>();
        s.dt = j.at("dt").get<double>();
        s.t0 = j.value("t0", 0.0);
        s.change_indices = j.at("change_indices").get<std::vector<Index>>();
        s.tau = j.at("tau").get<std::vector<double>>();
        const auto k = j.at("k").get<Index>();
        if (static_cast<Index>(s.tau.size()) != k - 1) throw SchemaError("segmentation JSON: k does not match tau");
        const auto intercept = j.at("intercept").get<std::vector<double>>();
        s.intercept = Eigen::Map<const Eigen::VectorXd>(intercept.data(), static_cast<Index>(intercept.size()));
        const auto V = j.at("V").get<std::vector<std::vector<double>>>();
        s.V.resize(k, s.d);
        if (static_cast<Index>(V.size()) != k) throw SchemaError("segmentation JSON: V needs k rows");
        for (Index r = 0; r < k; ++r) {
            if (static_cast<Index>(V[static_cast<std::size_t>(r)].size()) != s.d)
                throw SchemaError("segmentation JSON: V rows need d entries");
            for (Index c = 0; c < s.d; ++c) s.V(r, c) = V[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        s.W = s.V;
        for (Index r = k - 1; r > 0; --r) s.W.row(r) -= s.V.row(r - 1);
        const auto speeds = j.at("speeds").get<std::vector<double>>();
        const auto durations = j.at("durations").get<std::vector<double>>();
        if (static_cast<Index>(speeds.size()) != k || static_cast<Index>(durations.size()) != k)
            throw SchemaError("segmentation JSON: speeds/durations need k entries");
        s.speeds = Eigen::Map<const Eigen::VectorXd>(speeds.data(), k);
        s.durations = Eigen::Map<const Eigen::VectorXd>(durations.data(), k);
        s.rss = j.value("rss", 0.0);
        s.sigma2_hat = j.value("sigma2", 0.0);
        if (j.contains("score")) {
            const auto& sc = j.at("score");
            ScoreBreakdown b;
            b.total = finite_or_nan(sc.at("total"));
            b.log_rss_term = finite_or_nan(sc.at("log_rss_term"));
            b.ssic_term = finite_or_nan(sc.at("ssic_term"));
            b.speed_term = finite_or_nan(sc.at("speed_term"));
            b.rho = sc.value("rho", Index{0});
            doc.score = b;
        }
        if (j.contains("manifest")) doc.manifest = RunManifest::from_json(j.at("manifest"));
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("segmentation JSON: ") + e.what());
    }
}

SegmentationDocument read_segmentation_json(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
    }
    try {
        return segmentation_from_json(j);
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

// ---- trace CSV ------------------------------------------------------------

std::string proposal_kind_name(ProposalKind kind) {
    switch (kind) {
        case ProposalKind::Initial: return "initial";
        case ProposalKind::New: return "new";
        case ProposalKind::BirthDeath: return "birth_death";
        case ProposalKind::SegmentBD: return "segment_bd";
        case ProposalKind::Shift: return "shift";
    }
    return "unknown";
}

std::string trace_to_csv(const ChainTrace& trace, const RunManifest* manifest) {
    std::string s = csv_preamble("iteration, log-score", manifest);
    s += "iter,score,accepted,proposal_type,num_changepoints\n";
    for (const auto& r : trace.records) {
        s += std::to_string(r.iteration) + "," + format_double(r.score) + "," + (r.accepted ? "1" : "0") + "," +
             proposal_kind_name(r.kind) + "," + std::to_string(r.num_changepoints) + "\n";
    }
    return s;
}

}  // namespace cplass
