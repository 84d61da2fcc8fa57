#pragma once

// File formats: trajectory CSV, segmentation/truth JSON, trace CSV, run manifest.

#include "cplass/criterion.hpp"
#include "cplass/simulate.hpp"
#include "cplass/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace cplass {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr int kSchemaMajor = 1;

/// Malformed or unreadable input data (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t row, const std::string& what);
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class GridError : public DataError {
public:
    GridError(const std::string& source, std::size_t row, const std::string& what);
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// Relative tolerance on the spacing of CSV time stamps.
inline constexpr double kGridJitter = 1e-6;

/// Everything needed to rerun a command bit-identically. Wall-clock is only
/// recorded on request because it would break byte-identical reruns.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::string input_digest;  // sha256 of the input bytes, empty if none
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::optional<double> wall_clock_seconds;

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes bytes, creating parent directories. Throws DataError on failure.
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Shortest round-trip formatting of a double (%.17g).
std::string format_double(double v);

/// Header `t,x1,...,xd` or `t,x,y`; lines starting with '#' are ignored.
Trajectory parse_trajectory_csv(std::istream& in, const std::string& source = "<stream>");
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Writes `# units: s, um`, an optional `# manifest:` line and the data rows.
std::string trajectory_to_csv(const Trajectory& traj, const RunManifest* manifest = nullptr);

nlohmann::ordered_json config_to_json(const ScoreConfig& cfg);
nlohmann::ordered_json config_to_json(const McmcConfig& cfg);
nlohmann::ordered_json config_to_json(const ScoreConfig& score, const McmcConfig& mcmc);
ScoreConfig score_config_from_json(const nlohmann::json& j);
McmcConfig mcmc_config_from_json(const nlohmann::json& j);

/// Versioned segmentation document.
nlohmann::ordered_json segmentation_to_json(const Segmentation& seg, const ScoreBreakdown& score,
                                            const RunManifest& manifest);

struct SegmentationDocument {
    Segmentation segmentation;
    std::optional<ScoreBreakdown> score;
    std::optional<RunManifest> manifest;
};

/// Throws SchemaError on a missing/unknown major schema version or missing fields.
SegmentationDocument segmentation_from_json(const nlohmann::json& j);
SegmentationDocument read_segmentation_json(const std::filesystem::path& path);

/// Ground truth of a simulated path (same layout as a segmentation, without a score).
nlohmann::ordered_json truth_to_json(const Segmentation& truth, double sigma, const RunManifest& manifest);

std::string proposal_kind_name(ProposalKind kind);

/// `iter,score,accepted,proposal_type,num_changepoints`.
std::string trace_to_csv(const ChainTrace& trace, const RunManifest* manifest = nullptr);

/// Comment lines `# units: ...` and `# manifest: {...}` for CSV outputs.
std::string csv_preamble(const std::string& units, const RunManifest* manifest);

}  // namespace cplass
