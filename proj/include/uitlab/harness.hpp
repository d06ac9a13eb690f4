#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uitlab/metrics.hpp"

namespace uitlab {

enum class ExperimentKind { Averaging, Discretization, Meanfield, Counterexample, MetricsSelftest };

ExperimentKind parse_experiment_kind(std::string_view name);
std::string_view to_string(ExperimentKind k) noexcept;

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::MetricsSelftest;
    std::vector<double> sweep;
    double horizon = 0.0;
    std::size_t n_reps = 0;
    std::uint64_t seed = 0;
    std::string output_dir;
    /// Flat key-value table of model and scheme parameters.
    nlohmann::json params = nlohmann::json::object();
    /// The document as read, echoed into the manifest.
    nlohmann::json source = nlohmann::json::object();
    /// Worker count; set by the caller, never read from the file.
    std::size_t threads = 0;

    double number(const std::string& key, double fallback) const;
    std::size_t integer(const std::string& key, std::size_t fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
};

/// Validates a parsed document. Every violation is collected before throwing
/// ConfigError.
ExperimentConfig parse_config_json(const nlohmann::json& doc);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// FNV-1a of the canonical (sorted-key) dump of the source document.
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct Verdict {
    enum class Status { Pass, Fail, Skipped };

    std::string name;
    Status status = Status::Fail;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::string reason;
};

std::string_view to_string(Verdict::Status s) noexcept;

struct ReportBundle {
    ExperimentConfig config;
    std::vector<ErrorCurve> curves;
    /// Fitted rates, plateau statistics and per-item numbers.
    nlohmann::json summary = nlohmann::json::object();
    std::vector<Verdict> verdicts;
    /// Machine-readable reasons the run as a whole failed (flags, blowups,
    /// budget, fit failures).
    std::vector<std::string> failures;
    double wall_seconds = 0.0;

    bool ok() const noexcept;
};

ReportBundle run_experiment(const ExperimentConfig& cfg);

struct ReportPaths {
    std::filesystem::path curves;
    std::filesystem::path summary;
    std::filesystem::path manifest;
};

ReportPaths emit_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir);

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" otherwise.
std::string format_number(double x);

/// Header plus one row per curve point.
void write_curves_csv(std::ostream& os, const std::vector<ErrorCurve>& curves);

nlohmann::json summary_json(const ReportBundle& bundle);

std::string version_string();

}  // namespace uitlab
