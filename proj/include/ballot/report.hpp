#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ballot/layers.hpp"
#include "ballot/mask.hpp"
#include "ballot/metrics.hpp"
#include "ballot/pipeline.hpp"
#include "json.hpp"

namespace ballot {

inline constexpr const char* kToolVersion = "1.0.0";

struct CandidateSummary {
  std::size_t round = 0;
  double accuracy = 0.0;
  double cwv = 0.0;
  double mcd = 0.0;
  bool accuracy_ok = false;
  bool fairness_ok = false;

  friend bool operator==(const CandidateSummary&, const CandidateSummary&) = default;
};

// One row of results: "dense", a pruning method, or "evaluate".
struct MethodSummary {
  std::string method;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cwv = 0.0;
  double mcd = 0.0;
  std::vector<double> per_class_acc;
  std::vector<std::size_t> sample_counts;
  double retention = 1.0;
  std::size_t rounds = 0;
  double wall_time_s = 0.0;
  std::optional<Mask> mask;
  std::vector<CandidateSummary> candidates;

  friend bool operator==(const MethodSummary&, const MethodSummary&) = default;
};

struct ReportFile {
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<LayerSpec> layers;
  std::vector<MethodSummary> results;
};

MethodSummary summarize(const std::string& method, const EvalReport& report, double wall_time_s);
MethodSummary summarize(const PruneResult& result);

nlohmann::ordered_json report_to_json(const ReportFile& report);
// Throws PersistenceError on a malformed document.
ReportFile report_from_json(const nlohmann::ordered_json& doc);

std::string serialize_report(const ReportFile& report);
void write_report(const ReportFile& report, const std::filesystem::path& path);
ReportFile read_report(const std::filesystem::path& path);

struct AggregateRow {
  std::string method;
  std::uint64_t seed = 0;
  MethodSummary summary;
};

inline constexpr const char* kAggregateHeader =
    "method,seed,accuracy,precision,recall,cwv,mcd,retention,rounds,wall_time_s";

// Rows sorted by (method, seed); reals printed with 17 significant digits.
std::string aggregate_csv(std::vector<AggregateRow> rows);

// PersistenceError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ballot
