#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tracesynth/bounding.hpp"
#include "tracesynth/costmodel.hpp"
#include "tracesynth/pool.hpp"
#include "tracesynth/predsearch.hpp"
#include "tracesynth/trace.hpp"
#include "tracesynth/translator.hpp"

namespace tracesynth {

struct PipelineConfig {
  SearchConfig search;
  double tolerance_cpu = 0.2;
  double tolerance_bytes = 0.2;
  double weight_cpu = 1.0;
  double weight_bytes = 1.0;
  double eta = 1.0;
  double tau = 0.5;
  int max_dims = 2;
  CompensationConfig compensation;
  int parallelism = 1;
  std::string backend = "simulated";  // or mock-adapter
  std::string mock_dir;
  /// mock-adapter: fill missing canned profiles from the simulated engine.
  bool mock_record = false;
  bool use_pool = true;
  bool report_latency = false;

  /// Throws ParseError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// key=value lines; '#' starts a comment line.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);
/// Every key with its current value, in the same format parse_config reads.
std::string serialize_config(const PipelineConfig& config);

struct RecordResult {
  std::string record_id;
  ReuseKind reuse = ReuseKind::Miss;
  bool failed = false;
  std::string error;
  double target_cpu = 0, target_bytes = 0;
  double achieved_cpu = 0, achieved_bytes = 0;
  double qerror_cpu = 0, qerror_bytes = 0;
  std::optional<int> target_joins, target_aggs, target_sorts;
  int achieved_joins = 0, achieved_aggs = 0, achieved_sorts = 0;
  int64_t executions = 0;
  int64_t evaluations = 0;
  int64_t phase1_calls = 0;
  std::vector<std::string> flags;
  std::optional<double> latency_ms;
  std::string sql;
  uint64_t exact_hash = 0;
};

struct ReportSummary {
  size_t records = 0;
  size_t failed = 0;
  double cpu_p50 = 0, cpu_p90 = 0, cpu_p99 = 0;
  double bytes_p50 = 0, bytes_p90 = 0, bytes_p99 = 0;
  double mae_joins = 0, mae_aggs = 0, mae_sorts = 0;
  std::map<std::string, size_t> reuse;
  int64_t executions = 0;
  int64_t max_executions = 0;
};

struct Report {
  bool presence_mode = false;
  std::vector<RecordResult> rows;
};

/// Linear-interpolation percentile (q in [0, 100]).
double percentile(std::vector<double> values, double q);
ReportSummary summarize(const Report& report);
std::string serialize_report(const Report& report);
/// Reads the per-record rows back; the trailing comment block is ignored.
Report parse_report(std::string_view text);
std::string format_summary(const ReportSummary& summary);

struct SynthesisOutput {
  std::string workload;
  Report report;
};

/// Per record, in trace order: pool lookup, then Phase I on a miss, Phase II,
/// translation, measurement and pool insertion. Failures become flagged rows.
SynthesisOutput synthesize_workload(const std::vector<TraceRecord>& trace, const Catalog& catalog,
                                    ExecutionBackend& backend, const LocalModel& model, const PipelineConfig& config,
                                    QueryPool* pool = nullptr, BoundingCache* cache = nullptr);

}  // namespace tracesynth
