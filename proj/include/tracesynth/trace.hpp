#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tracesynth/backend.hpp"
#include "tracesynth/querygraph.hpp"

namespace tracesynth {

/// Execution targets Y with the mismatch objective's knobs.
struct TargetProfile {
  double cpu_time_ms = 0;
  double scanned_bytes = 0;
  double tolerance_cpu = 0.2;
  double tolerance_bytes = 0.2;
  double weight_cpu = 1.0;
  double weight_bytes = 1.0;
  double eta = 1.0;

  void validate() const;
};

enum class ConstraintMode { ExactCount, Presence };

struct StructuralConstraint {
  OperatorKind kind = OperatorKind::Join;  // Join, Aggregate or Sort
  ConstraintMode mode = ConstraintMode::ExactCount;
  int value = 0;      // count, or 0/1 in presence mode
  int tolerance = 0;  // exact_count only

  bool operator==(const StructuralConstraint&) const = default;
};

struct StructuralProfile {
  std::vector<StructuralConstraint> constraints;

  const StructuralConstraint* find(OperatorKind kind) const;
  bool satisfied_by(const StructuralCounts& counts) const;
  void validate() const;
  bool operator==(const StructuralProfile&) const = default;
};

struct TraceRecord {
  std::string record_id;
  int64_t timestamp_ms = 0;
  TargetProfile targets;
  StructuralProfile structure;
  std::optional<std::string> query_hash;
  std::optional<std::string> param_hash;
};

std::vector<TraceRecord> parse_trace(std::string_view text);
std::vector<TraceRecord> load_trace(const std::string& path);
/// Presence mode is inferred from the first record's constraints.
std::string serialize_trace(const std::vector<TraceRecord>& records);

/// Sum over metrics of w_m * |g_m - y_m| / max(y_m, eta).
double compute_mismatch(const ExecutionProfile& profile, const TargetProfile& targets);
/// max(m/t, t/m) with both sides floored at eta.
double qerror(double measured, double target, double eta = 1.0);

struct SyntheticTraceSpec {
  int n = 50;
  uint64_t seed = 0;
  /// Fraction of records repeating an earlier query verbatim.
  double dup = 0.0;
  /// Fraction of records re-instantiating an earlier template with new literals.
  double param_dup = 0.0;
  bool presence_mode = false;
  bool with_hashes = true;
  SampleBounds bounds{2, 2, 1, 20, 0.7, 0.3};
};

struct AnswerKeyEntry {
  std::string record_id;
  QueryGraph graph;
};

struct SyntheticTrace {
  std::vector<TraceRecord> records;
  std::vector<AnswerKeyEntry> answer_key;
};

SyntheticTrace gen_synthetic_trace(const Catalog& catalog, ExecutionBackend& backend, const SyntheticTraceSpec& spec);

std::string serialize_answer_key(const std::vector<AnswerKeyEntry>& key);
std::vector<AnswerKeyEntry> parse_answer_key(std::string_view text);

}  // namespace tracesynth
