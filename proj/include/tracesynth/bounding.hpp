#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tracesynth/backend.hpp"
#include "tracesynth/costmodel.hpp"
#include "tracesynth/trace.hpp"

namespace tracesynth {

/// Phase I failure carrying a report reason code: no_connected_set,
/// under_target_scan, compensation_cap or unreachable_structure.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(std::string reason, const std::string& message)
      : std::runtime_error(message), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

struct ColumnSelection {
  std::vector<std::string> tables;
  std::vector<JoinEdge> join_edges;
  std::map<std::string, std::vector<std::string>> selected;   // sorted per table
  std::map<std::string, std::vector<std::string>> mandatory;  // join keys per table
  double scan_bytes = 0;
  bool under_target = false;
  /// Weight of the last column added by the completion step (0 if none).
  double last_added_weight = 0;
};

/// Greedy data-aware column selection over a connected table set.
ColumnSelection greedy_column_selection(const Catalog& catalog, const std::vector<std::string>& tables,
                                        double y_scan);

/// Selections keyed by (table set, exact scan target), plus call counters.
class BoundingCache {
 public:
  std::optional<ColumnSelection> find(const std::string& key) const;
  void put(const std::string& key, const ColumnSelection& selection);
  int64_t greedy_calls() const { return greedy_calls_.load(); }
  int64_t hits() const { return hits_.load(); }
  void count_call() { ++greedy_calls_; }
  void count_hit() const { ++hits_; }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, ColumnSelection> entries_;
  std::atomic<int64_t> greedy_calls_{0};
  mutable std::atomic<int64_t> hits_{0};
};

struct BoundedBaseGraph {
  QueryGraph graph;
  ColumnSelection selection;
  bool feasible = true;
  std::vector<std::string> flags;
};

/// Number of tables implied by the join constraint.
int required_table_count(const StructuralProfile& structure);

/// Ranked (by |S - y_scan|) candidate base graphs. `greedy_calls`, when
/// given, is incremented once per table set requested, cached or not.
std::vector<BoundedBaseGraph> choose_base_graphs(const Catalog& catalog, const StructuralProfile& structure,
                                                 double y_scan, BoundingCache* cache = nullptr,
                                                 int64_t* greedy_calls = nullptr);

/// Adds Aggregate (nested) and Sort operators above the core.
QueryGraph inject_structure(const QueryGraph& base, const StructuralProfile& structure, const Catalog& catalog);

struct CompensationConfig {
  int64_t max_applications = 10000;
  /// Compensate up to headroom * y_cpu of predicted CPU at full openness.
  double headroom = 1.0;
};

struct CompensationResult {
  QueryGraph graph;
  double predicted_max_cpu = 0;
  int64_t applications = 0;
  std::vector<std::string> flags;
};

/// Probes the filter-free graph, predicts its CPU, and appends EvalScalar
/// operators above the join core while the prediction is below target.
CompensationResult feasibility_and_compensation(const QueryGraph& g, double y_cpu, const LocalModel& model,
                                                ExecutionBackend& backend, const Catalog& catalog,
                                                const CompensationConfig& config = {});

}  // namespace tracesynth
