#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracesynth/backend.hpp"
#include "tracesynth/costmodel.hpp"

namespace tracesynth {

struct PredicateDimension {
  ColumnRef column;
  ValueKind kind = ValueKind::Integer;
  double lower = 0;  // min_value - step: the predicate rejects every row
  double upper = 0;  // max_value: the predicate keeps every row
};

struct PredicateSpace {
  std::vector<PredicateDimension> dims;
  std::map<std::string, int> allocation;  // per scanned table
};

/// One bound per dimension; predicate form `column <= x`.
using PredicateVector = std::vector<double>;

struct SearchConfig {
  int n_rand = 8;
  int n_calls = 24;
  /// Random asks in each Stage-2 refinement, after warm-starting from history.
  int n_rand_stage2 = 2;
  double window_low = 0.5;
  double window_high = 2.0;
  double shrink = 0.1;
  int bucket_cap = 256;
  uint64_t seed = 0;
  /// Backend executions per record, final verification included. <= 0 means unlimited.
  int max_executions = 40;
  /// Ablation: execute every evaluation instead of using the window rule.
  bool always_execute = false;
  /// Stop searching once an executed point reaches this CPU q-error. <= 1 disables.
  double stop_qerror = 1.05;

  void validate() const;
};

/// Columns to tune: up to `max_dims`, allocated across scanned tables in
/// proportion to row count (largest remainder).
PredicateSpace select_predicate_columns(const QueryGraph& g, const Catalog& catalog, int max_dims);

/// Bucket width for a domain: one value step, or ceil(steps/(cap-1)) steps
/// when the domain holds more than `cap` values.
double bucket_step(double lower, double upper, ValueKind kind, int cap);

/// `base` with one Filter per table holding that table's predicates.
QueryGraph apply_predicates(const QueryGraph& base, const PredicateSpace& space, const PredicateVector& x);

struct SearchContext {
  const QueryGraph* base = nullptr;  // filter-free template
  const Catalog* catalog = nullptr;
  double y_cpu = 0;
  const LocalModel* model = nullptr;
  ExecutionBackend* backend = nullptr;
  SearchConfig config;
};

struct ScoredPoint {
  PredicateVector x;
  double cpu = 0;
  double predicted_cpu = 0;
  double score = 0;
  bool executed = false;
  int stage = 1;
  int seed_index = -1;  // stage 2: 0 for x+, 1 for x-
};

struct SearchState {
  std::vector<ScoredPoint> history;
  std::optional<PredicateVector> x_plus;
  std::optional<PredicateVector> x_minus;
};

struct TuneResult {
  QueryGraph graph;
  ExecutionProfile profile;
  PredicateVector x;
  int64_t executions = 0;
  int64_t evaluations = 0;
  SearchState state;
  bool budget_exhausted = false;
};

/// Stateful Phase-II session: scoring with execution budget and memo.
class PredicateTuner {
 public:
  PredicateTuner(SearchContext context, PredicateSpace space);

  /// Hybrid score: predict, execute only inside the window (or always in
  /// the ablation). Repeated vectors are answered from the memo.
  ScoredPoint score_predicates(const PredicateVector& x);

  SearchState& stage1_global();
  /// Refines around each seed; returns the best vector over all history.
  PredicateVector stage2_local();
  TuneResult tune();

  const PredicateSpace& space() const { return space_; }
  const SearchState& state() const { return state_; }
  int64_t executions() const { return executions_; }
  bool budget_left() const;

 private:
  void select_seeds();
  PredicateVector best_vector() const;

  SearchContext ctx_;
  PredicateSpace space_;
  SearchState state_;
  std::map<PredicateVector, ScoredPoint> memo_;
  int64_t executions_ = 0;
  bool converged_ = false;
  std::optional<double> best_executed_gap_;
};

}  // namespace tracesynth
