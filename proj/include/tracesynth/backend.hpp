#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tracesynth/catalog.hpp"
#include "tracesynth/querygraph.hpp"

namespace tracesynth {

/// Ground-truth cost constants of the simulated engine (ms).
struct CostCoefficients {
  double scan_per_byte_row = 0.0005;
  double filter_per_row = 0.0004;  // per predicate application
  double arith_per_row = 0.0004;
  double string_per_row = 0.0012;
  double date_per_row = 0.0006;
  double sort_nlogn = 0.001;
  double sort_width = 0.0002;
  double join_build = 0.0008;
  double join_probe = 0.0005;
  double join_per_task = 0.05;
  double join_materialize = 0.0003;
  double agg_input = 0.0006;
  double agg_output = 0.0003;

  double eval_per_row(ExprKind kind) const;
};

struct BackendConfig {
  int parallel_tasks = 4;
  CostCoefficients ground_truth;

  void validate() const;
};

struct OperatorProfile {
  NodeId node = 0;
  OperatorKind kind = OperatorKind::Scan;
  std::vector<int64_t> input_cardinalities;
  int64_t output_cardinality = 0;
  double cpu_time_ms = 0;

  bool operator==(const OperatorProfile&) const = default;
};

struct ExecutionProfile {
  double cpu_time_ms = 0;
  double scanned_bytes = 0;
  StructuralCounts structural;
  std::vector<OperatorProfile> per_operator;  // post-order

  bool operator==(const ExecutionProfile&) const = default;
};

/// Per-node output row counts.
struct CardinalityEstimate {
  std::map<NodeId, int64_t> output;

  int64_t at(NodeId id) const;
  bool operator==(const CardinalityEstimate&) const = default;
};

/// Metering for work done on a backend. Probes never count as executions.
struct BackendMeter {
  int64_t executions = 0;
  int64_t probes = 0;
  double probe_cpu_ms = 0;
};

/// Contract shared by the simulated engine and adapter-backed engines.
class ExecutionBackend {
 public:
  virtual ~ExecutionBackend() = default;
  virtual ExecutionProfile execute(const QueryGraph& g) = 0;
  virtual CardinalityEstimate probe_cardinalities(const QueryGraph& g) = 0;
  virtual int parallel_tasks() const = 0;
  virtual BackendMeter meter() const = 0;
};

/// Deterministic reference engine over materialized synthetic tables.
class SimulatedBackend final : public ExecutionBackend {
 public:
  SimulatedBackend(std::shared_ptr<const Dataset> dataset, BackendConfig config = {});

  ExecutionProfile execute(const QueryGraph& g) override;
  CardinalityEstimate probe_cardinalities(const QueryGraph& g) override;
  int parallel_tasks() const override { return config_.parallel_tasks; }
  BackendMeter meter() const override;

  const Catalog& catalog() const { return dataset_->catalog; }
  const BackendConfig& config() const { return config_; }

 private:
  struct Evaluation;
  Evaluation evaluate(const QueryGraph& g) const;

  std::shared_ptr<const Dataset> dataset_;
  BackendConfig config_;
  // Order-preserving integer codes for text columns, keyed by table.column.
  std::map<std::string, std::vector<double>> text_codes_;
  std::atomic<int64_t> executions_{0};
  std::atomic<int64_t> probes_{0};
  mutable std::mutex probe_mutex_;
  double probe_cpu_ms_ = 0;
};

// ---------------------------------------------------------------------------
// External engine adapters

class AdapterError : public std::runtime_error {
 public:
  enum class Kind { Connection, Auth, Timeout, Parse, NotFound };
  AdapterError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }
  bool retryable() const { return kind_ == Kind::Connection || kind_ == Kind::Timeout; }

 private:
  Kind kind_;
};

/// SQL text in, structured profile out.
class EngineAdapter {
 public:
  virtual ~EngineAdapter() = default;
  virtual ExecutionProfile submit_sql(const std::string& sql) = 0;
};

std::string serialize_profile(const ExecutionProfile& profile);
/// Throws AdapterError{Parse} on malformed input.
ExecutionProfile parse_profile(std::string_view text);

/// Replays canned profiles from `<dir>/<exact-hash>.profile`. A canned file
/// may instead hold a single `error=<connection|auth|timeout>` line. When a
/// recorder is supplied, missing profiles are produced by it and written
/// back to the directory.
class MockAdapter final : public EngineAdapter {
 public:
  using Recorder = std::function<ExecutionProfile(const std::string& sql)>;
  explicit MockAdapter(std::string dir, Recorder recorder = {});
  ExecutionProfile submit_sql(const std::string& sql) override;
  int64_t submissions() const { return submissions_; }

 private:
  std::string dir_;
  Recorder recorder_;
  std::mutex mutex_;
  int64_t submissions_ = 0;
};

/// Executes through an adapter (graph -> SQL); cardinality probes go to a
/// local prober bound to the same dataset.
class AdapterBackend final : public ExecutionBackend {
 public:
  AdapterBackend(std::shared_ptr<EngineAdapter> adapter, std::shared_ptr<ExecutionBackend> prober);

  ExecutionProfile execute(const QueryGraph& g) override;
  CardinalityEstimate probe_cardinalities(const QueryGraph& g) override;
  int parallel_tasks() const override { return prober_->parallel_tasks(); }
  BackendMeter meter() const override;

 private:
  std::shared_ptr<EngineAdapter> adapter_;
  std::shared_ptr<ExecutionBackend> prober_;
  std::atomic<int64_t> executions_{0};
};

}  // namespace tracesynth
