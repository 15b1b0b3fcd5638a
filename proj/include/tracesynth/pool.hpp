#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tracesynth/backend.hpp"
#include "tracesynth/trace.hpp"

namespace tracesynth {

struct PoolEntry {
  uint64_t exact_hash = 0;
  uint64_t param_hash = 0;
  QueryGraph graph;
  ExecutionProfile profile;
  std::string record_id;
  int64_t inserted = 0;  // insertion sequence number
  double mismatch = 0;
};

/// [log1p cpu, log1p bytes, joins, aggregates, sorts].
using ProxySignature = std::array<double, 5>;

ProxySignature record_signature(const TraceRecord& record);
/// Entry signature in the record's constraint modes (presence bits where the
/// record only carries presence).
ProxySignature entry_signature(const PoolEntry& entry, const StructuralProfile& like);

enum class ReuseKind { Exact, Template, Proxy, Miss };
std::string_view to_string(ReuseKind kind);

struct LookupResult {
  ReuseKind kind = ReuseKind::Miss;
  std::optional<PoolEntry> entry;
  double distance = 0;  // proxy only
};

/// Query pool with vendor-token bindings. Lookups may run concurrently;
/// writes take an exclusive lock.
class QueryPool {
 public:
  explicit QueryPool(double tau = 0.5) : tau_(tau) {}

  LookupResult lookup(const TraceRecord& record) const;
  /// Idempotent on exact_hash; a duplicate replaces only with lower mismatch.
  /// Returns true when the entry was stored.
  bool insert(PoolEntry entry);
  /// First occurrence binds the record's vendor tokens to the entry hashes.
  void bind(const TraceRecord& record, uint64_t exact_hash, uint64_t param_hash);

  size_t size() const;
  std::optional<PoolEntry> find(uint64_t exact_hash) const;

  void save(const std::string& dir) const;
  static std::unique_ptr<QueryPool> load(const std::string& dir, double tau = 0.5);

 private:
  double tau_;
  mutable std::shared_mutex mutex_;
  std::map<uint64_t, PoolEntry> entries_;
  std::map<std::string, uint64_t> query_bindings_;
  std::map<std::string, uint64_t> param_bindings_;
  int64_t sequence_ = 0;
};

}  // namespace tracesynth
