#include "tracesynth/pool.hpp"

#include <cmath>
#include <filesystem>
#include <mutex>
#include <sstream>

namespace tracesynth {

std::string_view to_string(ReuseKind kind) {
  switch (kind) {
    case ReuseKind::Exact:
      return "exact";
    case ReuseKind::Template:
      return "template";
    case ReuseKind::Proxy:
      return "proxy";
    case ReuseKind::Miss:
      return "miss";
  }
  return "miss";
}

namespace {

double constraint_value(const StructuralProfile& s, OperatorKind kind) {
  const auto* c = s.find(kind);
  return c ? c->value : 0.0;
}

}  // namespace

ProxySignature record_signature(const TraceRecord& r) {
  return {std::log1p(r.targets.cpu_time_ms), std::log1p(r.targets.scanned_bytes),
          constraint_value(r.structure, OperatorKind::Join), constraint_value(r.structure, OperatorKind::Aggregate),
          constraint_value(r.structure, OperatorKind::Sort)};
}

ProxySignature entry_signature(const PoolEntry& e, const StructuralProfile& like) {
  const auto counts = structural_counts(e.graph);
  auto value = [&](OperatorKind kind, int count) {
    const auto* c = like.find(kind);
    return c && c->mode == ConstraintMode::Presence ? (count > 0 ? 1.0 : 0.0) : static_cast<double>(count);
  };
  return {std::log1p(e.profile.cpu_time_ms), std::log1p(e.profile.scanned_bytes),
          value(OperatorKind::Join, counts.joins), value(OperatorKind::Aggregate, counts.aggregates),
          value(OperatorKind::Sort, counts.sorts)};
}

LookupResult QueryPool::lookup(const TraceRecord& record) const {
  std::shared_lock lock(mutex_);
  LookupResult out;
  if (record.query_hash) {
    if (auto b = query_bindings_.find(*record.query_hash); b != query_bindings_.end()) {
      if (auto e = entries_.find(b->second); e != entries_.end()) {
        out.kind = ReuseKind::Exact;
        out.entry = e->second;
        return out;
      }
    }
  }
  if (record.param_hash) {
    if (auto b = param_bindings_.find(*record.param_hash); b != param_bindings_.end()) {
      const PoolEntry* best = nullptr;
      for (const auto& [h, e] : entries_) {
        if (e.param_hash == b->second && (!best || e.mismatch < best->mismatch)) best = &e;
      }
      if (best) {
        out.kind = ReuseKind::Template;
        out.entry = *best;
        return out;
      }
    }
  }
  if (record.query_hash || record.param_hash || entries_.empty()) return out;

  // Proxy path: nearest z-scored signature among structurally compatible entries.
  std::vector<ProxySignature> sigs;
  for (const auto& [h, e] : entries_) sigs.push_back(entry_signature(e, record.structure));
  ProxySignature mean{}, sd{};
  for (const auto& s : sigs) {
    for (size_t i = 0; i < s.size(); ++i) mean[i] += s[i] / static_cast<double>(sigs.size());
  }
  for (const auto& s : sigs) {
    for (size_t i = 0; i < s.size(); ++i) sd[i] += (s[i] - mean[i]) * (s[i] - mean[i]) / static_cast<double>(sigs.size());
  }
  for (auto& v : sd) v = v > 0 ? std::sqrt(v) : 1.0;
  const auto target = record_signature(record);
  const PoolEntry* best = nullptr;
  double best_distance = 0;
  size_t i = 0;
  for (const auto& [h, e] : entries_) {
    const auto& s = sigs[i++];
    if (!record.structure.satisfied_by(structural_counts(e.graph))) continue;
    double d = 0;
    for (size_t k = 0; k < s.size(); ++k) d += std::pow((s[k] - target[k]) / sd[k], 2);
    d = std::sqrt(d);
    if (!best || d < best_distance) {
      best = &e;
      best_distance = d;
    }
  }
  if (best && best_distance <= tau_) {
    out.kind = ReuseKind::Proxy;
    out.entry = *best;
    out.distance = best_distance;
  }
  return out;
}

bool QueryPool::insert(PoolEntry entry) {
  if (entry.exact_hash != graph_hash(entry.graph, false) || entry.param_hash != graph_hash(entry.graph, true)) {
    throw ValidationError("pool entry hashes do not match its graph");
  }
  std::unique_lock lock(mutex_);
  auto it = entries_.find(entry.exact_hash);
  if (it != entries_.end() && !(entry.mismatch < it->second.mismatch)) return false;
  entry.inserted = sequence_++;
  entries_[entry.exact_hash] = std::move(entry);
  return true;
}

void QueryPool::bind(const TraceRecord& record, uint64_t exact_hash, uint64_t param_hash) {
  std::unique_lock lock(mutex_);
  if (record.query_hash) query_bindings_.emplace(*record.query_hash, exact_hash);
  if (record.param_hash) param_bindings_.emplace(*record.param_hash, param_hash);
}

size_t QueryPool::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::optional<PoolEntry> QueryPool::find(uint64_t exact_hash) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(exact_hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void QueryPool::save(const std::string& dir) const {
  std::shared_lock lock(mutex_);
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  index << "pool tau=" << format_double(tau_) << " sequence=" << sequence_ << "\n";
  for (const auto& [h, e] : entries_) {
    const auto hex = to_hex(h);
    write_file(dir + "/g_" + hex + ".txt", canonical_form(e.graph, false));
    write_file(dir + "/p_" + hex + ".txt", serialize_profile(e.profile));
    index << "entry exact=" << hex << " param=" << to_hex(e.param_hash) << " graph=g_" << hex
          << ".txt profile=p_" << hex << ".txt record_id=" << e.record_id << " inserted=" << e.inserted
          << " mismatch=" << format_double(e.mismatch) << " cpu_time_ms=" << format_double(e.profile.cpu_time_ms)
          << " scanned_bytes=" << format_double(e.profile.scanned_bytes) << "\n";
  }
  for (const auto& [token, h] : query_bindings_) index << "bind kind=query token=" << token << " hash=" << to_hex(h) << "\n";
  for (const auto& [token, h] : param_bindings_) index << "bind kind=param token=" << token << " hash=" << to_hex(h) << "\n";
  write_file(dir + "/index.txt", index.str());
}

std::unique_ptr<QueryPool> QueryPool::load(const std::string& dir, double tau) {
  auto owned = std::make_unique<QueryPool>(tau);
  auto& pool = *owned;
  for (const auto& raw : split(read_file(dir + "/index.txt"), '\n')) {
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto space = line.find(' ');
    const auto tag = line.substr(0, space);
    const auto kv = parse_key_values(line.substr(space + 1));
    if (tag == "pool") {
      pool.sequence_ = parse_int(kv.require("sequence"));
    } else if (tag == "entry") {
      PoolEntry e;
      e.exact_hash = from_hex(kv.require("exact"));
      e.param_hash = from_hex(kv.require("param"));
      e.graph = parse_graph(read_file(dir + "/" + kv.require("graph")));
      e.profile = parse_profile(read_file(dir + "/" + kv.require("profile")));
      e.record_id = kv.require("record_id");
      e.inserted = parse_int(kv.require("inserted"));
      e.mismatch = parse_double(kv.require("mismatch"));
      if (e.exact_hash != graph_hash(e.graph, false)) throw ParseError("pool graph does not match its hash");
      pool.entries_[e.exact_hash] = std::move(e);
    } else if (tag == "bind") {
      auto& target = kv.require("kind") == "query" ? pool.query_bindings_ : pool.param_bindings_;
      target[kv.require("token")] = from_hex(kv.require("hash"));
    } else {
      throw ParseError("unknown pool index line");
    }
  }
  return owned;
}

}  // namespace tracesynth
