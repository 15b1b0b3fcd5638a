#include "tracesynth/backend.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <unordered_map>

#include "tracesynth/translator.hpp"

namespace tracesynth {

double CostCoefficients::eval_per_row(ExprKind kind) const {
  switch (kind) {
    case ExprKind::Arith:
      return arith_per_row;
    case ExprKind::String:
      return string_per_row;
    case ExprKind::Date:
      return date_per_row;
  }
  return 0;
}

void BackendConfig::validate() const {
  if (parallel_tasks < 1) throw ValidationError("parallel_tasks must be >= 1");
  const auto& c = ground_truth;
  for (double v : {c.scan_per_byte_row, c.filter_per_row, c.arith_per_row, c.string_per_row, c.date_per_row,
                   c.sort_nlogn, c.sort_width, c.join_build, c.join_probe, c.join_per_task, c.join_materialize,
                   c.agg_input, c.agg_output}) {
    if (!(v > 0)) throw ValidationError("cost coefficients must be positive");
  }
}

int64_t CardinalityEstimate::at(NodeId id) const {
  auto it = output.find(id);
  if (it == output.end()) throw ValidationError("no cardinality for node " + std::to_string(id));
  return it->second;
}

// ---------------------------------------------------------------------------
// Simulated engine

namespace {

/// Column-major intermediate result; only referenceable columns are kept.
struct Relation {
  std::map<ColumnRef, std::vector<double>> columns;
  size_t rows = 0;
};

Relation gather(const Relation& in, const std::vector<size_t>& keep) {
  Relation out;
  out.rows = keep.size();
  for (const auto& [ref, values] : in.columns) {
    auto& dst = out.columns[ref];
    dst.reserve(keep.size());
    for (size_t r : keep) dst.push_back(values[r]);
  }
  return out;
}

struct VectorHash {
  size_t operator()(const std::vector<double>& v) const {
    size_t h = 1469598103934665603ULL;
    for (double x : v) h = (h ^ std::hash<double>{}(x)) * 1099511628211ULL;
    return h;
  }
};

}  // namespace

struct SimulatedBackend::Evaluation {
  ExecutionProfile profile;
  CardinalityEstimate cards;
  double probe_cpu_ms = 0;
};

SimulatedBackend::SimulatedBackend(std::shared_ptr<const Dataset> dataset, BackendConfig config)
    : dataset_(std::move(dataset)), config_(config) {
  if (!dataset_) throw ValidationError("backend requires a bound dataset");
  config_.validate();
  for (const auto& t : dataset_->tables) {
    for (const auto& c : t.columns) {
      if (c.kind != ValueKind::Text) continue;
      auto sorted = c.texts;
      std::sort(sorted.begin(), sorted.end());
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      std::vector<double> codes;
      codes.reserve(c.texts.size());
      for (const auto& s : c.texts) {
        codes.push_back(static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin()));
      }
      text_codes_[t.name + "." + c.name] = std::move(codes);
    }
  }
}

SimulatedBackend::Evaluation SimulatedBackend::evaluate(const QueryGraph& g) const {
  require_valid(g, dataset_->catalog);
  const auto& k = config_.ground_truth;
  Evaluation ev;
  std::map<NodeId, Relation> results;

  for (NodeId id : g.post_order()) {
    const auto& n = g.node(id);
    const auto kids = g.children(id);
    OperatorProfile op;
    op.node = id;
    op.kind = n.kind();
    for (NodeId c : kids) op.input_cardinalities.push_back(static_cast<int64_t>(results.at(c).rows));
    Relation out;
    double cpu = 0;

    switch (n.kind()) {
      case OperatorKind::Scan: {
        const auto& s = n.as<ScanAttrs>();
        const auto& data = dataset_->table(s.table);
        const auto& stats = dataset_->catalog.table(s.table);
        out.rows = data.row_count();
        double row_bytes = 0;
        for (const auto& col : s.columns) {
          const auto& cs = *stats.find_column(col);
          row_bytes += cs.bytes_per_value;
          ev.profile.scanned_bytes += cs.scan_weight;
          const auto& cd = *data.find_column(col);
          out.columns[{s.table, col}] =
              cd.kind == ValueKind::Text ? text_codes_.at(s.table + "." + col) : cd.numbers;
        }
        cpu = static_cast<double>(out.rows) * row_bytes * k.scan_per_byte_row;
        ev.probe_cpu_ms += cpu;
        break;
      }
      case OperatorKind::Filter: {
        const auto& in = results.at(kids[0]);
        const auto& preds = n.as<FilterAttrs>().predicates;
        std::vector<size_t> keep;
        for (size_t r = 0; r < in.rows; ++r) {
          bool pass = true;
          for (const auto& p : preds) {
            if (!(in.columns.at(p.column)[r] <= p.literal.value)) {
              pass = false;
              break;
            }
          }
          if (pass) keep.push_back(r);
        }
        out = gather(in, keep);
        cpu = static_cast<double>(in.rows) * static_cast<double>(preds.size()) * k.filter_per_row;
        ev.probe_cpu_ms += cpu;
        break;
      }
      case OperatorKind::Join: {
        const auto& j = n.as<JoinAttrs>();
        const auto& left = results.at(kids[0]);
        const auto& right = results.at(kids[1]);
        const bool build_left = left.rows <= right.rows;
        const auto& build = build_left ? left : right;
        const auto& probe = build_left ? right : left;
        const auto& build_key = build.columns.at(build_left ? j.left_key : j.right_key);
        const auto& probe_key = probe.columns.at(build_left ? j.right_key : j.left_key);
        std::unordered_map<double, std::vector<size_t>> table;
        for (size_t r = 0; r < build.rows; ++r) table[build_key[r]].push_back(r);
        std::vector<size_t> build_rows, probe_rows;
        for (size_t r = 0; r < probe.rows; ++r) {
          auto it = table.find(probe_key[r]);
          if (it == table.end()) continue;
          for (size_t b : it->second) {
            build_rows.push_back(b);
            probe_rows.push_back(r);
          }
        }
        out = gather(build, build_rows);
        auto probe_part = gather(probe, probe_rows);
        out.columns.merge(probe_part.columns);
        const double match = k.join_build * static_cast<double>(build.rows) +
                             k.join_probe * static_cast<double>(probe.rows) +
                             k.join_per_task * config_.parallel_tasks;
        const double materialize = k.join_materialize * static_cast<double>(out.rows) *
                                   static_cast<double>(output_width(g, id));
        cpu = match + materialize;
        ev.probe_cpu_ms += match;
        // Build input first, probe second.
        op.input_cardinalities = {static_cast<int64_t>(build.rows), static_cast<int64_t>(probe.rows)};
        break;
      }
      case OperatorKind::EvalScalar: {
        const auto& e = n.as<EvalScalarAttrs>();
        out = results.at(kids[0]);
        cpu = static_cast<double>(out.rows) * static_cast<double>(e.repeat_count) * k.eval_per_row(e.expr);
        break;
      }
      case OperatorKind::Aggregate: {
        const auto& a = n.as<AggregateAttrs>();
        const auto& in = results.at(kids[0]);
        std::unordered_map<std::vector<double>, size_t, VectorHash> groups;
        std::vector<size_t> first_rows;
        std::vector<double> key(a.group_by.size());
        for (size_t r = 0; r < in.rows; ++r) {
          for (size_t i = 0; i < a.group_by.size(); ++i) key[i] = in.columns.at(a.group_by[i])[r];
          if (groups.emplace(key, first_rows.size()).second) first_rows.push_back(r);
        }
        Relation projected;
        projected.rows = in.rows;
        for (const auto& c : a.group_by) projected.columns[c] = in.columns.at(c);
        out = gather(projected, first_rows);
        cpu = k.agg_input * static_cast<double>(in.rows) +
              k.agg_output * static_cast<double>(out.rows) * static_cast<double>(a.group_by.size());
        break;
      }
      case OperatorKind::Sort: {
        out = results.at(kids[0]);
        const double rows = static_cast<double>(out.rows);
        cpu = k.sort_nlogn * rows * std::log2(std::max(rows, 2.0)) +
              k.sort_width * rows * static_cast<double>(output_width(g, kids[0]));
        break;
      }
    }

    op.output_cardinality = static_cast<int64_t>(out.rows);
    op.cpu_time_ms = cpu;
    ev.profile.cpu_time_ms += cpu;
    ev.cards.output[id] = op.output_cardinality;
    ev.profile.per_operator.push_back(std::move(op));
    for (NodeId c : kids) results.erase(c);
    results[id] = std::move(out);
  }
  ev.profile.structural = structural_counts(g);
  return ev;
}

ExecutionProfile SimulatedBackend::execute(const QueryGraph& g) {
  auto ev = evaluate(g);
  executions_.fetch_add(1, std::memory_order_relaxed);
  return std::move(ev.profile);
}

CardinalityEstimate SimulatedBackend::probe_cardinalities(const QueryGraph& g) {
  auto ev = evaluate(g);
  probes_.fetch_add(1, std::memory_order_relaxed);
  std::lock_guard lock(probe_mutex_);
  probe_cpu_ms_ += ev.probe_cpu_ms;
  return std::move(ev.cards);
}

BackendMeter SimulatedBackend::meter() const {
  std::lock_guard lock(probe_mutex_);
  return {executions_.load(), probes_.load(), probe_cpu_ms_};
}

// ---------------------------------------------------------------------------
// Profiles on disk

std::string serialize_profile(const ExecutionProfile& p) {
  std::ostringstream out;
  out << "cpu_time_ms=" << format_double(p.cpu_time_ms) << " scanned_bytes=" << format_double(p.scanned_bytes)
      << " joins=" << p.structural.joins << " aggregates=" << p.structural.aggregates
      << " sorts=" << p.structural.sorts << " tables=" << p.structural.tables << "\n";
  for (const auto& op : p.per_operator) {
    out << "op node=" << op.node << " kind=" << to_string(op.kind) << " inputs=";
    for (size_t i = 0; i < op.input_cardinalities.size(); ++i) {
      if (i) out << ',';
      out << op.input_cardinalities[i];
    }
    out << " output=" << op.output_cardinality << " cpu_time_ms=" << format_double(op.cpu_time_ms) << "\n";
  }
  return out.str();
}

ExecutionProfile parse_profile(std::string_view text) {
  try {
    ExecutionProfile p;
    bool header = false;
    for (const auto& raw : split(text, '\n')) {
      auto line = trim(raw);
      if (line.empty()) continue;
      if (starts_with(line, "op ")) {
        auto kv = parse_key_values(line.substr(3));
        OperatorProfile op;
        op.node = static_cast<NodeId>(parse_int(kv.require("node")));
        op.kind = operator_kind_from_string(kv.require("kind"));
        const auto inputs = kv.require("inputs");
        if (!inputs.empty()) {
          for (const auto& v : split(inputs, ',')) op.input_cardinalities.push_back(parse_int(v));
        }
        op.output_cardinality = parse_int(kv.require("output"));
        op.cpu_time_ms = parse_double(kv.require("cpu_time_ms"));
        p.per_operator.push_back(std::move(op));
        continue;
      }
      auto kv = parse_key_values(line);
      p.cpu_time_ms = parse_double(kv.require("cpu_time_ms"));
      p.scanned_bytes = parse_double(kv.require("scanned_bytes"));
      p.structural.joins = static_cast<int>(parse_int(kv.require("joins")));
      p.structural.aggregates = static_cast<int>(parse_int(kv.require("aggregates")));
      p.structural.sorts = static_cast<int>(parse_int(kv.require("sorts")));
      p.structural.tables = static_cast<int>(parse_int(kv.require("tables")));
      header = true;
    }
    if (!header) throw ParseError("profile has no metrics line");
    if (p.cpu_time_ms < 0 || p.scanned_bytes < 0) throw ParseError("negative metric in profile");
    return p;
  } catch (const ParseError& e) {
    throw AdapterError(AdapterError::Kind::Parse, std::string("malformed remote profile: ") + e.what());
  }
}

MockAdapter::MockAdapter(std::string dir, Recorder recorder) : dir_(std::move(dir)), recorder_(std::move(recorder)) {}

ExecutionProfile MockAdapter::submit_sql(const std::string& sql) {
  QueryGraph g;
  try {
    g = parse_sql(sql);
  } catch (const std::exception& e) {
    throw AdapterError(AdapterError::Kind::Parse, std::string("mock engine rejected SQL: ") + e.what());
  }
  const auto path = (std::filesystem::path(dir_) / (to_hex(graph_hash(g, false)) + ".profile")).string();
  std::lock_guard lock(mutex_);
  ++submissions_;
  if (!std::filesystem::exists(path)) {
    if (!recorder_) throw AdapterError(AdapterError::Kind::NotFound, "no canned profile at " + path);
    auto profile = recorder_(sql);
    std::filesystem::create_directories(dir_);
    write_file(path, serialize_profile(profile));
    return profile;
  }
  const auto text = read_file(path);
  const auto first = trim(split(text, '\n').front());
  if (starts_with(first, "error=")) {
    const auto what = first.substr(6);
    if (what == "timeout") throw AdapterError(AdapterError::Kind::Timeout, "query timed out");
    if (what == "connection") throw AdapterError(AdapterError::Kind::Connection, "connection lost");
    if (what == "auth") throw AdapterError(AdapterError::Kind::Auth, "authentication failed");
    throw AdapterError(AdapterError::Kind::Parse, "unknown canned error '" + std::string(what) + "'");
  }
  return parse_profile(text);
}

AdapterBackend::AdapterBackend(std::shared_ptr<EngineAdapter> adapter, std::shared_ptr<ExecutionBackend> prober)
    : adapter_(std::move(adapter)), prober_(std::move(prober)) {
  if (!adapter_ || !prober_) throw ValidationError("adapter backend needs an adapter and a prober");
}

ExecutionProfile AdapterBackend::execute(const QueryGraph& g) {
  executions_.fetch_add(1, std::memory_order_relaxed);
  return adapter_->submit_sql(to_sql(g));
}

CardinalityEstimate AdapterBackend::probe_cardinalities(const QueryGraph& g) {
  return prober_->probe_cardinalities(g);
}

BackendMeter AdapterBackend::meter() const {
  auto m = prober_->meter();
  m.executions = executions_.load();
  return m;
}

}  // namespace tracesynth
