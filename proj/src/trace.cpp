#include "tracesynth/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace tracesynth {

void TargetProfile::validate() const {
  if (cpu_time_ms < 0 || scanned_bytes < 0) throw ValidationError("targets must be non-negative");
  if (tolerance_cpu < 0 || tolerance_bytes < 0) throw ValidationError("tolerances must be non-negative");
  if (weight_cpu < 0 || weight_bytes < 0 || (weight_cpu == 0 && weight_bytes == 0)) {
    throw ValidationError("weights must be non-negative and not all zero");
  }
  if (!(eta > 0)) throw ValidationError("eta must be positive");
}

const StructuralConstraint* StructuralProfile::find(OperatorKind kind) const {
  for (const auto& c : constraints) {
    if (c.kind == kind) return &c;
  }
  return nullptr;
}

bool StructuralProfile::satisfied_by(const StructuralCounts& counts) const {
  for (const auto& c : constraints) {
    const int actual = c.kind == OperatorKind::Join        ? counts.joins
                       : c.kind == OperatorKind::Aggregate ? counts.aggregates
                                                           : counts.sorts;
    if (c.mode == ConstraintMode::Presence) {
      if ((actual > 0) != (c.value != 0)) return false;
    } else if (std::abs(actual - c.value) > c.tolerance) {
      return false;
    }
  }
  return true;
}

void StructuralProfile::validate() const {
  std::set<OperatorKind> seen;
  for (const auto& c : constraints) {
    if (c.kind != OperatorKind::Join && c.kind != OperatorKind::Aggregate && c.kind != OperatorKind::Sort) {
      throw ValidationError("constraints apply to join, aggregate and sort only");
    }
    if (!seen.insert(c.kind).second) throw ValidationError("duplicate constraint for one operator kind");
    if (c.value < 0 || c.tolerance < 0) throw ValidationError("constraint values must be non-negative");
    if (c.mode == ConstraintMode::Presence && c.value > 1) throw ValidationError("presence values are 0 or 1");
  }
}

// ---------------------------------------------------------------------------
// Trace file

namespace {

const std::vector<std::string> kColumns = {"record_id",  "timestamp_ms", "cpu_time_ms", "scanned_bytes", "num_joins",
                                           "num_aggs",   "num_sorts",    "query_hash",  "param_hash"};
const std::vector<std::pair<std::string, OperatorKind>> kCountColumns = {
    {"num_joins", OperatorKind::Join}, {"num_aggs", OperatorKind::Aggregate}, {"num_sorts", OperatorKind::Sort}};

}  // namespace

std::vector<TraceRecord> parse_trace(std::string_view text) {
  std::vector<TraceRecord> out;
  bool presence = false;
  std::map<std::string, size_t> header;
  std::set<std::string> ids;
  size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line_no == 1 && line.find("mode=presence") != std::string_view::npos) presence = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (header.empty()) {
      for (size_t i = 0; i < cells.size(); ++i) header[std::string(trim(cells[i]))] = i;
      for (const auto* required : {"record_id", "timestamp_ms", "cpu_time_ms", "scanned_bytes"}) {
        if (!header.count(required)) throw ParseError(std::string("trace header lacks ") + required);
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw ParseError("trace line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " cells");
    }
    auto cell = [&](const std::string& name) -> std::optional<std::string> {
      auto it = header.find(name);
      if (it == header.end()) return std::nullopt;
      std::string v(trim(cells[it->second]));
      if (v.empty()) return std::nullopt;
      return v;
    };
    try {
      TraceRecord r;
      r.record_id = cell("record_id").value_or("");
      if (r.record_id.empty()) throw ParseError("empty record_id");
      if (!ids.insert(r.record_id).second) throw ParseError("duplicate record_id " + r.record_id);
      r.timestamp_ms = parse_int(cell("timestamp_ms").value_or(""));
      r.targets.cpu_time_ms = parse_double(cell("cpu_time_ms").value_or(""));
      r.targets.scanned_bytes = parse_double(cell("scanned_bytes").value_or(""));
      if (r.targets.cpu_time_ms < 0 || r.targets.scanned_bytes < 0 || !std::isfinite(r.targets.cpu_time_ms) ||
          !std::isfinite(r.targets.scanned_bytes)) {
        throw ParseError("negative or non-finite target");
      }
      for (const auto& [name, kind] : kCountColumns) {
        auto v = cell(name);
        if (!v) continue;
        StructuralConstraint c;
        c.kind = kind;
        c.mode = presence ? ConstraintMode::Presence : ConstraintMode::ExactCount;
        c.value = static_cast<int>(parse_int(*v));
        if (c.value < 0 || (presence && c.value > 1)) throw ParseError("bad " + name + " value " + *v);
        r.structure.constraints.push_back(c);
      }
      r.query_hash = cell("query_hash");
      r.param_hash = cell("param_hash");
      if (!out.empty() && r.timestamp_ms < out.back().timestamp_ms) {
        throw ParseError("timestamps decrease at record " + r.record_id);
      }
      out.push_back(std::move(r));
    } catch (const ParseError& e) {
      throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TraceRecord> load_trace(const std::string& path) { return parse_trace(read_file(path)); }

std::string serialize_trace(const std::vector<TraceRecord>& records) {
  std::ostringstream out;
  const bool presence = !records.empty() && !records.front().structure.constraints.empty() &&
                        records.front().structure.constraints.front().mode == ConstraintMode::Presence;
  if (presence) out << "# mode=presence\n";
  for (size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << "\n";
  for (const auto& r : records) {
    out << r.record_id << ',' << r.timestamp_ms << ',' << format_double(r.targets.cpu_time_ms) << ','
        << format_double(r.targets.scanned_bytes);
    for (const auto& [name, kind] : kCountColumns) {
      out << ',';
      if (const auto* c = r.structure.find(kind)) out << c->value;
    }
    out << ',' << r.query_hash.value_or("") << ',' << r.param_hash.value_or("") << "\n";
  }
  return out.str();
}

double compute_mismatch(const ExecutionProfile& profile, const TargetProfile& t) {
  double score = 0;
  if (t.weight_cpu > 0) {
    score += t.weight_cpu * std::abs(profile.cpu_time_ms - t.cpu_time_ms) / std::max(t.cpu_time_ms, t.eta);
  }
  if (t.weight_bytes > 0) {
    score += t.weight_bytes * std::abs(profile.scanned_bytes - t.scanned_bytes) / std::max(t.scanned_bytes, t.eta);
  }
  return score;
}

double qerror(double measured, double target, double eta) {
  const double m = std::max(measured, eta);
  const double t = std::max(target, eta);
  return std::max(m / t, t / m);
}

// ---------------------------------------------------------------------------
// Synthetic traces

namespace {

std::string vendor_token(uint64_t hash, const std::string& salt) {
  return to_hex(fnv1a64(salt + ":" + to_hex(hash)));
}

bool has_filter(const QueryGraph& g) {
  return std::any_of(g.nodes.begin(), g.nodes.end(),
                     [](const OperatorNode& n) { return n.kind() == OperatorKind::Filter; });
}

/// Same template, literals redrawn from each column's domain.
QueryGraph redraw_literals(const QueryGraph& g, const Catalog& catalog, std::mt19937_64& rng) {
  QueryGraph out = g;
  for (auto& n : out.nodes) {
    if (n.kind() != OperatorKind::Filter) continue;
    for (auto& p : n.as<FilterAttrs>().predicates) {
      const auto& s = catalog.column(p.column);
      const double lo = *s.min_value - value_step(s.value_kind);
      p.literal.value =
          quantize_value(s.value_kind, std::uniform_real_distribution<double>(lo, *s.max_value)(rng));
    }
  }
  return out;
}

}  // namespace

SyntheticTrace gen_synthetic_trace(const Catalog& catalog, ExecutionBackend& backend, const SyntheticTraceSpec& spec) {
  if (spec.n < 0) throw ValidationError("n must be non-negative");
  if (spec.dup < 0 || spec.param_dup < 0 || spec.dup + spec.param_dup > 1) {
    throw ValidationError("dup and param_dup must be fractions summing to at most 1");
  }
  std::mt19937_64 rng(spec.seed);
  const std::string salt = "v" + std::to_string(spec.seed);
  const int n = spec.n;
  const int n_dup = static_cast<int>(std::lround(spec.dup * n));
  const int n_param = static_cast<int>(std::lround(spec.param_dup * n));

  // Role per position: 0 fresh, 1 exact repeat, 2 template repeat. Position 0 is always fresh.
  std::vector<int> role(static_cast<size_t>(n), 0);
  if (n > 1) {
    std::vector<int> positions(static_cast<size_t>(n - 1));
    for (int i = 1; i < n; ++i) positions[static_cast<size_t>(i - 1)] = i;
    std::shuffle(positions.begin(), positions.end(), rng);
    for (int i = 0; i < std::min(n_dup, n - 1); ++i) role[static_cast<size_t>(positions[static_cast<size_t>(i)])] = 1;
    for (int i = n_dup; i < std::min(n_dup + n_param, n - 1); ++i) {
      role[static_cast<size_t>(positions[static_cast<size_t>(i)])] = 2;
    }
  }

  SyntheticTrace out;
  std::set<uint64_t> exact_seen, param_seen;
  std::vector<size_t> templated;  // indices of earlier records whose graph has filters
  int64_t ts = 1700000000000;
  uint64_t sample_seed = spec.seed * 1000003ULL;

  for (int i = 0; i < n; ++i) {
    QueryGraph g;
    int r = role[static_cast<size_t>(i)];
    if (r == 2 && templated.empty()) r = 1;
    if (r == 1 && out.answer_key.empty()) r = 0;
    if (r == 1) {
      g = out.answer_key[std::uniform_int_distribution<size_t>(0, out.answer_key.size() - 1)(rng)].graph;
    } else if (r == 2) {
      const auto& base = out.answer_key[templated[std::uniform_int_distribution<size_t>(0, templated.size() - 1)(rng)]].graph;
      bool found = false;
      for (int attempt = 0; attempt < 50 && !found; ++attempt) {
        g = redraw_literals(base, catalog, rng);
        found = !exact_seen.count(graph_hash(g, false));
      }
      if (!found) g = base;  // tiny domains: degrade to an exact repeat
    } else {
      for (int attempt = 0;; ++attempt) {
        g = sample_random_graph(catalog, spec.bounds, sample_seed++);
        if (!param_seen.count(graph_hash(g, true))) break;
        if (attempt > 1000) throw ValidationError("catalog too small for distinct synthetic queries");
      }
    }
    const uint64_t exact = graph_hash(g, false);
    const uint64_t param = graph_hash(g, true);
    exact_seen.insert(exact);
    param_seen.insert(param);

    const auto profile = backend.execute(g);
    TraceRecord rec;
    rec.record_id = "r" + std::to_string(i + 1);
    ts += std::uniform_int_distribution<int64_t>(0, 5000)(rng);
    rec.timestamp_ms = ts;
    rec.targets.cpu_time_ms = profile.cpu_time_ms;
    rec.targets.scanned_bytes = profile.scanned_bytes;
    const auto& c = profile.structural;
    auto mk = [&](OperatorKind kind, int count) {
      return spec.presence_mode ? StructuralConstraint{kind, ConstraintMode::Presence, count > 0 ? 1 : 0, 0}
                                : StructuralConstraint{kind, ConstraintMode::ExactCount, count, 0};
    };
    rec.structure.constraints = {mk(OperatorKind::Join, c.joins), mk(OperatorKind::Aggregate, c.aggregates),
                                 mk(OperatorKind::Sort, c.sorts)};
    if (spec.with_hashes) {
      rec.query_hash = vendor_token(exact, salt);
      rec.param_hash = vendor_token(param, salt + "p");
    }
    if (has_filter(g)) templated.push_back(out.answer_key.size());
    out.records.push_back(std::move(rec));
    out.answer_key.push_back({out.records.back().record_id, std::move(g)});
  }
  return out;
}

std::string serialize_answer_key(const std::vector<AnswerKeyEntry>& key) {
  std::string out;
  for (const auto& e : key) out += "record " + e.record_id + "\n" + canonical_form(e.graph, false);
  return out;
}

std::vector<AnswerKeyEntry> parse_answer_key(std::string_view text) {
  std::vector<AnswerKeyEntry> out;
  std::string id, body;
  auto flush = [&] {
    if (!id.empty()) out.push_back({id, parse_graph(body)});
    body.clear();
  };
  for (const auto& line : split(text, '\n')) {
    if (starts_with(line, "record ")) {
      flush();
      id = std::string(trim(line.substr(7)));
    } else {
      body += line + "\n";
    }
  }
  flush();
  return out;
}

}  // namespace tracesynth
