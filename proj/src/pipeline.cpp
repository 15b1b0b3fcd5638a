#include "tracesynth/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "tracesynth/translator.hpp"

namespace tracesynth {

// ---------------------------------------------------------------------------
// Config

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError("expected true/false, got '" + v + "'");
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  try {
    auto i = [&] { return static_cast<int>(parse_int(value)); };
    auto d = [&] { return parse_double(value); };
    if (key == "n_rand") search.n_rand = i();
    else if (key == "n_calls") search.n_calls = i();
    else if (key == "n_rand_stage2") search.n_rand_stage2 = i();
    else if (key == "window_low") search.window_low = d();
    else if (key == "window_high") search.window_high = d();
    else if (key == "shrink") search.shrink = d();
    else if (key == "bucket_cap") search.bucket_cap = i();
    else if (key == "seed") search.seed = static_cast<uint64_t>(parse_int(value));
    else if (key == "max_executions") search.max_executions = i();
    else if (key == "always_execute") search.always_execute = parse_bool(value);
    else if (key == "stop_qerror") search.stop_qerror = d();
    else if (key == "tolerance_cpu") tolerance_cpu = d();
    else if (key == "tolerance_bytes") tolerance_bytes = d();
    else if (key == "weight_cpu") weight_cpu = d();
    else if (key == "weight_bytes") weight_bytes = d();
    else if (key == "eta") eta = d();
    else if (key == "tau") tau = d();
    else if (key == "max_dims") max_dims = i();
    else if (key == "compensation_cap") compensation.max_applications = parse_int(value);
    else if (key == "compensation_headroom") compensation.headroom = d();
    else if (key == "parallelism") parallelism = i();
    else if (key == "backend") backend = value;
    else if (key == "mock_dir") mock_dir = value;
    else if (key == "mock_record") mock_record = parse_bool(value);
    else if (key == "use_pool") use_pool = parse_bool(value);
    else if (key == "report_latency") report_latency = parse_bool(value);
    else throw ParseError("unknown config key '" + key + "'");
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("bad value for " + key + ": " + e.what());
  }
}

void PipelineConfig::validate() const {
  search.validate();
  TargetProfile t;
  t.tolerance_cpu = tolerance_cpu;
  t.tolerance_bytes = tolerance_bytes;
  t.weight_cpu = weight_cpu;
  t.weight_bytes = weight_bytes;
  t.eta = eta;
  t.validate();
  if (tau < 0) throw ValidationError("tau must be non-negative");
  if (max_dims < 0) throw ValidationError("max_dims must be non-negative");
  if (compensation.max_applications < 0 || !(compensation.headroom > 0)) {
    throw ValidationError("compensation settings out of range");
  }
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (backend != "simulated" && backend != "mock-adapter") throw ValidationError("unknown backend '" + backend + "'");
  if (backend == "mock-adapter" && mock_dir.empty()) throw ValidationError("mock-adapter needs mock_dir");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("config line without '=': " + std::string(line));
    c.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return c;
}

PipelineConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string serialize_config(const PipelineConfig& c) {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "n_rand=" << c.search.n_rand << "\nn_calls=" << c.search.n_calls << "\nn_rand_stage2=" << c.search.n_rand_stage2
    << "\nwindow_low=" << format_double(c.search.window_low) << "\nwindow_high=" << format_double(c.search.window_high)
    << "\nshrink=" << format_double(c.search.shrink) << "\nbucket_cap=" << c.search.bucket_cap
    << "\nseed=" << c.search.seed << "\nmax_executions=" << c.search.max_executions
    << "\nalways_execute=" << b(c.search.always_execute) << "\nstop_qerror=" << format_double(c.search.stop_qerror) << "\ntolerance_cpu=" << format_double(c.tolerance_cpu)
    << "\ntolerance_bytes=" << format_double(c.tolerance_bytes) << "\nweight_cpu=" << format_double(c.weight_cpu)
    << "\nweight_bytes=" << format_double(c.weight_bytes) << "\neta=" << format_double(c.eta)
    << "\ntau=" << format_double(c.tau) << "\nmax_dims=" << c.max_dims
    << "\ncompensation_cap=" << c.compensation.max_applications
    << "\ncompensation_headroom=" << format_double(c.compensation.headroom) << "\nparallelism=" << c.parallelism
    << "\nbackend=" << c.backend << "\nmock_dir=" << c.mock_dir << "\nmock_record=" << b(c.mock_record)
    << "\nuse_pool=" << b(c.use_pool) << "\nreport_latency=" << b(c.report_latency) << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Report

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

ReportSummary summarize(const Report& report) {
  ReportSummary s;
  s.records = report.rows.size();
  std::vector<double> cpu, bytes;
  double ej = 0, ea = 0, es = 0;
  size_t nj = 0, na = 0, ns = 0;
  auto err = [&](const std::optional<int>& target, int achieved, double& sum, size_t& n) {
    if (!target) return;
    const int a = report.presence_mode ? (achieved > 0 ? 1 : 0) : achieved;
    sum += std::abs(a - *target);
    ++n;
  };
  for (const auto& r : report.rows) {
    s.reuse[std::string(to_string(r.reuse))]++;
    s.executions += r.executions;
    s.max_executions = std::max(s.max_executions, r.executions);
    if (r.failed) {
      ++s.failed;
      continue;
    }
    cpu.push_back(r.qerror_cpu);
    bytes.push_back(r.qerror_bytes);
    err(r.target_joins, r.achieved_joins, ej, nj);
    err(r.target_aggs, r.achieved_aggs, ea, na);
    err(r.target_sorts, r.achieved_sorts, es, ns);
  }
  s.cpu_p50 = percentile(cpu, 50);
  s.cpu_p90 = percentile(cpu, 90);
  s.cpu_p99 = percentile(cpu, 99);
  s.bytes_p50 = percentile(bytes, 50);
  s.bytes_p90 = percentile(bytes, 90);
  s.bytes_p99 = percentile(bytes, 99);
  s.mae_joins = nj ? ej / static_cast<double>(nj) : 0;
  s.mae_aggs = na ? ea / static_cast<double>(na) : 0;
  s.mae_sorts = ns ? es / static_cast<double>(ns) : 0;
  return s;
}

namespace {

const char* kReportHeader =
    "record_id,reuse,target_cpu_ms,achieved_cpu_ms,target_bytes,achieved_bytes,qerror_cpu,qerror_bytes,"
    "target_joins,achieved_joins,target_aggs,achieved_aggs,target_sorts,achieved_sorts,executions,evaluations,"
    "phase1_calls,flags,latency_ms";

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == ';') c = ' ';
  }
  return s;
}

}  // namespace

std::string serialize_report(const Report& report) {
  std::ostringstream o;
  if (report.presence_mode) o << "# mode=presence\n";
  o << kReportHeader << "\n";
  for (const auto& r : report.rows) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    o << r.record_id << ',' << to_string(r.reuse) << ',' << format_double(r.target_cpu) << ',';
    if (r.failed) {
      o << ',' << format_double(r.target_bytes) << ",,,,";
    } else {
      o << format_double(r.achieved_cpu) << ',' << format_double(r.target_bytes) << ','
        << format_double(r.achieved_bytes) << ',' << format_double(r.qerror_cpu) << ','
        << format_double(r.qerror_bytes) << ',';
    }
    o << opt_int(r.target_joins) << ',' << (r.failed ? "" : std::to_string(r.achieved_joins)) << ','
      << opt_int(r.target_aggs) << ',' << (r.failed ? "" : std::to_string(r.achieved_aggs)) << ','
      << opt_int(r.target_sorts) << ',' << (r.failed ? "" : std::to_string(r.achieved_sorts)) << ','
      << r.executions << ',' << r.evaluations << ',' << r.phase1_calls << ',' << flags << ',';
    if (r.latency_ms) o << std::fixed << std::setprecision(3) << *r.latency_ms << std::defaultfloat;
    o << "\n";
  }
  o << format_summary(summarize(report));
  return o.str();
}

std::string format_summary(const ReportSummary& s) {
  std::ostringstream o;
  o << "# summary records=" << s.records << " failed=" << s.failed << "\n";
  o << "# qerror_cpu p50=" << format_double(s.cpu_p50) << " p90=" << format_double(s.cpu_p90)
    << " p99=" << format_double(s.cpu_p99) << "\n";
  o << "# qerror_bytes p50=" << format_double(s.bytes_p50) << " p90=" << format_double(s.bytes_p90)
    << " p99=" << format_double(s.bytes_p99) << "\n";
  o << "# mae joins=" << format_double(s.mae_joins) << " aggs=" << format_double(s.mae_aggs)
    << " sorts=" << format_double(s.mae_sorts) << "\n";
  o << "# reuse";
  for (const auto* k : {"exact", "template", "proxy", "miss"}) {
    auto it = s.reuse.find(k);
    o << ' ' << k << '=' << (it == s.reuse.end() ? 0 : it->second);
  }
  o << "\n# executions total=" << s.executions << " max_per_record=" << s.max_executions << "\n";
  return o.str();
}

Report parse_report(std::string_view text) {
  Report rep;
  bool header = false;
  size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line_no == 1 && line.find("mode=presence") != std::string_view::npos) rep.presence_mode = true;
      continue;
    }
    if (!header) {
      if (line != kReportHeader) throw ParseError("unexpected report header");
      header = true;
      continue;
    }
    const auto c = split(line, ',');
    if (c.size() != 19) throw ParseError("report line " + std::to_string(line_no) + " has wrong cell count");
    RecordResult r;
    r.record_id = c[0];
    const std::string reuse = c[1];
    r.reuse = reuse == "exact" ? ReuseKind::Exact : reuse == "template" ? ReuseKind::Template
              : reuse == "proxy" ? ReuseKind::Proxy : ReuseKind::Miss;
    auto opt = [](const std::string& v) -> std::optional<int> {
      if (v.empty()) return std::nullopt;
      return static_cast<int>(parse_int(v));
    };
    r.target_cpu = parse_double(c[2]);
    r.target_bytes = parse_double(c[4]);
    r.failed = c[3].empty();
    if (!r.failed) {
      r.achieved_cpu = parse_double(c[3]);
      r.achieved_bytes = parse_double(c[5]);
      r.qerror_cpu = parse_double(c[6]);
      r.qerror_bytes = parse_double(c[7]);
      r.achieved_joins = static_cast<int>(parse_int(c[9]));
      r.achieved_aggs = static_cast<int>(parse_int(c[11]));
      r.achieved_sorts = static_cast<int>(parse_int(c[13]));
    }
    r.target_joins = opt(c[8]);
    r.target_aggs = opt(c[10]);
    r.target_sorts = opt(c[12]);
    r.executions = parse_int(c[14]);
    r.evaluations = parse_int(c[15]);
    r.phase1_calls = parse_int(c[16]);
    if (!c[17].empty()) r.flags = split(c[17], ';');
    if (!c[18].empty()) r.latency_ms = parse_double(c[18]);
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

QueryGraph normalized(const QueryGraph& g) { return parse_graph(canonical_form(g, false)); }

StructuralProfile with_join_count(const StructuralProfile& s, int joins) {
  StructuralProfile out = s;
  for (auto& c : out.constraints) {
    if (c.kind == OperatorKind::Join) c = {OperatorKind::Join, ConstraintMode::ExactCount, joins, 0};
  }
  return out;
}

struct Work {
  RecordResult result;
  std::optional<PoolEntry> entry;
};

class RecordSynthesizer {
 public:
  RecordSynthesizer(const Catalog& catalog, ExecutionBackend& backend, const LocalModel& model,
                    const PipelineConfig& config, QueryPool* pool, BoundingCache* cache)
      : catalog_(catalog), backend_(backend), model_(model), config_(config), pool_(pool), cache_(cache) {}

  Work run(const TraceRecord& input) const {
    const auto start = std::chrono::steady_clock::now();
    Work w;
    auto& r = w.result;
    TraceRecord rec = input;
    rec.targets.tolerance_cpu = config_.tolerance_cpu;
    rec.targets.tolerance_bytes = config_.tolerance_bytes;
    rec.targets.weight_cpu = config_.weight_cpu;
    rec.targets.weight_bytes = config_.weight_bytes;
    rec.targets.eta = config_.eta;
    r.record_id = rec.record_id;
    r.target_cpu = rec.targets.cpu_time_ms;
    r.target_bytes = rec.targets.scanned_bytes;
    auto target = [&](OperatorKind k) -> std::optional<int> {
      const auto* c = rec.structure.find(k);
      return c ? std::optional<int>(c->value) : std::nullopt;
    };
    r.target_joins = target(OperatorKind::Join);
    r.target_aggs = target(OperatorKind::Aggregate);
    r.target_sorts = target(OperatorKind::Sort);

    try {
      const LookupResult hit = pool_ ? pool_->lookup(rec) : LookupResult{};
      r.reuse = hit.kind;
      QueryGraph final_graph;
      ExecutionProfile profile;
      if (hit.kind == ReuseKind::Exact) {
        final_graph = hit.entry->graph;
        profile = backend_.execute(final_graph);
        r.executions = 1;
      } else {
        QueryGraph base = hit.kind == ReuseKind::Miss ? phase_one(rec, r) : strip_filters(hit.entry->graph);
        PredicateSpace space;
        try {
          space = select_predicate_columns(base, catalog_, config_.max_dims);
        } catch (const ValidationError&) {
          r.flags.push_back("no_tunable_predicates");
        }
        SearchContext ctx{&base, &catalog_, rec.targets.cpu_time_ms, &model_, &backend_, config_.search};
        ctx.config.seed = config_.search.seed ^ fnv1a64(rec.record_id);
        PredicateTuner tuner(ctx, space);
        auto tuned = tuner.tune();
        final_graph = normalized(tuned.graph);
        profile = std::move(tuned.profile);
        r.executions = tuned.executions;
        r.evaluations = tuned.evaluations;
      }
      final_graph = normalized(final_graph);
      r.sql = to_sql(final_graph);
      r.exact_hash = graph_hash(final_graph, false);
      r.achieved_cpu = profile.cpu_time_ms;
      r.achieved_bytes = profile.scanned_bytes;
      r.qerror_cpu = qerror(profile.cpu_time_ms, rec.targets.cpu_time_ms, rec.targets.eta);
      r.qerror_bytes = qerror(profile.scanned_bytes, rec.targets.scanned_bytes, rec.targets.eta);
      const auto counts = structural_counts(final_graph);
      r.achieved_joins = counts.joins;
      r.achieved_aggs = counts.aggregates;
      r.achieved_sorts = counts.sorts;
      if (r.qerror_cpu > 1 + rec.targets.tolerance_cpu) r.flags.push_back("cpu_out_of_tolerance");
      if (r.qerror_bytes > 1 + rec.targets.tolerance_bytes) r.flags.push_back("bytes_out_of_tolerance");
      if (!rec.structure.satisfied_by(counts)) r.flags.push_back("structure_mismatch");

      PoolEntry e;
      e.exact_hash = r.exact_hash;
      e.param_hash = graph_hash(final_graph, true);
      e.graph = std::move(final_graph);
      e.profile = std::move(profile);
      e.record_id = rec.record_id;
      e.mismatch = compute_mismatch(e.profile, rec.targets);
      w.entry = std::move(e);
    } catch (const std::exception& ex) {
      r.failed = true;
      r.error = ex.what();
      r.flags.push_back("failed:" + sanitize(ex.what()));
    }
    if (config_.report_latency) {
      r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    return w;
  }

 private:
  QueryGraph phase_one(const TraceRecord& rec, RecordResult& r) const {
    StructuralProfile structure = rec.structure;
    std::vector<BoundedBaseGraph> candidates;
    try {
      candidates = choose_base_graphs(catalog_, structure, rec.targets.scanned_bytes, cache_, &r.phase1_calls);
    } catch (const InfeasibleError& e) {
      if (e.reason() != "no_connected_set") throw;
      r.flags.push_back("no_connected_set");
      int k = std::min<int>(required_table_count(structure), static_cast<int>(catalog_.tables.size()));
      while (k > 1 && connected_table_subsets(catalog_, k).empty()) --k;
      structure = with_join_count(structure, k - 1);
      candidates = choose_base_graphs(catalog_, structure, rec.targets.scanned_bytes, cache_, &r.phase1_calls);
    }
    const auto& best = candidates.front();
    for (const auto& f : best.flags) r.flags.push_back(f);
    const QueryGraph shaped = inject_structure(best.graph, structure, catalog_);
    auto comp = feasibility_and_compensation(shaped, rec.targets.cpu_time_ms, model_, backend_, catalog_,
                                             config_.compensation);
    for (const auto& f : comp.flags) r.flags.push_back(f);
    return comp.graph;
  }

  const Catalog& catalog_;
  ExecutionBackend& backend_;
  const LocalModel& model_;
  const PipelineConfig& config_;
  QueryPool* pool_;
  BoundingCache* cache_;
};

}  // namespace

SynthesisOutput synthesize_workload(const std::vector<TraceRecord>& trace, const Catalog& catalog,
                                    ExecutionBackend& backend, const LocalModel& model, const PipelineConfig& config,
                                    QueryPool* pool, BoundingCache* cache) {
  config.validate();
  std::unique_ptr<QueryPool> own_pool;
  if (config.use_pool && !pool) {
    own_pool = std::make_unique<QueryPool>(config.tau);
    pool = own_pool.get();
  }
  if (!config.use_pool) pool = nullptr;
  BoundingCache own_cache;
  if (!cache) cache = &own_cache;

  const size_t n = trace.size();
  // A record may start once every earlier record sharing one of its vendor
  // tokens has committed; token-free records (proxy path) wait for all.
  std::vector<size_t> ready_after(n, 0);
  std::map<std::string, size_t> last_seen;
  for (size_t i = 0; i < n; ++i) {
    const auto& r = trace[i];
    if (!r.query_hash && !r.param_hash) {
      ready_after[i] = i;
    } else {
      for (const auto& token : {r.query_hash ? "q:" + *r.query_hash : "", r.param_hash ? "p:" + *r.param_hash : ""}) {
        if (token.empty()) continue;
        if (auto it = last_seen.find(token); it != last_seen.end()) ready_after[i] = std::max(ready_after[i], it->second + 1);
        last_seen[token] = i;
      }
    }
  }

  RecordSynthesizer synth(catalog, backend, model, config, pool, cache);
  std::vector<RecordResult> rows(n);
  std::mutex mutex;
  std::condition_variable cv;
  size_t committed = 0;
  size_t next = 0;

  auto worker = [&] {
    while (true) {
      size_t i;
      {
        std::unique_lock lock(mutex);
        if (next >= n) return;
        i = next++;
        cv.wait(lock, [&] { return committed >= ready_after[i]; });
      }
      Work w = synth.run(trace[i]);
      std::unique_lock lock(mutex);
      cv.wait(lock, [&] { return committed == i; });
      if (pool && w.entry) {
        pool->bind(trace[i], w.entry->exact_hash, w.entry->param_hash);
        pool->insert(std::move(*w.entry));
      }
      rows[i] = std::move(w.result);
      ++committed;
      cv.notify_all();
    }
  };
  const int threads = std::min<int>(config.parallelism, static_cast<int>(std::max<size_t>(n, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool_threads;
    for (int t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
    for (auto& t : pool_threads) t.join();
  }

  SynthesisOutput out;
  out.report.presence_mode = !trace.empty() && !trace.front().structure.constraints.empty() &&
                             trace.front().structure.constraints.front().mode == ConstraintMode::Presence;
  std::ostringstream workload;
  for (auto& r : rows) {
    if (r.failed) {
      workload << "-- record_id=" << r.record_id << " failed: " << sanitize(r.error) << "\n";
    } else {
      workload << "-- record_id=" << r.record_id << " hash=" << to_hex(r.exact_hash) << "\n" << r.sql << ";\n";
    }
    out.report.rows.push_back(std::move(r));
  }
  out.workload = workload.str();
  return out;
}

}  // namespace tracesynth
