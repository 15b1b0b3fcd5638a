// Acceptance harness: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "tracesynth/pipeline.hpp"

using namespace tracesynth;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) { return percentile(std::move(v), 50); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Chain-shaped catalog with random widths; at most 12 columns in total.
Catalog random_catalog(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_tables(1, 3), n_cols(1, 4), bytes(1, 48), rows(1, 5000);
  Catalog c;
  c.dataset_id = "random";
  const int nt = n_tables(rng);
  for (int t = 0; t < nt; ++t) {
    TableStats ts;
    ts.name = "t" + std::to_string(t);
    ts.row_count = rows(rng);
    const int nc = n_cols(rng);
    for (int k = 0; k < nc; ++k) {
      ColumnStats cs;
      cs.table = ts.name;
      cs.name = "c" + std::to_string(k);
      cs.bytes_per_value = bytes(rng);
      cs.scan_weight = cs.bytes_per_value * static_cast<double>(ts.row_count);
      cs.min_value = 0;
      cs.max_value = 100;
      cs.distinct_count = 100;
      ts.columns.push_back(cs);
    }
    c.join_graph.nodes.push_back(ts.name);
    c.tables.push_back(ts);
  }
  for (int t = 1; t < nt; ++t) {
    std::uniform_int_distribution<size_t> pa(0, c.tables[t - 1].columns.size() - 1), pb(0, c.tables[t].columns.size() - 1);
    c.join_graph.edges.push_back({{c.tables[t - 1].name, c.tables[t - 1].columns[pa(rng)].name},
                                  {c.tables[t].name, c.tables[t].columns[pb(rng)].name}});
  }
  return c;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int bad = 0, trials = 0;
  for (int i = 0; i < 200; ++i) {
    const auto cat = random_catalog(rng);
    std::vector<std::string> tables;
    double total = 0;
    std::vector<std::pair<std::string, std::string>> cols;
    for (const auto& t : cat.tables) {
      tables.push_back(t.name);
      for (const auto& c : t.columns) {
        total += c.scan_weight;
        cols.push_back({t.name, c.name});
      }
    }
    std::uniform_real_distribution<double> ydist(0, 1.2 * total);
    for (int rep = 0; rep < 5; ++rep, ++trials) {
      const double y = ydist(rng);
      const auto sel = greedy_column_selection(cat, tables, y);
      // Exhaustive search over column subsets that contain every join key.
      bool feasible = false;
      for (uint32_t mask = 0; mask < (1u << cols.size()) && !feasible; ++mask) {
        double s = 0;
        bool keys = true;
        for (size_t k = 0; k < cols.size(); ++k) {
          const ColumnRef ref{cols[k].first, cols[k].second};
          bool is_key = false;
          for (const auto& e : cat.join_graph.edges) is_key = is_key || e.a == ref || e.b == ref;
          if (mask & (1u << k)) {
            s += cat.column(ref).scan_weight;
          } else if (is_key) {
            keys = false;
          }
        }
        feasible = keys && s >= y;
      }
      bool ok = !(sel.under_target && feasible);
      for (const auto& e : cat.join_graph.edges) {
        for (const auto& ref : {e.a, e.b}) {
          const auto& chosen = sel.selected.at(ref.table);
          ok = ok && std::find(chosen.begin(), chosen.end(), ref.column) != chosen.end();
        }
      }
      if (!sel.under_target && sel.last_added_weight > 0) ok = ok && sel.scan_bytes - y <= sel.last_added_weight + 1e-9;
      if (!ok) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10, fmt("%d/%d oracle disagreements, %.2fs", bad, trials, secs)};
}

struct Suite {
  std::shared_ptr<const Dataset> dataset = std::make_shared<const Dataset>(gen_synthetic_catalog({4, 2000, 3}));
  LocalModel model;
  SyntheticTrace trace;
  Suite() {
    SimulatedBackend backend(dataset);
    FitOptions opts;
    opts.skip_sparse_kinds = true;
    model = fit(collect_profiles(dataset->catalog, backend, 200, 7), opts);
    SyntheticTraceSpec spec;
    spec.n = 50;
    spec.seed = 11;
    trace = gen_synthetic_trace(dataset->catalog, backend, spec);
  }
};

Outcome criterion2(const Suite& s, ReportSummary& out) {
  const auto t0 = Clock::now();
  SimulatedBackend backend(s.dataset);
  PipelineConfig cfg;
  out = summarize(synthesize_workload(s.trace.records, s.dataset->catalog, backend, s.model, cfg).report);
  const double secs = seconds_since(t0);
  const bool pass = out.failed == 0 && out.cpu_p50 <= 1.5 && out.cpu_p99 <= 5.0 && out.bytes_p50 <= 2.0 &&
                    out.mae_joins == 0 && out.mae_sorts == 0 && out.mae_aggs <= 0.1 && secs < 300;
  return {pass, fmt("cpu p50=%.3f p99=%.3f, bytes p50=%.3f, mae j/a/s=%.2f/%.2f/%.2f, %.1fs", out.cpu_p50, out.cpu_p99,
                    out.bytes_p50, out.mae_joins, out.mae_aggs, out.mae_sorts, secs)};
}

Outcome criterion3(const Suite& s, const ReportSummary& hybrid) {
  SimulatedBackend backend(s.dataset);
  PipelineConfig cfg;
  cfg.search.always_execute = true;
  cfg.search.max_executions = 0;
  const auto always = summarize(synthesize_workload(s.trace.records, s.dataset->catalog, backend, s.model, cfg).report);
  const double ratio = static_cast<double>(hybrid.executions) / static_cast<double>(std::max<int64_t>(always.executions, 1));
  const double degrade = hybrid.cpu_p50 - always.cpu_p50;
  return {ratio <= 0.5 && degrade <= 0.2,
          fmt("executions %lld vs %lld (%.1f%%), median q-error %.3f vs %.3f", static_cast<long long>(hybrid.executions),
              static_cast<long long>(always.executions), 100 * ratio, hybrid.cpu_p50, always.cpu_p50)};
}

Outcome criterion4(const Suite& s) {
  SimulatedBackend backend(s.dataset);
  std::vector<double> rel;
  for (uint64_t i = 0; i < 50; ++i) {
    const auto g = sample_random_graph(s.dataset->catalog, {2, 2, 2, 20, 0.6, 0.5}, 900000 + i);
    const auto p = backend.execute(g);
    if (p.cpu_time_ms <= 0) continue;
    rel.push_back(std::abs(predict_query(s.model, g, s.dataset->catalog, backend.probe_cardinalities(g)) - p.cpu_time_ms) /
                  p.cpu_time_ms);
  }
  const double med = median(rel);

  // Noiseless data drawn from each parametric form.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(1e-4, 1e-2), inter(0.5, 5), card(10, 1e5), small(1, 12);
  double worst = 0;
  const std::vector<std::pair<OperatorKind, ExprKind>> kinds = {
      {OperatorKind::Scan, ExprKind::Arith},       {OperatorKind::Filter, ExprKind::Arith},
      {OperatorKind::EvalScalar, ExprKind::Arith}, {OperatorKind::EvalScalar, ExprKind::String},
      {OperatorKind::EvalScalar, ExprKind::Date},  {OperatorKind::Sort, ExprKind::Arith},
      {OperatorKind::Join, ExprKind::Arith},       {OperatorKind::Aggregate, ExprKind::Arith}};
  for (const auto& [kind, expr] : kinds) {
    OperatorFeatures proto;
    proto.kind = kind;
    proto.expr = expr;
    const auto key = model_key(proto);
    std::vector<double> truth;
    for (size_t t = 0; t < term_names(key).size(); ++t) {
      const bool constant_term = term_values(key, proto).size() == t + 1 && key != "scan" && key != "join";
      truth.push_back(constant_term ? inter(rng) : coef(rng));
    }
    std::vector<ProfileSample> samples;
    for (int i = 0; i < 40; ++i) {
      OperatorFeatures f = proto;
      f.rows_in = card(rng);
      f.rows_out = card(rng);
      f.row_bytes = small(rng);
      f.predicates = std::round(small(rng));
      f.repeat = std::round(small(rng));
      f.width = std::round(small(rng));
      f.group_keys = std::round(small(rng));
      f.build = card(rng);
      f.probe = card(rng);
      f.tasks = 4;
      const auto x = term_values(key, f);
      double y = 0;
      for (size_t t = 0; t < x.size(); ++t) y += truth[t] * x[t];
      samples.push_back({f, y});
    }
    const auto fitted = fit(samples).kinds.at(key).coefficients;
    for (size_t t = 0; t < truth.size(); ++t) worst = std::max(worst, std::abs(fitted[t] - truth[t]) / truth[t]);
  }
  return {med <= 0.2 && worst <= 1e-6, fmt("held-out median rel. error %.2e, worst coefficient rel. error %.2e", med, worst)};
}

Outcome criterion5(const Suite& s) {
  SimulatedBackend backend(s.dataset);
  SyntheticTraceSpec spec;
  spec.n = 50;
  spec.seed = 5;
  spec.dup = 0.4;
  spec.param_dup = 0.2;
  const auto trace = gen_synthetic_trace(s.dataset->catalog, backend, spec);
  PipelineConfig cfg;
  const auto a = synthesize_workload(trace.records, s.dataset->catalog, backend, s.model, cfg);
  SimulatedBackend backend2(s.dataset);
  const auto b = synthesize_workload(trace.records, s.dataset->catalog, backend2, s.model, cfg);
  auto sum = summarize(a.report);
  const int expected = static_cast<int>(std::lround(spec.dup * spec.n));
  int64_t template_phase1 = 0;
  for (const auto& r : a.report.rows) {
    if (r.reuse == ReuseKind::Template) template_phase1 += r.phase1_calls;
  }
  const bool same = a.workload == b.workload && serialize_report(a.report) == serialize_report(b.report);
  return {sum.reuse["exact"] == expected && sum.reuse["template"] > 0 && template_phase1 == 0 && same,
          fmt("exact hits %zu (expected %d), template hits %zu with %lld Phase-I calls, deterministic=%s",
              sum.reuse["exact"], expected, sum.reuse["template"], static_cast<long long>(template_phase1),
              same ? "yes" : "no")};
}

Outcome criterion6(const Suite& s) {
  int failures = 0;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const auto g = sample_random_graph(s.dataset->catalog, {3, 2, 2, 20, 0.7, 0.5}, 70000 + seed);
    try {
      const auto back = parse_sql(to_sql(g));
      if (canonical_form(back, false) != canonical_form(g, false) || canonical_form(back, true) != canonical_form(g, true)) {
        ++failures;
      }
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return {failures == 0, fmt("%d/1000 round-trip failures", failures)};
}

Outcome criterion7(const Suite& s) {
  SimulatedBackend backend(s.dataset);
  const auto& cat = s.dataset->catalog;
  int nondeterministic = 0, nonadditive = 0, nonmonotone = 0, pairs = 0;
  std::mt19937_64 rng(17);
  for (uint64_t seed = 0; pairs < 500; ++seed) {
    const auto g = strip_filters(sample_random_graph(cat, {2, 2, 1, 20, 0.0, 0.5}, 80000 + seed));
    const auto p1 = backend.execute(g);
    if (!(p1 == backend.execute(g))) ++nondeterministic;
    double sum = 0;
    for (const auto& op : p1.per_operator) sum += op.cpu_time_ms;
    if (sum != p1.cpu_time_ms) ++nonadditive;

    std::vector<ColumnRef> numeric;
    for (const auto& n : g.nodes) {
      if (n.kind() != OperatorKind::Scan) continue;
      for (const auto& c : n.as<ScanAttrs>().columns) {
        const ColumnRef ref{n.as<ScanAttrs>().table, c};
        if (is_numeric(cat.column(ref).value_kind)) numeric.push_back(ref);
      }
    }
    if (numeric.empty()) continue;
    const auto ref = numeric[rng() % numeric.size()];
    const auto& stats = cat.column(ref);
    std::uniform_real_distribution<double> u(*stats.min_value, *stats.max_value);
    double a = quantize_value(stats.value_kind, u(rng)), b = quantize_value(stats.value_kind, u(rng));
    if (a > b) std::swap(a, b);
    const auto loose = with_filter(g, ref.table, {{ref, {stats.value_kind, b}}});
    const auto tight = with_filter(g, ref.table, {{ref, {stats.value_kind, a}}});
    const auto cl = backend.execute(loose), ct = backend.execute(tight);
    for (size_t i = 0; i < cl.per_operator.size(); ++i) {
      if (ct.per_operator[i].output_cardinality > cl.per_operator[i].output_cardinality) {
        ++nonmonotone;
        break;
      }
    }
    ++pairs;
  }
  return {nondeterministic + nonadditive + nonmonotone == 0,
          fmt("%d pairs: %d nondeterministic, %d non-additive, %d non-monotone", pairs, nondeterministic, nonadditive,
              nonmonotone)};
}

}  // namespace

int main() {
  bool all = true;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d %-28s %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "greedy-oracle-equivalence", criterion1);
  const Suite suite;
  ReportSummary hybrid;
  report(2, "closed-loop-synthesis", [&] { return criterion2(suite, hybrid); });
  report(3, "hybrid-scoring-ablation", [&] { return criterion3(suite, hybrid); });
  report(4, "local-model-accuracy", [&] { return criterion4(suite); });
  report(5, "reuse-fidelity", [&] { return criterion5(suite); });
  report(6, "translator-round-trip", [&] { return criterion6(suite); });
  report(7, "backend-properties", [&] { return criterion7(suite); });
  return all ? 0 : 1;
}
