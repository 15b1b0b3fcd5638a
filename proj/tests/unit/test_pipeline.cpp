#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

namespace {

SyntheticTrace make_trace(int n, double dup, double param_dup = 0, bool hashes = true) {
  SimulatedBackend backend(star4());
  SyntheticTraceSpec spec;
  spec.n = n;
  spec.seed = 11;
  spec.dup = dup;
  spec.param_dup = param_dup;
  spec.with_hashes = hashes;
  return gen_synthetic_trace(star4()->catalog, backend, spec);
}

}  // namespace

TEST_CASE("report carries percentile summary lines") {
  SimulatedBackend backend(star4());
  const auto trace = make_trace(10, 0);
  const auto out = synthesize_workload(trace.records, star4()->catalog, backend, star4_model(), {});
  const auto text = serialize_report(out.report);
  CHECK(text.find("# qerror_cpu p50=") != std::string::npos);
  CHECK(text.find("p90=") != std::string::npos);
  CHECK(text.find("p99=") != std::string::npos);
  CHECK(text.find("# qerror_bytes p50=") != std::string::npos);
  CHECK(out.report.rows.size() == 10);
}

TEST_CASE("report percentiles are recomputable from rows") {
  SimulatedBackend backend(star4());
  const auto out = synthesize_workload(make_trace(15, 0).records, star4()->catalog, backend, star4_model(), {});
  const auto parsed = parse_report(serialize_report(out.report));
  std::vector<double> cpu;
  for (const auto& r : parsed.rows) cpu.push_back(r.qerror_cpu);
  std::sort(cpu.begin(), cpu.end());
  const double pos = 0.5 * static_cast<double>(cpu.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double median = cpu[lo] + (cpu[std::min(lo + 1, cpu.size() - 1)] - cpu[lo]) * (pos - static_cast<double>(lo));
  CHECK(summarize(parsed).cpu_p50 == doctest::Approx(median));
  CHECK(format_summary(summarize(parsed)) == format_summary(summarize(out.report)));
}

TEST_CASE("40 percent repetition gives 40 percent exact hits") {
  SimulatedBackend backend(star4());
  const auto out = synthesize_workload(make_trace(50, 0.4).records, star4()->catalog, backend, star4_model(), {});
  CHECK(summarize(out.report).reuse["exact"] == 20);
}

TEST_CASE("template hits skip Phase I") {
  SimulatedBackend backend(star4());
  const auto out =
      synthesize_workload(make_trace(30, 0, 0.3).records, star4()->catalog, backend, star4_model(), {});
  int templates = 0;
  for (const auto& r : out.report.rows) {
    if (r.reuse != ReuseKind::Template) continue;
    ++templates;
    CHECK(r.phase1_calls == 0);
  }
  CHECK(templates > 0);
}

TEST_CASE("empty trace gives an empty workload") {
  SimulatedBackend backend(star4());
  const auto out = synthesize_workload({}, star4()->catalog, backend, star4_model(), {});
  CHECK(out.workload.empty());
  CHECK(out.report.rows.empty());
}

TEST_CASE("runs are byte-identical across seeds and parallelism") {
  const auto trace = make_trace(20, 0.2, 0.2);
  PipelineConfig serial;
  serial.search.seed = 5;
  PipelineConfig parallel = serial;
  parallel.parallelism = 4;
  SimulatedBackend b1(star4()), b2(star4()), b3(star4());
  const auto a = synthesize_workload(trace.records, star4()->catalog, b1, star4_model(), serial);
  const auto b = synthesize_workload(trace.records, star4()->catalog, b2, star4_model(), serial);
  const auto c = synthesize_workload(trace.records, star4()->catalog, b3, star4_model(), parallel);
  CHECK(a.workload == b.workload);
  CHECK(serialize_report(a.report) == serialize_report(b.report));
  CHECK(a.workload == c.workload);
  CHECK(serialize_report(a.report) == serialize_report(c.report));
}

TEST_CASE("no record exceeds the execution budget") {
  SimulatedBackend backend(star4());
  PipelineConfig cfg;
  cfg.search.max_executions = 6;
  const auto out = synthesize_workload(make_trace(15, 0).records, star4()->catalog, backend, star4_model(), cfg);
  for (const auto& r : out.report.rows) CHECK(r.executions <= 6);
}

TEST_CASE("infeasible structure still yields a flagged row") {
  SimulatedBackend backend(star4());
  TraceRecord r;
  r.record_id = "big";
  r.targets.cpu_time_ms = 50;
  r.targets.scanned_bytes = 20000;
  r.structure.constraints = {{OperatorKind::Join, ConstraintMode::ExactCount, 6, 0}};
  const auto out = synthesize_workload({r}, star4()->catalog, backend, star4_model(), {});
  REQUIRE(out.report.rows.size() == 1);
  const auto& row = out.report.rows[0];
  CHECK(std::find(row.flags.begin(), row.flags.end(), "no_connected_set") != row.flags.end());
  CHECK(out.workload.find("record_id=big") != std::string::npos);
}

TEST_CASE("mock adapter backend runs the pipeline unchanged") {
  const auto trace = make_trace(6, 0);
  SimulatedBackend direct(star4());
  const auto want = synthesize_workload(trace.records, star4()->catalog, direct, star4_model(), {});

  const auto dir = temp_dir("pipeline_mock");
  auto sim = std::make_shared<SimulatedBackend>(star4());
  auto adapter = std::make_shared<MockAdapter>(dir, [sim](const std::string& sql) { return sim->execute(parse_sql(sql)); });
  AdapterBackend backend(adapter, sim);
  const auto got = synthesize_workload(trace.records, star4()->catalog, backend, star4_model(), {});
  CHECK(got.workload == want.workload);
  CHECK(serialize_report(got.report) == serialize_report(want.report));
}

TEST_CASE("config text round-trips and rejects unknown keys") {
  PipelineConfig c;
  c.search.n_calls = 7;
  c.tau = 0.3;
  c.backend = "mock-adapter";
  c.mock_dir = "/tmp/x";
  const auto back = parse_config(serialize_config(c));
  CHECK(serialize_config(back) == serialize_config(c));
  CHECK_THROWS_AS(parse_config("bogus=1\n"), ParseError);
  PipelineConfig bad;
  bad.parallelism = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
