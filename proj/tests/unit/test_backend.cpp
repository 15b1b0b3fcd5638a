#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

TEST_CASE("scan cost and bytes follow the ground-truth constants") {
  SimulatedBackend backend(demo());
  GraphBuilder b;
  auto s = b.scan("orders", {"o_custkey", "o_date", "o_id"});
  const auto p = backend.execute(std::move(b).build(s));
  CHECK(p.scanned_bytes == 20000);
  CHECK(p.cpu_time_ms == doctest::Approx(10.0));
}

TEST_CASE("empty filter zeroes downstream variable cost") {
  SimulatedBackend backend(demo());
  const double lo = *demo()->catalog.column(col("orders", "o_total")).min_value - 1;
  GraphBuilder b;
  auto s = b.scan("orders", {"o_custkey", "o_total"});
  auto f = b.filter(s, {le("orders", "o_total", ValueKind::Decimal, lo)});
  auto a = b.aggregate(f, {col("orders", "o_custkey")}, {{AggregateFunction::Kind::Count, std::nullopt}});
  auto t = b.sort(a, {{col("orders", "o_custkey"), true}});
  const auto g = std::move(b).build(t);
  const auto p = backend.execute(g);
  for (const auto& op : p.per_operator) {
    if (op.kind == OperatorKind::Filter) CHECK(op.output_cardinality == 0);
    if (op.kind == OperatorKind::Aggregate || op.kind == OperatorKind::Sort) {
      CHECK(op.output_cardinality == 0);
      CHECK(op.cpu_time_ms == 0);
    }
  }
  const auto cards = backend.probe_cardinalities(g);
  CHECK(cards.at(a) == 0);
  CHECK(cards.at(t) == 0);
}

TEST_CASE("join builds on the smaller input") {
  SimulatedBackend backend(demo());
  const auto p = backend.execute(demo_join());
  bool seen = false;
  for (const auto& op : p.per_operator) {
    if (op.kind != OperatorKind::Join) continue;
    seen = true;
    REQUIRE(op.input_cardinalities.size() == 2);
    CHECK(std::min(op.input_cardinalities[0], op.input_cardinalities[1]) == 100);
    CHECK(std::max(op.input_cardinalities[0], op.input_cardinalities[1]) == 1000);
    // 0.0008*100 + 0.0005*1000 + 0.05*4 + 0.0003*1000*4
    CHECK(op.cpu_time_ms == doctest::Approx(0.08 + 0.5 + 0.2 + 1.2));
  }
  CHECK(seen);
}

TEST_CASE("probe agrees with execution and is not metered as one") {
  SimulatedBackend backend(star4());
  for (uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = sample_random_graph(star4()->catalog, {2, 2, 1, 20, 0.7, 0.5}, seed);
    const auto before = backend.meter();
    const auto cards = backend.probe_cardinalities(g);
    CHECK(backend.meter().executions == before.executions);
    CHECK(backend.meter().probes == before.probes + 1);
    const auto p = backend.execute(g);
    for (const auto& op : p.per_operator) CHECK(cards.at(op.node) == op.output_cardinality);
  }
}

TEST_CASE("execution is deterministic and cpu is additive") {
  SimulatedBackend backend(star4());
  const auto g = sample_random_graph(star4()->catalog, {2, 2, 1, 20, 0.7, 0.5}, 11);
  const auto a = backend.execute(g);
  const auto b = backend.execute(g);
  CHECK(a == b);
  double sum = 0;
  for (const auto& op : a.per_operator) sum += op.cpu_time_ms;
  CHECK(sum == a.cpu_time_ms);
}

TEST_CASE("profile text round-trips and malformed text is a parse error") {
  SimulatedBackend backend(demo());
  const auto p = backend.execute(demo_join());
  CHECK(parse_profile(serialize_profile(p)) == p);
  try {
    parse_profile("garbage");
    FAIL("expected AdapterError");
  } catch (const AdapterError& e) {
    CHECK(e.kind() == AdapterError::Kind::Parse);
    CHECK_FALSE(e.retryable());
  }
}

TEST_CASE("mock adapter classifies canned timeouts as retryable") {
  const auto dir = temp_dir("mock_timeout");
  const auto g = demo_join();
  write_file(dir + "/" + to_hex(graph_hash(g, false)) + ".profile", "error=timeout\n");
  auto adapter = std::make_shared<MockAdapter>(dir);
  AdapterBackend backend(adapter, std::make_shared<SimulatedBackend>(demo()));
  try {
    backend.execute(g);
    FAIL("expected AdapterError");
  } catch (const AdapterError& e) {
    CHECK(e.kind() == AdapterError::Kind::Timeout);
    CHECK(e.retryable());
  }
}

TEST_CASE("mock adapter replays recorded profiles") {
  const auto dir = temp_dir("mock_replay");
  auto sim = std::make_shared<SimulatedBackend>(demo());
  {
    auto recorder = std::make_shared<MockAdapter>(
        dir, [sim](const std::string& sql) { return sim->execute(parse_sql(sql)); });
    AdapterBackend backend(recorder, sim);
    backend.execute(demo_join());
  }
  auto replay = std::make_shared<MockAdapter>(dir);
  AdapterBackend backend(replay, sim);
  CHECK(backend.execute(demo_join()).cpu_time_ms == sim->execute(demo_join()).cpu_time_ms);
}
