#include <map>

#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

namespace {
const char* kHeader = "record_id,timestamp_ms,cpu_time_ms,scanned_bytes,num_joins,num_aggs,num_sorts,query_hash,param_hash\n";
}

TEST_CASE("equal timestamps keep file order") {
  const std::string text = std::string(kHeader) +
                           "b,5,1,10,0,0,0,h1,p1\n"
                           "a,5,2,20,0,0,0,h2,p2\n"
                           "c,5,3,30,0,0,0,h3,p3\n";
  const auto t = parse_trace(text);
  REQUIRE(t.size() == 3);
  CHECK(t[0].record_id == "b");
  CHECK(t[1].record_id == "a");
  CHECK(t[2].record_id == "c");
}

TEST_CASE("negative cpu time is a parse error") {
  CHECK_THROWS_AS(parse_trace(std::string(kHeader) + "a,1,-1,10,0,0,0,h,p\n"), ParseError);
}

TEST_CASE("missing param_hash column leaves it absent") {
  const auto t = parse_trace("record_id,timestamp_ms,cpu_time_ms,scanned_bytes,num_joins,query_hash\na,1,4,10,1,h\n");
  REQUIRE(t.size() == 1);
  CHECK(t[0].query_hash == std::optional<std::string>("h"));
  CHECK_FALSE(t[0].param_hash.has_value());
  CHECK(t[0].structure.find(OperatorKind::Join)->value == 1);
  CHECK(t[0].structure.find(OperatorKind::Sort) == nullptr);
}

TEST_CASE("presence mode header") {
  const auto t = parse_trace(std::string("# mode=presence\n") + kHeader + "a,1,4,10,1,0,1,,\n");
  REQUIRE(t.size() == 1);
  CHECK(t[0].structure.find(OperatorKind::Join)->mode == ConstraintMode::Presence);
  CHECK_FALSE(t[0].query_hash.has_value());
  CHECK(parse_trace(serialize_trace(t))[0].structure == t[0].structure);
}

TEST_CASE("single-record synthetic trace carries the measured profile") {
  SimulatedBackend backend(demo());
  SyntheticTraceSpec spec;
  spec.n = 1;
  spec.seed = 4;
  spec.bounds = {0, 0, 0, 20, 1.0, 0.0};
  const auto t = gen_synthetic_trace(demo()->catalog, backend, spec);
  REQUIRE(t.records.size() == 1);
  REQUIRE(t.answer_key.size() == 1);
  const auto p = backend.execute(t.answer_key[0].graph);
  CHECK(t.records[0].targets.cpu_time_ms == p.cpu_time_ms);
  CHECK(t.records[0].targets.scanned_bytes == p.scanned_bytes);
  CHECK(t.records[0].structure.find(OperatorKind::Join)->value == 0);
}

TEST_CASE("duplication knob yields repeated query hashes") {
  SimulatedBackend backend(demo());
  SyntheticTraceSpec spec;
  spec.n = 50;
  spec.seed = 7;
  spec.dup = 0.4;
  const auto t = gen_synthetic_trace(demo()->catalog, backend, spec);
  std::map<std::string, int> counts;
  for (const auto& r : t.records) counts[*r.query_hash]++;
  int sharing = 0;
  for (const auto& [h, n] : counts) {
    if (n > 1) sharing += n;
  }
  CHECK(sharing >= 20);
}

TEST_CASE("synthetic trace is byte-identical under a fixed seed") {
  SimulatedBackend backend(demo());
  SyntheticTraceSpec spec;
  spec.n = 20;
  spec.seed = 3;
  spec.dup = 0.2;
  spec.param_dup = 0.2;
  const auto a = gen_synthetic_trace(demo()->catalog, backend, spec);
  const auto b = gen_synthetic_trace(demo()->catalog, backend, spec);
  CHECK(serialize_trace(a.records) == serialize_trace(b.records));
  CHECK(serialize_answer_key(a.answer_key) == serialize_answer_key(b.answer_key));
  CHECK(parse_answer_key(serialize_answer_key(a.answer_key)).size() == a.answer_key.size());
}

TEST_CASE("mismatch objective") {
  ExecutionProfile g;
  TargetProfile y;
  y.cpu_time_ms = 10;
  y.scanned_bytes = 500;
  g.cpu_time_ms = 10;
  g.scanned_bytes = 500;
  CHECK(compute_mismatch(g, y) == 0);

  y = {};
  y.cpu_time_ms = 100;
  y.weight_bytes = 0;
  g.cpu_time_ms = 150;
  CHECK(compute_mismatch(g, y) == doctest::Approx(0.5));

  y = {};
  g.cpu_time_ms = 2;
  g.scanned_bytes = 0;
  CHECK(compute_mismatch(g, y) == doctest::Approx(2.0));
}

TEST_CASE("q-error") {
  CHECK(qerror(1.5, 1.5) == 1.0);
  CHECK(qerror(2.0, 1.0) == 2.0);
  CHECK(qerror(1.0, 2.0) == 2.0);
}
