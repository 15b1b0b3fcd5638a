#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

namespace {

PoolEntry entry_for(const QueryGraph& g, double mismatch = 0.1) {
  SimulatedBackend backend(demo());
  PoolEntry e;
  e.graph = g;
  e.exact_hash = graph_hash(g, false);
  e.param_hash = graph_hash(g, true);
  e.profile = backend.execute(g);
  e.record_id = "r";
  e.mismatch = mismatch;
  return e;
}

TraceRecord record(std::optional<std::string> q, std::optional<std::string> p, double cpu = 10,
                   double bytes = 1000, int joins = 1) {
  TraceRecord r;
  r.record_id = "x";
  r.targets.cpu_time_ms = cpu;
  r.targets.scanned_bytes = bytes;
  r.structure.constraints = {{OperatorKind::Join, ConstraintMode::ExactCount, joins, 0}};
  r.query_hash = std::move(q);
  r.param_hash = std::move(p);
  return r;
}

}  // namespace

TEST_CASE("exact hits return the stored graph") {
  QueryPool pool;
  const auto e = entry_for(demo_join());
  const auto r = record("q1", "p1");
  pool.bind(r, e.exact_hash, e.param_hash);
  pool.insert(e);
  const auto hit = pool.lookup(record("q1", "p9"));
  CHECK(hit.kind == ReuseKind::Exact);
  REQUIRE(hit.entry);
  CHECK(hit.entry->graph == e.graph);
}

TEST_CASE("template hit on a matching param hash") {
  QueryPool pool;
  const auto e = entry_for(demo_join());
  pool.bind(record("q1", "p1"), e.exact_hash, e.param_hash);
  pool.insert(e);
  CHECK(pool.lookup(record("q2", "p1", 99)).kind == ReuseKind::Template);
  CHECK(pool.lookup(record("q2", "p2")).kind == ReuseKind::Miss);
}

TEST_CASE("proxy lookups honour tau") {
  QueryPool pool(0.5);
  auto e = entry_for(demo_join());
  pool.insert(e);
  const auto near = record(std::nullopt, std::nullopt, e.profile.cpu_time_ms, e.profile.scanned_bytes);
  CHECK(pool.lookup(near).kind == ReuseKind::Proxy);
  const auto far = record(std::nullopt, std::nullopt, e.profile.cpu_time_ms * 100, e.profile.scanned_bytes * 100);
  CHECK(pool.lookup(far).kind == ReuseKind::Miss);
  // Wrong structure never proxies.
  const auto other = record(std::nullopt, std::nullopt, e.profile.cpu_time_ms, e.profile.scanned_bytes, 0);
  CHECK(pool.lookup(other).kind == ReuseKind::Miss);
}

TEST_CASE("duplicate insert keeps the better entry") {
  QueryPool pool;
  auto good = entry_for(demo_join(), 0.1);
  good.record_id = "good";
  auto bad = entry_for(demo_join(), 0.9);
  bad.record_id = "bad";
  CHECK(pool.insert(good));
  CHECK_FALSE(pool.insert(bad));
  CHECK(pool.size() == 1);
  CHECK(pool.find(good.exact_hash)->record_id == "good");
}

TEST_CASE("persisted pools answer lookups identically") {
  QueryPool pool(0.5);
  const auto e1 = entry_for(demo_join());
  GraphBuilder b;
  auto s = b.scan("customer", {"c_id", "c_name"});
  const auto e2 = entry_for(std::move(b).build(s));
  pool.bind(record("q1", "p1"), e1.exact_hash, e1.param_hash);
  pool.insert(e1);
  pool.insert(e2);
  const auto dir = temp_dir("pool");
  pool.save(dir);
  const auto loaded = QueryPool::load(dir, 0.5);
  CHECK(loaded->size() == 2);
  for (const auto& r : {record("q1", "x"), record("z", "p1"), record("z", "z"),
                        record(std::nullopt, std::nullopt, e2.profile.cpu_time_ms, e2.profile.scanned_bytes, 0)}) {
    const auto a = pool.lookup(r);
    const auto c = loaded->lookup(r);
    CHECK(a.kind == c.kind);
    CHECK(a.entry.has_value() == c.entry.has_value());
    if (a.entry && c.entry) CHECK(a.entry->exact_hash == c.entry->exact_hash);
  }
}
