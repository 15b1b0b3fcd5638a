#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

TEST_CASE("single customer scan is valid") {
  GraphBuilder b;
  auto s = b.scan("customer", {"c_id"});
  CHECK(validate(std::move(b).build(s), demo()->catalog).empty());
}

TEST_CASE("join with one child violates join arity") {
  auto g = demo_join();
  g.edges.pop_back();
  g.nodes.erase(std::remove_if(g.nodes.begin(), g.nodes.end(),
                               [](const OperatorNode& n) {
                                 return n.kind() == OperatorKind::Scan && n.as<ScanAttrs>().table == "customer";
                               }),
                g.nodes.end());
  const auto v = validate(g, demo()->catalog);
  CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s.find("join arity") != std::string::npos; }));
}

TEST_CASE("cycle is reported as not acyclic") {
  GraphBuilder b;
  auto s = b.scan("orders", {"o_total"});
  auto f = b.filter(s, {le("orders", "o_total", ValueKind::Decimal, 500)});
  auto g = std::move(b).build(f);
  g.edges.push_back({s, f});
  const auto v = validate(g, demo()->catalog);
  CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s.find("not acyclic") != std::string::npos; }));
}

TEST_CASE("structural counts") {
  GraphBuilder b;
  auto s = b.scan("orders", {"o_custkey", "o_total"});
  auto f = b.filter(s, {le("orders", "o_total", ValueKind::Decimal, 500)});
  auto a = b.aggregate(f, {col("orders", "o_custkey")}, {{AggregateFunction::Kind::Count, std::nullopt}});
  auto t = b.sort(a, {{col("orders", "o_custkey"), true}});
  CHECK(structural_counts(std::move(b).build(t)) == StructuralCounts{0, 1, 1, 1});

  GraphBuilder b2;
  auto o = b2.scan("orders", {"o_custkey"});
  auto c = b2.scan("customer", {"c_id", "c_region"});
  auto j = b2.join(o, c, col("orders", "o_custkey"), col("customer", "c_id"));
  auto a2 = b2.aggregate(j, {col("customer", "c_region")}, {{AggregateFunction::Kind::Count, std::nullopt}});
  const auto counts = structural_counts(std::move(b2).build(a2));
  CHECK(counts == StructuralCounts{1, 1, 0, 2});

  StructuralProfile p{{{OperatorKind::Join, ConstraintMode::ExactCount, 1, 0},
                       {OperatorKind::Aggregate, ConstraintMode::ExactCount, 1, 0}}};
  CHECK(p.satisfied_by(counts));
  p.constraints[1].value = 2;
  CHECK_FALSE(p.satisfied_by(counts));
}

TEST_CASE("canonical form ignores node ids") {
  CHECK(canonical_form(demo_join(0), false) == canonical_form(demo_join(40), false));
  CHECK(graph_hash(demo_join(0), true) == graph_hash(demo_join(40), true));
}

TEST_CASE("literal-only change keeps the parameterized form") {
  auto make = [](double v) {
    GraphBuilder b;
    auto s = b.scan("orders", {"o_total"});
    auto f = b.filter(s, {le("orders", "o_total", ValueKind::Decimal, v)});
    return std::move(b).build(f);
  };
  CHECK(canonical_form(make(500), false) != canonical_form(make(900), false));
  CHECK(canonical_form(make(500), true) == canonical_form(make(900), true));
  CHECK(graph_hash(make(500), false) != graph_hash(make(900), false));
  CHECK(graph_hash(make(500), true) == graph_hash(make(900), true));
}

TEST_CASE("swapped join inputs give the same canonical text") {
  GraphBuilder b;
  auto c = b.scan("customer", {"c_id", "c_region"});
  auto o = b.scan("orders", {"o_custkey", "o_total"});
  auto j = b.join(c, o, col("customer", "c_id"), col("orders", "o_custkey"));
  CHECK(canonical_form(std::move(b).build(j), false) == canonical_form(demo_join(), false));
}

TEST_CASE("graph hash is a fixed function of the canonical text") {
  const auto g = demo_join();
  CHECK(graph_hash(g, false) == fnv1a64(canonical_form(g, false)));
}

TEST_CASE("sampler respects zero bounds") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = sample_random_graph(demo()->catalog, {0, 0, 0, 20, 0.6, 0.0}, seed);
    CHECK(structural_counts(g) == StructuralCounts{0, 0, 0, 1});
    for (const auto& n : g.nodes) {
      CHECK((n.kind() == OperatorKind::Scan || n.kind() == OperatorKind::Filter));
    }
  }
}

TEST_CASE("demo join sampling uses the only schema edge") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = sample_random_graph(demo()->catalog, {1, 0, 0, 20, 0.6, 0.5}, seed);
    for (const auto& n : g.nodes) {
      if (n.kind() != OperatorKind::Join) continue;
      const auto& j = n.as<JoinAttrs>();
      const JoinEdge e{j.left_key, j.right_key};
      const JoinEdge r{j.right_key, j.left_key};
      CHECK((e == demo()->catalog.join_graph.edges[0] || r == demo()->catalog.join_graph.edges[0]));
    }
  }
}

TEST_CASE("1000 sampled graphs are valid") {
  int bad = 0;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    if (!validate(sample_random_graph(star4()->catalog, {3, 2, 2, 20, 0.6, 0.5}, seed), star4()->catalog).empty()) {
      ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("graph text format round-trips") {
  const auto g = sample_random_graph(star4()->catalog, {2, 2, 1, 20, 0.8, 0.8}, 5);
  CHECK(canonical_form(parse_graph(canonical_form(g, false)), false) == canonical_form(g, false));
}
