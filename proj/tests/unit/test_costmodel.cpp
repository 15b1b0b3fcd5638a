#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

namespace {

OperatorFeatures filter_features(double rows) {
  OperatorFeatures f;
  f.kind = OperatorKind::Filter;
  f.rows_in = rows;
  f.predicates = 1;
  return f;
}

OperatorFeatures sort_features(double rows, double width) {
  OperatorFeatures f;
  f.kind = OperatorKind::Sort;
  f.rows_in = rows;
  f.rows_out = rows;
  f.width = width;
  return f;
}

}  // namespace

TEST_CASE("single-scan profiling yields one scan sample") {
  // A one-column table makes every sampled graph a bare scan.
  Dataset ds;
  ds.catalog.dataset_id = "one";
  TableData t{"t", {{"a", ValueKind::Text, {}, {"xxxxxxxxxx", "yyyyyyyyyy", "zzzzzzzzzz"}}}};
  ds.tables.push_back(t);
  ds.catalog.tables.push_back(compute_table_stats(t, {0}));  // text width comes from the data
  ds.catalog.join_graph.nodes = {"t"};
  SimulatedBackend backend(std::make_shared<const Dataset>(ds));
  const auto samples = collect_profiles(ds.catalog, backend, 1, 0, {0, 0, 0, 20, 0.0, 0.0});
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].features.kind == OperatorKind::Scan);
  CHECK(samples[0].cpu_time_ms == doctest::Approx(3 * 10 * 0.0005));
}

TEST_CASE("mixed profiling covers all five operator kinds and passes cpu through") {
  SimulatedBackend backend(star4());
  const auto samples = collect_profiles(star4()->catalog, backend, 200, 7);
  std::set<OperatorKind> kinds;
  for (const auto& s : samples) kinds.insert(s.features.kind);
  CHECK(kinds.size() == 6);  // scan, filter, join, aggregate, sort, eval scalar

  const auto g = sample_random_graph(star4()->catalog, {2, 2, 2, 20, 0.6, 0.5}, std::mt19937_64(0)());
  const auto p = backend.execute(g);
  const auto one = collect_profiles(star4()->catalog, backend, 1, 0);
  REQUIRE(one.size() == p.per_operator.size());
  for (size_t i = 0; i < one.size(); ++i) CHECK(one[i].cpu_time_ms == p.per_operator[i].cpu_time_ms);
}

TEST_CASE("noiseless linear filter data is recovered exactly") {
  std::vector<ProfileSample> samples;
  for (double rows : {10.0, 100.0, 250.0, 1000.0, 4000.0}) samples.push_back({filter_features(rows), 0.001 * rows + 5});
  const auto m = fit(samples);
  const auto& c = m.kinds.at("filter").coefficients;
  CHECK(c[0] == doctest::Approx(0.001).epsilon(1e-6));
  CHECK(c[1] == doctest::Approx(5).epsilon(1e-6));
}

TEST_CASE("noiseless n log n sort data is recovered exactly") {
  std::vector<ProfileSample> samples;
  int w = 1;
  for (double rows : {16.0, 100.0, 700.0, 1024.0, 5000.0, 9000.0}) {
    samples.push_back({sort_features(rows, w++), 0.01 * rows * std::log2(rows)});
  }
  const auto c = fit(samples).kinds.at("sort").coefficients;
  CHECK(c[0] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(std::abs(c[1]) < 1e-9);
  CHECK(std::abs(c[2]) < 1e-6);
}

TEST_CASE("in-sample fit on simulated profiles") {
  SimulatedBackend backend(star4());
  const auto samples = collect_profiles(star4()->catalog, backend, 200, 7);
  FitOptions opts;
  opts.skip_sparse_kinds = true;
  const auto m = fit(samples, opts);
  std::vector<double> rel;
  for (const auto& s : samples) {
    if (s.cpu_time_ms <= 0) continue;
    rel.push_back(std::abs(predict_operator(m, s.features) - s.cpu_time_ms) / s.cpu_time_ms);
  }
  std::sort(rel.begin(), rel.end());
  CHECK(rel[rel.size() / 2] <= 0.10);
}

TEST_CASE("operator predictions") {
  LocalModel m;
  m.kinds["filter"].coefficients = {0.001, 5};
  m.kinds["sort"].coefficients = {0.01, 0, 0};
  m.kinds["join"].coefficients = {0.0008, 0.0005, 0.05, 0.0003};
  CHECK(predict_operator(m, filter_features(1000)) == doctest::Approx(6.0));
  CHECK(predict_operator(m, sort_features(1024, 3)) == doctest::Approx(102.4));
  OperatorFeatures j;
  j.kind = OperatorKind::Join;
  j.build = 100;
  j.probe = 1000;
  j.tasks = 4;
  j.width = 5;
  j.rows_out = 0;
  CHECK(predict_operator(m, j) == doctest::Approx(0.08 + 0.5 + 0.2));
}

TEST_CASE("query prediction is the sum of operator predictions") {
  SimulatedBackend backend(demo());
  LocalModel m;
  m.kinds["scan"].coefficients = {0.0005};
  m.kinds["join"].coefficients = {0.0008, 0.0005, 0.05, 0.0003};

  GraphBuilder b;
  auto s = b.scan("customer", {"c_id"});
  const auto single = std::move(b).build(s);
  const auto f = features_of(single, demo()->catalog, s, {}, 100, 4);
  CHECK(predict_query(m, single, demo()->catalog, backend.probe_cardinalities(single)) ==
        doctest::Approx(predict_operator(m, f)));

  const auto g = demo_join();
  const auto p = backend.execute(g);
  CHECK(predict_query(m, g, demo()->catalog, backend.probe_cardinalities(g)) == doctest::Approx(p.cpu_time_ms));
}

TEST_CASE("held-out query prediction error") {
  SimulatedBackend backend(star4());
  std::vector<double> rel;
  for (uint64_t i = 0; i < 50; ++i) {
    const auto g = sample_random_graph(star4()->catalog, {2, 2, 2, 20, 0.6, 0.5}, 100000 + i);
    const auto p = backend.execute(g);
    if (p.cpu_time_ms <= 0) continue;
    const double pred = predict_query(star4_model(), g, star4()->catalog, backend.probe_cardinalities(g));
    rel.push_back(std::abs(pred - p.cpu_time_ms) / p.cpu_time_ms);
  }
  std::sort(rel.begin(), rel.end());
  CHECK(rel[rel.size() / 2] <= 0.20);
}

TEST_CASE("model files round-trip for both join regressors") {
  CHECK(parse_model(serialize_model(star4_model())) == star4_model());
  SimulatedBackend backend(star4());
  FitOptions opts;
  opts.skip_sparse_kinds = true;
  opts.join_regressor = JoinRegressor::TreeEnsemble;
  opts.gbdt.trees = 20;
  const auto m = fit(collect_profiles(star4()->catalog, backend, 80, 3), opts);
  CHECK_FALSE(m.join_trees.trees.empty());
  CHECK(parse_model(serialize_model(m)) == m);
}

TEST_CASE("sparse kinds are rejected unless skipped") {
  std::vector<ProfileSample> samples = {{filter_features(10), 1}};
  CHECK_THROWS_AS(fit(samples), ValidationError);
  FitOptions opts;
  opts.skip_sparse_kinds = true;
  CHECK(fit(samples, opts).kinds.count("filter") == 0);
}
