#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "tracesynth/pipeline.hpp"

namespace fixtures {

using namespace tracesynth;

// Two-table star: orders(1000) and customer(100).
inline std::shared_ptr<const Dataset> demo() {
  static auto ds = std::make_shared<const Dataset>(gen_synthetic_catalog({2, 1000, 0}));
  return ds;
}

inline std::shared_ptr<const Dataset> star4() {
  static auto ds = std::make_shared<const Dataset>(gen_synthetic_catalog({4, 2000, 3}));
  return ds;
}

inline const LocalModel& star4_model() {
  static const LocalModel model = [] {
    SimulatedBackend backend(star4());
    FitOptions opts;
    opts.skip_sparse_kinds = true;
    return fit(collect_profiles(star4()->catalog, backend, 200, 7), opts);
  }();
  return model;
}

inline ColumnRef col(const std::string& table, const std::string& column) { return {table, column}; }

inline RangePredicate le(const std::string& table, const std::string& column, ValueKind kind, double v) {
  return {{table, column}, {kind, v}};
}

// Demo join: orders(o_custkey, o_total) JOIN customer(c_id, c_region).
inline QueryGraph demo_join(NodeId first_id = 0) {
  GraphBuilder b(first_id);
  auto o = b.scan("orders", {"o_custkey", "o_total"});
  auto c = b.scan("customer", {"c_id", "c_region"});
  auto j = b.join(o, c, col("orders", "o_custkey"), col("customer", "c_id"));
  return std::move(b).build(j);
}

inline std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tracesynth_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace fixtures
