#include "doctest.h"
#include "fixtures.hpp"

using namespace tracesynth;
using namespace fixtures;

TEST_CASE("minimal one-table catalog loads with empty join graph") {
  const auto text =
      "dataset_id=mini\n[tables]\nname=t row_count=10\n[columns]\n"
      "table=t name=a value_kind=integer bytes_per_value=8 scan_weight=80 min_value=1 max_value=10 "
      "distinct_count=10\n[join_edges]\n";
  const auto c = parse_catalog(text);
  CHECK(c.tables.size() == 1);
  CHECK(c.join_graph.edges.empty());
}

TEST_CASE("edge referencing a missing table is rejected") {
  const auto text =
      "dataset_id=mini\n[tables]\nname=t row_count=10\n[columns]\n"
      "table=t name=a value_kind=integer bytes_per_value=8 scan_weight=80 min_value=1 max_value=10 "
      "distinct_count=10\n[join_edges]\nt.a=ghost.b\n";
  CHECK_THROWS_AS(parse_catalog(text), ValidationError);
}

TEST_CASE("demo catalog round-trips through save and load") {
  const auto dir = temp_dir("catalog");
  save_dataset(*demo(), dir);
  const auto loaded = load_dataset(dir);
  CHECK(serialize_catalog(loaded.catalog) == serialize_catalog(demo()->catalog));
  CHECK(loaded.tables == demo()->tables);
}

TEST_CASE("demo catalog definition") {
  const auto& c = demo()->catalog;
  REQUIRE(c.tables.size() == 2);
  CHECK(c.table("orders").row_count == 1000);
  CHECK(c.table("customer").row_count == 100);
  CHECK(c.column(col("orders", "o_id")).bytes_per_value == 8);
  CHECK(c.column(col("orders", "o_custkey")).bytes_per_value == 8);
  CHECK(c.column(col("orders", "o_total")).bytes_per_value == 8);
  CHECK(c.column(col("orders", "o_date")).bytes_per_value == 4);
  CHECK(c.column(col("orders", "o_comment")).bytes_per_value == 40);
  CHECK(c.column(col("customer", "c_id")).bytes_per_value == 8);
  CHECK(c.column(col("customer", "c_name")).bytes_per_value == 20);
  CHECK(c.column(col("customer", "c_region")).bytes_per_value == 4);
  REQUIRE(c.join_graph.edges.size() == 1);
  CHECK(c.join_graph.edges[0] == JoinEdge{col("orders", "o_custkey"), col("customer", "c_id")});
  CHECK(c.column(col("orders", "o_comment")).scan_weight == 40000);
}

TEST_CASE("synthetic catalog is deterministic in its seed") {
  const auto a = gen_synthetic_catalog({3, 500, 9});
  const auto b = gen_synthetic_catalog({3, 500, 9});
  CHECK(a.catalog == b.catalog);
  CHECK(a.tables == b.tables);
}

TEST_CASE("connected table subsets") {
  const auto& c = demo()->catalog;
  CHECK(connected_table_subsets(c, 2) == std::vector<std::vector<std::string>>{{"orders", "customer"}});
  CHECK(connected_table_subsets(c, 1) == std::vector<std::vector<std::string>>{{"orders"}, {"customer"}});
  Catalog split = c;
  split.join_graph.edges.clear();
  CHECK(connected_table_subsets(split, 2).empty());
}
