#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tracesynth/common.hpp"

namespace tracesynth {

/// Fully qualified column reference `table.column`.
struct ColumnRef {
  std::string table;
  std::string column;

  auto operator<=>(const ColumnRef&) const = default;
  std::string str() const { return table + "." + column; }
  static ColumnRef parse(std::string_view text);
};

struct ColumnStats {
  std::string name;
  std::string table;
  ValueKind value_kind = ValueKind::Integer;
  double bytes_per_value = 0;
  /// row_count(table) * bytes_per_value, uncompressed.
  double scan_weight = 0;
  std::optional<double> min_value;  // absent for text
  std::optional<double> max_value;
  int64_t distinct_count = 1;

  bool operator==(const ColumnStats&) const = default;
};

struct TableStats {
  std::string name;
  int64_t row_count = 1;
  std::vector<ColumnStats> columns;

  const ColumnStats* find_column(std::string_view column) const;
  bool operator==(const TableStats&) const = default;
};

struct JoinEdge {
  ColumnRef a;
  ColumnRef b;

  bool operator==(const JoinEdge&) const = default;
  bool touches(std::string_view table) const { return a.table == table || b.table == table; }
};

/// Undirected schema-level join graph.
struct SchemaJoinGraph {
  std::vector<std::string> nodes;
  std::vector<JoinEdge> edges;

  bool operator==(const SchemaJoinGraph&) const = default;
};

class Catalog {
 public:
  std::vector<TableStats> tables;
  SchemaJoinGraph join_graph;
  std::string dataset_id;

  const TableStats* find_table(std::string_view name) const;
  const TableStats& table(std::string_view name) const;
  const ColumnStats* find_column(const ColumnRef& ref) const;
  const ColumnStats& column(const ColumnRef& ref) const;

  /// Throws ValidationError describing the first violated invariant.
  void validate() const;

  bool operator==(const Catalog&) const = default;
};

/// Materialized column values. Numeric kinds live in `numbers` (dates as
/// days since epoch); text lives in `texts`.
struct ColumnData {
  std::string name;
  ValueKind kind = ValueKind::Integer;
  std::vector<double> numbers;
  std::vector<std::string> texts;

  size_t size() const { return kind == ValueKind::Text ? texts.size() : numbers.size(); }
  bool operator==(const ColumnData&) const = default;
};

struct TableData {
  std::string name;
  std::vector<ColumnData> columns;

  size_t row_count() const { return columns.empty() ? 0 : columns.front().size(); }
  const ColumnData* find_column(std::string_view column) const;
  bool operator==(const TableData&) const = default;
};

/// A catalog together with the rows it describes.
struct Dataset {
  Catalog catalog;
  std::vector<TableData> tables;

  const TableData& table(std::string_view name) const;
};

// Catalog text file.
std::string serialize_catalog(const Catalog& catalog);
Catalog parse_catalog(std::string_view text);
Catalog load_catalog(const std::string& path);
void save_catalog(const Catalog& catalog, const std::string& path);

// Column-major table files: header line `name:kind|...`, then one line per column.
std::string serialize_table(const TableData& table);
TableData parse_table(std::string_view text);

/// Writes `catalog.txt` and one `<table>.tbl` per table into `dir`.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Recomputes row counts, min/max, distinct counts and byte weights from data.
TableStats compute_table_stats(const TableData& data, const std::vector<double>& bytes_per_value);

struct SyntheticCatalogSpec {
  int n_tables = 2;
  int64_t rows_per_table = 1000;
  uint64_t seed = 0;
};

/// Star schema: fact `orders` with `rows_per_table` rows plus n_tables-1
/// dimensions with rows_per_table/10 rows each.
Dataset gen_synthetic_catalog(const SyntheticCatalogSpec& spec);

/// All connected k-subsets of tables, in lexicographic order of catalog
/// table positions; each set lists tables in catalog order.
std::vector<std::vector<std::string>> connected_table_subsets(const Catalog& catalog, int k);

/// Edges of a BFS spanning tree over `tables`, rooted at tables.front().
std::vector<JoinEdge> spanning_join_edges(const Catalog& catalog,
                                          const std::vector<std::string>& tables);

}  // namespace tracesynth
