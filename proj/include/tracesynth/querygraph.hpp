#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tracesynth/catalog.hpp"

namespace tracesynth {

enum class OperatorKind { Scan, Filter, Join, Aggregate, Sort, EvalScalar };
enum class ExprKind { Arith, String, Date };

std::string_view to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(std::string_view text);
std::string_view to_string(ExprKind kind);
ExprKind expr_kind_from_string(std::string_view text);

/// One-sided range predicate `column <= literal`.
struct RangePredicate {
  ColumnRef column;
  Literal literal;

  bool operator==(const RangePredicate&) const = default;
};

struct ScanAttrs {
  std::string table;
  std::vector<std::string> columns;  // selected column set, kept sorted
  bool operator==(const ScanAttrs&) const = default;
};

struct FilterAttrs {
  std::vector<RangePredicate> predicates;
  bool operator==(const FilterAttrs&) const = default;
};

/// Inner equi-join. `left_key` belongs to the first child, `right_key` to the second.
struct JoinAttrs {
  ColumnRef left_key;
  ColumnRef right_key;
  bool operator==(const JoinAttrs&) const = default;
};

struct AggregateFunction {
  enum class Kind { Count, Sum } kind = Kind::Count;
  std::optional<ColumnRef> column;  // Sum only
  auto operator<=>(const AggregateFunction&) const = default;
};

struct AggregateAttrs {
  std::vector<ColumnRef> group_by;
  std::vector<AggregateFunction> functions;
  bool operator==(const AggregateAttrs&) const = default;
};

struct SortKey {
  ColumnRef column;
  bool ascending = true;
  bool operator==(const SortKey&) const = default;
};

struct SortAttrs {
  std::vector<SortKey> keys;
  bool operator==(const SortAttrs&) const = default;
};

struct EvalScalarAttrs {
  ExprKind expr = ExprKind::Arith;
  ColumnRef input;
  int64_t repeat_count = 1;
  bool operator==(const EvalScalarAttrs&) const = default;
};

using OperatorAttrs = std::variant<ScanAttrs, FilterAttrs, JoinAttrs, AggregateAttrs, SortAttrs, EvalScalarAttrs>;

using NodeId = int;

struct OperatorNode {
  NodeId id = 0;
  OperatorAttrs attrs;

  OperatorKind kind() const { return static_cast<OperatorKind>(attrs.index()); }
  template <typename T>
  const T& as() const { return std::get<T>(attrs); }
  template <typename T>
  T& as() { return std::get<T>(attrs); }
  bool operator==(const OperatorNode&) const = default;
};

struct StructuralCounts {
  int joins = 0;
  int aggregates = 0;
  int sorts = 0;
  int tables = 0;
  bool operator==(const StructuralCounts&) const = default;
};

/// Operator DAG. Edges are (parent, child); for a Join the first listed
/// edge is its left input.
class QueryGraph {
 public:
  std::vector<OperatorNode> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId root = 0;

  const OperatorNode* find(NodeId id) const;
  const OperatorNode& node(NodeId id) const;
  OperatorNode& node(NodeId id);
  std::vector<NodeId> children(NodeId id) const;
  std::optional<NodeId> parent(NodeId id) const;
  /// Children before parents; ties follow edge order from the root.
  std::vector<NodeId> post_order() const;
  NodeId next_id() const;

  bool operator==(const QueryGraph&) const = default;
};

/// Incremental construction with fresh ids.
class GraphBuilder {
 public:
  explicit GraphBuilder(NodeId first_id = 0) : next_(first_id) {}

  NodeId scan(std::string table, std::vector<std::string> columns);
  NodeId filter(NodeId child, std::vector<RangePredicate> predicates);
  NodeId join(NodeId left, NodeId right, ColumnRef left_key, ColumnRef right_key);
  NodeId aggregate(NodeId child, std::vector<ColumnRef> group_by, std::vector<AggregateFunction> functions);
  NodeId sort(NodeId child, std::vector<SortKey> keys);
  NodeId eval_scalar(NodeId child, ExprKind expr, ColumnRef input, int64_t repeat_count);
  QueryGraph build(NodeId root) &&;

 private:
  NodeId add(OperatorAttrs attrs, std::vector<NodeId> children);
  QueryGraph graph_;
  NodeId next_;
};

/// Returns every violated invariant; empty means valid. A valid graph is a
/// single-rooted tree shaped core -> EvalScalar* -> Aggregate* -> Sort*,
/// where the core is Scans (optionally under one Filter each) joined by
/// inner equi-joins.
std::vector<std::string> validate(const QueryGraph& g, const Catalog& catalog);
void require_valid(const QueryGraph& g, const Catalog& catalog);

StructuralCounts structural_counts(const QueryGraph& g);

/// Columns visible in the output of `id`.
std::set<ColumnRef> available_columns(const QueryGraph& g, NodeId id);
/// Number of values per output row of `id` (computed expressions included).
int64_t output_width(const QueryGraph& g, NodeId id);
/// Top node of the Scan/Filter/Join core.
NodeId core_top(const QueryGraph& g);

std::string canonical_form(const QueryGraph& g, bool parameterized);
/// Parses the on-disk canonical graph format.
QueryGraph parse_graph(std::string_view text);
uint64_t graph_hash(const QueryGraph& g, bool parameterized);

/// Removes every Filter node, reconnecting its child to its parent.
QueryGraph strip_filters(const QueryGraph& g);
/// Places a Filter holding `predicates` above the Scan of `table` (merging
/// into an existing Filter there).
QueryGraph with_filter(const QueryGraph& g, const std::string& table, std::vector<RangePredicate> predicates);
/// Scan node of `table`, if any.
std::optional<NodeId> scan_of(const QueryGraph& g, std::string_view table);

struct SampleBounds {
  int max_joins = 1;
  int max_aggs = 1;
  int max_sorts = 1;
  int max_eval_repeat = 20;
  double filter_probability = 0.6;
  double eval_probability = 0.5;
};

QueryGraph sample_random_graph(const Catalog& catalog, const SampleBounds& bounds, uint64_t seed);

/// Ranked group-by candidates among `columns`: ascending distinct count, then name.
std::vector<ColumnRef> rank_group_columns(const Catalog& catalog, const std::set<ColumnRef>& columns);

}  // namespace tracesynth
