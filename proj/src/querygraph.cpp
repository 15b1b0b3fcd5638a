#include "tracesynth/querygraph.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace tracesynth {

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Scan:
      return "Scan";
    case OperatorKind::Filter:
      return "Filter";
    case OperatorKind::Join:
      return "Join";
    case OperatorKind::Aggregate:
      return "Aggregate";
    case OperatorKind::Sort:
      return "Sort";
    case OperatorKind::EvalScalar:
      return "EvalScalar";
  }
  return "?";
}

OperatorKind operator_kind_from_string(std::string_view text) {
  for (auto k : {OperatorKind::Scan, OperatorKind::Filter, OperatorKind::Join, OperatorKind::Aggregate,
                 OperatorKind::Sort, OperatorKind::EvalScalar}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError("unknown operator kind '" + std::string(text) + "'");
}

std::string_view to_string(ExprKind kind) {
  switch (kind) {
    case ExprKind::Arith:
      return "arith";
    case ExprKind::String:
      return "string";
    case ExprKind::Date:
      return "date";
  }
  return "?";
}

ExprKind expr_kind_from_string(std::string_view text) {
  if (text == "arith") return ExprKind::Arith;
  if (text == "string") return ExprKind::String;
  if (text == "date") return ExprKind::Date;
  throw ParseError("unknown expression kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// QueryGraph

const OperatorNode* QueryGraph::find(NodeId id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const OperatorNode& QueryGraph::node(NodeId id) const {
  const auto* n = find(id);
  if (!n) throw ValidationError("no node with id " + std::to_string(id));
  return *n;
}

OperatorNode& QueryGraph::node(NodeId id) {
  return const_cast<OperatorNode&>(std::as_const(*this).node(id));
}

std::vector<NodeId> QueryGraph::children(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& [p, c] : edges) {
    if (p == id) out.push_back(c);
  }
  return out;
}

std::optional<NodeId> QueryGraph::parent(NodeId id) const {
  for (const auto& [p, c] : edges) {
    if (c == id) return p;
  }
  return std::nullopt;
}

std::vector<NodeId> QueryGraph::post_order() const {
  std::vector<NodeId> out;
  std::set<NodeId> visited;
  std::function<void(NodeId)> visit = [&](NodeId id) {
    if (!visited.insert(id).second) return;
    for (NodeId c : children(id)) visit(c);
    out.push_back(id);
  };
  visit(root);
  return out;
}

NodeId QueryGraph::next_id() const {
  NodeId next = 0;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

NodeId GraphBuilder::add(OperatorAttrs attrs, std::vector<NodeId> children) {
  const NodeId id = next_++;
  graph_.nodes.push_back({id, std::move(attrs)});
  for (NodeId c : children) graph_.edges.emplace_back(id, c);
  return id;
}

NodeId GraphBuilder::scan(std::string table, std::vector<std::string> columns) {
  std::sort(columns.begin(), columns.end());
  return add(ScanAttrs{std::move(table), std::move(columns)}, {});
}

NodeId GraphBuilder::filter(NodeId child, std::vector<RangePredicate> predicates) {
  return add(FilterAttrs{std::move(predicates)}, {child});
}

NodeId GraphBuilder::join(NodeId left, NodeId right, ColumnRef left_key, ColumnRef right_key) {
  return add(JoinAttrs{std::move(left_key), std::move(right_key)}, {left, right});
}

NodeId GraphBuilder::aggregate(NodeId child, std::vector<ColumnRef> group_by,
                               std::vector<AggregateFunction> functions) {
  return add(AggregateAttrs{std::move(group_by), std::move(functions)}, {child});
}

NodeId GraphBuilder::sort(NodeId child, std::vector<SortKey> keys) {
  return add(SortAttrs{std::move(keys)}, {child});
}

NodeId GraphBuilder::eval_scalar(NodeId child, ExprKind expr, ColumnRef input, int64_t repeat_count) {
  return add(EvalScalarAttrs{expr, std::move(input), repeat_count}, {child});
}

QueryGraph GraphBuilder::build(NodeId root) && {
  graph_.root = root;
  return std::move(graph_);
}

// ---------------------------------------------------------------------------
// Column availability

std::set<ColumnRef> available_columns(const QueryGraph& g, NodeId id) {
  const auto& n = g.node(id);
  const auto kids = g.children(id);
  switch (n.kind()) {
    case OperatorKind::Scan: {
      const auto& s = n.as<ScanAttrs>();
      std::set<ColumnRef> out;
      for (const auto& c : s.columns) out.insert({s.table, c});
      return out;
    }
    case OperatorKind::Join: {
      std::set<ColumnRef> out;
      for (NodeId c : kids) {
        auto part = available_columns(g, c);
        out.insert(part.begin(), part.end());
      }
      return out;
    }
    case OperatorKind::Aggregate: {
      const auto& a = n.as<AggregateAttrs>();
      return {a.group_by.begin(), a.group_by.end()};
    }
    default:
      return kids.empty() ? std::set<ColumnRef>{} : available_columns(g, kids.front());
  }
}

int64_t output_width(const QueryGraph& g, NodeId id) {
  const auto& n = g.node(id);
  const auto kids = g.children(id);
  switch (n.kind()) {
    case OperatorKind::Scan:
      return static_cast<int64_t>(n.as<ScanAttrs>().columns.size());
    case OperatorKind::Join: {
      int64_t w = 0;
      for (NodeId c : kids) w += output_width(g, c);
      return w;
    }
    case OperatorKind::Aggregate: {
      const auto& a = n.as<AggregateAttrs>();
      return static_cast<int64_t>(a.group_by.size() + a.functions.size());
    }
    case OperatorKind::EvalScalar:
      return output_width(g, kids.at(0)) + n.as<EvalScalarAttrs>().repeat_count;
    default:
      return kids.empty() ? 0 : output_width(g, kids.front());
  }
}

namespace {

bool is_core_kind(OperatorKind k) {
  return k == OperatorKind::Scan || k == OperatorKind::Filter || k == OperatorKind::Join;
}

}  // namespace

NodeId core_top(const QueryGraph& g) {
  NodeId id = g.root;
  while (!is_core_kind(g.node(id).kind())) {
    const auto kids = g.children(id);
    if (kids.empty()) throw ValidationError("graph has no scan core");
    id = kids.front();
  }
  return id;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate(const QueryGraph& g, const Catalog& catalog) {
  std::vector<std::string> v;
  std::set<NodeId> ids;
  for (const auto& n : g.nodes) {
    if (!ids.insert(n.id).second) v.push_back("duplicate node id " + std::to_string(n.id));
  }
  for (const auto& [p, c] : g.edges) {
    if (!ids.count(p) || !ids.count(c)) v.push_back("edge references a missing node");
  }
  if (!ids.count(g.root)) v.push_back("root is not a node");
  if (!v.empty()) return v;

  std::map<NodeId, int> parents;
  for (const auto& [p, c] : g.edges) ++parents[c];
  int roots = 0;
  for (const auto& n : g.nodes) {
    if (parents[n.id] == 0) ++roots;
    if (parents[n.id] > 1) v.push_back("node " + std::to_string(n.id) + " has more than one parent");
  }
  if (roots != 1 || parents[g.root] != 0) v.push_back("graph must have exactly one root");

  // Cycle detection: colour-based DFS from every node.
  std::map<NodeId, int> colour;
  bool cyclic = false;
  std::function<void(NodeId)> dfs = [&](NodeId id) {
    colour[id] = 1;
    for (NodeId c : g.children(id)) {
      if (colour[c] == 1) cyclic = true;
      else if (colour[c] == 0) dfs(c);
    }
    colour[id] = 2;
  };
  for (const auto& n : g.nodes) {
    if (colour[n.id] == 0) dfs(n.id);
  }
  if (cyclic) v.push_back("not acyclic");
  if (!v.empty()) return v;

  if (g.post_order().size() != g.nodes.size()) v.push_back("node unreachable from root");

  std::set<std::string> scanned_tables;
  std::map<std::string, std::string> bare_names;
  for (const auto& n : g.nodes) {
    const auto kids = g.children(n.id);
    const std::string where = std::string(to_string(n.kind())) + " " + std::to_string(n.id);
    auto child_kind = [&](size_t i) { return g.node(kids[i]).kind(); };
    switch (n.kind()) {
      case OperatorKind::Scan: {
        if (!kids.empty()) v.push_back(where + ": scan arity");
        const auto& s = n.as<ScanAttrs>();
        const auto* t = catalog.find_table(s.table);
        if (!t) {
          v.push_back(where + ": unknown table '" + s.table + "'");
          break;
        }
        if (!scanned_tables.insert(s.table).second) v.push_back(where + ": table scanned twice");
        if (s.columns.empty()) v.push_back(where + ": empty column set");
        std::set<std::string> uniq(s.columns.begin(), s.columns.end());
        if (uniq.size() != s.columns.size()) v.push_back(where + ": duplicate column");
        for (const auto& c : s.columns) {
          if (!t->find_column(c)) v.push_back(where + ": unknown column '" + s.table + "." + c + "'");
          auto [it, fresh] = bare_names.emplace(c, s.table);
          if (!fresh && it->second != s.table) v.push_back(where + ": ambiguous column name '" + c + "'");
        }
        break;
      }
      case OperatorKind::Join: {
        if (kids.size() != 2) {
          v.push_back(where + ": join arity");
          break;
        }
        for (size_t i = 0; i < 2; ++i) {
          if (!is_core_kind(child_kind(i))) v.push_back(where + ": join input must be a scan, filter or join");
        }
        const auto& j = n.as<JoinAttrs>();
        const auto left = available_columns(g, kids[0]);
        const auto right = available_columns(g, kids[1]);
        if (!left.count(j.left_key)) v.push_back(where + ": left key not available from left input");
        if (!right.count(j.right_key)) v.push_back(where + ": right key not available from right input");
        const auto* lk = catalog.find_column(j.left_key);
        const auto* rk = catalog.find_column(j.right_key);
        if (lk && rk && lk->value_kind != rk->value_kind) v.push_back(where + ": join key kinds differ");
        break;
      }
      case OperatorKind::Filter: {
        if (kids.size() != 1) {
          v.push_back(where + ": filter arity");
          break;
        }
        if (child_kind(0) != OperatorKind::Scan) v.push_back(where + ": filter must sit directly above a scan");
        const auto& f = n.as<FilterAttrs>();
        if (f.predicates.empty()) v.push_back(where + ": filter without predicates");
        const auto avail = available_columns(g, kids[0]);
        for (const auto& p : f.predicates) {
          if (!avail.count(p.column)) {
            v.push_back(where + ": predicate column '" + p.column.str() + "' not selected by the scan");
            continue;
          }
          const auto* c = catalog.find_column(p.column);
          if (!c || !is_numeric(c->value_kind)) {
            v.push_back(where + ": predicate on non-range column '" + p.column.str() + "'");
          } else if (c->value_kind != p.literal.kind) {
            v.push_back(where + ": literal kind does not match '" + p.column.str() + "'");
          }
        }
        break;
      }
      case OperatorKind::EvalScalar: {
        if (kids.size() != 1) {
          v.push_back(where + ": evalscalar arity");
          break;
        }
        if (!is_core_kind(child_kind(0)) && child_kind(0) != OperatorKind::EvalScalar) {
          v.push_back(where + ": evalscalar must sit above the join core");
        }
        const auto& e = n.as<EvalScalarAttrs>();
        if (e.repeat_count < 1) v.push_back(where + ": repeat_count < 1");
        if (!available_columns(g, kids[0]).count(e.input)) {
          v.push_back(where + ": input column '" + e.input.str() + "' not available");
          break;
        }
        const auto* c = catalog.find_column(e.input);
        if (c && e.expr == ExprKind::Arith &&
            c->value_kind != ValueKind::Integer && c->value_kind != ValueKind::Decimal) {
          v.push_back(where + ": arith expression needs an integer or decimal column");
        }
        if (c && e.expr == ExprKind::Date && c->value_kind != ValueKind::Date) {
          v.push_back(where + ": date expression needs a date column");
        }
        break;
      }
      case OperatorKind::Aggregate: {
        if (kids.size() != 1) {
          v.push_back(where + ": aggregate arity");
          break;
        }
        if (child_kind(0) == OperatorKind::Sort) v.push_back(where + ": aggregate above a sort");
        const auto& a = n.as<AggregateAttrs>();
        const auto avail = available_columns(g, kids[0]);
        if (a.group_by.empty()) v.push_back(where + ": empty group-by");
        if (a.functions.empty()) v.push_back(where + ": no aggregate functions");
        for (const auto& c : a.group_by) {
          if (!avail.count(c)) v.push_back(where + ": group column '" + c.str() + "' not available");
        }
        for (const auto& f : a.functions) {
          if (f.kind == AggregateFunction::Kind::Count) {
            if (f.column) v.push_back(where + ": count takes no column");
            continue;
          }
          if (!f.column || !avail.count(*f.column)) {
            v.push_back(where + ": sum column not available");
            continue;
          }
          const auto* c = catalog.find_column(*f.column);
          if (c && c->value_kind != ValueKind::Integer && c->value_kind != ValueKind::Decimal) {
            v.push_back(where + ": sum over a non-numeric column");
          }
        }
        break;
      }
      case OperatorKind::Sort: {
        if (kids.size() != 1) {
          v.push_back(where + ": sort arity");
          break;
        }
        const auto& s = n.as<SortAttrs>();
        if (s.keys.empty()) v.push_back(where + ": sort without keys");
        const auto avail = available_columns(g, kids[0]);
        for (const auto& k : s.keys) {
          if (!avail.count(k.column)) v.push_back(where + ": sort key '" + k.column.str() + "' not available");
        }
        break;
      }
    }
  }
  return v;
}

void require_valid(const QueryGraph& g, const Catalog& catalog) {
  const auto violations = validate(g, catalog);
  if (violations.empty()) return;
  std::string msg = "invalid query graph:";
  for (const auto& s : violations) msg += " [" + s + "]";
  throw ValidationError(msg);
}

StructuralCounts structural_counts(const QueryGraph& g) {
  StructuralCounts c;
  for (const auto& n : g.nodes) {
    switch (n.kind()) {
      case OperatorKind::Scan:
        ++c.tables;
        break;
      case OperatorKind::Join:
        ++c.joins;
        break;
      case OperatorKind::Aggregate:
        ++c.aggregates;
        break;
      case OperatorKind::Sort:
        ++c.sorts;
        break;
      default:
        break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Canonical form

namespace {

char literal_tag(ValueKind kind) {
  switch (kind) {
    case ValueKind::Integer:
      return 'i';
    case ValueKind::Decimal:
      return 'f';
    case ValueKind::Date:
      return 'd';
    case ValueKind::Text:
      break;
  }
  throw std::logic_error("text literal");
}

std::string literal_text(const Literal& lit, bool parameterized) {
  if (parameterized) return "?";
  return std::string(1, literal_tag(lit.kind)) + ":" + format_value(lit.kind, lit.value);
}

Literal parse_literal(std::string_view text) {
  if (text == "?") return {ValueKind::Integer, std::numeric_limits<double>::quiet_NaN()};
  if (text.size() < 3 || text[1] != ':') throw ParseError("malformed literal '" + std::string(text) + "'");
  ValueKind kind;
  switch (text[0]) {
    case 'i':
      kind = ValueKind::Integer;
      break;
    case 'f':
      kind = ValueKind::Decimal;
      break;
    case 'd':
      kind = ValueKind::Date;
      break;
    default:
      throw ParseError("unknown literal tag in '" + std::string(text) + "'");
  }
  return {kind, parse_value(kind, text.substr(2))};
}

std::string function_text(const AggregateFunction& f) {
  if (f.kind == AggregateFunction::Kind::Count) return "count";
  return "sum(" + f.column->str() + ")";
}

std::string join_strings(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::set<std::string> subtree_tables(const QueryGraph& g, NodeId id) {
  std::set<std::string> out;
  std::function<void(NodeId)> visit = [&](NodeId n) {
    const auto& node = g.node(n);
    if (node.kind() == OperatorKind::Scan) out.insert(node.as<ScanAttrs>().table);
    for (NodeId c : g.children(n)) visit(c);
  };
  visit(id);
  return out;
}

/// Attribute text for a node. For joins the keys are listed in the order of
/// `ordered_children`.
std::string attr_text(const QueryGraph& g, const OperatorNode& n, bool parameterized,
                      const std::vector<NodeId>& ordered_children) {
  switch (n.kind()) {
    case OperatorKind::Scan: {
      const auto& s = n.as<ScanAttrs>();
      auto cols = s.columns;
      std::sort(cols.begin(), cols.end());
      return "table=" + s.table + " cols=" + join_strings(cols, ",");
    }
    case OperatorKind::Filter: {
      std::vector<std::string> preds;
      for (const auto& p : n.as<FilterAttrs>().predicates) {
        preds.push_back("pred=" + p.column.str() + "<=" + literal_text(p.literal, parameterized));
      }
      std::sort(preds.begin(), preds.end());
      return join_strings(preds, " ");
    }
    case OperatorKind::Join: {
      const auto& j = n.as<JoinAttrs>();
      ColumnRef first = j.left_key, second = j.right_key;
      if (!ordered_children.empty() && !subtree_tables(g, ordered_children.front()).count(first.table)) {
        std::swap(first, second);
      }
      return "keys=" + first.str() + "=" + second.str();
    }
    case OperatorKind::Aggregate: {
      const auto& a = n.as<AggregateAttrs>();
      std::vector<std::string> group, funcs;
      for (const auto& c : a.group_by) group.push_back(c.str());
      for (const auto& f : a.functions) funcs.push_back(function_text(f));
      std::sort(group.begin(), group.end());
      std::sort(funcs.begin(), funcs.end());
      return "group=" + join_strings(group, ",") + " funcs=" + join_strings(funcs, ",");
    }
    case OperatorKind::Sort: {
      std::vector<std::string> keys;
      for (const auto& k : n.as<SortAttrs>().keys) {
        keys.push_back(k.column.str() + (k.ascending ? ":asc" : ":desc"));
      }
      return "keys=" + join_strings(keys, ",");
    }
    case OperatorKind::EvalScalar: {
      const auto& e = n.as<EvalScalarAttrs>();
      return "expr=" + std::string(to_string(e.expr)) + " col=" + e.input.str() +
             " repeat=" + std::to_string(e.repeat_count);
    }
  }
  return {};
}

struct CanonicalBuilder {
  const QueryGraph& g;
  bool parameterized;
  std::map<NodeId, std::string> subtree;
  std::map<NodeId, std::vector<NodeId>> ordered;

  const std::string& visit(NodeId id) {
    if (auto it = subtree.find(id); it != subtree.end()) return it->second;
    auto kids = g.children(id);
    for (NodeId c : kids) visit(c);
    if (g.node(id).kind() == OperatorKind::Join) {
      std::stable_sort(kids.begin(), kids.end(),
                       [&](NodeId a, NodeId b) { return subtree.at(a) < subtree.at(b); });
    }
    ordered[id] = kids;
    std::string text = std::string(to_string(g.node(id).kind())) + "{" +
                       attr_text(g, g.node(id), parameterized, kids) + "}(";
    for (size_t i = 0; i < kids.size(); ++i) {
      if (i) text += "|";
      text += subtree.at(kids[i]);
    }
    text += ")";
    return subtree[id] = std::move(text);
  }
};

}  // namespace

std::string canonical_form(const QueryGraph& g, bool parameterized) {
  CanonicalBuilder cb{g, parameterized, {}, {}};
  cb.visit(g.root);

  std::map<NodeId, int> canon_id;
  std::vector<NodeId> order;
  std::function<void(NodeId)> number = [&](NodeId id) {
    if (canon_id.count(id)) return;
    for (NodeId c : cb.ordered.at(id)) number(c);
    canon_id[id] = static_cast<int>(order.size());
    order.push_back(id);
  };
  number(g.root);

  std::ostringstream out;
  for (NodeId id : order) {
    const auto& n = g.node(id);
    out << 'n' << canon_id[id] << ' ' << to_string(n.kind());
    const auto attrs = attr_text(g, n, parameterized, cb.ordered.at(id));
    if (!attrs.empty()) out << ' ' << attrs;
    out << '\n';
  }
  out << "edges\n";
  for (NodeId id : order) {
    for (NodeId c : cb.ordered.at(id)) out << 'n' << canon_id[id] << " n" << canon_id[c] << '\n';
  }
  out << "root n" << canon_id[g.root] << '\n';
  return out.str();
}

namespace {

NodeId parse_node_token(std::string_view tok) {
  if (tok.size() < 2 || tok[0] != 'n') throw ParseError("malformed node id '" + std::string(tok) + "'");
  return static_cast<NodeId>(parse_int(tok.substr(1)));
}

std::vector<ColumnRef> parse_column_list(const std::string& text) {
  std::vector<ColumnRef> out;
  if (text.empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(ColumnRef::parse(part));
  return out;
}

}  // namespace

QueryGraph parse_graph(std::string_view text) {
  QueryGraph g;
  enum { Nodes, Edges, Done } state = Nodes;
  bool have_root = false;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (state == Nodes && line == "edges") {
      state = Edges;
      continue;
    }
    std::istringstream in{std::string(line)};
    std::string first, second;
    in >> first >> second;
    if (first == "root") {
      g.root = parse_node_token(second);
      have_root = true;
      state = Done;
      continue;
    }
    if (state == Edges) {
      g.edges.emplace_back(parse_node_token(first), parse_node_token(second));
      continue;
    }
    if (state == Done) throw ParseError("content after root line");

    OperatorNode n;
    n.id = parse_node_token(first);
    const auto kind = operator_kind_from_string(second);
    std::string rest;
    std::getline(in, rest);
    const auto kv = parse_key_values(rest);
    switch (kind) {
      case OperatorKind::Scan: {
        ScanAttrs s;
        s.table = kv.require("table");
        const auto cols = kv.require("cols");
        if (!cols.empty()) s.columns = split(cols, ',');
        n.attrs = std::move(s);
        break;
      }
      case OperatorKind::Filter: {
        FilterAttrs f;
        for (const auto& p : kv.all("pred")) {
          const auto le = p.find("<=");
          if (le == std::string::npos) throw ParseError("malformed predicate '" + p + "'");
          f.predicates.push_back({ColumnRef::parse(p.substr(0, le)), parse_literal(p.substr(le + 2))});
        }
        n.attrs = std::move(f);
        break;
      }
      case OperatorKind::Join: {
        const auto keys = kv.require("keys");
        const auto eq = keys.find('=');
        if (eq == std::string::npos) throw ParseError("malformed join keys '" + keys + "'");
        n.attrs = JoinAttrs{ColumnRef::parse(keys.substr(0, eq)), ColumnRef::parse(keys.substr(eq + 1))};
        break;
      }
      case OperatorKind::Aggregate: {
        AggregateAttrs a;
        a.group_by = parse_column_list(kv.require("group"));
        const auto funcs = kv.require("funcs");
        if (!funcs.empty()) {
          for (const auto& f : split(funcs, ',')) {
            if (f == "count") {
              a.functions.push_back({AggregateFunction::Kind::Count, std::nullopt});
            } else if (starts_with(f, "sum(") && f.back() == ')') {
              a.functions.push_back({AggregateFunction::Kind::Sum, ColumnRef::parse(f.substr(4, f.size() - 5))});
            } else {
              throw ParseError("unknown aggregate function '" + f + "'");
            }
          }
        }
        n.attrs = std::move(a);
        break;
      }
      case OperatorKind::Sort: {
        SortAttrs s;
        for (const auto& k : split(kv.require("keys"), ',')) {
          const auto colon = k.rfind(':');
          if (colon == std::string::npos) throw ParseError("malformed sort key '" + k + "'");
          const auto dir = k.substr(colon + 1);
          if (dir != "asc" && dir != "desc") throw ParseError("bad sort direction '" + dir + "'");
          s.keys.push_back({ColumnRef::parse(k.substr(0, colon)), dir == "asc"});
        }
        n.attrs = std::move(s);
        break;
      }
      case OperatorKind::EvalScalar: {
        n.attrs = EvalScalarAttrs{expr_kind_from_string(kv.require("expr")), ColumnRef::parse(kv.require("col")),
                                  parse_int(kv.require("repeat"))};
        break;
      }
    }
    g.nodes.push_back(std::move(n));
  }
  if (!have_root) throw ParseError("graph text has no root line");
  return g;
}

uint64_t graph_hash(const QueryGraph& g, bool parameterized) {
  return fnv1a64(canonical_form(g, parameterized));
}

// ---------------------------------------------------------------------------
// Editing helpers

std::optional<NodeId> scan_of(const QueryGraph& g, std::string_view table) {
  for (const auto& n : g.nodes) {
    if (n.kind() == OperatorKind::Scan && n.as<ScanAttrs>().table == table) return n.id;
  }
  return std::nullopt;
}

QueryGraph strip_filters(const QueryGraph& g) {
  QueryGraph out = g;
  for (const auto& n : g.nodes) {
    if (n.kind() != OperatorKind::Filter) continue;
    const NodeId child = g.children(n.id).at(0);
    for (auto& [p, c] : out.edges) {
      if (c == n.id) c = child;
    }
    std::erase_if(out.edges, [&](const auto& e) { return e.first == n.id; });
    if (out.root == n.id) out.root = child;
  }
  std::erase_if(out.nodes, [](const OperatorNode& n) { return n.kind() == OperatorKind::Filter; });
  return out;
}

QueryGraph with_filter(const QueryGraph& g, const std::string& table, std::vector<RangePredicate> predicates) {
  QueryGraph out = g;
  const auto scan = scan_of(out, table);
  if (!scan) throw ValidationError("graph does not scan '" + table + "'");
  const auto parent = out.parent(*scan);
  auto by_column = [](const RangePredicate& a, const RangePredicate& b) { return a.column < b.column; };
  if (parent && out.node(*parent).kind() == OperatorKind::Filter) {
    auto& preds = out.node(*parent).as<FilterAttrs>().predicates;
    preds.insert(preds.end(), predicates.begin(), predicates.end());
    std::stable_sort(preds.begin(), preds.end(), by_column);
    return out;
  }
  std::stable_sort(predicates.begin(), predicates.end(), by_column);
  const NodeId id = out.next_id();
  out.nodes.push_back({id, FilterAttrs{std::move(predicates)}});
  if (parent) {
    for (auto& [p, c] : out.edges) {
      if (p == *parent && c == *scan) c = id;
    }
  } else {
    out.root = id;
  }
  out.edges.emplace_back(id, *scan);
  return out;
}

std::vector<ColumnRef> rank_group_columns(const Catalog& catalog, const std::set<ColumnRef>& columns) {
  std::vector<ColumnRef> out(columns.begin(), columns.end());
  std::stable_sort(out.begin(), out.end(), [&](const ColumnRef& a, const ColumnRef& b) {
    const auto da = catalog.column(a).distinct_count;
    const auto db = catalog.column(b).distinct_count;
    if (da != db) return da < db;
    return a.str() < b.str();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Random graphs

QueryGraph sample_random_graph(const Catalog& catalog, const SampleBounds& bounds, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  auto pick = [&](size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng); };

  std::vector<int> feasible_joins;
  for (int j = 0; j <= bounds.max_joins; ++j) {
    if (!connected_table_subsets(catalog, j + 1).empty()) feasible_joins.push_back(j);
  }
  if (feasible_joins.empty()) throw ValidationError("catalog has no tables");
  const int joins = feasible_joins[pick(feasible_joins.size())];
  const auto sets = connected_table_subsets(catalog, joins + 1);
  const auto tables = sets[pick(sets.size())];
  const auto edges = spanning_join_edges(catalog, tables);

  GraphBuilder b;
  std::map<std::string, NodeId> input;
  for (const auto& t : tables) {
    const auto& stats = catalog.table(t);
    std::set<std::string> cols;
    for (const auto& e : edges) {
      if (e.a.table == t) cols.insert(e.a.column);
      if (e.b.table == t) cols.insert(e.b.column);
    }
    for (const auto& c : stats.columns) {
      if (coin(0.5)) cols.insert(c.name);
    }
    if (cols.empty()) cols.insert(stats.columns[pick(stats.columns.size())].name);
    NodeId node = b.scan(t, {cols.begin(), cols.end()});

    if (coin(bounds.filter_probability)) {
      std::vector<const ColumnStats*> eligible;
      for (const auto& c : cols) {
        const auto* s = stats.find_column(c);
        if (is_numeric(s->value_kind) && *s->min_value < *s->max_value) eligible.push_back(s);
      }
      std::shuffle(eligible.begin(), eligible.end(), rng);
      const size_t n_preds = std::min<size_t>(eligible.size(), 1 + pick(2));
      std::vector<RangePredicate> preds;
      for (size_t i = 0; i < n_preds; ++i) {
        const auto* s = eligible[i];
        const double lo = *s->min_value - value_step(s->value_kind);
        const double x = std::uniform_real_distribution<double>(lo, *s->max_value)(rng);
        preds.push_back({{t, s->name}, {s->value_kind, quantize_value(s->value_kind, x)}});
      }
      if (!preds.empty()) {
        std::sort(preds.begin(), preds.end(),
                  [](const RangePredicate& a, const RangePredicate& c) { return a.column < c.column; });
        node = b.filter(node, std::move(preds));
      }
    }
    input[t] = node;
  }

  NodeId top = input[tables.front()];
  for (const auto& e : edges) top = b.join(top, input[e.b.table], e.a, e.b);

  std::set<ColumnRef> avail = available_columns(GraphBuilder(b).build(top), top);

  if (coin(bounds.eval_probability)) {
    std::vector<std::pair<ExprKind, ColumnRef>> options;
    for (const auto& c : avail) {
      const auto kind = catalog.column(c).value_kind;
      options.emplace_back(ExprKind::String, c);
      if (kind == ValueKind::Integer || kind == ValueKind::Decimal) options.emplace_back(ExprKind::Arith, c);
      if (kind == ValueKind::Date) options.emplace_back(ExprKind::Date, c);
    }
    // Kind first, so rarer kinds (date) are not drowned out by column counts.
    std::vector<ExprKind> kinds;
    for (const auto& o : options) {
      if (std::find(kinds.begin(), kinds.end(), o.first) == kinds.end()) kinds.push_back(o.first);
    }
    const ExprKind chosen = kinds[pick(kinds.size())];
    std::erase_if(options, [&](const auto& o) { return o.first != chosen; });
    const auto& [expr, col] = options[pick(options.size())];
    const auto repeat = std::uniform_int_distribution<int64_t>(1, std::max(1, bounds.max_eval_repeat))(rng);
    top = b.eval_scalar(top, expr, col, repeat);
  }

  const int aggs = static_cast<int>(pick(static_cast<size_t>(bounds.max_aggs) + 1));
  if (aggs > 0) {
    std::vector<ColumnRef> order(avail.begin(), avail.end());
    std::shuffle(order.begin(), order.end(), rng);
    const int width = std::min<int>(aggs, static_cast<int>(order.size()));
    std::set<ColumnRef> current = avail;
    for (int level = 0; level < aggs; ++level) {
      const int keep = std::max(1, width - level);
      std::vector<ColumnRef> group(order.begin(), order.begin() + keep);
      std::vector<AggregateFunction> funcs{{AggregateFunction::Kind::Count, std::nullopt}};
      std::vector<ColumnRef> summable;
      for (const auto& c : current) {
        const auto kind = catalog.column(c).value_kind;
        if (kind == ValueKind::Integer || kind == ValueKind::Decimal) summable.push_back(c);
      }
      if (!summable.empty() && coin(0.5)) {
        funcs.push_back({AggregateFunction::Kind::Sum, summable[pick(summable.size())]});
      }
      top = b.aggregate(top, group, funcs);
      current = {group.begin(), group.end()};
    }
    avail = current;
  }

  const int sorts = static_cast<int>(pick(static_cast<size_t>(bounds.max_sorts) + 1));
  for (int i = 0; i < sorts; ++i) {
    std::vector<ColumnRef> cols(avail.begin(), avail.end());
    top = b.sort(top, {{cols[pick(cols.size())], coin(0.5)}});
  }
  return std::move(b).build(top);
}

}  // namespace tracesynth
