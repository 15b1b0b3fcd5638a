#include "tracesynth/translator.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>

namespace tracesynth {

std::string sql_literal(const Literal& literal) {
  if (literal.kind == ValueKind::Date) return "'" + format_value(literal.kind, literal.value) + "'";
  return format_value(literal.kind, literal.value);
}

// ---------------------------------------------------------------------------
// Emission

namespace {

std::string join_list(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

std::string eval_expression(ExprKind kind, const std::string& ref) {
  switch (kind) {
    case ExprKind::Arith:
      return "(" + ref + " * 1.0001 + 1)";
    case ExprKind::String:
      return "UPPER(CAST(" + ref + " AS VARCHAR))";
    case ExprKind::Date:
      return "EXTRACT(DAY FROM " + ref + ")";
  }
  return {};
}

struct Block {
  std::vector<std::string> select;
  std::string from;
  std::vector<std::string> where;
  std::vector<std::string> group_by;
  std::vector<std::string> order_by;

  std::string str() const {
    std::string out = "SELECT " + join_list(select) + " FROM " + from;
    if (!where.empty()) {
      out += " WHERE ";
      for (size_t i = 0; i < where.size(); ++i) out += (i ? " AND " : "") + where[i];
    }
    if (!group_by.empty()) out += " GROUP BY " + join_list(group_by);
    if (!order_by.empty()) out += " ORDER BY " + join_list(order_by);
    return out;
  }
};

struct Emitter {
  const QueryGraph& g;
  bool single_table = false;

  std::string core_ref(const ColumnRef& c) const { return single_table ? c.column : c.str(); }

  std::string join_expr(NodeId id) const {
    const auto& n = g.node(id);
    const auto kids = g.children(id);
    switch (n.kind()) {
      case OperatorKind::Scan:
        return n.as<ScanAttrs>().table;
      case OperatorKind::Filter:
        return join_expr(kids[0]);
      case OperatorKind::Join: {
        const auto& j = n.as<JoinAttrs>();
        std::string right = join_expr(kids[1]);
        if (g.node(kids[1]).kind() == OperatorKind::Join) right = "(" + right + ")";
        return join_expr(kids[0]) + " INNER JOIN " + right + " ON " + core_ref(j.left_key) + " = " +
               core_ref(j.right_key);
      }
      default:
        throw ValidationError("unexpected node in join core");
    }
  }
};

}  // namespace

std::string to_sql(const QueryGraph& g) {
  Emitter em{g};
  const NodeId core = core_top(g);
  std::vector<NodeId> core_nodes;
  for (NodeId id : g.post_order()) {
    const auto k = g.node(id).kind();
    if (k == OperatorKind::Scan || k == OperatorKind::Filter || k == OperatorKind::Join) core_nodes.push_back(id);
  }
  em.single_table = structural_counts(g).tables == 1;

  Block block;
  for (NodeId id : core_nodes) {
    const auto& n = g.node(id);
    if (n.kind() == OperatorKind::Scan) {
      const auto& s = n.as<ScanAttrs>();
      auto cols = s.columns;
      std::sort(cols.begin(), cols.end());
      for (const auto& c : cols) block.select.push_back(em.core_ref({s.table, c}));
    } else if (n.kind() == OperatorKind::Filter) {
      for (const auto& p : n.as<FilterAttrs>().predicates) {
        block.where.push_back(em.core_ref(p.column) + " <= " + sql_literal(p.literal));
      }
    }
  }
  block.from = em.join_expr(core);

  // Unary chain above the core, bottom-up.
  std::vector<NodeId> chain;
  for (NodeId id = g.root; id != core; id = g.children(id).at(0)) chain.push_back(id);
  std::reverse(chain.begin(), chain.end());

  bool in_core = true;
  int eval_index = 0;
  int alias = 0;
  for (NodeId id : chain) {
    const auto& n = g.node(id);
    switch (n.kind()) {
      case OperatorKind::EvalScalar: {
        const auto& e = n.as<EvalScalarAttrs>();
        ++eval_index;
        for (int64_t j = 1; j <= e.repeat_count; ++j) {
          block.select.push_back(eval_expression(e.expr, em.core_ref(e.input)) + " AS es" +
                                 std::to_string(eval_index) + "_" + std::to_string(j));
        }
        break;
      }
      case OperatorKind::Aggregate: {
        const auto& a = n.as<AggregateAttrs>();
        ++alias;
        Block outer;
        outer.from = "(" + block.str() + ") AS t" + std::to_string(alias);
        for (const auto& c : a.group_by) {
          outer.select.push_back(c.column);
          outer.group_by.push_back(c.column);
        }
        for (size_t i = 0; i < a.functions.size(); ++i) {
          const auto& f = a.functions[i];
          const std::string name = "agg" + std::to_string(alias) + "_" + std::to_string(i + 1);
          outer.select.push_back(f.kind == AggregateFunction::Kind::Count ? "COUNT(*) AS " + name
                                                                          : "SUM(" + f.column->column + ") AS " + name);
        }
        block = std::move(outer);
        in_core = false;
        break;
      }
      case OperatorKind::Sort: {
        const auto& s = n.as<SortAttrs>();
        if (!block.order_by.empty()) {
          ++alias;
          Block outer;
          outer.select = {"*"};
          outer.from = "(" + block.str() + ") AS t" + std::to_string(alias);
          block = std::move(outer);
          in_core = false;
        }
        for (const auto& k : s.keys) {
          block.order_by.push_back((in_core ? em.core_ref(k.column) : k.column.column) +
                                   (k.ascending ? " ASC" : " DESC"));
        }
        break;
      }
      default:
        throw ValidationError("unexpected operator above the join core");
    }
  }
  return block.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok { Ident, Number, String, Symbol, End };

struct Token {
  Tok type;
  std::string text;
};

std::vector<Token> tokenize(const std::string& sql) {
  std::vector<Token> out;
  size_t i = 0;
  auto fail = [&](const std::string& why) { throw ParseError("out-of-subset SQL: " + why); };
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[j])) || sql[j] == '_' || sql[j] == '.')) {
        ++j;
      }
      out.push_back({Tok::Ident, sql.substr(i, j - i)});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < sql.size() && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      size_t j = i + 1;
      while (j < sql.size() && (std::isdigit(static_cast<unsigned char>(sql[j])) || sql[j] == '.')) ++j;
      out.push_back({Tok::Number, sql.substr(i, j - i)});
      i = j;
    } else if (c == '\'') {
      const size_t end = sql.find('\'', i + 1);
      if (end == std::string::npos) fail("unterminated string");
      out.push_back({Tok::String, sql.substr(i + 1, end - i - 1)});
      i = end + 1;
    } else if (c == '<' && i + 1 < sql.size() && sql[i + 1] == '=') {
      out.push_back({Tok::Symbol, "<="});
      i += 2;
    } else if (std::string_view("(),*=+;").find(c) != std::string_view::npos) {
      out.push_back({Tok::Symbol, std::string(1, c)});
      ++i;
    } else {
      fail(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, ""});
  return out;
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

/// Bare column name -> qualified reference, for columns visible from a node.
using Scope = std::map<std::string, ColumnRef>;

struct JoinTree {
  std::string table;  // leaf when non-empty
  std::unique_ptr<JoinTree> left, right;
  std::string left_key, right_key;
};

struct SelectItem {
  enum class Kind { Star, Column, Count, Sum, Eval } kind;
  std::string ref;
  ExprKind expr = ExprKind::Arith;
  int eval_node = 0;
};

struct Parsed {
  NodeId top;
  Scope scope;
};

class SqlParser {
 public:
  explicit SqlParser(const std::string& sql) : toks_(tokenize(sql)) {}

  QueryGraph parse() {
    const auto result = select();
    if (peek_symbol(";")) ++pos_;
    if (toks_[pos_].type != Tok::End) fail("trailing input '" + toks_[pos_].text + "'");
    return std::move(builder_).build(result.top);
  }

 private:
  [[noreturn]] void fail(const std::string& why) const { throw ParseError("out-of-subset SQL: " + why); }

  const Token& peek() const { return toks_[pos_]; }
  bool peek_keyword(std::string_view kw, size_t ahead = 0) const {
    const auto& t = toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    return t.type == Tok::Ident && upper(t.text) == kw;
  }
  bool peek_symbol(std::string_view s, size_t ahead = 0) const {
    const auto& t = toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    return t.type == Tok::Symbol && t.text == s;
  }
  void expect_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail("expected " + std::string(kw) + " near '" + peek().text + "'");
    ++pos_;
  }
  void expect_symbol(std::string_view s) {
    if (!peek_symbol(s)) fail("expected '" + std::string(s) + "' near '" + peek().text + "'");
    ++pos_;
  }
  std::string ident() {
    if (peek().type != Tok::Ident) fail("expected identifier near '" + peek().text + "'");
    static const std::set<std::string> reserved = {"SELECT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "AS",
                                                   "INNER", "JOIN", "ON", "AND", "ASC", "DESC", "OVER"};
    if (reserved.count(upper(peek().text))) fail("unexpected keyword '" + peek().text + "'");
    return toks_[pos_++].text;
  }
  std::string alias_after_as() {
    expect_keyword("AS");
    return ident();
  }

  SelectItem select_item() {
    if (peek_symbol("*")) {
      ++pos_;
      return {SelectItem::Kind::Star, ""};
    }
    if (peek_keyword("COUNT") && peek_symbol("(", 1)) {
      pos_ += 2;
      expect_symbol("*");
      expect_symbol(")");
      alias_after_as();
      return {SelectItem::Kind::Count, ""};
    }
    if (peek_keyword("SUM") && peek_symbol("(", 1)) {
      pos_ += 2;
      auto ref = ident();
      expect_symbol(")");
      alias_after_as();
      return {SelectItem::Kind::Sum, ref};
    }
    if (peek_keyword("UPPER") && peek_symbol("(", 1)) {
      pos_ += 2;
      expect_keyword("CAST");
      expect_symbol("(");
      auto ref = ident();
      expect_keyword("AS");
      expect_keyword("VARCHAR");
      expect_symbol(")");
      expect_symbol(")");
      return eval_item(ExprKind::String, ref);
    }
    if (peek_keyword("EXTRACT") && peek_symbol("(", 1)) {
      pos_ += 2;
      expect_keyword("DAY");
      expect_keyword("FROM");
      auto ref = ident();
      expect_symbol(")");
      return eval_item(ExprKind::Date, ref);
    }
    if (peek_symbol("(")) {
      ++pos_;
      auto ref = ident();
      expect_symbol("*");
      if (peek().type != Tok::Number || peek().text != "1.0001") fail("unsupported arithmetic expression");
      ++pos_;
      expect_symbol("+");
      if (peek().type != Tok::Number || peek().text != "1") fail("unsupported arithmetic expression");
      ++pos_;
      expect_symbol(")");
      return eval_item(ExprKind::Arith, ref);
    }
    auto ref = ident();
    if (peek_symbol("(")) fail("unsupported function '" + ref + "'");
    return {SelectItem::Kind::Column, ref};
  }

  SelectItem eval_item(ExprKind kind, std::string ref) {
    const auto alias = alias_after_as();
    const auto underscore = alias.find('_');
    if (!starts_with(alias, "es") || underscore == std::string::npos) fail("unexpected expression alias " + alias);
    const int node = static_cast<int>(parse_int(alias.substr(2, underscore - 2)));
    return {SelectItem::Kind::Eval, std::move(ref), kind, node};
  }

  std::unique_ptr<JoinTree> join_atom() {
    if (peek_symbol("(")) {
      ++pos_;
      auto inner = join_expr();
      expect_symbol(")");
      return inner;
    }
    auto leaf = std::make_unique<JoinTree>();
    leaf->table = ident();
    if (leaf->table.find('.') != std::string::npos) fail("qualified table name");
    return leaf;
  }

  std::unique_ptr<JoinTree> join_expr() {
    auto left = join_atom();
    while (peek_keyword("INNER")) {
      ++pos_;
      expect_keyword("JOIN");
      auto right = join_atom();
      expect_keyword("ON");
      auto node = std::make_unique<JoinTree>();
      node->left_key = ident();
      expect_symbol("=");
      node->right_key = ident();
      node->left = std::move(left);
      node->right = std::move(right);
      left = std::move(node);
    }
    if (peek_keyword("JOIN") || peek_keyword("LEFT") || peek_keyword("RIGHT") || peek_keyword("CROSS")) {
      fail("only INNER JOIN is supported");
    }
    return left;
  }

  Literal literal() {
    const auto& t = peek();
    if (t.type == Tok::String) {
      ++pos_;
      return {ValueKind::Date, static_cast<double>(parse_date(t.text))};
    }
    if (t.type != Tok::Number) fail("expected a literal near '" + t.text + "'");
    ++pos_;
    if (t.text.find('.') != std::string::npos) return {ValueKind::Decimal, parse_double(t.text)};
    return {ValueKind::Integer, static_cast<double>(parse_int(t.text))};
  }

  static void collect_tables(const JoinTree& t, std::vector<std::string>& out) {
    if (!t.table.empty()) {
      out.push_back(t.table);
      return;
    }
    collect_tables(*t.left, out);
    collect_tables(*t.right, out);
  }

  ColumnRef resolve(const std::string& ref, const Scope& scope) const {
    if (ref.find('.') != std::string::npos) {
      auto c = ColumnRef::parse(ref);
      auto it = scope.find(c.column);
      if (it == scope.end() || it->second != c) fail("unknown column '" + ref + "'");
      return c;
    }
    auto it = scope.find(ref);
    if (it == scope.end()) fail("unknown column '" + ref + "'");
    return it->second;
  }

  std::vector<SortKey> order_by(const Scope& scope) {
    std::vector<SortKey> keys;
    expect_keyword("ORDER");
    expect_keyword("BY");
    do {
      if (peek_symbol(",")) ++pos_;
      SortKey k{resolve(ident(), scope), true};
      if (peek_keyword("ASC")) {
        ++pos_;
      } else if (peek_keyword("DESC")) {
        ++pos_;
        k.ascending = false;
      }
      keys.push_back(std::move(k));
    } while (peek_symbol(","));
    return keys;
  }

  Parsed select() {
    expect_keyword("SELECT");
    std::vector<SelectItem> items{select_item()};
    while (peek_symbol(",")) {
      ++pos_;
      items.push_back(select_item());
    }
    expect_keyword("FROM");
    if (peek_symbol("(") && peek_keyword("SELECT", 1)) {
      ++pos_;
      auto child = select();
      expect_symbol(")");
      alias_after_as();
      return wrapped(items, child);
    }
    return core(items);
  }

  Parsed core(const std::vector<SelectItem>& items) {
    auto tree = join_expr();
    std::vector<std::string> tables;
    collect_tables(*tree, tables);
    const bool single = tables.size() == 1;
    auto qualify = [&](const std::string& ref) -> ColumnRef {
      if (ref.find('.') != std::string::npos) {
        if (single) fail("qualified column in single-table query");
        auto c = ColumnRef::parse(ref);
        if (std::find(tables.begin(), tables.end(), c.table) == tables.end()) fail("unknown table in '" + ref + "'");
        return c;
      }
      if (!single) fail("unqualified column '" + ref + "' in multi-table query");
      return {tables.front(), ref};
    };

    std::map<std::string, std::vector<std::string>> scan_columns;
    std::map<int, std::vector<const SelectItem*>> evals;
    for (const auto& item : items) {
      if (item.kind == SelectItem::Kind::Column) {
        auto c = qualify(item.ref);
        scan_columns[c.table].push_back(c.column);
      } else if (item.kind == SelectItem::Kind::Eval) {
        evals[item.eval_node].push_back(&item);
      } else {
        fail("aggregate or * in the join block");
      }
    }

    std::map<std::string, std::vector<RangePredicate>> predicates;
    if (peek_keyword("WHERE")) {
      ++pos_;
      do {
        if (peek_keyword("AND")) ++pos_;
        auto col = qualify(ident());
        expect_symbol("<=");
        predicates[col.table].push_back({col, literal()});
      } while (peek_keyword("AND"));
    }
    if (peek_keyword("GROUP")) fail("GROUP BY in the join block");

    Scope scope;
    std::map<std::string, NodeId> inputs;
    for (const auto& t : tables) {
      if (inputs.count(t)) fail("table '" + t + "' appears twice");
      NodeId id = builder_.scan(t, scan_columns[t]);
      for (const auto& c : scan_columns[t]) scope.emplace(c, ColumnRef{t, c});
      if (auto it = predicates.find(t); it != predicates.end()) id = builder_.filter(id, it->second);
      inputs[t] = id;
    }
    for (const auto& [table, _] : predicates) {
      if (!inputs.count(table)) fail("predicate on unknown table '" + table + "'");
    }

    std::function<NodeId(const JoinTree&)> build = [&](const JoinTree& t) -> NodeId {
      if (!t.table.empty()) return inputs.at(t.table);
      const NodeId l = build(*t.left);
      const NodeId r = build(*t.right);
      return builder_.join(l, r, qualify(t.left_key), qualify(t.right_key));
    };
    NodeId top = build(*tree);

    int expected = 1;
    for (const auto& [index, group] : evals) {
      if (index != expected++) fail("expression aliases are not numbered consecutively");
      const auto* first = group.front();
      for (const auto* item : group) {
        if (item->expr != first->expr || item->ref != first->ref) fail("mixed expressions under one alias group");
      }
      top = builder_.eval_scalar(top, first->expr, qualify(first->ref), static_cast<int64_t>(group.size()));
    }

    if (peek_keyword("ORDER")) top = builder_.sort(top, order_by(scope));
    return {top, scope};
  }

  Parsed wrapped(const std::vector<SelectItem>& items, const Parsed& child) {
    if (peek_keyword("WHERE")) fail("WHERE above a derived table");
    Parsed out{child.top, child.scope};
    if (peek_keyword("GROUP")) {
      ++pos_;
      expect_keyword("BY");
      std::vector<ColumnRef> group{resolve(ident(), child.scope)};
      while (peek_symbol(",")) {
        ++pos_;
        group.push_back(resolve(ident(), child.scope));
      }
      std::vector<AggregateFunction> funcs;
      for (const auto& item : items) {
        switch (item.kind) {
          case SelectItem::Kind::Column: {
            auto c = resolve(item.ref, child.scope);
            if (std::find(group.begin(), group.end(), c) == group.end()) fail("ungrouped column " + item.ref);
            break;
          }
          case SelectItem::Kind::Count:
            funcs.push_back({AggregateFunction::Kind::Count, std::nullopt});
            break;
          case SelectItem::Kind::Sum:
            funcs.push_back({AggregateFunction::Kind::Sum, resolve(item.ref, child.scope)});
            break;
          default:
            fail("unsupported item in an aggregate block");
        }
      }
      out.top = builder_.aggregate(child.top, group, funcs);
      out.scope.clear();
      for (const auto& c : group) out.scope.emplace(c.column, c);
    } else {
      if (items.size() != 1 || items[0].kind != SelectItem::Kind::Star) fail("projection over a derived table");
      if (!peek_keyword("ORDER")) fail("derived table without GROUP BY or ORDER BY");
    }
    if (peek_keyword("ORDER")) out.top = builder_.sort(out.top, order_by(out.scope));
    return out;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  GraphBuilder builder_;
};

}  // namespace

QueryGraph parse_sql(const std::string& sql) { return SqlParser(sql).parse(); }

}  // namespace tracesynth
