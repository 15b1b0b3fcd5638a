#include "tracesynth/catalog.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

namespace tracesynth {

ColumnRef ColumnRef::parse(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
    throw ParseError("expected table.column, got '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

const ColumnStats* TableStats::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (c.name == column) return &c;
  }
  return nullptr;
}

const TableStats* Catalog::find_table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const TableStats& Catalog::table(std::string_view name) const {
  const auto* t = find_table(name);
  if (!t) throw ValidationError("unknown table '" + std::string(name) + "'");
  return *t;
}

const ColumnStats* Catalog::find_column(const ColumnRef& ref) const {
  const auto* t = find_table(ref.table);
  return t ? t->find_column(ref.column) : nullptr;
}

const ColumnStats& Catalog::column(const ColumnRef& ref) const {
  const auto* c = find_column(ref);
  if (!c) throw ValidationError("unknown column '" + ref.str() + "'");
  return *c;
}

void Catalog::validate() const {
  std::set<std::string> table_names;
  for (const auto& t : tables) {
    if (!table_names.insert(t.name).second) throw ValidationError("duplicate table '" + t.name + "'");
    if (t.row_count < 1) throw ValidationError("table '" + t.name + "' has row_count < 1");
    std::set<std::string> column_names;
    for (const auto& c : t.columns) {
      if (!column_names.insert(c.name).second) {
        throw ValidationError("duplicate column '" + t.name + "." + c.name + "'");
      }
      if (c.table != t.name) throw ValidationError("column '" + c.name + "' lists wrong table");
      if (c.bytes_per_value < 0 || c.scan_weight < 0) {
        throw ValidationError("negative weight on '" + t.name + "." + c.name + "'");
      }
      if (c.scan_weight != static_cast<double>(t.row_count) * c.bytes_per_value) {
        throw ValidationError("scan_weight != row_count * bytes_per_value on '" + t.name + "." +
                              c.name + "'");
      }
      if (c.distinct_count < 1) throw ValidationError("distinct_count < 1 on '" + c.name + "'");
      if (c.value_kind == ValueKind::Text) {
        if (c.min_value || c.max_value) throw ValidationError("text column with min/max");
      } else {
        if (!c.min_value || !c.max_value) throw ValidationError("numeric column missing min/max");
        if (*c.min_value > *c.max_value) throw ValidationError("min_value > max_value");
      }
    }
  }
  for (const auto& node : join_graph.nodes) {
    if (!find_table(node)) throw ValidationError("join graph node '" + node + "' is not a table");
  }
  for (const auto& e : join_graph.edges) {
    const auto* a = find_column(e.a);
    const auto* b = find_column(e.b);
    if (!a || !b) {
      throw ValidationError("join edge " + e.a.str() + "=" + e.b.str() + " names a missing column");
    }
    if (a->value_kind != b->value_kind) {
      throw ValidationError("join edge " + e.a.str() + "=" + e.b.str() + " has mismatched kinds");
    }
  }
}

const ColumnData* TableData::find_column(std::string_view column) const {
  for (const auto& c : columns) {
    if (c.name == column) return &c;
  }
  return nullptr;
}

const TableData& Dataset::table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw ValidationError("no data for table '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Catalog file

namespace {

std::string format_bound(ValueKind kind, double value) {
  return kind == ValueKind::Date ? format_date(static_cast<int64_t>(value)) : format_double(value);
}

double parse_bound(ValueKind kind, std::string_view text) {
  return kind == ValueKind::Date ? static_cast<double>(parse_date(text)) : parse_double(text);
}

}  // namespace

std::string serialize_catalog(const Catalog& catalog) {
  std::ostringstream out;
  out << "dataset_id=" << catalog.dataset_id << "\n";
  out << "[tables]\n";
  for (const auto& t : catalog.tables) {
    out << "name=" << t.name << " row_count=" << t.row_count << "\n";
  }
  out << "[columns]\n";
  for (const auto& t : catalog.tables) {
    for (const auto& c : t.columns) {
      out << "table=" << c.table << " name=" << c.name << " value_kind=" << to_string(c.value_kind)
          << " bytes_per_value=" << format_double(c.bytes_per_value)
          << " scan_weight=" << format_double(c.scan_weight);
      if (c.min_value) out << " min_value=" << format_bound(c.value_kind, *c.min_value);
      if (c.max_value) out << " max_value=" << format_bound(c.value_kind, *c.max_value);
      out << " distinct_count=" << c.distinct_count << "\n";
    }
  }
  out << "[join_edges]\n";
  for (const auto& e : catalog.join_graph.edges) {
    out << e.a.str() << "=" << e.b.str() << "\n";
  }
  return out.str();
}

Catalog parse_catalog(std::string_view text) {
  Catalog catalog;
  std::string section;
  bool have_id = false;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      if (line.front() == '[') {
        section = std::string(line);
        if (section != "[tables]" && section != "[columns]" && section != "[join_edges]") {
          throw ParseError("unknown section " + section);
        }
        continue;
      }
      if (section.empty()) {
        auto kv = parse_key_values(line);
        catalog.dataset_id = kv.require("dataset_id");
        have_id = true;
      } else if (section == "[tables]") {
        auto kv = parse_key_values(line);
        TableStats t;
        t.name = kv.require("name");
        t.row_count = parse_int(kv.require("row_count"));
        catalog.tables.push_back(std::move(t));
      } else if (section == "[columns]") {
        auto kv = parse_key_values(line);
        ColumnStats c;
        c.table = kv.require("table");
        c.name = kv.require("name");
        c.value_kind = value_kind_from_string(kv.require("value_kind"));
        c.bytes_per_value = parse_double(kv.require("bytes_per_value"));
        c.scan_weight = parse_double(kv.require("scan_weight"));
        if (auto v = kv.get("min_value")) c.min_value = parse_bound(c.value_kind, *v);
        if (auto v = kv.get("max_value")) c.max_value = parse_bound(c.value_kind, *v);
        c.distinct_count = parse_int(kv.require("distinct_count"));
        auto it = std::find_if(catalog.tables.begin(), catalog.tables.end(),
                               [&](const TableStats& t) { return t.name == c.table; });
        if (it == catalog.tables.end()) {
          throw ValidationError("column '" + c.name + "' references missing table '" + c.table + "'");
        }
        it->columns.push_back(std::move(c));
      } else {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected a.x=b.y");
        catalog.join_graph.edges.push_back(
            {ColumnRef::parse(trim(line.substr(0, eq))), ColumnRef::parse(trim(line.substr(eq + 1)))});
      }
    } catch (const ParseError& e) {
      throw ParseError("catalog line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_id) throw ParseError("catalog is missing dataset_id");
  for (const auto& t : catalog.tables) catalog.join_graph.nodes.push_back(t.name);
  catalog.validate();
  return catalog;
}

Catalog load_catalog(const std::string& path) { return parse_catalog(read_file(path)); }

void save_catalog(const Catalog& catalog, const std::string& path) {
  write_file(path, serialize_catalog(catalog));
}

// ---------------------------------------------------------------------------
// Table files

std::string serialize_table(const TableData& table) {
  std::ostringstream out;
  for (size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out << '|';
    out << table.columns[i].name << ':' << to_string(table.columns[i].kind);
  }
  out << '\n';
  for (const auto& c : table.columns) {
    const size_t n = c.size();
    for (size_t r = 0; r < n; ++r) {
      if (r) out << '|';
      if (c.kind == ValueKind::Text) {
        out << c.texts[r];
      } else {
        out << format_value(c.kind, c.numbers[r]);
      }
    }
    out << '\n';
  }
  return out.str();
}

TableData parse_table(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty table file");
  TableData table;
  for (const auto& field : split(lines[0], '|')) {
    const auto colon = field.find(':');
    if (colon == std::string::npos) throw ParseError("bad table header field '" + field + "'");
    ColumnData c;
    c.name = field.substr(0, colon);
    c.kind = value_kind_from_string(field.substr(colon + 1));
    table.columns.push_back(std::move(c));
  }
  if (lines.size() != table.columns.size() + 1) {
    throw ParseError("table file has " + std::to_string(lines.size() - 1) + " column lines, header names " +
                     std::to_string(table.columns.size()));
  }
  for (size_t i = 0; i < table.columns.size(); ++i) {
    auto& c = table.columns[i];
    if (lines[i + 1].empty()) continue;
    for (auto& v : split(lines[i + 1], '|')) {
      if (c.kind == ValueKind::Text) {
        c.texts.push_back(std::move(v));
      } else {
        c.numbers.push_back(parse_value(c.kind, v));
      }
    }
    if (c.size() != table.columns[0].size()) throw ParseError("ragged table columns");
  }
  return table;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_catalog(dataset.catalog, (std::filesystem::path(dir) / "catalog.txt").string());
  for (const auto& t : dataset.tables) {
    write_file((std::filesystem::path(dir) / (t.name + ".tbl")).string(), serialize_table(t));
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.catalog = load_catalog((std::filesystem::path(dir) / "catalog.txt").string());
  for (const auto& t : ds.catalog.tables) {
    auto data = parse_table(read_file((std::filesystem::path(dir) / (t.name + ".tbl")).string()));
    data.name = t.name;
    if (static_cast<int64_t>(data.row_count()) != t.row_count) {
      throw ValidationError("table '" + t.name + "' row count disagrees with catalog");
    }
    ds.tables.push_back(std::move(data));
  }
  return ds;
}

TableStats compute_table_stats(const TableData& data, const std::vector<double>& bytes_per_value) {
  TableStats stats;
  stats.name = data.name;
  stats.row_count = static_cast<int64_t>(data.row_count());
  for (size_t i = 0; i < data.columns.size(); ++i) {
    const auto& col = data.columns[i];
    ColumnStats c;
    c.name = col.name;
    c.table = data.name;
    c.value_kind = col.kind;
    if (col.kind == ValueKind::Text) {
      double total = 0;
      for (const auto& s : col.texts) total += static_cast<double>(s.size());
      c.bytes_per_value = col.texts.empty() ? 0.0 : total / static_cast<double>(col.texts.size());
      std::set<std::string> distinct(col.texts.begin(), col.texts.end());
      c.distinct_count = std::max<int64_t>(1, static_cast<int64_t>(distinct.size()));
    } else {
      c.bytes_per_value = bytes_per_value.at(i);
      auto sorted = col.numbers;
      std::sort(sorted.begin(), sorted.end());
      if (!sorted.empty()) {
        c.min_value = sorted.front();
        c.max_value = sorted.back();
      }
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      c.distinct_count = std::max<int64_t>(1, static_cast<int64_t>(sorted.size()));
    }
    c.scan_weight = static_cast<double>(stats.row_count) * c.bytes_per_value;
    stats.columns.push_back(std::move(c));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Synthetic star schemas

namespace {

enum class Gen { Sequence, ForeignKey, Uniform, Cents, Days, Word, Label };

struct ColumnTemplate {
  std::string name;
  ValueKind kind;
  double bytes;
  Gen gen;
  double lo = 0, hi = 0;  // inclusive range for Uniform/Cents/Days
  std::string label;      // prefix for Label
};

struct DimensionTemplate {
  std::string table;
  std::string fact_fk;
  std::vector<ColumnTemplate> columns;  // columns[0] is the key
};

std::vector<DimensionTemplate> dimension_templates(int count) {
  const double opened_lo = static_cast<double>(parse_date("1990-01-01"));
  const double opened_hi = static_cast<double>(parse_date("1999-12-31"));
  std::vector<DimensionTemplate> fixed = {
      {"customer",
       "o_custkey",
       {{"c_id", ValueKind::Integer, 8, Gen::Sequence},
        {"c_name", ValueKind::Text, 20, Gen::Label, 0, 0, "Customer#"},
        {"c_region", ValueKind::Integer, 4, Gen::Uniform, 0, 4}}},
      {"part",
       "o_partkey",
       {{"p_id", ValueKind::Integer, 8, Gen::Sequence},
        {"p_name", ValueKind::Text, 24, Gen::Word},
        {"p_size", ValueKind::Integer, 4, Gen::Uniform, 1, 50},
        {"p_price", ValueKind::Decimal, 8, Gen::Cents, 100, 200000}}},
      {"supplier",
       "o_suppkey",
       {{"s_id", ValueKind::Integer, 8, Gen::Sequence},
        {"s_name", ValueKind::Text, 24, Gen::Label, 0, 0, "Supplier#"},
        {"s_acctbal", ValueKind::Decimal, 8, Gen::Cents, -99999, 999999},
        {"s_nation", ValueKind::Integer, 4, Gen::Uniform, 0, 24}}},
      {"store",
       "o_storekey",
       {{"st_id", ValueKind::Integer, 8, Gen::Sequence},
        {"st_name", ValueKind::Text, 16, Gen::Word},
        {"st_opened", ValueKind::Date, 4, Gen::Days, opened_lo, opened_hi},
        {"st_size", ValueKind::Integer, 4, Gen::Uniform, 100, 5000}}},
  };
  std::vector<DimensionTemplate> out;
  for (int i = 0; i < count; ++i) {
    if (i < static_cast<int>(fixed.size())) {
      out.push_back(fixed[i]);
      continue;
    }
    const std::string p = "d" + std::to_string(i);
    out.push_back({p,
                   "o_" + p + "key",
                   {{p + "_id", ValueKind::Integer, 8, Gen::Sequence},
                    {p + "_label", ValueKind::Text, 16, Gen::Word},
                    {p + "_value", ValueKind::Decimal, 8, Gen::Cents, 0, 100000}}});
  }
  return out;
}

std::string random_word(std::mt19937_64& rng, size_t length) {
  static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz ";
  std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
  std::string s(length, ' ');
  for (auto& ch : s) ch = alphabet[pick(rng)];
  s.front() = 'a' + static_cast<char>(pick(rng) % 26);
  s.back() = 'a' + static_cast<char>(pick(rng) % 26);
  return s;
}

std::string padded_label(const std::string& prefix, int64_t id, size_t length) {
  std::string digits = std::to_string(id);
  const size_t width = length > prefix.size() ? length - prefix.size() : 0;
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

ColumnData generate_column(const ColumnTemplate& t, int64_t rows, int64_t fk_rows, std::mt19937_64& rng) {
  ColumnData c;
  c.name = t.name;
  c.kind = t.kind;
  for (int64_t r = 0; r < rows; ++r) {
    switch (t.gen) {
      case Gen::Sequence:
        c.numbers.push_back(static_cast<double>(r + 1));
        break;
      case Gen::ForeignKey:
        c.numbers.push_back(static_cast<double>(std::uniform_int_distribution<int64_t>(1, fk_rows)(rng)));
        break;
      case Gen::Uniform:
      case Gen::Days: {
        auto v = std::uniform_int_distribution<int64_t>(static_cast<int64_t>(t.lo), static_cast<int64_t>(t.hi))(rng);
        c.numbers.push_back(static_cast<double>(v));
        break;
      }
      case Gen::Cents: {
        auto v = std::uniform_int_distribution<int64_t>(static_cast<int64_t>(t.lo), static_cast<int64_t>(t.hi))(rng);
        c.numbers.push_back(parse_double(format_value(ValueKind::Decimal, static_cast<double>(v) / 100.0)));
        break;
      }
      case Gen::Word:
        c.texts.push_back(random_word(rng, static_cast<size_t>(t.bytes)));
        break;
      case Gen::Label:
        c.texts.push_back(padded_label(t.label, r + 1, static_cast<size_t>(t.bytes)));
        break;
    }
  }
  return c;
}

}  // namespace

Dataset gen_synthetic_catalog(const SyntheticCatalogSpec& spec) {
  if (spec.n_tables < 1) throw ValidationError("n_tables must be >= 1");
  if (spec.rows_per_table < 1) throw ValidationError("rows_per_table must be >= 1");
  std::mt19937_64 rng(spec.seed);
  const int64_t fact_rows = spec.rows_per_table;
  const int64_t dim_rows = std::max<int64_t>(1, spec.rows_per_table / 10);
  const auto dims = dimension_templates(spec.n_tables - 1);

  const double date_lo = static_cast<double>(parse_date("1992-01-01"));
  const double date_hi = static_cast<double>(parse_date("1998-12-31"));
  std::vector<ColumnTemplate> fact = {
      {"o_id", ValueKind::Integer, 8, Gen::Sequence},
      {"o_custkey", ValueKind::Integer, 8, Gen::ForeignKey},
      {"o_total", ValueKind::Decimal, 8, Gen::Cents, 100, 100000},
      {"o_date", ValueKind::Date, 4, Gen::Days, date_lo, date_hi},
      {"o_comment", ValueKind::Text, 40, Gen::Word},
  };
  for (size_t i = 1; i < dims.size(); ++i) {
    fact.push_back({dims[i].fact_fk, ValueKind::Integer, 8, Gen::ForeignKey});
  }
  if (dims.empty()) fact.erase(fact.begin() + 1);  // no customer dimension, no o_custkey

  auto build = [&](const std::string& name, const std::vector<ColumnTemplate>& cols, int64_t rows) {
    TableData data;
    data.name = name;
    std::vector<double> widths;
    for (const auto& t : cols) {
      data.columns.push_back(generate_column(t, rows, dim_rows, rng));
      widths.push_back(t.bytes);
    }
    return std::pair{std::move(data), compute_table_stats(data, widths)};
  };

  Dataset ds;
  ds.catalog.dataset_id = "star" + std::to_string(spec.n_tables) + "_r" + std::to_string(spec.rows_per_table) +
                          "_s" + std::to_string(spec.seed);
  auto [fact_data, fact_stats] = build("orders", fact, fact_rows);
  ds.tables.push_back(std::move(fact_data));
  ds.catalog.tables.push_back(std::move(fact_stats));
  for (const auto& d : dims) {
    auto [data, stats] = build(d.table, d.columns, dim_rows);
    ds.tables.push_back(std::move(data));
    ds.catalog.tables.push_back(std::move(stats));
    ds.catalog.join_graph.edges.push_back({{"orders", d.fact_fk}, {d.table, d.columns.front().name}});
  }
  for (const auto& t : ds.catalog.tables) ds.catalog.join_graph.nodes.push_back(t.name);
  ds.catalog.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Join graph queries

namespace {

bool is_connected(const Catalog& catalog, const std::vector<std::string>& tables) {
  if (tables.empty()) return false;
  std::set<std::string> members(tables.begin(), tables.end());
  std::set<std::string> seen{tables.front()};
  std::vector<std::string> frontier{tables.front()};
  while (!frontier.empty()) {
    auto current = frontier.back();
    frontier.pop_back();
    for (const auto& e : catalog.join_graph.edges) {
      for (const auto& [from, to] : {std::pair{e.a.table, e.b.table}, std::pair{e.b.table, e.a.table}}) {
        if (from == current && members.count(to) && seen.insert(to).second) frontier.push_back(to);
      }
    }
  }
  return seen.size() == members.size();
}

}  // namespace

std::vector<std::vector<std::string>> connected_table_subsets(const Catalog& catalog, int k) {
  std::vector<std::vector<std::string>> out;
  const int n = static_cast<int>(catalog.tables.size());
  if (k < 1 || k > n) return out;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    std::vector<std::string> set;
    for (int i : idx) set.push_back(catalog.tables[i].name);
    if (is_connected(catalog, set)) out.push_back(std::move(set));
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<JoinEdge> spanning_join_edges(const Catalog& catalog, const std::vector<std::string>& tables) {
  std::vector<JoinEdge> out;
  if (tables.empty()) return out;
  std::set<std::string> members(tables.begin(), tables.end());
  std::set<std::string> reached{tables.front()};
  std::vector<std::string> queue{tables.front()};
  for (size_t head = 0; head < queue.size(); ++head) {
    const auto current = queue[head];
    for (const auto& e : catalog.join_graph.edges) {
      const bool forward = e.a.table == current;
      const bool backward = e.b.table == current;
      if (!forward && !backward) continue;
      const auto& other = forward ? e.b.table : e.a.table;
      if (!members.count(other) || reached.count(other)) continue;
      reached.insert(other);
      queue.push_back(other);
      out.push_back(forward ? e : JoinEdge{e.b, e.a});
    }
  }
  if (reached.size() != members.size()) {
    throw ValidationError("table set is not connected in the schema join graph");
  }
  return out;
}

}  // namespace tracesynth
