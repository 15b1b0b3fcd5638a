#include "tracesynth/bounding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tracesynth {

ColumnSelection greedy_column_selection(const Catalog& catalog, const std::vector<std::string>& tables,
                                        double y_scan) {
  if (tables.empty()) throw ValidationError("column selection needs at least one table");
  ColumnSelection sel;
  sel.tables = tables;
  sel.join_edges = spanning_join_edges(catalog, tables);
  std::map<std::string, std::set<std::string>> chosen;
  for (const auto& t : tables) chosen[t];

  // Step I: join keys of the grounded spanning tree are mandatory.
  for (const auto& e : sel.join_edges) {
    for (const auto& ref : {e.a, e.b}) {
      if (chosen[ref.table].insert(ref.column).second) {
        sel.mandatory[ref.table].push_back(ref.column);
        sel.scan_bytes += catalog.column(ref).scan_weight;
      }
    }
  }

  // Step II: every still-empty group takes the column closest to y/K.
  const double y_bar = y_scan / static_cast<double>(tables.size());
  for (const auto& t : tables) {
    if (!chosen[t].empty()) continue;
    const ColumnStats* best = nullptr;
    for (const auto& c : catalog.table(t).columns) {
      if (!best) {
        best = &c;
        continue;
      }
      const double d = std::abs(c.scan_weight - y_bar), bd = std::abs(best->scan_weight - y_bar);
      if (d < bd || (d == bd && c.name < best->name)) best = &c;
    }
    chosen[t].insert(best->name);
    sel.scan_bytes += best->scan_weight;
  }

  // Step III: ascending (weight, table, column) until the target is reached.
  if (sel.scan_bytes < y_scan) {
    struct Candidate {
      double weight;
      std::string table, column;
    };
    std::vector<Candidate> candidates;
    for (const auto& t : tables) {
      for (const auto& c : catalog.table(t).columns) {
        if (!chosen[t].count(c.name)) candidates.push_back({c.scan_weight, t, c.name});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.weight, a.table, a.column) < std::tie(b.weight, b.table, b.column);
    });
    for (const auto& c : candidates) {
      if (sel.scan_bytes >= y_scan) break;
      chosen[c.table].insert(c.column);
      sel.scan_bytes += c.weight;
      sel.last_added_weight = c.weight;
    }
  }
  sel.under_target = sel.scan_bytes < y_scan;
  for (auto& [t, cols] : chosen) sel.selected[t] = {cols.begin(), cols.end()};
  for (auto& [t, cols] : sel.mandatory) std::sort(cols.begin(), cols.end());
  return sel;
}

std::optional<ColumnSelection> BoundingCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  count_hit();
  return it->second;
}

void BoundingCache::put(const std::string& key, const ColumnSelection& selection) {
  std::lock_guard lock(mutex_);
  entries_.emplace(key, selection);
}

int required_table_count(const StructuralProfile& structure) {
  const auto* c = structure.find(OperatorKind::Join);
  if (!c) return 1;
  if (c->mode == ConstraintMode::Presence) return c->value ? 2 : 1;
  return c->value + 1;
}

namespace {

QueryGraph base_graph(const ColumnSelection& sel) {
  GraphBuilder b;
  std::map<std::string, NodeId> input;
  for (const auto& t : sel.tables) input[t] = b.scan(t, sel.selected.at(t));
  NodeId top = input.at(sel.tables.front());
  for (const auto& e : sel.join_edges) top = b.join(top, input.at(e.b.table), e.a, e.b);
  return std::move(b).build(top);
}

/// Adds a unary node above `child` (the root when child is the root).
NodeId insert_above(QueryGraph& g, NodeId child, OperatorAttrs attrs) {
  const NodeId id = g.next_id();
  const auto parent = g.parent(child);
  g.nodes.push_back({id, std::move(attrs)});
  if (parent) {
    for (auto& [p, c] : g.edges) {
      if (p == *parent && c == child) c = id;
    }
  } else {
    g.root = id;
  }
  g.edges.emplace_back(id, child);
  return id;
}

int wanted_count(const StructuralProfile& structure, OperatorKind kind) {
  const auto* c = structure.find(kind);
  if (!c) return 0;
  return c->mode == ConstraintMode::Presence ? (c->value ? 1 : 0) : c->value;
}

}  // namespace

std::vector<BoundedBaseGraph> choose_base_graphs(const Catalog& catalog, const StructuralProfile& structure,
                                                 double y_scan, BoundingCache* cache, int64_t* greedy_calls) {
  const int k = required_table_count(structure);
  if (k < 1 || k > static_cast<int>(catalog.tables.size())) {
    throw InfeasibleError("no_connected_set", "no connected table set of size " + std::to_string(k));
  }
  const auto sets = connected_table_subsets(catalog, k);
  if (sets.empty()) throw InfeasibleError("no_connected_set", "no connected table set of size " + std::to_string(k));

  std::vector<BoundedBaseGraph> out;
  for (const auto& tables : sets) {
    std::string key;
    for (const auto& t : tables) key += t + ",";
    key += "|" + format_double(y_scan);
    std::optional<ColumnSelection> sel = cache ? cache->find(key) : std::nullopt;
    if (!sel) {
      sel = greedy_column_selection(catalog, tables, y_scan);
      if (cache) {
        cache->count_call();
        cache->put(key, *sel);
      }
    }
    if (greedy_calls) ++*greedy_calls;
    BoundedBaseGraph b;
    b.graph = base_graph(*sel);
    b.selection = std::move(*sel);
    if (b.selection.under_target) {
      b.feasible = false;
      b.flags.push_back("under_target_scan");
    }
    out.push_back(std::move(b));
  }
  if (std::any_of(out.begin(), out.end(), [](const BoundedBaseGraph& b) { return b.feasible; })) {
    std::erase_if(out, [](const BoundedBaseGraph& b) { return !b.feasible; });
  }
  std::stable_sort(out.begin(), out.end(), [&](const BoundedBaseGraph& a, const BoundedBaseGraph& b) {
    return std::abs(a.selection.scan_bytes - y_scan) < std::abs(b.selection.scan_bytes - y_scan);
  });
  return out;
}

QueryGraph inject_structure(const QueryGraph& base, const StructuralProfile& structure, const Catalog& catalog) {
  QueryGraph g = base;
  const auto counts = structural_counts(g);
  if (const auto* c = structure.find(OperatorKind::Join)) {
    const bool ok = c->mode == ConstraintMode::Presence ? (counts.joins > 0) == (c->value != 0)
                                                        : std::abs(counts.joins - c->value) <= c->tolerance;
    if (!ok) throw InfeasibleError("unreachable_structure", "base graph join count disagrees with the profile");
  }
  const int aggs = wanted_count(structure, OperatorKind::Aggregate) - counts.aggregates;
  const int sorts = wanted_count(structure, OperatorKind::Sort) - counts.sorts;
  if (aggs < 0 || sorts < 0) throw InfeasibleError("unreachable_structure", "base graph already exceeds the profile");

  std::set<ColumnRef> avail = available_columns(g, g.root);
  const auto ranked = rank_group_columns(catalog, avail);
  std::vector<ColumnRef> top_group;
  for (int level = 1; level <= aggs; ++level) {
    const int width = std::min(aggs, static_cast<int>(ranked.size()));
    const int keep = std::max(1, width - (level - 1));
    std::vector<ColumnRef> group(ranked.begin(), ranked.begin() + keep);
    std::vector<AggregateFunction> funcs{{AggregateFunction::Kind::Count, std::nullopt}};
    for (const auto& c : avail) {
      const auto kind = catalog.column(c).value_kind;
      if (kind == ValueKind::Integer || kind == ValueKind::Decimal) {
        funcs.push_back({AggregateFunction::Kind::Sum, c});
        break;
      }
    }
    insert_above(g, g.root, AggregateAttrs{group, funcs});
    avail = {group.begin(), group.end()};
    top_group = group;
  }
  if (sorts > 0) {
    const ColumnRef key = top_group.empty() ? ranked.front() : top_group.front();
    for (int i = 0; i < sorts; ++i) insert_above(g, g.root, SortAttrs{{{key, true}}});
  }
  return g;
}

CompensationResult feasibility_and_compensation(const QueryGraph& g, double y_cpu, const LocalModel& model,
                                                ExecutionBackend& backend, const Catalog& catalog,
                                                const CompensationConfig& config) {
  CompensationResult res;
  res.graph = strip_filters(g);
  auto cards = backend.probe_cardinalities(res.graph);
  res.predicted_max_cpu = predict_query(model, res.graph, catalog, cards);
  const double target = config.headroom * y_cpu;
  if (res.predicted_max_cpu >= target) return res;

  const NodeId core = core_top(res.graph);
  const double rows = static_cast<double>(cards.at(core));
  const auto avail = available_columns(res.graph, core);

  // Cheapest positive unit cost among fitted kinds with an eligible input column.
  std::optional<std::pair<ExprKind, ColumnRef>> choice;
  double unit = 0;
  for (ExprKind kind : {ExprKind::Arith, ExprKind::String, ExprKind::Date}) {
    std::optional<ColumnRef> input;
    for (const auto& c : avail) {
      const auto vk = catalog.column(c).value_kind;
      const bool ok = kind == ExprKind::String ||
                      (kind == ExprKind::Arith && (vk == ValueKind::Integer || vk == ValueKind::Decimal)) ||
                      (kind == ExprKind::Date && vk == ValueKind::Date);
      if (ok) {
        input = c;
        break;
      }
    }
    if (!input || !model.kinds.count("eval_" + std::string(to_string(kind)))) continue;
    OperatorFeatures f;
    f.kind = OperatorKind::EvalScalar;
    f.expr = kind;
    f.rows_in = rows;
    f.rows_out = rows;
    f.repeat = 1;
    const double one = predict_operator(model, f);
    f.repeat = 0;
    const double u = one - predict_operator(model, f);
    if (u > 0 && (!choice || u < unit)) {
      choice = {kind, *input};
      unit = u;
    }
  }
  if (!choice) {
    res.flags.push_back("compensation_cap");
    return res;
  }

  std::optional<NodeId> node;
  for (int round = 0; round < 16 && res.predicted_max_cpu < target; ++round) {
    int64_t k = static_cast<int64_t>(std::ceil((target - res.predicted_max_cpu) / unit));
    k = std::max<int64_t>(k, 1);
    bool capped = false;
    if (res.applications + k > config.max_applications) {
      k = config.max_applications - res.applications;
      capped = true;
    }
    if (k > 0) {
      if (!node) {
        node = insert_above(res.graph, core, EvalScalarAttrs{choice->first, choice->second, k});
        cards.output[*node] = cards.at(core);
      } else {
        res.graph.node(*node).as<EvalScalarAttrs>().repeat_count += k;
      }
      res.applications += k;
      res.predicted_max_cpu = predict_query(model, res.graph, catalog, cards);
    }
    if (capped) {
      res.flags.push_back("compensation_cap");
      break;
    }
  }
  return res;
}

}  // namespace tracesynth
