#include "tracesynth/predsearch.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tracesynth/optimizer.hpp"
#include "tracesynth/trace.hpp"

namespace tracesynth {

void SearchConfig::validate() const {
  if (!(window_low > 0 && window_low <= 1 && window_high >= 1)) {
    throw ValidationError("tolerance window must satisfy 0 < a <= 1 <= b");
  }
  if (n_rand < 2) throw ValidationError("n_rand must be at least 2");
  if (n_calls < 0 || n_rand_stage2 < 0) throw ValidationError("evaluation counts must be non-negative");
  if (shrink <= 0 || shrink > 1) throw ValidationError("shrink must be in (0, 1]");
  if (bucket_cap < 2) throw ValidationError("bucket_cap must be at least 2");
}

PredicateSpace select_predicate_columns(const QueryGraph& g, const Catalog& catalog, int max_dims) {
  struct TableChoice {
    std::string table;
    int64_t rows;
    std::vector<const ColumnStats*> ranked;
    int dims = 0;
    double remainder = 0;
  };
  std::vector<TableChoice> tables;
  for (NodeId id : g.post_order()) {
    const auto& n = g.node(id);
    if (n.kind() != OperatorKind::Scan) continue;
    const auto& s = n.as<ScanAttrs>();
    const auto& stats = catalog.table(s.table);
    TableChoice t{s.table, stats.row_count, {}};
    for (const auto& c : s.columns) {
      const auto* cs = stats.find_column(c);
      if (cs && is_numeric(cs->value_kind) && cs->min_value && *cs->min_value < *cs->max_value) t.ranked.push_back(cs);
    }
    const double rows = static_cast<double>(stats.row_count);
    std::sort(t.ranked.begin(), t.ranked.end(), [&](const ColumnStats* a, const ColumnStats* b) {
      const double wa = static_cast<double>(a->distinct_count) / rows, wb = static_cast<double>(b->distinct_count) / rows;
      if (wa != wb) return wa > wb;
      return a->name < b->name;
    });
    if (!t.ranked.empty()) tables.push_back(std::move(t));
  }
  if (tables.empty()) throw ValidationError("no tunable predicates");

  int eligible = 0;
  double total_rows = 0;
  for (const auto& t : tables) {
    eligible += static_cast<int>(t.ranked.size());
    total_rows += static_cast<double>(t.rows);
  }
  const int budget = std::clamp(max_dims, 0, eligible);

  // Largest remainder apportionment by row count, capped per table.
  int assigned = 0;
  for (auto& t : tables) {
    const double quota = budget * static_cast<double>(t.rows) / total_rows;
    t.dims = static_cast<int>(std::floor(quota));
    t.remainder = quota - t.dims;
    assigned += t.dims;
  }
  std::vector<TableChoice*> order;
  for (auto& t : tables) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](const TableChoice* a, const TableChoice* b) {
    if (a->remainder != b->remainder) return a->remainder > b->remainder;
    if (a->rows != b->rows) return a->rows > b->rows;
    return a->table < b->table;
  });
  for (auto* t : order) {
    if (assigned >= budget) break;
    ++t->dims;
    ++assigned;
  }
  int overflow = 0;
  for (auto& t : tables) {
    const int cap = static_cast<int>(t.ranked.size());
    if (t.dims > cap) {
      overflow += t.dims - cap;
      t.dims = cap;
    }
  }
  std::stable_sort(order.begin(), order.end(), [](const TableChoice* a, const TableChoice* b) {
    if (a->rows != b->rows) return a->rows > b->rows;
    return a->table < b->table;
  });
  for (auto* t : order) {
    const int spare = std::min(overflow, static_cast<int>(t->ranked.size()) - t->dims);
    t->dims += spare;
    overflow -= spare;
  }

  PredicateSpace space;
  for (const auto& t : tables) {
    space.allocation[t.table] = t.dims;
    for (int i = 0; i < t.dims; ++i) {
      const auto* c = t.ranked[static_cast<size_t>(i)];
      space.dims.push_back({{t.table, c->name}, c->value_kind, *c->min_value - value_step(c->value_kind), *c->max_value});
    }
  }
  return space;
}

double bucket_step(double lower, double upper, ValueKind kind, int cap) {
  const double step = value_step(kind);
  const double steps = std::round((upper - lower) / step);
  if (steps + 1 <= cap) return step;
  return std::ceil(steps / (cap - 1)) * step;
}

QueryGraph apply_predicates(const QueryGraph& base, const PredicateSpace& space, const PredicateVector& x) {
  if (x.size() != space.dims.size()) throw ValidationError("predicate vector has wrong dimension");
  std::map<std::string, std::vector<RangePredicate>> by_table;
  for (size_t i = 0; i < x.size(); ++i) {
    const auto& d = space.dims[i];
    by_table[d.column.table].push_back({d.column, {d.kind, x[i]}});
  }
  QueryGraph g = base;
  for (auto& [table, preds] : by_table) g = with_filter(g, table, std::move(preds));
  return g;
}

// ---------------------------------------------------------------------------

namespace {

/// Nearest grid value; decimals go through cents so they equal their own parse.
double snap(ValueKind kind, double v) {
  if (kind == ValueKind::Decimal) return std::round(v * 100.0) / 100.0;
  return std::round(v);
}

struct Box {
  std::vector<double> lo, hi, step;
  std::vector<ValueKind> kind;

  PredicateVector map(const std::vector<double>& u) const {
    PredicateVector x(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
      const double v = lo[i] + std::round(u[i] * (hi[i] - lo[i]) / step[i]) * step[i];
      x[i] = std::clamp(snap(kind[i], v), lo[i], hi[i]);
    }
    return x;
  }
  std::vector<double> unmap(const PredicateVector& x) const {
    std::vector<double> u(x.size());
    for (size_t i = 0; i < x.size(); ++i) u[i] = hi[i] > lo[i] ? (x[i] - lo[i]) / (hi[i] - lo[i]) : 0.5;
    return u;
  }
  bool contains(const PredicateVector& x) const {
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lo[i] - 1e-9 || x[i] > hi[i] + 1e-9) return false;
    }
    return true;
  }
};

}  // namespace

PredicateTuner::PredicateTuner(SearchContext context, PredicateSpace space)
    : ctx_(std::move(context)), space_(std::move(space)) {
  if (!ctx_.base || !ctx_.catalog || !ctx_.model || !ctx_.backend) throw ValidationError("incomplete search context");
  ctx_.config.validate();
}

bool PredicateTuner::budget_left() const {
  if (converged_) return false;
  return ctx_.config.max_executions <= 0 || executions_ < ctx_.config.max_executions - 1;
}

ScoredPoint PredicateTuner::score_predicates(const PredicateVector& x) {
  if (auto it = memo_.find(x); it != memo_.end()) return it->second;
  for (size_t i = 0; i < x.size(); ++i) {
    const auto& d = space_.dims[i];
    if (x[i] < d.lower - 1e-9 || x[i] > d.upper + 1e-9) throw ValidationError("predicate vector outside domain");
  }
  ScoredPoint p;
  p.x = x;
  const QueryGraph g = apply_predicates(*ctx_.base, space_, x);
  const double y = ctx_.y_cpu;
  if (ctx_.config.always_execute) {
    p.executed = true;
  } else {
    const auto cards = ctx_.backend->probe_cardinalities(g);
    p.predicted_cpu = predict_query(*ctx_.model, g, *ctx_.catalog, cards);
    p.cpu = p.predicted_cpu;
    // In-window points that are not predicted to beat the executed incumbent keep their predicted score.
    const bool promising = !best_executed_gap_ || std::abs(p.predicted_cpu - y) < *best_executed_gap_;
    p.executed = p.predicted_cpu >= ctx_.config.window_low * y && p.predicted_cpu <= ctx_.config.window_high * y &&
                 promising && (ctx_.config.max_executions <= 0 || executions_ < ctx_.config.max_executions);
  }
  if (p.executed) {
    p.cpu = ctx_.backend->execute(g).cpu_time_ms;
    ++executions_;
    const double gap = std::abs(p.cpu - y);
    if (!best_executed_gap_ || gap < *best_executed_gap_) best_executed_gap_ = gap;
    if (ctx_.config.stop_qerror > 1 && qerror(p.cpu, y) <= ctx_.config.stop_qerror) converged_ = true;
  }
  p.score = -(p.cpu - y) * (p.cpu - y);
  memo_.emplace(x, p);
  return p;
}

SearchState& PredicateTuner::stage1_global() {
  const size_t d = space_.dims.size();
  Box box;
  for (const auto& dim : space_.dims) {
    box.lo.push_back(dim.lower);
    box.hi.push_back(dim.upper);
    box.step.push_back(value_step(dim.kind));
    box.kind.push_back(dim.kind);
  }
  AskTellOptimizer opt({static_cast<int>(d), ctx_.config.n_rand, Acquisition::ExpectedImprovement, ctx_.config.seed});
  const int total = ctx_.config.n_rand + ctx_.config.n_calls;
  for (int i = 0; i < total && budget_left(); ++i) {
    const auto x = box.map(opt.ask());
    auto p = score_predicates(x);
    p.stage = 1;
    state_.history.push_back(p);
    opt.tell(box.unmap(x), p.score);
  }
  select_seeds();
  return state_;
}

void PredicateTuner::select_seeds() {
  const double y = ctx_.y_cpu;
  std::optional<double> above, below;
  for (const auto& p : state_.history) {
    if (p.stage != 1) continue;
    if (p.cpu >= y && (!above || p.cpu - y < *above)) {
      above = p.cpu - y;
      state_.x_plus = p.x;
    }
    if (p.cpu < y && (!below || y - p.cpu < *below)) {
      below = y - p.cpu;
      state_.x_minus = p.x;
    }
  }
}

PredicateVector PredicateTuner::stage2_local() {
  const std::vector<std::optional<PredicateVector>> seeds = {state_.x_plus, state_.x_minus};
  for (size_t s = 0; s < seeds.size(); ++s) {
    if (!seeds[s] || !budget_left()) continue;
    Box box;
    for (size_t i = 0; i < space_.dims.size(); ++i) {
      const auto& dim = space_.dims[i];
      const double width = dim.upper - dim.lower;
      const double seed = (*seeds[s])[i];
      const double lo_raw = std::max(dim.lower, seed - ctx_.config.shrink * width);
      const double hi_raw = std::min(dim.upper, seed + ctx_.config.shrink * width);
      // Shrunk interval rounded inward onto the value grid.
      const double step = value_step(dim.kind);
      const double lo = std::min(seed, std::max(dim.lower, snap(dim.kind, std::ceil(lo_raw / step - 1e-9) * step)));
      const double hi = std::max(seed, std::min(dim.upper, snap(dim.kind, std::floor(hi_raw / step + 1e-9) * step)));
      box.lo.push_back(lo);
      box.hi.push_back(hi);
      box.step.push_back(bucket_step(lo, hi, dim.kind, ctx_.config.bucket_cap));
      box.kind.push_back(dim.kind);
    }
    AskTellOptimizer opt({static_cast<int>(space_.dims.size()), ctx_.config.n_rand_stage2, Acquisition::Exploit,
                          ctx_.config.seed + 1000 + s});
    for (const auto& p : state_.history) {
      if (box.contains(p.x)) opt.tell(box.unmap(p.x), p.score);
    }
    const int total = ctx_.config.n_rand_stage2 + ctx_.config.n_calls;
    for (int i = 0; i < total && budget_left(); ++i) {
      const auto x = box.map(opt.ask());
      auto p = score_predicates(x);
      p.stage = 2;
      p.seed_index = static_cast<int>(s);
      state_.history.push_back(p);
      opt.tell(box.unmap(x), p.score);
    }
  }
  return best_vector();
}

PredicateVector PredicateTuner::best_vector() const {
  const ScoredPoint* best = nullptr;
  for (const auto& p : state_.history) {
    if (!best || p.score > best->score) best = &p;
  }
  if (!best) {
    PredicateVector open;
    for (const auto& d : space_.dims) open.push_back(d.upper);
    return open;
  }
  return best->x;
}

TuneResult PredicateTuner::tune() {
  TuneResult r;
  if (space_.dims.empty()) {
    r.graph = *ctx_.base;
  } else {
    stage1_global();
    r.x = stage2_local();
    r.budget_exhausted = !converged_ && !budget_left();
    r.graph = apply_predicates(*ctx_.base, space_, r.x);
  }
  r.profile = ctx_.backend->execute(r.graph);
  ++executions_;
  r.executions = executions_;
  r.evaluations = static_cast<int64_t>(state_.history.size());
  r.state = state_;
  return r;
}

}  // namespace tracesynth
