#include "tracesynth/costmodel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace tracesynth {

JoinFeatures JoinFeatures::from(const OperatorFeatures& f) {
  JoinFeatures j;
  j.build_card = f.build;
  j.probe_card = f.probe;
  j.ratio = f.build / std::max(f.probe, 1.0);
  j.log_build = std::log1p(f.build);
  j.materialize_term = f.rows_out * f.width;
  j.tasks = f.tasks;
  return j;
}

std::vector<double> JoinFeatures::values() const {
  return {build_card, probe_card, ratio, log_build, materialize_term, tasks};
}

OperatorFeatures features_of(const QueryGraph& g, const Catalog& catalog, NodeId id,
                             const std::vector<int64_t>& inputs, int64_t output, int parallel_tasks) {
  const auto& n = g.node(id);
  OperatorFeatures f;
  f.kind = n.kind();
  f.rows_out = static_cast<double>(output);
  auto input = [&](size_t i) {
    if (i >= inputs.size()) throw ValidationError("missing input cardinality for node " + std::to_string(id));
    return static_cast<double>(inputs[i]);
  };
  switch (n.kind()) {
    case OperatorKind::Scan: {
      const auto& s = n.as<ScanAttrs>();
      const auto& t = catalog.table(s.table);
      f.rows_in = f.rows_out;
      for (const auto& c : s.columns) f.row_bytes += t.find_column(c)->bytes_per_value;
      break;
    }
    case OperatorKind::Filter:
      f.rows_in = input(0);
      f.predicates = static_cast<double>(n.as<FilterAttrs>().predicates.size());
      break;
    case OperatorKind::EvalScalar:
      f.rows_in = input(0);
      f.expr = n.as<EvalScalarAttrs>().expr;
      f.repeat = static_cast<double>(n.as<EvalScalarAttrs>().repeat_count);
      break;
    case OperatorKind::Sort:
      f.rows_in = input(0);
      f.width = static_cast<double>(output_width(g, id));
      break;
    case OperatorKind::Join:
      f.build = std::min(input(0), input(1));
      f.probe = std::max(input(0), input(1));
      f.width = static_cast<double>(output_width(g, id));
      f.tasks = parallel_tasks;
      break;
    case OperatorKind::Aggregate:
      f.rows_in = input(0);
      f.group_keys = static_cast<double>(n.as<AggregateAttrs>().group_by.size());
      break;
  }
  return f;
}

std::string model_key(const OperatorFeatures& f) {
  switch (f.kind) {
    case OperatorKind::Scan:
      return "scan";
    case OperatorKind::Filter:
      return "filter";
    case OperatorKind::EvalScalar:
      return "eval_" + std::string(to_string(f.expr));
    case OperatorKind::Sort:
      return "sort";
    case OperatorKind::Join:
      return "join";
    case OperatorKind::Aggregate:
      return "aggregate";
  }
  return {};
}

std::vector<std::string> term_names(const std::string& key) {
  if (key == "scan") return {"rows_bytes"};
  if (key == "filter") return {"rows_preds", "const"};
  if (starts_with(key, "eval_")) return {"rows_repeat", "const"};
  if (key == "sort") return {"nlogn", "rows_width", "const"};
  if (key == "join") return {"build", "probe", "tasks", "out_width"};
  if (key == "aggregate") return {"rows_in", "out_keys", "const"};
  throw ValidationError("unknown model kind '" + key + "'");
}

std::vector<double> term_values(const std::string& key, const OperatorFeatures& f) {
  if (key == "scan") return {f.rows_in * f.row_bytes};
  if (key == "filter") return {f.rows_in * f.predicates, 1.0};
  if (starts_with(key, "eval_")) return {f.rows_in * f.repeat, 1.0};
  if (key == "sort") return {f.rows_in * std::log2(std::max(f.rows_in, 2.0)), f.rows_in * f.width, 1.0};
  if (key == "join") return {f.build, f.probe, f.tasks, f.rows_out * f.width};
  if (key == "aggregate") return {f.rows_in, f.rows_out * f.group_keys, 1.0};
  throw ValidationError("unknown model kind '" + key + "'");
}

// ---------------------------------------------------------------------------
// Regression trees

double RegressionTreeEnsemble::predict(const std::vector<double>& x) const {
  double y = base;
  for (const auto& tree : trees) {
    int i = 0;
    while (tree[static_cast<size_t>(i)].feature >= 0) {
      const auto& n = tree[static_cast<size_t>(i)];
      i = x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    y += learning_rate * tree[static_cast<size_t>(i)].value;
  }
  return y;
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<double>& r;
  const GbdtConfig& cfg;
  std::vector<RegressionTreeEnsemble::Node> nodes;

  int grow(std::vector<size_t> idx, int depth) {
    const int me = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double sum = 0;
    for (size_t i : idx) sum += r[i];
    nodes.back().value = sum / static_cast<double>(idx.size());
    if (depth >= cfg.max_depth || idx.size() < 2 * static_cast<size_t>(cfg.min_leaf)) return me;

    const size_t n_features = x[idx[0]].size();
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0;
    const double total_sq = sum * sum / static_cast<double>(idx.size());
    for (size_t f = 0; f < n_features; ++f) {
      std::vector<size_t> order = idx;
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a][f] < x[b][f]; });
      double left = 0;
      for (size_t k = 0; k + 1 < order.size(); ++k) {
        left += r[order[k]];
        const size_t nl = k + 1, nr = order.size() - nl;
        if (nl < static_cast<size_t>(cfg.min_leaf) || nr < static_cast<size_t>(cfg.min_leaf)) continue;
        const double a = x[order[k]][f], b = x[order[k + 1]][f];
        if (!(a < b)) continue;
        const double right = sum - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - total_sq;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = a + (b - a) / 2;
        }
      }
    }
    if (best_feature < 0) return me;
    std::vector<size_t> li, ri;
    for (size_t i : idx) (x[i][static_cast<size_t>(best_feature)] <= best_threshold ? li : ri).push_back(i);
    const int l = grow(std::move(li), depth + 1);
    const int rr = grow(std::move(ri), depth + 1);
    auto& n = nodes[static_cast<size_t>(me)];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = rr;
    return me;
  }
};

}  // namespace

RegressionTreeEnsemble fit_gbdt(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                const GbdtConfig& config) {
  if (x.size() != y.size() || x.empty()) throw ValidationError("tree ensemble needs matching, non-empty data");
  if (config.max_depth < 1 || config.max_depth > 4 || config.trees < 1) {
    throw ValidationError("tree depth must be in [1, 4] and tree count positive");
  }
  RegressionTreeEnsemble model;
  model.learning_rate = config.learning_rate;
  model.base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::vector<double> pred(y.size(), model.base);
  std::vector<size_t> all(y.size());
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < config.trees; ++t) {
    std::vector<double> residual(y.size());
    for (size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - pred[i];
    TreeBuilder b{x, residual, config, {}};
    b.grow(all, 0);
    model.trees.push_back(std::move(b.nodes));
    RegressionTreeEnsemble single;
    single.learning_rate = config.learning_rate;
    single.trees = {model.trees.back()};
    for (size_t i = 0; i < y.size(); ++i) pred[i] += single.predict(x[i]);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Least squares

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

KindModel fit_kind(const std::string& key, const std::vector<const ProfileSample*>& samples) {
  const auto names = term_names(key);
  const size_t p = names.size();
  if (samples.size() < std::max<size_t>(2, p)) {
    throw ValidationError("insufficient samples for " + key + ": " + std::to_string(samples.size()));
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto t = term_values(key, samples[i]->features);
    for (size_t j = 0; j < p; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[j];
    y(static_cast<Eigen::Index>(i)) = samples[i]->cpu_time_ms;
  }

  std::vector<size_t> active(p);
  std::iota(active.begin(), active.end(), 0);
  std::vector<double> coef(p, 0.0);
  bool first = true;
  while (!active.empty()) {
    Eigen::MatrixXd A(X.rows(), static_cast<Eigen::Index>(active.size()));
    std::vector<double> scale(active.size());
    for (size_t j = 0; j < active.size(); ++j) {
      const auto col = X.col(static_cast<Eigen::Index>(active[j]));
      scale[j] = col.cwiseAbs().maxCoeff();
      if (scale[j] == 0) scale[j] = 1;
      A.col(static_cast<Eigen::Index>(j)) = col / scale[j];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(active.size())) {
      if (first) throw ValidationError("degenerate design matrix for " + key);
      break;
    }
    first = false;
    const Eigen::VectorXd beta = qr.solve(y);
    std::fill(coef.begin(), coef.end(), 0.0);
    std::vector<size_t> negative;
    for (size_t j = 0; j < active.size(); ++j) {
      coef[active[j]] = beta(static_cast<Eigen::Index>(j)) / scale[j];
      if (names[active[j]] != "const" && coef[active[j]] < 0) negative.push_back(active[j]);
    }
    if (negative.empty()) break;
    for (size_t j : negative) {
      coef[j] = 0;
      std::erase(active, j);
    }
  }

  KindModel m;
  m.coefficients = coef;
  m.samples = samples.size();
  std::vector<double> rel;
  for (const auto* s : samples) {
    if (s->cpu_time_ms <= 0) continue;
    const auto t = term_values(key, s->features);
    double pred = 0;
    for (size_t j = 0; j < p; ++j) pred += coef[j] * t[j];
    rel.push_back(std::abs(std::max(pred, 0.0) - s->cpu_time_ms) / s->cpu_time_ms);
  }
  m.mean_rel_error = rel.empty() ? 0 : std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(rel.size());
  m.median_rel_error = median_of(rel);
  return m;
}

}  // namespace

std::vector<ProfileSample> collect_profiles(const Catalog& catalog, ExecutionBackend& backend, int n_queries,
                                            uint64_t seed, const SampleBounds& bounds) {
  std::vector<ProfileSample> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n_queries; ++i) {
    const auto g = sample_random_graph(catalog, bounds, rng());
    const auto profile = backend.execute(g);
    for (const auto& op : profile.per_operator) {
      out.push_back({features_of(g, catalog, op.node, op.input_cardinalities, op.output_cardinality,
                                 backend.parallel_tasks()),
                     op.cpu_time_ms});
    }
  }
  return out;
}

LocalModel fit(const std::vector<ProfileSample>& samples, const FitOptions& options) {
  std::map<std::string, std::vector<const ProfileSample*>> by_key;
  for (const auto& s : samples) {
    if (s.cpu_time_ms < 0) throw ValidationError("negative measured cpu in profile sample");
    by_key[model_key(s.features)].push_back(&s);
  }
  LocalModel model;
  for (const auto& [key, group] : by_key) {
    if (options.skip_sparse_kinds && group.size() < std::max<size_t>(2, term_names(key).size())) continue;
    model.kinds[key] = fit_kind(key, group);
  }
  if (auto it = by_key.find("join"); it != by_key.end()) {
    model.parallel_tasks = static_cast<int>(it->second.front()->features.tasks);
    if (options.join_regressor == JoinRegressor::TreeEnsemble) {
      std::vector<std::vector<double>> x;
      std::vector<double> y;
      for (const auto* s : it->second) {
        x.push_back(JoinFeatures::from(s->features).values());
        y.push_back(s->cpu_time_ms);
      }
      model.join_trees = fit_gbdt(x, y, options.gbdt);
      model.join_regressor = JoinRegressor::TreeEnsemble;
    }
  }
  return model;
}

double predict_operator(const LocalModel& model, const OperatorFeatures& features) {
  const auto key = model_key(features);
  if (features.kind == OperatorKind::Join && model.join_regressor == JoinRegressor::TreeEnsemble) {
    return std::max(0.0, model.join_trees.predict(JoinFeatures::from(features).values()));
  }
  auto it = model.kinds.find(key);
  if (it == model.kinds.end()) throw ValidationError("model has no fitted form for " + key);
  const auto t = term_values(key, features);
  double y = 0;
  for (size_t j = 0; j < t.size(); ++j) y += it->second.coefficients.at(j) * t[j];
  return std::isfinite(y) ? std::max(0.0, y) : 0.0;
}

double predict_query(const LocalModel& model, const QueryGraph& g, const Catalog& catalog,
                     const CardinalityEstimate& cards) {
  double total = 0;
  for (NodeId id : g.post_order()) {
    std::vector<int64_t> inputs;
    for (NodeId c : g.children(id)) inputs.push_back(cards.at(c));
    total += predict_operator(model, features_of(g, catalog, id, inputs, cards.at(id), model.parallel_tasks));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

}  // namespace

std::string serialize_model(const LocalModel& model) {
  std::ostringstream out;
  out << "local_model parallel_tasks=" << model.parallel_tasks << " join_regressor="
      << (model.join_regressor == JoinRegressor::Parametric ? "parametric" : "tree_ensemble") << "\n";
  for (const auto& [key, m] : model.kinds) {
    const auto names = term_names(key);
    std::string terms;
    for (size_t i = 0; i < names.size(); ++i) terms += (i ? "," : "") + names[i];
    out << "kind key=" << key << " terms=" << terms << " coefficients=" << join_doubles(m.coefficients)
        << " samples=" << m.samples << " mean_rel_error=" << format_double(m.mean_rel_error)
        << " median_rel_error=" << format_double(m.median_rel_error) << "\n";
  }
  if (model.join_regressor == JoinRegressor::TreeEnsemble) {
    const auto& e = model.join_trees;
    out << "trees base=" << format_double(e.base) << " learning_rate=" << format_double(e.learning_rate)
        << " count=" << e.trees.size() << "\n";
    for (size_t t = 0; t < e.trees.size(); ++t) {
      for (size_t i = 0; i < e.trees[t].size(); ++i) {
        const auto& n = e.trees[t][i];
        out << "node tree=" << t << " index=" << i << " feature=" << n.feature
            << " threshold=" << format_double(n.threshold) << " left=" << n.left << " right=" << n.right
            << " value=" << format_double(n.value) << "\n";
      }
    }
  }
  return out.str();
}

LocalModel parse_model(std::string_view text) {
  LocalModel model;
  bool header = false;
  size_t tree_count = 0;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto space = line.find(' ');
    const auto tag = line.substr(0, space);
    const auto kv = parse_key_values(space == std::string_view::npos ? "" : line.substr(space + 1));
    try {
      if (tag == "local_model") {
        header = true;
        model.parallel_tasks = static_cast<int>(parse_int(kv.require("parallel_tasks")));
        const auto reg = kv.require("join_regressor");
        if (reg == "parametric") {
          model.join_regressor = JoinRegressor::Parametric;
        } else if (reg == "tree_ensemble") {
          model.join_regressor = JoinRegressor::TreeEnsemble;
        } else {
          throw ParseError("unknown join_regressor " + reg);
        }
      } else if (tag == "kind") {
        const auto key = kv.require("key");
        const auto names = term_names(key);
        KindModel m;
        for (const auto& c : split(kv.require("coefficients"), ',')) m.coefficients.push_back(parse_double(c));
        if (m.coefficients.size() != names.size()) throw ParseError("coefficient count mismatch for " + key);
        m.samples = static_cast<size_t>(parse_int(kv.require("samples")));
        m.mean_rel_error = parse_double(kv.require("mean_rel_error"));
        m.median_rel_error = parse_double(kv.require("median_rel_error"));
        model.kinds[key] = std::move(m);
      } else if (tag == "trees") {
        model.join_trees.base = parse_double(kv.require("base"));
        model.join_trees.learning_rate = parse_double(kv.require("learning_rate"));
        tree_count = static_cast<size_t>(parse_int(kv.require("count")));
        model.join_trees.trees.assign(tree_count, {});
      } else if (tag == "node") {
        const auto t = static_cast<size_t>(parse_int(kv.require("tree")));
        const auto i = static_cast<size_t>(parse_int(kv.require("index")));
        if (t >= tree_count) throw ParseError("node references unknown tree");
        auto& tree = model.join_trees.trees[t];
        if (i != tree.size()) throw ParseError("tree nodes out of order");
        tree.push_back({static_cast<int>(parse_int(kv.require("feature"))), parse_double(kv.require("threshold")),
                        static_cast<int>(parse_int(kv.require("left"))),
                        static_cast<int>(parse_int(kv.require("right"))), parse_double(kv.require("value"))});
      } else {
        throw ParseError("unknown model line '" + std::string(tag) + "'");
      }
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
  }
  if (!header) throw ParseError("model file lacks local_model header");
  for (const auto& tree : model.join_trees.trees) {
    if (tree.empty()) throw ParseError("empty tree in model file");
  }
  return model;
}

LocalModel load_model(const std::string& path) { return parse_model(read_file(path)); }
void save_model(const LocalModel& model, const std::string& path) { write_file(path, serialize_model(model)); }

}  // namespace tracesynth
