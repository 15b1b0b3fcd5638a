#pragma once

#include <map>
#include <string>
#include <vector>

#include "tracesynth/backend.hpp"
#include "tracesynth/querygraph.hpp"

namespace tracesynth {

/// Raw per-operator quantities the local models read. Fields unused by a
/// kind stay zero.
struct OperatorFeatures {
  OperatorKind kind = OperatorKind::Scan;
  ExprKind expr = ExprKind::Arith;  // EvalScalar only
  double rows_in = 0;     // scan: table rows
  double rows_out = 0;
  double row_bytes = 0;   // scan: sum of selected bytes_per_value
  double predicates = 0;  // filter
  double repeat = 0;      // eval scalar
  double width = 0;       // sort: row width; join: output column count
  double group_keys = 0;  // aggregate
  double build = 0;       // join
  double probe = 0;       // join
  double tasks = 0;       // join
};

struct JoinFeatures {
  double build_card = 0;
  double probe_card = 0;
  double ratio = 0;  // build / max(probe, 1)
  double log_build = 0;  // log(1 + build)
  double materialize_term = 0;
  double tasks = 0;

  static JoinFeatures from(const OperatorFeatures& f);
  std::vector<double> values() const;
};

struct ProfileSample {
  OperatorFeatures features;
  double cpu_time_ms = 0;
};

/// Features of node `id`. `inputs` are child output cardinalities (join:
/// build then probe, or any order; the smaller one is taken as build).
OperatorFeatures features_of(const QueryGraph& g, const Catalog& catalog, NodeId id,
                             const std::vector<int64_t>& inputs, int64_t output, int parallel_tasks);

/// Model key of a feature vector: scan, filter, eval_arith, eval_string,
/// eval_date, sort, join, aggregate.
std::string model_key(const OperatorFeatures& f);
/// Regressors of the parametric form behind `key`, in coefficient order.
std::vector<std::string> term_names(const std::string& key);
std::vector<double> term_values(const std::string& key, const OperatorFeatures& f);

/// Least-squares fitted linear form over term_values.
struct KindModel {
  std::vector<double> coefficients;
  size_t samples = 0;
  double mean_rel_error = 0;
  double median_rel_error = 0;

  bool operator==(const KindModel&) const = default;
};

/// Gradient-boosted regression trees, squared loss.
struct RegressionTreeEnsemble {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
    bool operator==(const Node&) const = default;
  };
  double base = 0;
  double learning_rate = 0.1;
  std::vector<std::vector<Node>> trees;

  double predict(const std::vector<double>& x) const;
  bool operator==(const RegressionTreeEnsemble&) const = default;
};

struct GbdtConfig {
  int trees = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_leaf = 2;
};

RegressionTreeEnsemble fit_gbdt(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                const GbdtConfig& config);

enum class JoinRegressor { Parametric, TreeEnsemble };

struct LocalModel {
  std::map<std::string, KindModel> kinds;
  JoinRegressor join_regressor = JoinRegressor::Parametric;
  RegressionTreeEnsemble join_trees;
  int parallel_tasks = 4;

  bool operator==(const LocalModel&) const = default;
};

struct FitOptions {
  JoinRegressor join_regressor = JoinRegressor::Parametric;
  GbdtConfig gbdt;
  /// Leave kinds with too few samples unfitted instead of raising.
  bool skip_sparse_kinds = false;
};

/// Runs `n_queries` random graphs and emits one sample per operator instance.
std::vector<ProfileSample> collect_profiles(const Catalog& catalog, ExecutionBackend& backend, int n_queries,
                                            uint64_t seed, const SampleBounds& bounds = {2, 2, 2, 20, 0.6, 0.5});

/// Kinds absent from `samples` stay unfitted. Throws ValidationError when a
/// present kind has fewer than 2 samples (or fewer than its term count) or
/// its design matrix is rank deficient.
LocalModel fit(const std::vector<ProfileSample>& samples, const FitOptions& options = {});

double predict_operator(const LocalModel& model, const OperatorFeatures& features);
double predict_query(const LocalModel& model, const QueryGraph& g, const Catalog& catalog,
                     const CardinalityEstimate& cards);

std::string serialize_model(const LocalModel& model);
LocalModel parse_model(std::string_view text);
LocalModel load_model(const std::string& path);
void save_model(const LocalModel& model, const std::string& path);

}  // namespace tracesynth
