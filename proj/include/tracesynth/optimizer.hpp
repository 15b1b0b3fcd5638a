#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tracesynth {

enum class Acquisition { ExpectedImprovement, Exploit };

struct OptimizerConfig {
  int dims = 1;
  /// Uniform random asks before the surrogate takes over.
  int n_initial = 8;
  Acquisition acquisition = Acquisition::ExpectedImprovement;
  uint64_t seed = 0;
  /// Exploit: noise added to the posterior mean when ranking candidates.
  double jitter = 0.01;
  int candidates = 256;
};

/// Maximizes a black-box function over [0,1]^dims. Gaussian-process
/// surrogate (Matern 5/2) on signed-log-warped, standardized scores.
class AskTellOptimizer {
 public:
  explicit AskTellOptimizer(OptimizerConfig config);

  std::vector<double> ask();
  void tell(const std::vector<double>& x, double y);

  size_t observations() const { return xs_.size(); }

 private:
  struct Surrogate;
  Surrogate fit() const;

  OptimizerConfig config_;
  std::mt19937_64 rng_;
  int random_asks_ = 0;
  std::vector<std::vector<double>> xs_;
  std::vector<double> ys_;
};

}  // namespace tracesynth
