#include "tracesynth/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tracesynth {

namespace {

double matern52(double r, double ls) {
  const double s = std::sqrt(5.0) * r / ls;
  return (1 + s + s * s / 3) * std::exp(-s);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d);
}

constexpr double kNoise = 1e-4;

}  // namespace

struct AskTellOptimizer::Surrogate {
  double length_scale = 0.2;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
  double best = 0;  // best standardized observation
  const std::vector<std::vector<double>>* xs = nullptr;

  std::pair<double, double> predict(const std::vector<double>& x) const {
    const auto n = static_cast<Eigen::Index>(xs->size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k(i) = matern52(distance(x, (*xs)[static_cast<size_t>(i)]), length_scale);
    const double mean = k.dot(alpha);
    const Eigen::VectorXd v = llt.matrixL().solve(k);
    const double var = std::max(1e-12, 1.0 + kNoise - v.squaredNorm());
    return {mean, std::sqrt(var)};
  }
};

AskTellOptimizer::AskTellOptimizer(OptimizerConfig config) : config_(config), rng_(config.seed) {
  if (config_.dims < 1) throw std::invalid_argument("optimizer needs at least one dimension");
}

void AskTellOptimizer::tell(const std::vector<double>& x, double y) {
  if (x.size() != static_cast<size_t>(config_.dims)) throw std::invalid_argument("point has wrong dimension");
  xs_.push_back(x);
  ys_.push_back(y);
}

AskTellOptimizer::Surrogate AskTellOptimizer::fit() const {
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = ys_[static_cast<size_t>(i)];
    y(i) = std::copysign(std::log1p(std::abs(v)), v);
  }
  const double mean = y.mean();
  const double sd = n > 1 ? std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
  y = (y.array() - mean) / (sd > 0 ? sd : 1.0);

  Surrogate best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double ls : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double k = matern52(distance(xs_[static_cast<size_t>(i)], xs_[static_cast<size_t>(j)]), ls);
        K(i, j) = K(j, i) = k;
      }
      K(i, i) += kNoise;
    }
    Surrogate s;
    s.length_scale = ls;
    s.llt.compute(K);
    if (s.llt.info() != Eigen::Success) continue;
    s.alpha = s.llt.solve(y);
    const Eigen::MatrixXd L = s.llt.matrixL();
    const double lml = -0.5 * y.dot(s.alpha) - L.diagonal().array().log().sum();
    if (lml > best_lml) {
      best_lml = lml;
      best = std::move(s);
    }
  }
  best.best = y.maxCoeff();
  best.xs = &xs_;
  return best;
}

std::vector<double> AskTellOptimizer::ask() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<size_t>(config_.dims);
  if (random_asks_ < config_.n_initial || xs_.size() < 2) {
    ++random_asks_;
    std::vector<double> x(d);
    for (auto& v : x) v = unit(rng_);
    return x;
  }

  const Surrogate s = fit();
  std::vector<std::vector<double>> candidates;
  for (int i = 0; i < config_.candidates; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = unit(rng_);
    candidates.push_back(std::move(x));
  }
  std::vector<size_t> order(xs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return ys_[a] > ys_[b]; });
  const double sigma = config_.acquisition == Acquisition::Exploit ? 0.02 : 0.05;
  std::normal_distribution<double> step(0.0, sigma);
  for (size_t t = 0; t < std::min<size_t>(5, order.size()); ++t) {
    for (int i = 0; i < 32; ++i) {
      auto x = xs_[order[t]];
      for (auto& v : x) v = std::clamp(v + step(rng_), 0.0, 1.0);
      candidates.push_back(std::move(x));
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  double best_value = -std::numeric_limits<double>::infinity();
  size_t best_index = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto [mu, sd] = s.predict(candidates[i]);
    double value;
    if (config_.acquisition == Acquisition::ExpectedImprovement) {
      const double imp = mu - s.best - 0.01;
      const double z = imp / sd;
      const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
      const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
      value = imp * cdf + sd * pdf;
    } else {
      value = mu + config_.jitter * noise(rng_);
    }
    if (value > best_value) {
      best_value = value;
      best_index = i;
    }
  }
  return candidates[best_index];
}

}  // namespace tracesynth
