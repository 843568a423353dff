#include "ember/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "ember/errors.hpp"

namespace ember::metrics {

namespace {

double pct(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

Tensor as_tensor(const FieldView& v) {
  return Tensor::from({v.steps, v.rows, v.cols}, std::vector<double>(v.values.begin(), v.values.end()));
}

}  // namespace

MseSuite mse_suite(const FieldView& y, const FieldView& y_hat, const losses::LossWeights& weights) {
  require_same_dims(y, y_hat, "mse_suite");
  MseSuite s;
  double all = 0.0, burned = 0.0, unburned = 0.0;
  std::size_t nb = 0, nu = 0;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double d = y_hat.values[i] - y.values[i];
    const double e = d * d;
    all += e;
    if (y.values[i] < weights.eps_b) {
      burned += e;
      ++nb;
    }
    if (y.values[i] > weights.eps_u) {
      unburned += e;
      ++nu;
    }
  }
  s.mse = y.values.empty() ? 0.0 : all / static_cast<double>(y.values.size());
  s.burned_empty = nb == 0;
  s.unburned_empty = nu == 0;
  s.burned_mse = nb == 0 ? 0.0 : burned / static_cast<double>(nb);
  s.unburned_mse = nu == 0 ? 0.0 : unburned / static_cast<double>(nu);
  const Tensor ty = as_tensor(y);
  const Tensor th = as_tensor(y_hat);
  s.fire_metrics_mse =
      losses::loss_ros(ty, th, weights.eps_b).item() + losses::loss_ba(ty, th, weights.eps_b).item();
  return s;
}

Dmse dmse(const FieldView& y, const FieldView& y_hat) {
  require_same_dims(y, y_hat, "dmse");
  if (y.steps < 2) throw DimensionError("dmse: needs T >= 2, got T = " + std::to_string(y.steps));
  const std::size_t n = y.frame_size();
  double num = 0.0, den = 0.0;
  for (std::size_t t = 1; t < y.steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::abs(y.values[t * n + i] - y.values[(t - 1) * n + i]);
      const double d = y_hat.values[t * n + i] - y.values[t * n + i];
      num += w * d * d;
      den += w;
    }
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

Consistency consistency_metrics(const FieldView& y, const FieldView& y_hat, const ConsistencyOptions& o) {
  require_same_dims(y, y_hat, "consistency_metrics");
  Consistency c;
  const std::size_t n = y.frame_size();
  std::size_t ft_hits = 0;
  for (std::size_t t = 1; t < y.steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (y_hat.values[t * n + i] - y_hat.values[(t - 1) * n + i] > o.eps) ++ft_hits;
    }
  }
  c.metric_ft = y.steps < 2 ? 0.0 : pct(ft_hits, n * (y.steps - 1));

  std::size_t unburned = 0, burning = 0, ub_as_burned = 0, ub_under = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double truth = y.values[i];
    const double pred = y_hat.values[i];
    if (truth > o.eps_u) {
      ++unburned;
      if (pred < o.eps_b) ++ub_as_burned;
      if (pred < truth - o.underestimate_tolerance) ++ub_under;
    } else if (truth >= o.eps_b) {
      ++burning;
      if (pred < o.eps_b) ++fp;
      if (pred > o.eps_u) ++fn;
    }
  }
  c.unburned_empty = unburned == 0;
  c.burning_empty = burning == 0;
  c.metric_burned = pct(ub_as_burned, unburned);
  c.metric_unburned = pct(ub_under, unburned);
  c.metric_fp = pct(fp, burning);
  c.metric_fn = pct(fn, burning);
  return c;
}

Timing summarize(std::span<const double> seconds) {
  Timing t;
  if (seconds.empty()) return t;
  t.samples = seconds.size();
  t.min = *std::min_element(seconds.begin(), seconds.end());
  t.max = *std::max_element(seconds.begin(), seconds.end());
  double total = 0.0;
  for (double s : seconds) total += s;
  t.mean = total / static_cast<double>(seconds.size());
  return t;
}

std::vector<double> time_calls(const std::function<void()>& run, std::size_t repetitions) {
  if (repetitions == 0) throw ConfigError("timing_report: repetitions must be >= 1");
  std::vector<double> seconds;
  seconds.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    run();
    const auto stop = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return seconds;
}

Timing timing_report(const std::function<void()>& run, std::size_t repetitions) {
  return summarize(time_calls(run, repetitions));
}

}  // namespace ember::metrics
