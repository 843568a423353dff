#pragma once

// Evaluation metrics over fuel-density sequences (plain values, no graph).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ember/field.hpp"
#include "ember/losses.hpp"

namespace ember::metrics {

struct MseSuite {
  double mse = 0.0;
  double burned_mse = 0.0;    // over ground-truth cells below eps_b
  double unburned_mse = 0.0;  // over ground-truth cells above eps_u
  double fire_metrics_mse = 0.0;  // L_ROS + L_BA
  bool burned_empty = false;
  bool unburned_empty = false;
};

MseSuite mse_suite(const FieldView& y, const FieldView& y_hat, const losses::LossWeights& weights);

struct Dmse {
  double value = 0.0;
  bool degenerate = false;  // ground truth never changes
};

/// sum |Y_t - Y_{t-1}| (Y_hat_t - Y_t)^2 / sum |Y_t - Y_{t-1}| over t >= 1.
/// Throws DimensionError if T < 2.
Dmse dmse(const FieldView& y, const FieldView& y_hat);

struct ConsistencyOptions {
  double eps = 0.001;
  double eps_b = 0.1;
  double eps_u = 0.65;
  double underestimate_tolerance = 0.0;  // Y_hat < Y - tol counts as underestimated
};

struct Consistency {
  double metric_ft = 0.0;
  double metric_burned = 0.0;
  double metric_unburned = 0.0;
  double metric_fp = 0.0;
  double metric_fn = 0.0;
  bool unburned_empty = false;
  bool burning_empty = false;
};

/// Percentages over the ground-truth classes burned (Y < eps_b), unburned
/// (Y > eps_u) and burning (in between).
Consistency consistency_metrics(const FieldView& y, const FieldView& y_hat, const ConsistencyOptions& options);

struct Timing {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

/// Wall-clock seconds of each of `repetitions` calls of `run`.
std::vector<double> time_calls(const std::function<void()>& run, std::size_t repetitions);
/// Wall-clock seconds of `run` over `repetitions` calls.
Timing timing_report(const std::function<void()>& run, std::size_t repetitions = 10);
/// Pools per-call seconds into one summary.
Timing summarize(std::span<const double> seconds);

}  // namespace ember::metrics
