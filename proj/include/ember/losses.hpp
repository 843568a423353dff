#pragma once

// Physics-guided loss terms over fuel-density sequences Y, Y_hat: [T, M, P].
// Y is ground truth and never receives gradient; threshold masks are
// evaluated once and held constant.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "ember/emulator.hpp"
#include "ember/tensor.hpp"

namespace ember::losses {

enum class Base { MSE, MDN_NLL };
enum class ErrorNorm { Squared, Absolute };

enum class Term { FT, ROS, BA, Burned, Unburned, Gram, PP };
inline constexpr std::size_t kTermCount = 7;
std::string_view term_name(Term term);

struct LossWeights {
  double ft = 0.001;
  double ros = 0.0001;
  double ba = 0.0001;
  double burned = 0.001;
  double unburned = 0.0001;
  double gram = 0.0;
  double pp = 1.0;

  double eps = 0.001;    // fuel-transport tolerance
  double eps_b = 0.1;    // burned below this
  double eps_u = 0.65;   // unburned above this

  bool use_ft = true;
  bool use_ros = true;
  bool use_ba = true;
  bool use_burned = true;
  bool use_unburned = true;
  bool use_gram = false;
  bool use_pp = true;

  Base base = Base::MSE;
  ErrorNorm norm = ErrorNorm::Squared;
  /// Divide masked sums by the masked-cell count instead of T.
  bool per_cell = false;
  bool pp_per_cell = true;  // divide L_PP by M*P, putting counts on the per-cell scale

  /// Plain MSE training: every physics term disabled.
  static LossWeights unconstrained();

  double weight(Term term) const;
  bool enabled(Term term) const;
  /// weight(term) if enabled, else 0.
  double effective(Term term) const;
  void set_enabled(Term term, bool on);
  /// Throws ConfigError on negative weights or thresholds out of order.
  void validate() const;
};

/// Elementwise |d|^2 or |d| of (y_hat - y), per the norm option.
Tensor cell_error(const Tensor& y, const Tensor& y_hat, ErrorNorm norm);

Tensor loss_mse(const Tensor& y, const Tensor& y_hat);

/// Penalizes predicted fuel increases above eps between consecutive frames.
/// Throws DimensionError if T < 2.
Tensor loss_ft(const Tensor& y, const Tensor& y_hat, double eps, ErrorNorm norm = ErrorNorm::Squared,
               bool per_cell = false);
Tensor loss_burned(const Tensor& y, const Tensor& y_hat, double eps_b, ErrorNorm norm = ErrorNorm::Squared,
                   bool per_cell = false);
Tensor loss_unburned(const Tensor& y, const Tensor& y_hat, double eps_u,
                     ErrorNorm norm = ErrorNorm::Squared, bool per_cell = false);

/// Columns holding at least one cell below eps_b.
std::size_t burned_columns(std::span<const double> frame, std::size_t rows, std::size_t cols, double eps_b);
/// (eta(frame) - eta(frame0)) / (t - t0) in columns per step. Throws
/// DomainError when t == t0.
double ros(std::span<const double> frame, std::span<const double> frame0, std::size_t rows, std::size_t cols,
           std::size_t t, std::size_t t0, double eps_b);
/// Percentage of cells below eps_b.
double ba(std::span<const double> frame, double eps_b);

/// Count-based spread terms. Their values are piecewise constant in Y_hat, so
/// they are returned as constants (zero gradient).
Tensor loss_ros(const Tensor& y, const Tensor& y_hat, double eps_b);
Tensor loss_ba(const Tensor& y, const Tensor& y_hat, double eps_b);

/// Mean squared difference of the frame-by-frame Gram matrices
/// G_st = <v_s, v_t> / (M P).
Tensor loss_gram(const Tensor& y, const Tensor& y_hat);

struct LossResult {
  Tensor total;
  double base = 0.0;
  std::array<double, kTermCount> terms{};    // unweighted values
  std::array<double, kTermCount> weights{};  // effective weights applied

  double term(Term t) const { return terms[static_cast<std::size_t>(t)]; }
};

/// base + sum over enabled terms of weight * term, accumulated in Term order.
/// MSE base needs y_hat; MDN_NLL base needs mixture. poisson (a scalar from
/// emulator::poisson_head) is added only with the MDN_NLL base. Disabled
/// terms are still evaluated for reporting but never enter the graph.
LossResult total_loss(const Tensor& y, const Tensor& y_hat, const emulator::MixtureParams* mixture,
                      const LossWeights& weights, const Tensor* poisson = nullptr);

}  // namespace ember::losses
