#pragma once

// ConvLSTM fuel-density emulator with optional mixture-density and Poisson
// count heads.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ember/ops.hpp"
#include "ember/tensor.hpp"

namespace ember::emulator {

enum class Mode { CL, PGCL, PGCLPlus };

/// Wire names: cl, pgcl, pgcl+.
std::string_view mode_name(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

enum class Gate { Input, Forget, Cell, Output };

struct CellState {
  Tensor h;  // [M, P, H]
  Tensor c;  // [M, P, H]
};

/// One ConvLSTM layer with peepholes:
///   i = sigmoid(W_i [x; h; c_prev] + b_i)
///   f = sigmoid(W_f [x; h; c_prev] + b_f)
///   g = tanh(W_g [x; h] + b_g)
///   c = f * c_prev + i * g
///   o = sigmoid(W_o [x; h; c] + b_o)
///   h = o * tanh(c)
/// The four [x; h] slices are stored fused in one kernel so that each step
/// runs a single wide convolution; the cell-state slices live in two smaller
/// kernels because c_prev and c are different tensors.
class ConvLSTMCell {
 public:
  ConvLSTMCell() = default;
  /// Uniform +-sqrt(1 / fan_in) kernels, zero biases except b_f = 1.
  ConvLSTMCell(std::size_t in_channels, std::size_t hidden, std::size_t kernel, std::mt19937_64& rng);

  CellState forward(const Tensor& x, const CellState& prev) const;
  CellState zero_state(std::size_t rows, std::size_t cols) const;

  /// The assembled kernel of one gate over its full concatenated input:
  /// [k, k, Cin + H (+ H), H]. A copy; editing it does not touch the cell.
  Tensor gate_kernel(Gate gate) const;
  /// Overwrites one gate's kernel (same layout as gate_kernel) and bias.
  void set_gate(Gate gate, std::span<const double> kernel, std::span<const double> bias);

  std::size_t in_channels() const { return in_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t kernel_size() const { return k_; }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

 private:
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t k_ = 3;
  Tensor w_xh_;      // [k, k, Cin + H, 4H], output blocks i, f, g, o
  Tensor w_cprev_;   // [k, k, H, 2H], output blocks i, f
  Tensor w_cnext_;   // [k, k, H, H], output block o
  Tensor bias_;      // [4H]
  Tensor zero2_;     // [2H] constant
  Tensor zero1_;     // [H] constant
};

/// Per-cell k-component Gaussian mixture plus one Poisson rate per frame.
struct MixtureParams {
  Tensor logits;  // [T, M, P, k]
  Tensor pi;      // softmax(logits)
  Tensor mu;      // [T, M, P, k]
  Tensor sigma;   // [T, M, P, k], > 0
  Tensor rate;    // [T], > 0
};

struct Prediction {
  Tensor fuel;                         // [T, M, P]; the mixture mean in PGCL+ mode
  std::optional<MixtureParams> mixture;
};

struct EmulatorConfig {
  std::size_t in_channels = 4;
  std::size_t hidden = 8;
  std::size_t layers = 4;
  std::size_t kernel = 3;
  std::size_t components = 2;
  Mode mode = Mode::CL;
  double sigma_floor = 0.01;
  bool bn_running_at_inference = false;
  std::uint64_t seed = 0;
};

/// Four (by default) stacked ConvLSTM layers, each followed by batch norm and
/// ReLU, and a 1x1 output convolution applied per frame.
class EmulatorModel {
 public:
  explicit EmulatorModel(const EmulatorConfig& config);

  /// X: [T, M, P, C]. Hidden states start at zero on every call. training
  /// selects batch statistics (and updates running averages) over the
  /// running averages.
  Prediction forward(const Tensor& x, bool training = false);

  const EmulatorConfig& config() const { return config_; }
  std::vector<Tensor> parameters() const;
  /// Stable names for checkpoints, including batch-norm running statistics
  /// (returned as non-trainable tensors sharing storage with the model).
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<std::pair<std::string, std::vector<double>*>> named_buffers();

  ConvLSTMCell& cell(std::size_t layer) { return cells_.at(layer); }
  Tensor& head_kernel() { return head_w_; }
  Tensor& head_bias() { return head_b_; }
  Tensor& rate_kernel() { return rate_w_; }
  Tensor& rate_bias() { return rate_b_; }

 private:
  struct Norm {
    Tensor gamma;
    Tensor beta;
    ops::BatchNormState state;
  };

  EmulatorConfig config_;
  std::vector<ConvLSTMCell> cells_;
  std::vector<Norm> norms_;
  Tensor head_w_;  // [1, 1, H, out]
  Tensor head_b_;  // [out]
  Tensor rate_w_;  // [1, 1, H, 1], PGCL+ only
  Tensor rate_b_;  // [1]
};

/// sum_j pi_j * mu_j over the last axis.
Tensor mixture_mean(const Tensor& pi, const Tensor& mu);

/// Mean over cells and frames of -log sum_j pi_j N(Y; mu_j, sigma_j).
Tensor mdn_nll(const MixtureParams& params, const Tensor& y);

struct PoissonTerms {
  Tensor loss;                       // mean over frames of KL + NLL
  std::vector<double> kl;            // per frame
  std::vector<double> nll;           // per frame
  std::vector<double> counts;        // observed c_t
  std::vector<std::int64_t> sample;  // psi_t ~ Pois(lambda_t); diagnostic
};

/// Number of cells per frame with Y below burned_threshold.
std::vector<double> burned_counts(const Tensor& y, double burned_threshold);

/// KL(Pois(rate) || Pois(prior)) + (-log Pois(c_t; rate)) averaged over frames.
/// rate: [T]. Throws ConfigError if prior_rate <= 0.
PoissonTerms poisson_head(const Tensor& rate, const Tensor& y_obs, double prior_rate,
                          double burned_threshold, std::mt19937_64& rng);

}  // namespace ember::emulator
