#include "ember/emulator.hpp"

#include <cmath>
#include <string>

#include "ember/errors.hpp"

namespace ember::emulator {

namespace {

std::vector<double> uniform_block(std::size_t n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void require_spatial(const Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.ndim() != 3 || t.dim(0) != rows || t.dim(1) != cols) {
    throw DimensionError(std::string("convlstm: ") + what + " has shape " + shape_string(t.shape()) +
                         ", expected [" + std::to_string(rows) + ", " + std::to_string(cols) + ", C]");
  }
}

std::size_t gate_block(Gate gate) {
  switch (gate) {
    case Gate::Input: return 0;
    case Gate::Forget: return 1;
    case Gate::Cell: return 2;
    case Gate::Output: return 3;
  }
  return 0;
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::CL: return "cl";
    case Mode::PGCL: return "pgcl";
    case Mode::PGCLPlus: return "pgcl+";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (auto m : {Mode::CL, Mode::PGCL, Mode::PGCLPlus}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

// ---- ConvLSTMCell -----------------------------------------------------------

ConvLSTMCell::ConvLSTMCell(std::size_t in_channels, std::size_t hidden, std::size_t kernel,
                           std::mt19937_64& rng)
    : in_(in_channels), hidden_(hidden), k_(kernel) {
  if (kernel % 2 == 0) throw ConfigError("convlstm: kernel size must be odd");
  if (hidden == 0 || in_channels == 0) throw ConfigError("convlstm: channel counts must be positive");
  const std::size_t kk = k_ * k_;
  const std::size_t cx = in_ + hidden_;
  const std::size_t h = hidden_;

  std::vector<double> wxh(kk * cx * 4 * h);
  std::vector<double> wcp(kk * h * 2 * h);
  std::vector<double> wcn(kk * h * h);
  for (std::size_t gate = 0; gate < 4; ++gate) {
    const bool peephole = gate != 2;
    const double fan_in = static_cast<double>(kk * (cx + (peephole ? h : 0)));
    const double bound = std::sqrt(1.0 / fan_in);
    for (std::size_t r = 0; r < kk * cx; ++r) {
      auto vals = uniform_block(h, bound, rng);
      std::copy(vals.begin(), vals.end(), wxh.begin() + static_cast<std::ptrdiff_t>(r * 4 * h + gate * h));
    }
    if (!peephole) continue;
    for (std::size_t r = 0; r < kk * h; ++r) {
      auto vals = uniform_block(h, bound, rng);
      if (gate < 2) {
        std::copy(vals.begin(), vals.end(), wcp.begin() + static_cast<std::ptrdiff_t>(r * 2 * h + gate * h));
      } else {
        std::copy(vals.begin(), vals.end(), wcn.begin() + static_cast<std::ptrdiff_t>(r * h));
      }
    }
  }
  std::vector<double> b(4 * h, 0.0);
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(h), b.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);

  w_xh_ = Tensor::parameter({k_, k_, cx, 4 * h}, std::move(wxh));
  w_cprev_ = Tensor::parameter({k_, k_, h, 2 * h}, std::move(wcp));
  w_cnext_ = Tensor::parameter({k_, k_, h, h}, std::move(wcn));
  bias_ = Tensor::parameter({4 * h}, std::move(b));
  zero2_ = Tensor::zeros({2 * h});
  zero1_ = Tensor::zeros({h});
}

CellState ConvLSTMCell::zero_state(std::size_t rows, std::size_t cols) const {
  return {Tensor::zeros({rows, cols, hidden_}), Tensor::zeros({rows, cols, hidden_})};
}

CellState ConvLSTMCell::forward(const Tensor& x, const CellState& prev) const {
  if (x.ndim() != 3) throw DimensionError("convlstm: input must be [M, P, C], got " + shape_string(x.shape()));
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (x.dim(2) != in_) {
    throw DimensionError("convlstm: input channel axis is " + std::to_string(x.dim(2)) + ", expected " +
                         std::to_string(in_));
  }
  require_spatial(prev.h, rows, cols, "h_prev");
  require_spatial(prev.c, rows, cols, "c_prev");
  if (prev.h.dim(2) != hidden_ || prev.c.dim(2) != hidden_) {
    throw DimensionError("convlstm: state channel axis must be " + std::to_string(hidden_));
  }
  const std::size_t h = hidden_;

  const Tensor xh_parts[] = {x, prev.h};
  const Tensor z = ops::conv2d_same(ops::concat_last(xh_parts), w_xh_, bias_);
  const Tensor zc = ops::conv2d_same(prev.c, w_cprev_, zero2_);

  const Tensor i = ops::sigmoid(ops::add(ops::slice_last(z, 0, h), ops::slice_last(zc, 0, h)));
  const Tensor f = ops::sigmoid(ops::add(ops::slice_last(z, h, 2 * h), ops::slice_last(zc, h, 2 * h)));
  const Tensor g = ops::tanh(ops::slice_last(z, 2 * h, 3 * h));
  const Tensor c = ops::add(ops::mul(f, prev.c), ops::mul(i, g));
  const Tensor o = ops::sigmoid(
      ops::add(ops::slice_last(z, 3 * h, 4 * h), ops::conv2d_same(c, w_cnext_, zero1_)));
  return {ops::mul(o, ops::tanh(c)), c};
}

Tensor ConvLSTMCell::gate_kernel(Gate gate) const {
  const std::size_t b = gate_block(gate);
  const bool peephole = gate != Gate::Cell;
  const std::size_t h = hidden_;
  const std::size_t cx = in_ + h;
  const std::size_t cin = cx + (peephole ? h : 0);
  std::vector<double> out(k_ * k_ * cin * h, 0.0);
  const auto wxh = w_xh_.data();
  const auto wcp = w_cprev_.data();
  const auto wcn = w_cnext_.data();
  for (std::size_t tap = 0; tap < k_ * k_; ++tap) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t j = 0; j < h; ++j) {
        double v;
        if (ci < cx) {
          v = wxh[(tap * cx + ci) * 4 * h + b * h + j];
        } else if (gate == Gate::Output) {
          v = wcn[(tap * h + (ci - cx)) * h + j];
        } else {
          v = wcp[(tap * h + (ci - cx)) * 2 * h + b * h + j];
        }
        out[(tap * cin + ci) * h + j] = v;
      }
    }
  }
  return Tensor::from({k_, k_, cin, h}, std::move(out));
}

void ConvLSTMCell::set_gate(Gate gate, std::span<const double> kernel, std::span<const double> bias) {
  const std::size_t b = gate_block(gate);
  const bool peephole = gate != Gate::Cell;
  const std::size_t h = hidden_;
  const std::size_t cx = in_ + h;
  const std::size_t cin = cx + (peephole ? h : 0);
  if (kernel.size() != k_ * k_ * cin * h || bias.size() != h) {
    throw DimensionError("convlstm: set_gate expects a [" + std::to_string(k_) + ", " + std::to_string(k_) +
                         ", " + std::to_string(cin) + ", " + std::to_string(h) + "] kernel and [" +
                         std::to_string(h) + "] bias");
  }
  auto wxh = w_xh_.mutable_data();
  auto wcp = w_cprev_.mutable_data();
  auto wcn = w_cnext_.mutable_data();
  for (std::size_t tap = 0; tap < k_ * k_; ++tap) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t j = 0; j < h; ++j) {
        const double v = kernel[(tap * cin + ci) * h + j];
        if (ci < cx) {
          wxh[(tap * cx + ci) * 4 * h + b * h + j] = v;
        } else if (gate == Gate::Output) {
          wcn[(tap * h + (ci - cx)) * h + j] = v;
        } else {
          wcp[(tap * h + (ci - cx)) * 2 * h + b * h + j] = v;
        }
      }
    }
  }
  auto bs = bias_.mutable_data();
  std::copy(bias.begin(), bias.end(), bs.begin() + static_cast<std::ptrdiff_t>(b * h));
}

std::vector<std::pair<std::string, Tensor>> ConvLSTMCell::named_parameters() const {
  return {{"w_xh", w_xh_}, {"w_cprev", w_cprev_}, {"w_cnext", w_cnext_}, {"bias", bias_}};
}

// ---- EmulatorModel ----------------------------------------------------------

EmulatorModel::EmulatorModel(const EmulatorConfig& config) : config_(config) {
  if (config.layers == 0) throw ConfigError("emulator: need at least one layer");
  if (config.components == 0) throw ConfigError("emulator: need at least one mixture component");
  if (!(config.sigma_floor >= 0.0)) throw ConfigError("emulator: sigma_floor must be >= 0");
  std::mt19937_64 rng(config.seed);
  const std::size_t h = config.hidden;
  std::size_t in = config.in_channels;
  for (std::size_t l = 0; l < config.layers; ++l) {
    cells_.emplace_back(in, h, config.kernel, rng);
    norms_.push_back({Tensor::parameter({h}, std::vector<double>(h, 1.0)),
                      Tensor::parameter({h}, std::vector<double>(h, 0.0)),
                      {}});
    norms_.back().state.running_mean.assign(h, 0.0);
    norms_.back().state.running_var.assign(h, 1.0);
    in = h;
  }
  const std::size_t out = config.mode == Mode::PGCLPlus ? 3 * config.components : 1;
  const double bound = std::sqrt(1.0 / static_cast<double>(h));
  head_w_ = Tensor::parameter({1, 1, h, out}, uniform_block(h * out, bound, rng));
  head_b_ = Tensor::parameter({out}, std::vector<double>(out, 0.0));
  if (config.mode == Mode::PGCLPlus) {
    rate_w_ = Tensor::parameter({1, 1, h, 1}, uniform_block(h, bound, rng));
    rate_b_ = Tensor::parameter({1}, {0.0});
  }
}

Prediction EmulatorModel::forward(const Tensor& x, bool training) {
  if (x.ndim() != 4) throw DimensionError("emulator: input must be [T, M, P, C], got " + shape_string(x.shape()));
  if (x.dim(3) != config_.in_channels) {
    throw ConfigError("emulator: input has " + std::to_string(x.dim(3)) + " channels, model expects " +
                      std::to_string(config_.in_channels));
  }
  const std::size_t steps = x.dim(0);
  const std::size_t rows = x.dim(1);
  const std::size_t cols = x.dim(2);
  const std::size_t k = config_.components;
  const bool mixture = config_.mode == Mode::PGCLPlus;

  std::vector<CellState> states;
  states.reserve(cells_.size());
  for (const auto& cell : cells_) states.push_back(cell.zero_state(rows, cols));

  // Batch statistics at inference unless the model asks for running averages.
  const bool batch_stats = training || !config_.bn_running_at_inference;
  std::vector<Tensor> point, logits, mu, sigma, rate;
  const std::size_t spatial[] = {0, 1};
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor feature = ops::select(x, t);
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      states[l] = cells_[l].forward(feature, states[l]);
      auto& norm = norms_[l];
      if (batch_stats && !training) {
        // Same normalisation as training without touching the running averages.
        auto scratch = norm.state;
        feature = ops::relu(ops::batch_norm(states[l].h, norm.gamma, norm.beta, scratch, true));
      } else {
        feature = ops::relu(ops::batch_norm(states[l].h, norm.gamma, norm.beta, norm.state, training));
      }
    }
    const Tensor head = ops::conv2d_same(feature, head_w_, head_b_);
    if (!mixture) {
      point.push_back(ops::reshape(head, {rows, cols}));
      continue;
    }
    logits.push_back(ops::slice_last(head, 0, k));
    mu.push_back(ops::slice_last(head, k, 2 * k));
    sigma.push_back(ops::add_scalar(ops::softplus(ops::slice_last(head, 2 * k, 3 * k)), config_.sigma_floor));
    const Tensor pooled = ops::reshape(ops::mean(feature, spatial), {1, 1, config_.hidden});
    const Tensor r = ops::softplus(ops::conv2d_same(pooled, rate_w_, rate_b_));
    rate.push_back(ops::reshape(ops::scale(r, static_cast<double>(rows * cols)), {}));
  }

  Prediction pred;
  if (!mixture) {
    pred.fuel = ops::stack(point);
    return pred;
  }
  MixtureParams mp;
  mp.logits = ops::stack(logits);
  mp.pi = ops::softmax_last(mp.logits);
  mp.mu = ops::stack(mu);
  mp.sigma = ops::stack(sigma);
  mp.rate = ops::stack(rate);
  pred.fuel = mixture_mean(mp.pi, mp.mu);
  pred.mixture = std::move(mp);
  return pred;
}

std::vector<Tensor> EmulatorModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> EmulatorModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (auto& [name, t] : cells_[l].named_parameters()) out.emplace_back(prefix + name, t);
    out.emplace_back(prefix + "bn_gamma", norms_[l].gamma);
    out.emplace_back(prefix + "bn_beta", norms_[l].beta);
  }
  out.emplace_back("head.weight", head_w_);
  out.emplace_back("head.bias", head_b_);
  if (rate_w_.defined()) {
    out.emplace_back("rate.weight", rate_w_);
    out.emplace_back("rate.bias", rate_b_);
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> EmulatorModel::named_buffers() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  for (std::size_t l = 0; l < norms_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.emplace_back(prefix + "bn_running_mean", &norms_[l].state.running_mean);
    out.emplace_back(prefix + "bn_running_var", &norms_[l].state.running_var);
  }
  return out;
}

// ---- heads ------------------------------------------------------------------

Tensor mixture_mean(const Tensor& pi, const Tensor& mu) {
  if (pi.shape() != mu.shape() || pi.ndim() == 0) {
    throw DimensionError("mixture_mean: pi " + shape_string(pi.shape()) + " vs mu " + shape_string(mu.shape()));
  }
  const std::size_t last[] = {pi.ndim() - 1};
  return ops::sum(ops::mul(pi, mu), last);
}

Tensor mdn_nll(const MixtureParams& params, const Tensor& y) {
  return ops::mixture_nll(params.logits, params.mu, params.sigma, y);
}

std::vector<double> burned_counts(const Tensor& y, double burned_threshold) {
  if (y.ndim() == 0) throw DimensionError("burned_counts: need a leading time axis");
  const std::size_t steps = y.dim(0);
  const std::size_t frame = y.numel() / steps;
  const auto ys = y.data();
  std::vector<double> counts(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < frame; ++i) {
      if (ys[t * frame + i] < burned_threshold) counts[t] += 1.0;
    }
  }
  return counts;
}

PoissonTerms poisson_head(const Tensor& rate, const Tensor& y_obs, double prior_rate,
                          double burned_threshold, std::mt19937_64& rng) {
  if (!(prior_rate > 0.0)) throw ConfigError("poisson_head: prior_rate must be > 0");
  if (rate.ndim() != 1 || y_obs.ndim() == 0 || y_obs.dim(0) != rate.dim(0)) {
    throw DimensionError("poisson_head: rate " + shape_string(rate.shape()) + " does not match Y " +
                         shape_string(y_obs.shape()));
  }
  const std::size_t steps = rate.dim(0);
  PoissonTerms out;
  out.counts = burned_counts(y_obs, burned_threshold);
  std::vector<double> log_factorial(steps);
  for (std::size_t t = 0; t < steps; ++t) log_factorial[t] = std::lgamma(out.counts[t] + 1.0);

  const Tensor counts = Tensor::from({steps}, out.counts);
  const Tensor log_rate = ops::log(rate);
  const Tensor kl = ops::add_scalar(
      ops::sub(ops::mul(rate, ops::add_scalar(log_rate, -std::log(prior_rate))), rate), prior_rate);
  const Tensor nll = ops::add(ops::sub(rate, ops::mul(counts, log_rate)), Tensor::from({steps}, log_factorial));
  out.loss = ops::mean(ops::add(kl, nll));
  out.kl.assign(kl.data().begin(), kl.data().end());
  out.nll.assign(nll.data().begin(), nll.data().end());

  const auto rs = rate.data();
  out.sample.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::poisson_distribution<std::int64_t> dist(rs[t]);
    out.sample[t] = dist(rng);
  }
  return out;
}

}  // namespace ember::emulator
