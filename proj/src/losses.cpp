#include "ember/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "ember/errors.hpp"
#include "ember/ops.hpp"

namespace ember::losses {

namespace {

void require_sequence_pair(const Tensor& y, const Tensor& y_hat, const char* who) {
  if (y.ndim() != 3) throw DimensionError(std::string(who) + ": Y must be [T, M, P], got " + shape_string(y.shape()));
  if (y.shape() != y_hat.shape()) {
    throw DimensionError(std::string(who) + ": Y " + shape_string(y.shape()) + " vs Y_hat " +
                         shape_string(y_hat.shape()));
  }
}

// sum(error * mask) / (T or mask count).
Tensor masked_error(const Tensor& y, const Tensor& y_hat, std::vector<double> mask, ErrorNorm norm, bool per_cell) {
  double count = 0.0;
  for (double m : mask) count += m;
  const double denom = per_cell ? std::max(1.0, count) : static_cast<double>(y.dim(0));
  const Tensor m = Tensor::from(y.shape(), std::move(mask));
  return ops::scale(ops::sum(ops::mul(cell_error(y, y_hat, norm), m)), 1.0 / denom);
}

std::size_t idx(Term t) { return static_cast<std::size_t>(t); }

}  // namespace

std::string_view term_name(Term term) {
  switch (term) {
    case Term::FT: return "ft";
    case Term::ROS: return "ros";
    case Term::BA: return "ba";
    case Term::Burned: return "burned";
    case Term::Unburned: return "unburned";
    case Term::Gram: return "gram";
    case Term::PP: return "pp";
  }
  return "unknown";
}

LossWeights LossWeights::unconstrained() {
  LossWeights w;
  w.use_ft = w.use_ros = w.use_ba = w.use_burned = w.use_unburned = w.use_gram = w.use_pp = false;
  return w;
}

double LossWeights::weight(Term term) const {
  switch (term) {
    case Term::FT: return ft;
    case Term::ROS: return ros;
    case Term::BA: return ba;
    case Term::Burned: return burned;
    case Term::Unburned: return unburned;
    case Term::Gram: return gram;
    case Term::PP: return pp;
  }
  return 0.0;
}

bool LossWeights::enabled(Term term) const {
  switch (term) {
    case Term::FT: return use_ft;
    case Term::ROS: return use_ros;
    case Term::BA: return use_ba;
    case Term::Burned: return use_burned;
    case Term::Unburned: return use_unburned;
    case Term::Gram: return use_gram;
    case Term::PP: return use_pp;
  }
  return false;
}

double LossWeights::effective(Term term) const { return enabled(term) ? weight(term) : 0.0; }

void LossWeights::set_enabled(Term term, bool on) {
  switch (term) {
    case Term::FT: use_ft = on; break;
    case Term::ROS: use_ros = on; break;
    case Term::BA: use_ba = on; break;
    case Term::Burned: use_burned = on; break;
    case Term::Unburned: use_unburned = on; break;
    case Term::Gram: use_gram = on; break;
    case Term::PP: use_pp = on; break;
  }
}

void LossWeights::validate() const {
  for (std::size_t i = 0; i < kTermCount; ++i) {
    const auto t = static_cast<Term>(i);
    if (!(weight(t) >= 0.0)) {
      throw ConfigError("loss weights: lambda_" + std::string(term_name(t)) + " must be >= 0");
    }
  }
  if (!(eps >= 0.0)) throw ConfigError("loss weights: eps must be >= 0");
  if (!(eps_b > 0.0 && eps_b < eps_u && eps_u <= 0.7)) {
    throw ConfigError("loss weights: need 0 < eps_b < eps_u <= 0.7");
  }
}

Tensor cell_error(const Tensor& y, const Tensor& y_hat, ErrorNorm norm) {
  const Tensor d = ops::sub(y_hat, y);
  return norm == ErrorNorm::Squared ? ops::square(d) : ops::abs(d);
}

Tensor loss_mse(const Tensor& y, const Tensor& y_hat) {
  if (y.shape() != y_hat.shape()) {
    throw DimensionError("mse: Y " + shape_string(y.shape()) + " vs Y_hat " + shape_string(y_hat.shape()));
  }
  return ops::mean(ops::square(ops::sub(y_hat, y)));
}

Tensor loss_ft(const Tensor& y, const Tensor& y_hat, double eps, ErrorNorm norm, bool per_cell) {
  require_sequence_pair(y, y_hat, "loss_ft");
  const std::size_t steps = y.dim(0);
  if (steps < 2) throw DimensionError("loss_ft: needs T >= 2, got T = " + std::to_string(steps));
  const std::size_t frame = y.dim(1) * y.dim(2);
  const auto yh = y_hat.data();
  std::vector<double> mask(y.numel(), 0.0);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t i = 0; i < frame; ++i) {
      if (yh[t * frame + i] - yh[(t - 1) * frame + i] > eps) mask[t * frame + i] = 1.0;
    }
  }
  return masked_error(y, y_hat, std::move(mask), norm, per_cell);
}

Tensor loss_burned(const Tensor& y, const Tensor& y_hat, double eps_b, ErrorNorm norm, bool per_cell) {
  require_sequence_pair(y, y_hat, "loss_burned");
  const auto ys = y.data();
  std::vector<double> mask(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) mask[i] = ys[i] < eps_b ? 1.0 : 0.0;
  return masked_error(y, y_hat, std::move(mask), norm, per_cell);
}

Tensor loss_unburned(const Tensor& y, const Tensor& y_hat, double eps_u, ErrorNorm norm, bool per_cell) {
  require_sequence_pair(y, y_hat, "loss_unburned");
  const auto ys = y.data();
  std::vector<double> mask(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) mask[i] = ys[i] > eps_u ? 1.0 : 0.0;
  return masked_error(y, y_hat, std::move(mask), norm, per_cell);
}

std::size_t burned_columns(std::span<const double> frame, std::size_t rows, std::size_t cols, double eps_b) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      if (frame[r * cols + c] < eps_b) {
        ++n;
        break;
      }
    }
  }
  return n;
}

double ros(std::span<const double> frame, std::span<const double> frame0, std::size_t rows, std::size_t cols,
           std::size_t t, std::size_t t0, double eps_b) {
  if (t == t0) throw DomainError("ros: t == t0, elapsed time is zero");
  const double dn = static_cast<double>(burned_columns(frame, rows, cols, eps_b)) -
                    static_cast<double>(burned_columns(frame0, rows, cols, eps_b));
  return dn / (static_cast<double>(t) - static_cast<double>(t0));
}

double ba(std::span<const double> frame, double eps_b) {
  if (frame.empty()) throw DimensionError("ba: empty frame");
  std::size_t n = 0;
  for (double v : frame) n += v < eps_b ? 1 : 0;
  return 100.0 * static_cast<double>(n) / static_cast<double>(frame.size());
}

Tensor loss_ros(const Tensor& y, const Tensor& y_hat, double eps_b) {
  require_sequence_pair(y, y_hat, "loss_ros");
  const std::size_t steps = y.dim(0);
  const std::size_t rows = y.dim(1);
  const std::size_t cols = y.dim(2);
  const std::size_t frame = rows * cols;
  if (steps < 2) return Tensor::scalar(0.0);
  const auto ys = y.data();
  const auto yh = y_hat.data();
  double total = 0.0;
  for (std::size_t t = 1; t < steps; ++t) {
    const double a = ros(ys.subspan(t * frame, frame), ys.first(frame), rows, cols, t, 0, eps_b);
    const double b = ros(yh.subspan(t * frame, frame), yh.first(frame), rows, cols, t, 0, eps_b);
    total += (a - b) * (a - b);
  }
  return Tensor::scalar(total / static_cast<double>(steps - 1));
}

Tensor loss_ba(const Tensor& y, const Tensor& y_hat, double eps_b) {
  require_sequence_pair(y, y_hat, "loss_ba");
  const std::size_t steps = y.dim(0);
  const std::size_t frame = y.dim(1) * y.dim(2);
  const auto ys = y.data();
  const auto yh = y_hat.data();
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double d = ba(ys.subspan(t * frame, frame), eps_b) - ba(yh.subspan(t * frame, frame), eps_b);
    total += d * d;
  }
  return Tensor::scalar(total / static_cast<double>(steps));
}

Tensor loss_gram(const Tensor& y, const Tensor& y_hat) {
  require_sequence_pair(y, y_hat, "loss_gram");
  const std::size_t steps = y.dim(0);
  const std::size_t n = y.dim(1) * y.dim(2);
  const double s = 1.0 / static_cast<double>(n);
  const Tensor gy = ops::gram(ops::reshape(y, {steps, n}), s);
  const Tensor gh = ops::gram(ops::reshape(y_hat, {steps, n}), s);
  return ops::mean(ops::square(ops::sub(gh, gy)));
}

LossResult total_loss(const Tensor& y, const Tensor& y_hat, const emulator::MixtureParams* mixture,
                      const LossWeights& w, const Tensor* poisson) {
  w.validate();
  LossResult r;
  Tensor total;
  if (w.base == Base::MSE) {
    if (!y_hat.defined()) throw ConfigError("total_loss: MSE base needs a point prediction");
    if (poisson) throw ConfigError("total_loss: the Poisson term requires the MDN_NLL base");
    total = loss_mse(y, y_hat);
  } else {
    if (!mixture) throw ConfigError("total_loss: MDN_NLL base needs mixture parameters");
    total = emulator::mdn_nll(*mixture, y);
  }
  r.base = total.item();

  const double cells = y.ndim() == 3 ? static_cast<double>(y.dim(1) * y.dim(2)) : 1.0;
  auto add_term = [&](Term term, auto&& compute) {
    double weight = w.effective(term);
    if (term == Term::PP && w.pp_per_cell) weight /= cells;
    r.weights[idx(term)] = weight;
    if (weight != 0.0) {
      const Tensor value = compute();
      r.terms[idx(term)] = value.item();
      total = ops::add(total, ops::scale(value, weight));
    } else {
      NoGradGuard guard;
      r.terms[idx(term)] = compute().item();
    }
  };

  const bool sequence = y.ndim() == 3 && y.dim(0) >= 2;
  add_term(Term::FT, [&] { return sequence ? loss_ft(y, y_hat, w.eps, w.norm, w.per_cell) : Tensor::scalar(0.0); });
  add_term(Term::ROS, [&] { return loss_ros(y, y_hat, w.eps_b); });
  add_term(Term::BA, [&] { return loss_ba(y, y_hat, w.eps_b); });
  add_term(Term::Burned, [&] { return loss_burned(y, y_hat, w.eps_b, w.norm, w.per_cell); });
  add_term(Term::Unburned, [&] { return loss_unburned(y, y_hat, w.eps_u, w.norm, w.per_cell); });
  add_term(Term::Gram, [&] { return loss_gram(y, y_hat); });
  if (poisson) {
    add_term(Term::PP, [&] { return *poisson; });
  }
  r.total = total;
  return r;
}

}  // namespace ember::losses
