#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ember/emulator.hpp"
#include "ember/errors.hpp"
#include "gradcheck.hpp"

using namespace ember;
using namespace ember::emulator;
using ember::testing::check_gradients;
using ember::testing::random_const;

namespace {

void zero_cell(ConvLSTMCell& cell) {
  for (auto gate : {Gate::Input, Gate::Forget, Gate::Cell, Gate::Output}) {
    const auto k = cell.gate_kernel(gate);
    cell.set_gate(gate, std::vector<double>(k.numel(), 0.0), std::vector<double>(cell.hidden(), 0.0));
  }
}

void fill(Tensor t, double v) {
  for (auto& x : t.mutable_data()) x = v;
}

Tensor contract(const Tensor& y, std::uint64_t seed) {
  return ops::sum(ops::mul(y, random_const(y.shape(), seed)));
}

std::vector<Tensor> leaves(const std::vector<std::pair<std::string, Tensor>>& named) {
  std::vector<Tensor> out;
  for (const auto& [_, t] : named) out.push_back(t);
  return out;
}

}  // namespace

TEST_SUITE("emulator") {
  TEST_CASE("zero-weight cell at zero state") {
    std::mt19937_64 rng(1);
    ConvLSTMCell cell(2, 3, 3, rng);
    zero_cell(cell);
    const auto s = cell.forward(random_const({4, 4, 2}, 1), cell.zero_state(4, 4));
    for (double v : s.c.data()) CHECK(v == 0.0);
    for (double v : s.h.data()) CHECK(v == 0.0);
  }

  TEST_CASE("saturated forget gate carries the cell state") {
    std::mt19937_64 rng(1);
    ConvLSTMCell cell(2, 3, 3, rng);
    zero_cell(cell);
    const auto k = cell.gate_kernel(Gate::Forget);
    cell.set_gate(Gate::Forget, std::vector<double>(k.numel(), 0.0), std::vector<double>(3, 20.0));
    CellState prev{Tensor::zeros({4, 4, 3}), Tensor::full({4, 4, 3}, 1.0)};
    const auto s = cell.forward(random_const({4, 4, 2}, 2), prev);
    for (double v : s.c.data()) CHECK(std::abs(v - 1.0) < 1e-8);
  }

  TEST_CASE("gate kernels round-trip and include the peepholes") {
    std::mt19937_64 rng(3);
    ConvLSTMCell cell(4, 5, 3, rng);
    CHECK(cell.gate_kernel(Gate::Input).shape() == Shape{3, 3, 4 + 5 + 5, 5});
    CHECK(cell.gate_kernel(Gate::Forget).shape() == Shape{3, 3, 14, 5});
    CHECK(cell.gate_kernel(Gate::Output).shape() == Shape{3, 3, 14, 5});
    CHECK(cell.gate_kernel(Gate::Cell).shape() == Shape{3, 3, 9, 5});
    const auto before = cell.gate_kernel(Gate::Output);
    std::vector<double> vals(before.data().begin(), before.data().end());
    for (auto& v : vals) v *= 0.5;
    cell.set_gate(Gate::Output, vals, std::vector<double>(5, 0.1));
    const auto after = cell.gate_kernel(Gate::Output);
    CHECK(std::equal(vals.begin(), vals.end(), after.data().begin()));
  }

  TEST_CASE("init bounds and forget bias") {
    std::mt19937_64 rng(4);
    ConvLSTMCell cell(4, 8, 3, rng);
    const double bound_xh = std::sqrt(1.0 / (3 * 3 * (4 + 8 + 8)));
    for (double v : cell.gate_kernel(Gate::Input).data()) CHECK(std::abs(v) <= bound_xh);
    for (const auto& [name, t] : cell.named_parameters()) {
      if (name != "bias") continue;
      for (std::size_t i = 0; i < 32; ++i) CHECK(t.data()[i] == (i >= 8 && i < 16 ? 1.0 : 0.0));
    }
  }

  TEST_CASE("cell gradients match finite differences") {
    std::mt19937_64 rng(5);
    ConvLSTMCell cell(2, 3, 3, rng);
    const auto x = random_const({5, 4, 2}, 6);
    const CellState prev{random_const({5, 4, 3}, 7), random_const({5, 4, 3}, 8)};
    const auto r = check_gradients(leaves(cell.named_parameters()), [&] {
      const auto s = cell.forward(x, prev);
      return ops::add(contract(s.h, 9), contract(s.c, 10));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  TEST_CASE("zero model with one frame predicts the head bias image") {
    for (auto mode : {Mode::CL, Mode::PGCL}) {
      EmulatorConfig cfg;
      cfg.mode = mode;
      EmulatorModel model(cfg);
      for (auto& p : model.parameters()) fill(p, 0.0);
      fill(model.head_bias(), 0.37);
      const auto y = model.forward(random_const({1, 6, 5, 4}, 11), false).fuel;
      CHECK(y.shape() == Shape{1, 6, 5});
      for (double v : y.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    }
  }

  TEST_CASE("output shape and head invariants") {
    for (auto mode : {Mode::CL, Mode::PGCL, Mode::PGCLPlus}) {
      EmulatorConfig cfg;
      cfg.mode = mode;
      cfg.seed = 12;
      EmulatorModel model(cfg);
      for (std::uint64_t s = 0; s < 3; ++s) {
        const auto p = model.forward(random_const({3, 7, 5, 4}, 20 + s, -3, 3), s % 2 == 0);
        CHECK(p.fuel.shape() == Shape{3, 7, 5});
        CHECK(p.mixture.has_value() == (mode == Mode::PGCLPlus));
        if (!p.mixture) continue;
        const auto& m = *p.mixture;
        CHECK(m.pi.shape() == Shape{3, 7, 5, 2});
        for (std::size_t i = 0; i < m.pi.numel(); i += 2) {
          CHECK(m.pi.data()[i] >= 0.0);
          CHECK(m.pi.data()[i] + m.pi.data()[i + 1] == doctest::Approx(1.0).epsilon(1e-9));
        }
        for (double v : m.sigma.data()) CHECK(v >= cfg.sigma_floor);
        CHECK(m.rate.shape() == Shape{3});
        for (double v : m.rate.data()) CHECK(v > 0.0);
      }
    }
  }

  TEST_CASE("forced first component gives its mean") {
    const auto mu = random_const({2, 3, 3, 2}, 13);
    std::vector<double> pi(mu.numel());
    for (std::size_t i = 0; i < pi.size(); i += 2) pi[i] = 1.0;
    const auto y = mixture_mean(Tensor::from(mu.shape(), pi), mu);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == mu.data()[2 * i]);

    EmulatorConfig cfg;
    cfg.mode = Mode::PGCLPlus;
    EmulatorModel model(cfg);
    std::vector<double> b(6, 0.0);
    b[0] = 60.0;
    b[1] = -60.0;
    b[2] = 0.3;
    b[3] = 0.6;
    std::copy(b.begin(), b.end(), model.head_bias().mutable_data().begin());
    fill(model.head_kernel(), 0.0);
    const auto p = model.forward(random_const({2, 4, 4, 4}, 14), false);
    for (double v : p.fuel.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("mixture mean scales with the means") {
    const auto pi = ops::softmax_last(random_const({4, 2}, 15));
    const auto mu = random_const({4, 2}, 16);
    const auto a = mixture_mean(pi, ops::scale(mu, 2.5));
    const auto b = mixture_mean(pi, mu);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.data()[i] == doctest::Approx(2.5 * b.data()[i]).epsilon(1e-14));
  }

  TEST_CASE("inference is stateless across calls") {
    EmulatorConfig cfg;
    cfg.mode = Mode::PGCLPlus;
    EmulatorModel model(cfg);
    const auto x = random_const({3, 6, 6, 4}, 17);
    const auto a = model.forward(x, false).fuel;
    model.forward(random_const({3, 6, 6, 4}, 18), false);
    const auto b = model.forward(x, false).fuel;
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }

  TEST_CASE("batch-statistics inference matches the training normalisation") {
    EmulatorConfig cfg;
    cfg.mode = Mode::CL;
    cfg.seed = 3;
    EmulatorModel model(cfg);
    std::vector<std::vector<double>> before;
    for (auto& [_, buf] : model.named_buffers()) before.push_back(*buf);
    const auto x = random_const({3, 6, 6, 4}, 20);
    const auto inferred = [&] {
      NoGradGuard g;
      return model.forward(x, false).fuel;
    }();
    std::size_t i = 0;
    for (auto& [_, buf] : model.named_buffers()) CHECK(*buf == before[i++]);
    const auto trained = model.forward(x, true).fuel;
    CHECK(std::equal(inferred.data().begin(), inferred.data().end(), trained.data().begin()));

    cfg.bn_running_at_inference = true;
    EmulatorModel running(cfg);
    const auto r = running.forward(x, false).fuel;
    CHECK_FALSE(std::equal(r.data().begin(), r.data().end(), inferred.data().begin()));
  }

  TEST_CASE("mdn nll floor and identical components") {
    const auto y = random_const({1, 2, 2}, 19, 0, 0.7);
    std::vector<double> mu(8), sigma(8, 1.0), logits(8, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      mu[2 * i] = y.data()[i];
      mu[2 * i + 1] = y.data()[i];
    }
    MixtureParams same;
    same.logits = Tensor::from({1, 2, 2, 2}, logits);
    same.pi = ops::softmax_last(same.logits);
    same.mu = Tensor::from({1, 2, 2, 2}, mu);
    same.sigma = Tensor::from({1, 2, 2, 2}, sigma);
    const double floor = 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(std::abs(mdn_nll(same, y).item() - floor) < 1e-9);

    MixtureParams single = same;
    std::vector<double> l2(8);
    for (std::size_t i = 0; i < 4; ++i) {
      l2[2 * i] = 200.0;
      l2[2 * i + 1] = -200.0;
      mu[2 * i + 1] = 5.0;
    }
    single.logits = Tensor::from({1, 2, 2, 2}, l2);
    single.pi = ops::softmax_last(single.logits);
    single.mu = Tensor::from({1, 2, 2, 2}, mu);
    CHECK(std::abs(mdn_nll(single, y).item() - floor) < 1e-9);
  }

  TEST_CASE("mdn nll gradients") {
    auto logits = ember::testing::random_param({2, 3, 3, 2}, 21);
    auto mu = ember::testing::random_param({2, 3, 3, 2}, 22, 0, 0.7);
    auto sigma = ember::testing::random_param({2, 3, 3, 2}, 23, 0.1, 0.6);
    const auto y = random_const({2, 3, 3}, 24, 0, 0.7);
    const auto r = check_gradients({logits, mu, sigma}, [&] {
      return mdn_nll({logits, ops::softmax_last(logits), mu, sigma, Tensor()}, y);
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  TEST_CASE("poisson head values") {
    std::mt19937_64 rng(1);
    const auto unburned = Tensor::full({2, 3, 3}, 0.7);
    auto same = poisson_head(Tensor::from({2}, {4.0, 4.0}), unburned, 4.0, 0.1, rng);
    for (double kl : same.kl) CHECK(std::abs(kl) < 1e-15);

    auto two = poisson_head(Tensor::from({1}, {2.0}), Tensor::full({1, 3, 3}, 0.7), 1.0, 0.1, rng);
    CHECK(std::abs(two.kl[0] - (1.0 - 2.0 + 2.0 * std::log(2.0))) < 1e-9);
    CHECK(std::abs(two.kl[0] - 0.386294) < 1e-6);

    auto one = poisson_head(Tensor::from({1}, {1.0}), Tensor::full({1, 3, 3}, 0.7), 1.0, 0.1, rng);
    CHECK(one.counts[0] == 0.0);
    CHECK(std::abs(one.nll[0] - 1.0) < 1e-12);
    CHECK_THROWS_AS(poisson_head(Tensor::from({1}, {1.0}), unburned, 0.0, 0.1, rng), ConfigError);
  }

  TEST_CASE("poisson head gradient") {
    auto rate = ember::testing::random_param({3}, 25, 0.5, 6.0);
    auto y = random_const({3, 4, 4}, 26, 0, 0.7);
    const auto r = check_gradients({rate}, [&] {
      std::mt19937_64 rng(1);
      return poisson_head(rate, y, 2.5, 0.1, rng).loss;
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  TEST_CASE("end-to-end gradients through a two-frame model") {
    for (auto mode : {Mode::PGCL, Mode::PGCLPlus}) {
      EmulatorConfig cfg;
      cfg.mode = mode;
      cfg.seed = 27;
      EmulatorModel model(cfg);
      const auto x = random_const({2, 8, 8, 4}, 28);
      const auto y = random_const({2, 8, 8}, 29, 0, 0.7);
      auto loss = [&] {
        auto p = model.forward(x, true);
        if (!p.mixture) return ops::mean(ops::square(ops::sub(p.fuel, y)));
        std::mt19937_64 rng(1);
        return ops::add(mdn_nll(*p.mixture, y), poisson_head(p.mixture->rate, y, 3.0, 0.1, rng).loss);
      };
      const auto r = check_gradients(model.parameters(), loss, 1e-6, 10, 30);
      CHECK(r.checked == 10);
      CHECK(r.max_rel_error < 1e-5);
    }
  }

  TEST_CASE("mode names") {
    CHECK(parse_mode("pgcl+") == Mode::PGCLPlus);
    CHECK(mode_name(Mode::CL) == "cl");
    CHECK_FALSE(parse_mode("lstm").has_value());
  }
}
