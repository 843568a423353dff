#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <thread>

#include "ember/errors.hpp"
#include "ember/fireca.hpp"
#include "ember/losses.hpp"
#include "ember/metrics.hpp"
#include "gradcheck.hpp"

using namespace ember;
using namespace ember::metrics;

namespace {

FuelFieldSequence make(std::size_t t, std::size_t m, std::size_t p, std::vector<double> v) {
  FuelFieldSequence s(t, m, p);
  s.values = std::move(v);
  return s;
}

FuelFieldSequence random_seq(std::size_t t, std::size_t m, std::size_t p, std::uint64_t seed) {
  return make(t, m, p, ember::testing::random_values(t * m * p, seed, 0.0, 0.7));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("identical sequences score zero") {
    const auto y = random_seq(4, 5, 5, 1);
    const auto s = mse_suite(y.view(), y.view(), {});
    CHECK(s.mse == 0.0);
    CHECK(s.burned_mse == 0.0);
    CHECK(s.unburned_mse == 0.0);
    CHECK(s.fire_metrics_mse == 0.0);
    CHECK(dmse(y.view(), y.view()).value == 0.0);
  }

  TEST_CASE("burned and unburned mse hand case") {
    const auto y = make(1, 1, 2, {0.05, 0.7});
    const auto yh = make(1, 1, 2, {0.25, 0.5});
    const auto s = mse_suite(y.view(), yh.view(), {});
    CHECK(std::abs(s.burned_mse - 0.04) < 1e-9);
    CHECK(std::abs(s.unburned_mse - 0.04) < 1e-9);
  }

  TEST_CASE("fire metric mse is the sum of the two spread losses") {
    const auto y = random_seq(4, 6, 6, 2);
    const auto yh = random_seq(4, 6, 6, 3);
    const losses::LossWeights w;
    const auto s = mse_suite(y.view(), yh.view(), w);
    const double expected = losses::loss_ros(y.to_tensor(), yh.to_tensor(), w.eps_b).item() +
                            losses::loss_ba(y.to_tensor(), yh.to_tensor(), w.eps_b).item();
    CHECK(s.fire_metrics_mse == expected);
  }

  TEST_CASE("full masks make the class mse equal the mse") {
    const auto y = make(2, 1, 2, {0.01, 0.02, 0.03, 0.04});
    const auto yh = random_seq(2, 1, 2, 4);
    const auto s = mse_suite(y.view(), yh.view(), {});
    CHECK(s.burned_mse == doctest::Approx(s.mse).epsilon(1e-14));
    CHECK(s.unburned_empty);
  }

  TEST_CASE("dmse") {
    const auto y = make(2, 1, 1, {0.5, 0.3});
    const auto yh = make(2, 1, 1, {0.5, 0.4});
    CHECK(std::abs(dmse(y.view(), yh.view()).value - 0.01) < 1e-9);
    const auto flat = make(2, 1, 1, {0.5, 0.5});
    const auto d = dmse(flat.view(), yh.view());
    CHECK(d.value == 0.0);
    CHECK(d.degenerate);
    CHECK_THROWS_AS(dmse(make(1, 1, 1, {0.5}).view(), make(1, 1, 1, {0.5}).view()), DimensionError);
  }

  TEST_CASE("consistency hand case") {
    const auto y = make(1, 1, 2, {0.7, 0.7});
    const auto yh = make(1, 1, 2, {0.05, 0.69});
    const auto c = consistency_metrics(y.view(), yh.view(), {});
    CHECK(c.metric_burned == 50.0);
    CHECK(c.metric_unburned == 100.0);
    CHECK(c.metric_ft == 0.0);
  }

  TEST_CASE("consistency on a simulator run against itself") {
    fireca::ScenarioConfig cfg;
    cfg.ignition = fireca::build_ignition_pattern(fireca::IgnitionKind::Inward, 32, 32, 1);
    const auto y = fireca::simulate(cfg);
    const auto c = consistency_metrics(y.view(), y.view(), {});
    CHECK(c.metric_ft == 0.0);
    CHECK(c.metric_burned == 0.0);
    CHECK(c.metric_unburned == 0.0);
    CHECK(c.metric_fp == 0.0);
    CHECK(c.metric_fn == 0.0);
  }

  TEST_CASE("property: percentages in range and permutation invariant") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto y = random_seq(3, 4, 5, 10 + s);
      const auto yh = random_seq(3, 4, 5, 20 + s);
      const auto c = consistency_metrics(y.view(), yh.view(), {});
      for (double v : {c.metric_ft, c.metric_burned, c.metric_unburned, c.metric_fp, c.metric_fn}) {
        CHECK(v >= 0.0);
        CHECK(v <= 100.0);
      }
      std::vector<std::size_t> perm(20);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), std::mt19937_64(s));
      auto py = y, pyh = yh;
      for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t i = 0; i < 20; ++i) {
          py.values[t * 20 + i] = y.values[t * 20 + perm[i]];
          pyh.values[t * 20 + i] = yh.values[t * 20 + perm[i]];
        }
      }
      const auto pc = consistency_metrics(py.view(), pyh.view(), {});
      CHECK(pc.metric_ft == c.metric_ft);
      CHECK(pc.metric_burned == c.metric_burned);
      CHECK(pc.metric_unburned == c.metric_unburned);
      CHECK(pc.metric_fp == c.metric_fp);
      CHECK(pc.metric_fn == c.metric_fn);
    }
  }

  TEST_CASE("timing") {
    const auto flat = timing_report([] {}, 10);
    CHECK(flat.samples == 10);
    CHECK(flat.min <= flat.mean);
    CHECK(flat.mean <= flat.max);
    CHECK(flat.max - flat.min < 1e-3);

    using namespace std::chrono_literals;
    const auto a = timing_report([] { std::this_thread::sleep_for(10ms); }, 5);
    const auto b = timing_report([] { std::this_thread::sleep_for(20ms); }, 5);
    CHECK(b.mean / a.mean == doctest::Approx(2.0).epsilon(0.2));
  }
}
