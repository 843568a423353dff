#include <doctest.h>

#include <cmath>
#include <limits>

#include "ember/adam.hpp"
#include "ember/errors.hpp"
#include "ember/ops.hpp"

using namespace ember;

TEST_SUITE("adam") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    auto p = Tensor::parameter({3}, {1, -2, 3});
    Adam opt({p});
    ops::sum(ops::scale(p, 0.0)).backward();
    opt.step();
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(p.data()[2] == 3.0);
  }

  TEST_CASE("first step moves each entry by lr against the gradient sign") {
    auto p = Tensor::parameter({3}, {0.5, 0.5, 0.5});
    Adam opt({p}, {0.001});
    ops::sum(ops::mul(p, Tensor::from({3}, {4.0, -0.01, 250.0}))).backward();
    opt.step();
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    CHECK(p.data()[0] == doctest::Approx(0.5 - 0.001).epsilon(1e-8));
    CHECK(p.data()[1] == doctest::Approx(0.5 + 0.001).epsilon(1e-8));
    CHECK(p.data()[2] == doctest::Approx(0.5 - 0.001).epsilon(1e-8));
    CHECK(opt.steps_taken() == 1);
  }

  TEST_CASE("steps reduce a convex quadratic monotonically") {
    auto p = Tensor::parameter({2}, {3.0, -2.0});
    Adam opt({p}, {0.1});
    auto loss = [&] { return ops::sum(ops::square(ops::add_scalar(p, -1.0))); };
    double prev = loss().item();
    for (int i = 0; i < 20; ++i) {
      opt.zero_grad();
      loss().backward();
      opt.step();
      const double now = loss().item();
      CHECK(now < prev);
      prev = now;
    }
  }

  TEST_CASE("non-finite gradient raises a training error") {
    auto p = Tensor::parameter({1}, {1.0});
    Adam opt({p});
    p.mutable_grad()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(), TrainingError);
    CHECK(p.data()[0] == 1.0);
  }
}
