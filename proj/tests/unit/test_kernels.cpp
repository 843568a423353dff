#include <doctest.h>

#include <cmath>
#include <vector>

#include "ember/kernels.hpp"
#include "ember/ops.hpp"
#include "gradcheck.hpp"

using namespace ember;
using ember::testing::random_const;
using ember::testing::random_values;

namespace {

// Accumulation order differs between the paths (FMA, lane splits), so the
// comparison is relative to the magnitude of the summed terms.
constexpr double kIsaTolerance = 1e-13;

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / (1.0 + std::abs(a[i])));
  return m;
}

struct IsaRestore {
  kernels::Isa saved = kernels::active_isa();
  ~IsaRestore() { kernels::set_active_isa(saved); }
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar table is always available") {
    CHECK(kernels::isa_supported(kernels::Isa::Scalar));
    CHECK(kernels::isa_name(kernels::Isa::Scalar) == "scalar");
  }

  TEST_CASE("avx2 matches scalar reference") {
    if (!kernels::isa_supported(kernels::Isa::Avx2)) {
      MESSAGE("AVX2 not available on this machine; equivalence not exercised");
      return;
    }
    const auto& s = kernels::table(kernels::Isa::Scalar);
    const auto& v = kernels::table(kernels::Isa::Avx2);
    const std::size_t dims[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 16}, {13, 17, 9}, {64, 33, 75}, {7, 1, 31}};
    std::uint64_t seed = 1;
    for (const auto& d : dims) {
      const std::size_t m = d[0], n = d[1], k = d[2];
      CAPTURE(m);
      CAPTURE(n);
      CAPTURE(k);
      const auto a = random_values(m * k, seed++);
      const auto b = random_values(k * n, seed++);
      auto c1 = random_values(m * n, seed++);
      auto c2 = c1;
      s.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
      v.gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
      CHECK(max_diff(c1, c2) < kIsaTolerance);

      const auto at = random_values(m * k, seed++);
      const auto bt = random_values(m * n, seed++);
      auto d1 = random_values(k * n, seed++);
      auto d2 = d1;
      s.gemm_tn(m, n, k, at.data(), k, bt.data(), n, d1.data(), n);
      v.gemm_tn(m, n, k, at.data(), k, bt.data(), n, d2.data(), n);
      CHECK(max_diff(d1, d2) < kIsaTolerance);

      const std::size_t len = m * n + k;
      const auto x = random_values(len, seed++);
      auto y1 = random_values(len, seed++);
      auto y2 = y1;
      s.axpy(len, 0.37, x.data(), y1.data());
      v.axpy(len, 0.37, x.data(), y2.data());
      CHECK(max_diff(y1, y2) < kIsaTolerance);
      CHECK(std::abs(s.dot(len, x.data(), y1.data()) - v.dot(len, x.data(), y1.data())) <
            kIsaTolerance * static_cast<double>(len));
    }
  }

  TEST_CASE("conv forward and backward agree across isas") {
    if (!kernels::isa_supported(kernels::Isa::Avx2)) return;
    IsaRestore restore;
    auto run = [](kernels::Isa isa) {
      kernels::set_active_isa(isa);
      auto x = Tensor::parameter({7, 6, 5}, random_values(7 * 6 * 5, 1));
      auto w = Tensor::parameter({3, 3, 5, 4}, random_values(3 * 3 * 5 * 4, 2));
      auto b = Tensor::parameter({4}, random_values(4, 3));
      auto y = ops::conv2d_same(x, w, b);
      ops::sum(ops::mul(y, random_const(y.shape(), 4))).backward();
      std::vector<double> out(y.data().begin(), y.data().end());
      out.insert(out.end(), x.grad().begin(), x.grad().end());
      out.insert(out.end(), w.grad().begin(), w.grad().end());
      return out;
    };
    const auto scalar = run(kernels::Isa::Scalar);
    const auto avx2 = run(kernels::Isa::Avx2);
    CHECK(max_diff(scalar, avx2) < kIsaTolerance);
  }

  TEST_CASE("each isa is bit-reproducible") {
    IsaRestore restore;
    for (auto isa : {kernels::Isa::Scalar, kernels::Isa::Avx2}) {
      if (!kernels::isa_supported(isa)) continue;
      kernels::set_active_isa(isa);
      const auto x = random_const({9, 9, 3}, 5);
      const auto w = random_const({3, 3, 3, 6}, 6);
      const auto y1 = ops::conv2d_same(x, w, Tensor::zeros({6}));
      const auto y2 = ops::conv2d_same(x, w, Tensor::zeros({6}));
      CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    }
  }
}
