#pragma once

#include <cstddef>
#include <vector>

#include "ember/tensor.hpp"

namespace ember {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Holds handles to the parameters it updates.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  /// Applies one update from the parameters' current gradients. Throws
  /// TrainingError naming the parameter if any gradient is not finite.
  void step();
  void zero_grad();

  std::size_t steps_taken() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::size_t step_ = 0;
};

}  // namespace ember
