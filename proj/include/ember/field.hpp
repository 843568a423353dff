#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ember/tensor.hpp"

namespace ember {

/// Read-only view of a T x M x P fuel-density sequence (row-major).
struct FieldView {
  std::size_t steps = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> values;

  std::size_t frame_size() const { return rows * cols; }
  std::span<const double> frame(std::size_t t) const {
    return values.subspan(t * frame_size(), frame_size());
  }
  double at(std::size_t t, std::size_t r, std::size_t c) const {
    return values[(t * rows + r) * cols + c];
  }
};

/// A T x M x P grid-time series of fuel density.
struct FuelFieldSequence {
  std::size_t steps = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FuelFieldSequence() = default;
  FuelFieldSequence(std::size_t t, std::size_t m, std::size_t p, double fill = 0.0)
      : steps(t), rows(m), cols(p), values(t * m * p, fill) {}

  FieldView view() const { return {steps, rows, cols, values}; }
  double at(std::size_t t, std::size_t r, std::size_t c) const { return view().at(t, r, c); }
  Tensor to_tensor() const { return Tensor::from({steps, rows, cols}, values); }
  static FuelFieldSequence from_tensor(const Tensor& t);

  bool operator==(const FuelFieldSequence&) const = default;
};

/// View over a [T, M, P] tensor; throws DimensionError for other ranks.
FieldView view_of(const Tensor& t);

/// Throws DimensionError unless both views have identical dims.
void require_same_dims(const FieldView& a, const FieldView& b, const char* who);

}  // namespace ember
