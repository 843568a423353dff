#include "ember/field.hpp"

#include <string>

#include "ember/errors.hpp"

namespace ember {

FieldView view_of(const Tensor& t) {
  if (t.ndim() != 3) {
    throw DimensionError("field: expected a [T, M, P] tensor, got " + shape_string(t.shape()));
  }
  return {t.dim(0), t.dim(1), t.dim(2), t.data()};
}

FuelFieldSequence FuelFieldSequence::from_tensor(const Tensor& t) {
  const auto v = view_of(t);
  FuelFieldSequence s;
  s.steps = v.steps;
  s.rows = v.rows;
  s.cols = v.cols;
  s.values.assign(v.values.begin(), v.values.end());
  return s;
}

void require_same_dims(const FieldView& a, const FieldView& b, const char* who) {
  if (a.steps != b.steps || a.rows != b.rows || a.cols != b.cols) {
    throw DimensionError(std::string(who) + ": dims " + std::to_string(a.steps) + "x" +
                         std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                         std::to_string(b.steps) + "x" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols));
  }
}

}  // namespace ember
