#include "ucdir/dense.hpp"

#include <cmath>

#include "ucdir/error.hpp"

namespace ucdir {

std::string Shape::str() const { return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")"; }

DenseArray::DenseArray(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

DenseArray::DenseArray(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw StructuralError("DenseArray: data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
  }
}

DenseArray DenseArray::row(std::span<const double> values) {
  return DenseArray(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

DenseArray DenseArray::row(std::initializer_list<double> values) {
  return DenseArray(1, values.size(), std::vector<double>(values));
}

DenseArray DenseArray::identity(std::size_t n) {
  DenseArray out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

double DenseArray::item() const {
  if (size() != 1) throw UsageError("item() on non-scalar array of shape " + shape_.str());
  return data_[0];
}

bool DenseArray::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace ucdir
