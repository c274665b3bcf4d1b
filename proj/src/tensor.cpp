// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ncdyn {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(shape_product(shape_), 0.0);
  cols_ = shape_.size() == 2 ? shape_[1] : 1;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor: shape/data size mismatch (shape " + shape_str() +
                                ", data length " + std::to_string(data_.size()) + ")");
  }
  cols_ = shape_.size() == 2 ? shape_[1] : 1;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::filled(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::checked(std::vector<int> shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw std::invalid_argument("tensor: non-finite entry rejected");
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ',';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace ncdyn
