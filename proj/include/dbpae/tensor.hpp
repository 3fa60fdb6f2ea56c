#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dbpae {

// Extents of an n-d array; empty shape is a scalar (one element).
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Immutable n-d array of 64-bit floats, row-major. Copies share the buffer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return !data_; }
  std::span<const double> data() const;
  double operator[](std::size_t i) const { return (*data_)[i]; }

  // Value of a one-element tensor.
  double item() const;

  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  bool all_finite() const;
  bool same_data(const Tensor& other) const { return data_ == other.data_; }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

bool operator==(const Tensor& a, const Tensor& b);  // bitwise: shape and data

double l2_norm(std::span<const double> v);
double l2_dist(std::span<const double> a, std::span<const double> b);

}  // namespace dbpae
