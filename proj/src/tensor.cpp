#include "dbpae/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dbpae {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ' ';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(std::move(data))) {
  if (shape_size(shape_) != data_->size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape_) + " does not match " +
                                std::to_string(data_->size()) + " elements");
  }
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, {v}); }

std::span<const double> Tensor::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("Tensor::item on shape " + shape_str(shape_));
  return (*data_)[0];
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw std::logic_error("Tensor::rows on shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw std::logic_error("Tensor::cols on shape " + shape_str(shape_));
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : data())
    if (!std::isfinite(v)) return false;
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i)
    if (da[i] != db[i]) return false;
  return true;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l2_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace dbpae
