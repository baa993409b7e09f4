#include "biphasic/tensor.hpp"

#include <sstream>

namespace bp {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (int d : shape_) {
    if (d <= 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(shape_));
  }
  v_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), v_(std::move(values)) {
  if (static_cast<int64_t>(v_.size()) != shape_numel(shape_)) {
    throw ShapeError("tensor value count " + std::to_string(v_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape, double fill) : Tensor(std::move(shape)) {
  this->fill(fill);
}

Tensor Tensor::vector1d(std::vector<double> v) {
  Shape s{static_cast<int>(v.size())};
  return Tensor(std::move(s), std::move(v));
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape_));
  return v_[0];
}

void Tensor::set_requires_grad(bool rg) {
  requires_grad_ = rg;
  if (rg && grad_.empty()) grad_.assign(v_.size(), 0.0);
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) grad_.assign(v_.size(), 0.0);
  return grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (grad_.size() != v_.size()) throw ContractError("gradient buffer not materialized");
  return grad_;
}

void Tensor::zero_grad() {
  grad_.assign(v_.size(), 0.0);
}

void Tensor::set_grad(std::vector<double> g) {
  if (g.size() != v_.size()) throw ShapeError("gradient size does not match tensor");
  grad_ = std::move(g);
}

void Tensor::fill(double v) {
  for (auto& x : v_) x = v;
}

void Tensor::check_finite(const std::string& who) const {
  for (size_t i = 0; i < v_.size(); ++i) {
    if (!std::isfinite(v_[i])) {
      throw NumericError("non-finite value at flat index " + std::to_string(i) + " in " + who);
    }
  }
}

}  // namespace bp
