#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "biphasic/common.hpp"

namespace bp {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense 64-bit float tensor with an optional gradient buffer. The substrate
// for network parameters, activations and losses.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);
  Tensor(Shape shape, double fill);

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  static Tensor vector1d(std::vector<double> v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(v_.size()); }
  bool is_scalar() const { return v_.size() == 1 && shape_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  double item() const;

  // 4-D accessor for [B, C, H, W] tensors.
  double& at4(int b, int c, int y, int x) {
    return v_[((static_cast<size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at4(int b, int c, int y, int x) const {
    return v_[((static_cast<size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double& at2(int r, int c) { return v_[static_cast<size_t>(r) * shape_[1] + c]; }
  double at2(int r, int c) const { return v_[static_cast<size_t>(r) * shape_[1] + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool rg);

  bool has_grad() const { return !grad_.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();
  void set_grad(std::vector<double> g);

  void fill(double v);
  void zero() { fill(0.0); }

  // Throws NumericError naming `who` if any value is NaN/Inf.
  void check_finite(const std::string& who) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  std::vector<double> v_;
  std::vector<double> grad_;  // empty unless materialized
  bool requires_grad_ = false;
};

}  // namespace bp
