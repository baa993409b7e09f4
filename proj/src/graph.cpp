#include "biphasic/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "biphasic/kernels.hpp"
#include "biphasic/parallel.hpp"

namespace bp {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kSqrtFloor = 1e-24;

thread_local std::vector<double> tl_scratch_a;

double* scratch_a(size_t n) {
  if (tl_scratch_a.size() < n) tl_scratch_a.resize(n);
  return tl_scratch_a.data();
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Const: return "const";
    case Op::Param: return "param";
    case Op::Identity: return "identity";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddConst: return "add_const";
    case Op::MulConst: return "mul_const";
    case Op::MatMul: return "matmul";
    case Op::Conv2d: return "conv2d";
    case Op::ConvT2d: return "conv_transpose2d";
    case Op::AvgPool2: return "avg_pool2";
    case Op::UpNearest2: return "upsample_nearest2";
    case Op::UpBilinear2: return "upsample_bilinear2";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Relu: return "relu";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::SoftmaxLast: return "softmax";
    case Op::Log: return "log";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    case Op::Square: return "square";
    case Op::Abs: return "abs";
    case Op::MeanAll: return "mean";
    case Op::SumAll: return "sum";
    case Op::RowSum: return "row_sum";
    case Op::RowLogSumExp: return "row_logsumexp";
    case Op::TakeDiag: return "take_diag";
    case Op::PairwiseSqDist: return "pairwise_sqdist";
    case Op::ConcatChan: return "concat";
    case Op::BroadcastSpatial: return "broadcast_spatial";
    case Op::BiasAddChan: return "bias_add_chan";
    case Op::BiasAddRow: return "bias_add_row";
    case Op::InstanceNorm: return "instance_norm";
    case Op::ChannelAffine: return "channel_affine";
    case Op::Flatten: return "flatten";
    case Op::Reshape: return "reshape";
    case Op::CheckUnitInterval: return "check_unit_interval";
  }
  return "?";
}

std::string Graph::label(const Node& n) const {
  std::string s = op_name(n.op);
  if (!n.name.empty()) {
    s += " '";
    s += n.name;
    s += "'";
  }
  return s;
}

void Graph::fail_shape(const Node& n, const std::string& what) const {
  throw ShapeError(label(n) + ": " + what);
}

int Graph::add_node(Node n) {
  n.out = Tensor(infer_shape(n));
  for (int i : n.in) {
    if (i < 0 || i >= size()) throw ContractError(label(n) + ": input node id out of range");
    if (nodes_[static_cast<size_t>(i)].needs_grad) n.needs_grad = true;
  }
  if (n.op == Op::Param && n.param->requires_grad()) n.needs_grad = true;
  nodes_.push_back(std::move(n));
  forwarded_ = false;
  return size() - 1;
}

int Graph::input(const std::string& name, Shape shape, bool requires_grad) {
  if (inputs_by_name_.count(name)) throw ContractError("duplicate input name '" + name + "'");
  Node n;
  n.op = Op::Input;
  n.name = name;
  n.attrs.shape = std::move(shape);
  n.needs_grad = requires_grad;
  const int id = add_node(std::move(n));
  inputs_by_name_[name] = id;
  return id;
}

int Graph::constant(Tensor value, const std::string& name) {
  Node n;
  n.op = Op::Const;
  n.name = name;
  n.attrs.shape = value.shape();
  const int id = add_node(std::move(n));
  nodes_[static_cast<size_t>(id)].out = std::move(value);
  return id;
}

int Graph::param(const std::shared_ptr<Tensor>& p, const std::string& name) {
  auto it = params_by_ptr_.find(p.get());
  if (it != params_by_ptr_.end()) return it->second;
  Node n;
  n.op = Op::Param;
  n.name = name;
  n.param = p;
  n.attrs.shape = p->shape();
  const int id = add_node(std::move(n));
  params_by_ptr_[p.get()] = id;
  return id;
}

int Graph::apply(Op op, std::vector<int> inputs, Attrs attrs, const std::string& name) {
  Node n;
  n.op = op;
  n.name = name;
  n.in = std::move(inputs);
  n.attrs = std::move(attrs);
  for (int i : n.in) {
    if (i < 0 || i >= size()) throw ContractError(label(n) + ": input node id out of range");
  }
  return add_node(std::move(n));
}

void Graph::mark_output(const std::string& name, int id) {
  outputs_.emplace_back(name, id);
}

void Graph::bind(const std::string& input_name, Tensor value) {
  auto it = inputs_by_name_.find(input_name);
  if (it == inputs_by_name_.end()) throw ContractError("no input named '" + input_name + "'");
  Node& n = nodes_[static_cast<size_t>(it->second)];
  if (value.shape() != n.attrs.shape) {
    fail_shape(n, "bound value has shape " + shape_str(value.shape()) + ", declared " +
                      shape_str(n.attrs.shape));
  }
  n.out = std::move(value);
  n.bound = true;
  forwarded_ = false;
}

void Graph::forward() {
  for (auto& n : nodes_) {
    switch (n.op) {
      case Op::Input:
        if (!n.bound) throw ContractError("input '" + n.name + "' not bound before evaluate");
        break;
      case Op::Const:
        break;
      case Op::Param:
        n.out.values() = n.param->values();
        break;
      default:
        forward_node(n);
        n.out.check_finite(label(n));
        break;
    }
  }
  forwarded_ = true;
}

std::map<std::string, Tensor> Graph::evaluate(const std::map<std::string, Tensor>& inputs) {
  for (const auto& [k, v] : inputs) bind(k, v);
  forward();
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : outputs_) out[name] = nodes_[static_cast<size_t>(id)].out;
  return out;
}

const Tensor& Graph::value(int id) const {
  if (!forwarded_) throw ContractError("value() before forward()");
  return nodes_.at(static_cast<size_t>(id)).out;
}

const std::vector<double>& Graph::grad_of(int id) const {
  const Node& n = nodes_.at(static_cast<size_t>(id));
  if (n.grad.size() != static_cast<size_t>(n.out.numel())) {
    throw ContractError(label(n) + ": gradient not available (run backward first)");
  }
  return n.grad;
}

std::vector<double>& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.size() != static_cast<size_t>(n.out.numel())) {
    n.grad.assign(static_cast<size_t>(n.out.numel()), 0.0);
  }
  return n.grad;
}

void Graph::backward(int output_id) {
  if (!forwarded_) throw ContractError("backward before forward");
  if (output_id < 0 || output_id >= size()) throw ContractError("backward: bad output node id");
  Node& out = nodes_[static_cast<size_t>(output_id)];
  if (out.out.numel() != 1) {
    throw ContractError(label(out) + ": backward requires a scalar output, got shape " +
                        shape_str(out.out.shape()));
  }
  for (auto& n : nodes_) {
    if (n.needs_grad) {
      n.grad.assign(static_cast<size_t>(n.out.numel()), 0.0);
    } else {
      n.grad.clear();
    }
  }
  if (!out.needs_grad) {
    // Output does not depend on any requires-grad tensor: all grads are zero.
    for (auto& n : nodes_) {
      if (n.op == Op::Param && n.param->requires_grad()) n.param->set_grad(std::vector<double>(
          static_cast<size_t>(n.out.numel()), 0.0));
    }
    return;
  }
  grad_buf(output_id)[0] = 1.0;
  for (int id = size() - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) continue;
    if (n.op == Op::Input || n.op == Op::Const || n.op == Op::Param) continue;
    backward_node(id);
  }
  for (auto& n : nodes_) {
    if (n.op == Op::Param && n.param->requires_grad()) {
      n.param->set_grad(n.grad.empty()
                            ? std::vector<double>(static_cast<size_t>(n.out.numel()), 0.0)
                            : n.grad);
    }
  }
}

// ---- shape inference -------------------------------------------------------

Shape Graph::infer_shape(const Node& n) const {
  auto in_shape = [&](size_t k) -> const Shape& {
    return nodes_[static_cast<size_t>(n.in[k])].out.shape();
  };
  auto want_inputs = [&](size_t k) {
    if (n.in.size() != k) {
      fail_shape(n, "expects " + std::to_string(k) + " inputs, got " + std::to_string(n.in.size()));
    }
  };
  switch (n.op) {
    case Op::Input:
    case Op::Const:
    case Op::Param:
      return n.attrs.shape;
    case Op::Identity:
    case Op::LeakyRelu:
    case Op::Relu:
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::Softplus:
    case Op::SoftmaxLast:
    case Op::Log:
    case Op::Exp:
    case Op::Sqrt:
    case Op::Square:
    case Op::Abs:
    case Op::CheckUnitInterval:
      want_inputs(1);
      return in_shape(0);
    case Op::AddConst:
    case Op::MulConst:
      want_inputs(1);
      return in_shape(0);
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      want_inputs(2);
      if (in_shape(0) != in_shape(1)) {
        fail_shape(n, "operand shapes differ: " + shape_str(in_shape(0)) + " vs " +
                          shape_str(in_shape(1)));
      }
      return in_shape(0);
    }
    case Op::MatMul: {
      want_inputs(2);
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() != 2 || b.size() != 2) {
        fail_shape(n, "expects rank-2 operands, got " + shape_str(a) + " and " + shape_str(b));
      }
      if (a[1] != b[0]) {
        fail_shape(n, "inner extents differ: " + shape_str(a) + " x " + shape_str(b));
      }
      return {a[0], b[1]};
    }
    case Op::Conv2d: {
      want_inputs(2);
      const Shape& x = in_shape(0);
      const Shape& w = in_shape(1);
      if (x.size() != 4 || w.size() != 4) fail_shape(n, "expects 4-D input and weight");
      if (x[1] != w[1]) {
        fail_shape(n, "input channels " + std::to_string(x[1]) + " != weight channels " +
                          std::to_string(w[1]));
      }
      const int oh = kernels::conv_out_extent(x[2], w[2], n.attrs.stride, n.attrs.pad);
      const int ow = kernels::conv_out_extent(x[3], w[3], n.attrs.stride, n.attrs.pad);
      if (oh <= 0 || ow <= 0) fail_shape(n, "kernel larger than padded input");
      return {x[0], w[0], oh, ow};
    }
    case Op::ConvT2d: {
      want_inputs(2);
      const Shape& x = in_shape(0);
      const Shape& w = in_shape(1);
      if (x.size() != 4 || w.size() != 4) fail_shape(n, "expects 4-D input and weight");
      if (x[1] != w[0]) {
        fail_shape(n, "input channels " + std::to_string(x[1]) + " != weight in-channels " +
                          std::to_string(w[0]));
      }
      const int oh = kernels::convt_out_extent(x[2], w[2], n.attrs.stride, n.attrs.pad);
      const int ow = kernels::convt_out_extent(x[3], w[3], n.attrs.stride, n.attrs.pad);
      if (oh <= 0 || ow <= 0) fail_shape(n, "degenerate output extent");
      return {x[0], w[1], oh, ow};
    }
    case Op::AvgPool2: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 4 || x[2] % 2 || x[3] % 2) {
        fail_shape(n, "expects 4-D input with even spatial extents, got " + shape_str(x));
      }
      return {x[0], x[1], x[2] / 2, x[3] / 2};
    }
    case Op::UpNearest2:
    case Op::UpBilinear2: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 4) fail_shape(n, "expects 4-D input, got " + shape_str(x));
      return {x[0], x[1], x[2] * 2, x[3] * 2};
    }
    case Op::MeanAll:
    case Op::SumAll:
      want_inputs(1);
      return {};
    case Op::RowSum:
    case Op::RowLogSumExp: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 2) fail_shape(n, "expects rank-2 input, got " + shape_str(x));
      return {x[0]};
    }
    case Op::TakeDiag: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 2 || x[0] != x[1]) fail_shape(n, "expects square matrix, got " + shape_str(x));
      return {x[0]};
    }
    case Op::PairwiseSqDist: {
      want_inputs(2);
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() != 2 || b.size() != 2 || a[1] != b[1]) {
        fail_shape(n, "expects [K,d] and [L,d], got " + shape_str(a) + " and " + shape_str(b));
      }
      return {a[0], b[0]};
    }
    case Op::ConcatChan: {
      want_inputs(2);
      const Shape& a = in_shape(0);
      const Shape& b = in_shape(1);
      if (a.size() != b.size() || (a.size() != 2 && a.size() != 4)) {
        fail_shape(n, "expects two rank-2 or rank-4 tensors");
      }
      Shape out = a;
      for (size_t i = 0; i < a.size(); ++i) {
        if (i == 1) continue;
        if (a[i] != b[i]) {
          fail_shape(n, "non-channel extents differ: " + shape_str(a) + " vs " + shape_str(b));
        }
      }
      out[1] = a[1] + b[1];
      return out;
    }
    case Op::BroadcastSpatial: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 2) fail_shape(n, "expects [B,L] labels, got " + shape_str(x));
      if (n.attrs.h <= 0 || n.attrs.w <= 0) fail_shape(n, "target extents must be positive");
      return {x[0], x[1], n.attrs.h, n.attrs.w};
    }
    case Op::BiasAddChan: {
      want_inputs(2);
      const Shape& x = in_shape(0);
      const Shape& b = in_shape(1);
      if (x.size() != 4 || b.size() != 1 || b[0] != x[1]) {
        fail_shape(n, "expects 4-D input and [C] bias, got " + shape_str(x) + " and " + shape_str(b));
      }
      return x;
    }
    case Op::BiasAddRow: {
      want_inputs(2);
      const Shape& x = in_shape(0);
      const Shape& b = in_shape(1);
      if (x.size() != 2 || b.size() != 1 || b[0] != x[1]) {
        fail_shape(n, "expects [B,F] input and [F] bias, got " + shape_str(x) + " and " + shape_str(b));
      }
      return x;
    }
    case Op::InstanceNorm: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.size() != 4) fail_shape(n, "expects 4-D input, got " + shape_str(x));
      return x;
    }
    case Op::ChannelAffine: {
      want_inputs(3);
      const Shape& x = in_shape(0);
      const Shape& gm = in_shape(1);
      const Shape& bt = in_shape(2);
      if (x.size() != 4 || gm.size() != 1 || bt.size() != 1 || gm[0] != x[1] || bt[0] != x[1]) {
        fail_shape(n, "expects 4-D input with [C] scale and shift");
      }
      return x;
    }
    case Op::Flatten: {
      want_inputs(1);
      const Shape& x = in_shape(0);
      if (x.empty()) fail_shape(n, "cannot flatten a scalar");
      int rest = 1;
      for (size_t i = 1; i < x.size(); ++i) rest *= x[i];
      return {x[0], rest};
    }
    case Op::Reshape: {
      want_inputs(1);
      if (shape_numel(n.attrs.shape) != nodes_[static_cast<size_t>(n.in[0])].out.numel()) {
        fail_shape(n, "reshape to " + shape_str(n.attrs.shape) + " changes element count");
      }
      return n.attrs.shape;
    }
  }
  throw ContractError("unreachable shape inference");
}

// ---- forward ---------------------------------------------------------------

void Graph::forward_node(Node& n) {
  const auto in = [&](size_t k) -> const Tensor& { return nodes_[static_cast<size_t>(n.in[k])].out; };
  Tensor& out = n.out;
  const int64_t numel = out.numel();

  switch (n.op) {
    case Op::Identity:
      out.values() = in(0).values();
      break;
    case Op::Add: {
      const double* a = in(0).data();
      const double* b = in(1).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] + b[i];
      break;
    }
    case Op::Sub: {
      const double* a = in(0).data();
      const double* b = in(1).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] - b[i];
      break;
    }
    case Op::Mul: {
      const double* a = in(0).data();
      const double* b = in(1).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] * b[i];
      break;
    }
    case Op::AddConst: {
      const double* a = in(0).data();
      double* o = out.data();
      const double c = n.attrs.alpha;
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] + c;
      break;
    }
    case Op::MulConst: {
      const double* a = in(0).data();
      double* o = out.data();
      const double c = n.attrs.alpha;
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] * c;
      break;
    }
    case Op::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      kernels::gemm(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1), false);
      break;
    }
    case Op::Conv2d: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const int batch = x.dim(0), ci = x.dim(1), h = x.dim(2), wid = x.dim(3);
      const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
      const int oh = out.dim(2), ow = out.dim(3);
      const int64_t kcols = static_cast<int64_t>(ci) * kh * kw;
      const int64_t ospatial = static_cast<int64_t>(oh) * ow;
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        double* col = scratch_a(static_cast<size_t>(kcols * ospatial));
        for (int64_t b = b0; b < b1; ++b) {
          kernels::im2col(x.data() + b * ci * h * wid, ci, h, wid, kh, kw, n.attrs.stride,
                          n.attrs.pad, col);
          kernels::gemm(w.data(), col, out.data() + b * co * ospatial, co, kcols, ospatial, false);
        }
      });
      break;
    }
    case Op::ConvT2d: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);  // [Ci, Co, kh, kw]
      const int batch = x.dim(0), ci = x.dim(1), h = x.dim(2), wid = x.dim(3);
      const int co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
      const int oh = out.dim(2), ow = out.dim(3);
      const int64_t m = static_cast<int64_t>(co) * kh * kw;
      const int64_t spatial = static_cast<int64_t>(h) * wid;
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        double* colbuf = scratch_a(static_cast<size_t>(m * spatial));
        for (int64_t b = b0; b < b1; ++b) {
          // col = W^T [m x ci]^T... W viewed as [ci x m]; col[m, s] = sum_ci W[ci, m] * x[ci, s]
          kernels::gemm_at(w.data(), x.data() + b * ci * spatial, colbuf, ci, m, spatial, false);
          double* ob = out.data() + b * co * oh * ow;
          std::memset(ob, 0, sizeof(double) * static_cast<size_t>(co) * oh * ow);
          kernels::col2im(colbuf, co, oh, ow, kh, kw, n.attrs.stride, n.attrs.pad, ob);
        }
      });
      break;
    }
    case Op::AvgPool2: {
      const Tensor& x = in(0);
      const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
          kernels::avgpool2(x.data() + b * c * h * w, c, h, w, out.data() + b * c * (h / 2) * (w / 2));
        }
      });
      break;
    }
    case Op::UpNearest2:
    case Op::UpBilinear2: {
      const Tensor& x = in(0);
      const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
          const double* src = x.data() + b * c * h * w;
          double* dst = out.data() + b * c * 4 * h * w;
          if (n.op == Op::UpNearest2) {
            kernels::upsample_nearest2(src, c, h, w, dst);
          } else {
            kernels::upsample_bilinear2(src, c, h, w, dst);
          }
        }
      });
      break;
    }
    case Op::LeakyRelu: {
      const double* a = in(0).data();
      double* o = out.data();
      const double s = n.attrs.alpha;
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] > 0.0 ? a[i] : s * a[i];
      break;
    }
    case Op::Relu: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    }
    case Op::Tanh: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = std::tanh(a[i]);
      break;
    }
    case Op::Sigmoid: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = 1.0 / (1.0 + std::exp(-a[i]));
      break;
    }
    case Op::Softplus: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) {
        o[i] = std::max(a[i], 0.0) + std::log1p(std::exp(-std::abs(a[i])));
      }
      break;
    }
    case Op::SoftmaxLast: {
      const Tensor& x = in(0);
      const int64_t cols = x.shape().back();
      const int64_t rows = numel / cols;
      const double* a = x.data();
      double* o = out.data();
      for (int64_t r = 0; r < rows; ++r) {
        const double* xr = a + r * cols;
        double* orow = o + r * cols;
        double m = xr[0];
        for (int64_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
        double z = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
          orow[j] = std::exp(xr[j] - m);
          z += orow[j];
        }
        const double inv = 1.0 / z;
        for (int64_t j = 0; j < cols; ++j) orow[j] *= inv;
      }
      break;
    }
    case Op::Log: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = std::log(std::max(a[i], kLogFloor));
      break;
    }
    case Op::Exp: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = std::exp(a[i]);
      break;
    }
    case Op::Sqrt: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = std::sqrt(std::max(a[i], kSqrtFloor));
      break;
    }
    case Op::Square: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = a[i] * a[i];
      break;
    }
    case Op::Abs: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) o[i] = std::abs(a[i]);
      break;
    }
    case Op::MeanAll:
    case Op::SumAll: {
      const Tensor& x = in(0);
      double acc = 0.0;
      const double* a = x.data();
      for (int64_t i = 0; i < x.numel(); ++i) acc += a[i];
      out[0] = n.op == Op::MeanAll ? acc / static_cast<double>(x.numel()) : acc;
      break;
    }
    case Op::RowSum: {
      const Tensor& x = in(0);
      const int64_t cols = x.dim(1);
      for (int64_t r = 0; r < x.dim(0); ++r) {
        double acc = 0.0;
        const double* xr = x.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) acc += xr[j];
        out[r] = acc;
      }
      break;
    }
    case Op::RowLogSumExp: {
      const Tensor& x = in(0);
      const int64_t cols = x.dim(1);
      for (int64_t r = 0; r < x.dim(0); ++r) {
        const double* xr = x.data() + r * cols;
        double m = xr[0];
        for (int64_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
        double z = 0.0;
        for (int64_t j = 0; j < cols; ++j) z += std::exp(xr[j] - m);
        out[r] = m + std::log(z);
      }
      break;
    }
    case Op::TakeDiag: {
      const Tensor& x = in(0);
      const int64_t k = x.dim(0);
      for (int64_t i = 0; i < k; ++i) out[i] = x[i * k + i];
      break;
    }
    case Op::PairwiseSqDist: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const int64_t ka = a.dim(0), kb = b.dim(0), d = a.dim(1);
      for (int64_t i = 0; i < ka; ++i) {
        const double* ai = a.data() + i * d;
        for (int64_t j = 0; j < kb; ++j) {
          const double* bj = b.data() + j * d;
          double acc = 0.0;
          for (int64_t t = 0; t < d; ++t) {
            const double diff = ai[t] - bj[t];
            acc += diff * diff;
          }
          out[i * kb + j] = acc;
        }
      }
      break;
    }
    case Op::ConcatChan: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const int64_t outer = a.dim(0);
      const int64_t inner = a.rank() == 4 ? static_cast<int64_t>(a.dim(2)) * a.dim(3) : 1;
      const int64_t ca = a.dim(1) * inner, cb = b.dim(1) * inner;
      for (int64_t i = 0; i < outer; ++i) {
        std::memcpy(out.data() + i * (ca + cb), a.data() + i * ca, sizeof(double) * static_cast<size_t>(ca));
        std::memcpy(out.data() + i * (ca + cb) + ca, b.data() + i * cb,
                    sizeof(double) * static_cast<size_t>(cb));
      }
      break;
    }
    case Op::BroadcastSpatial: {
      const Tensor& x = in(0);
      const int64_t rows = x.dim(0) * static_cast<int64_t>(x.dim(1));
      const int64_t spatial = static_cast<int64_t>(n.attrs.h) * n.attrs.w;
      for (int64_t r = 0; r < rows; ++r) {
        const double v = x[r];
        double* o = out.data() + r * spatial;
        for (int64_t s = 0; s < spatial; ++s) o[s] = v;
      }
      break;
    }
    case Op::BiasAddChan: {
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      const int64_t batch = x.dim(0), c = x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      for (int64_t bi = 0; bi < batch; ++bi) {
        for (int64_t ci = 0; ci < c; ++ci) {
          const double bias = b[ci];
          const double* src = x.data() + (bi * c + ci) * spatial;
          double* dst = out.data() + (bi * c + ci) * spatial;
          for (int64_t s = 0; s < spatial; ++s) dst[s] = src[s] + bias;
        }
      }
      break;
    }
    case Op::BiasAddRow: {
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      const int64_t rows = x.dim(0), cols = x.dim(1);
      for (int64_t r = 0; r < rows; ++r) {
        const double* src = x.data() + r * cols;
        double* dst = out.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) dst[j] = src[j] + b[j];
      }
      break;
    }
    case Op::InstanceNorm: {
      const Tensor& x = in(0);
      const int64_t planes = static_cast<int64_t>(x.dim(0)) * x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      const double eps = n.attrs.alpha;
      parallel_for(planes, [&](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
          const double* src = x.data() + p * spatial;
          double* dst = out.data() + p * spatial;
          double mean = 0.0;
          for (int64_t s = 0; s < spatial; ++s) mean += src[s];
          mean /= static_cast<double>(spatial);
          double var = 0.0;
          for (int64_t s = 0; s < spatial; ++s) {
            const double d = src[s] - mean;
            var += d * d;
          }
          var /= static_cast<double>(spatial);
          const double istd = 1.0 / std::sqrt(var + eps);
          for (int64_t s = 0; s < spatial; ++s) dst[s] = (src[s] - mean) * istd;
        }
      });
      break;
    }
    case Op::ChannelAffine: {
      const Tensor& x = in(0);
      const Tensor& gm = in(1);
      const Tensor& bt = in(2);
      const int64_t batch = x.dim(0), c = x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      for (int64_t bi = 0; bi < batch; ++bi) {
        for (int64_t ci = 0; ci < c; ++ci) {
          const double s = gm[ci], t = bt[ci];
          const double* src = x.data() + (bi * c + ci) * spatial;
          double* dst = out.data() + (bi * c + ci) * spatial;
          for (int64_t k = 0; k < spatial; ++k) dst[k] = src[k] * s + t;
        }
      }
      break;
    }
    case Op::Flatten:
    case Op::Reshape:
      out.values() = in(0).values();
      break;
    case Op::CheckUnitInterval: {
      const double* a = in(0).data();
      double* o = out.data();
      for (int64_t i = 0; i < numel; ++i) {
        if (!(a[i] > 0.0 && a[i] < 1.0)) {
          throw NumericError(label(n) + ": score " + std::to_string(a[i]) +
                             " outside (0,1) at index " + std::to_string(i));
        }
        o[i] = a[i];
      }
      break;
    }
    default:
      throw ContractError("forward of leaf node");
  }
}

// ---- backward --------------------------------------------------------------

void Graph::backward_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const auto inode = [&](size_t k) -> Node& { return nodes_[static_cast<size_t>(n.in[k])]; };
  const auto wants = [&](size_t k) { return inode(k).needs_grad; };
  const auto gin = [&](size_t k) -> std::vector<double>& { return grad_buf(n.in[k]); };
  const std::vector<double>& g = n.grad;
  const int64_t numel = n.out.numel();

  switch (n.op) {
    case Op::Identity:
    case Op::Flatten:
    case Op::Reshape:
    case Op::CheckUnitInterval: {
      if (!wants(0)) break;
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      break;
    }
    case Op::Add: {
      for (size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        auto& d = gin(k);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      }
      break;
    }
    case Op::Sub: {
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t i = 0; i < numel; ++i) d[i] -= g[i];
      }
      break;
    }
    case Op::Mul: {
      const double* a = inode(0).out.data();
      const double* b = inode(1).out.data();
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i] * a[i];
      }
      break;
    }
    case Op::AddConst: {
      if (!wants(0)) break;
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      break;
    }
    case Op::MulConst: {
      if (!wants(0)) break;
      auto& d = gin(0);
      const double c = n.attrs.alpha;
      for (int64_t i = 0; i < numel; ++i) d[i] += c * g[i];
      break;
    }
    case Op::MatMul: {
      const Tensor& a = inode(0).out;
      const Tensor& b = inode(1).out;
      const int64_t m = a.dim(0), k = a.dim(1), c = b.dim(1);
      if (wants(0)) kernels::gemm_bt(g.data(), b.data(), gin(0).data(), m, c, k, true);
      if (wants(1)) kernels::gemm_at(a.data(), g.data(), gin(1).data(), m, k, c, true);
      break;
    }
    case Op::Conv2d: {
      const Tensor& x = inode(0).out;
      const Tensor& w = inode(1).out;
      const int batch = x.dim(0), ci = x.dim(1), h = x.dim(2), wid = x.dim(3);
      const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
      const int oh = n.out.dim(2), ow = n.out.dim(3);
      const int64_t kcols = static_cast<int64_t>(ci) * kh * kw;
      const int64_t ospatial = static_cast<int64_t>(oh) * ow;
      if (wants(0)) {
        auto& dx = gin(0);
        parallel_for(batch, [&](int64_t b0, int64_t b1) {
          double* dcol = scratch_a(static_cast<size_t>(kcols * ospatial));
          for (int64_t b = b0; b < b1; ++b) {
            kernels::gemm_at(w.data(), g.data() + b * co * ospatial, dcol, co, kcols, ospatial,
                             false);
            kernels::col2im(dcol, ci, h, wid, kh, kw, n.attrs.stride, n.attrs.pad,
                            dx.data() + b * ci * h * wid);
          }
        });
      }
      if (wants(1)) {
        // Per-image partials merged in batch order: bitwise worker-invariant.
        const int64_t wn = static_cast<int64_t>(co) * kcols;
        std::vector<double> partials(static_cast<size_t>(batch * wn));
        parallel_for(batch, [&](int64_t b0, int64_t b1) {
          double* col = scratch_a(static_cast<size_t>(kcols * ospatial));
          for (int64_t b = b0; b < b1; ++b) {
            kernels::im2col(x.data() + b * ci * h * wid, ci, h, wid, kh, kw, n.attrs.stride,
                            n.attrs.pad, col);
            kernels::gemm_bt(g.data() + b * co * ospatial, col, partials.data() + b * wn, co,
                             ospatial, kcols, false);
          }
        });
        auto& dw = gin(1);
        for (int64_t b = 0; b < batch; ++b) {
          const double* p = partials.data() + b * wn;
          for (int64_t i = 0; i < wn; ++i) dw[i] += p[i];
        }
      }
      break;
    }
    case Op::ConvT2d: {
      const Tensor& x = inode(0).out;
      const Tensor& w = inode(1).out;  // [Ci, Co, kh, kw]
      const int batch = x.dim(0), ci = x.dim(1), h = x.dim(2), wid = x.dim(3);
      const int co = w.dim(1), kh = w.dim(2), kw = w.dim(3);
      const int oh = n.out.dim(2), ow = n.out.dim(3);
      const int64_t m = static_cast<int64_t>(co) * kh * kw;
      const int64_t spatial = static_cast<int64_t>(h) * wid;
      if (wants(0)) {
        auto& dx = gin(0);
        parallel_for(batch, [&](int64_t b0, int64_t b1) {
          double* dcol = scratch_a(static_cast<size_t>(m * spatial));
          for (int64_t b = b0; b < b1; ++b) {
            kernels::im2col(g.data() + b * co * oh * ow, co, oh, ow, kh, kw, n.attrs.stride,
                            n.attrs.pad, dcol);
            kernels::gemm(w.data(), dcol, dx.data() + b * ci * spatial, ci, m, spatial, true);
          }
        });
      }
      if (wants(1)) {
        const int64_t wn = static_cast<int64_t>(ci) * m;
        std::vector<double> partials(static_cast<size_t>(batch * wn));
        parallel_for(batch, [&](int64_t b0, int64_t b1) {
          double* dcol = scratch_a(static_cast<size_t>(m * spatial));
          for (int64_t b = b0; b < b1; ++b) {
            kernels::im2col(g.data() + b * co * oh * ow, co, oh, ow, kh, kw, n.attrs.stride,
                            n.attrs.pad, dcol);
            kernels::gemm_bt(x.data() + b * ci * spatial, dcol, partials.data() + b * wn, ci,
                             spatial, m, false);
          }
        });
        auto& dw = gin(1);
        for (int64_t b = 0; b < batch; ++b) {
          const double* p = partials.data() + b * wn;
          for (int64_t i = 0; i < wn; ++i) dw[i] += p[i];
        }
      }
      break;
    }
    case Op::AvgPool2: {
      if (!wants(0)) break;
      const Tensor& x = inode(0).out;
      const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
      auto& dx = gin(0);
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
          kernels::avgpool2_backward(g.data() + b * c * (h / 2) * (w / 2), c, h, w,
                                     dx.data() + b * c * h * w);
        }
      });
      break;
    }
    case Op::UpNearest2:
    case Op::UpBilinear2: {
      if (!wants(0)) break;
      const Tensor& x = inode(0).out;
      const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
      auto& dx = gin(0);
      parallel_for(batch, [&](int64_t b0, int64_t b1) {
        for (int64_t b = b0; b < b1; ++b) {
          if (n.op == Op::UpNearest2) {
            kernels::upsample_nearest2_backward(g.data() + b * c * 4 * h * w, c, h, w,
                                                dx.data() + b * c * h * w);
          } else {
            kernels::upsample_bilinear2_backward(g.data() + b * c * 4 * h * w, c, h, w,
                                                 dx.data() + b * c * h * w);
          }
        }
      });
      break;
    }
    case Op::LeakyRelu: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      const double s = n.attrs.alpha;
      for (int64_t i = 0; i < numel; ++i) d[i] += a[i] > 0.0 ? g[i] : s * g[i];
      break;
    }
    case Op::Relu: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) {
        if (a[i] > 0.0) d[i] += g[i];
      }
      break;
    }
    case Op::Tanh: {
      if (!wants(0)) break;
      const double* y = n.out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::Sigmoid: {
      if (!wants(0)) break;
      const double* y = n.out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Softplus: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i] / (1.0 + std::exp(-a[i]));
      break;
    }
    case Op::SoftmaxLast: {
      if (!wants(0)) break;
      const double* y = n.out.data();
      const int64_t cols = n.out.shape().back();
      const int64_t rows = numel / cols;
      auto& d = gin(0);
      for (int64_t r = 0; r < rows; ++r) {
        const double* yr = y + r * cols;
        const double* gr = g.data() + r * cols;
        double dot = 0.0;
        for (int64_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
        double* dr = d.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) dr[j] += yr[j] * (gr[j] - dot);
      }
      break;
    }
    case Op::Log: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) {
        if (a[i] > kLogFloor) d[i] += g[i] / a[i];
      }
      break;
    }
    case Op::Exp: {
      if (!wants(0)) break;
      const double* y = n.out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += g[i] * y[i];
      break;
    }
    case Op::Sqrt: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      const double* y = n.out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) {
        if (a[i] > kSqrtFloor) d[i] += 0.5 * g[i] / y[i];
      }
      break;
    }
    case Op::Square: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) d[i] += 2.0 * a[i] * g[i];
      break;
    }
    case Op::Abs: {
      if (!wants(0)) break;
      const double* a = inode(0).out.data();
      auto& d = gin(0);
      for (int64_t i = 0; i < numel; ++i) {
        if (a[i] > 0.0) {
          d[i] += g[i];
        } else if (a[i] < 0.0) {
          d[i] -= g[i];
        }
      }
      break;
    }
    case Op::MeanAll: {
      if (!wants(0)) break;
      auto& d = gin(0);
      const double gv = g[0] / static_cast<double>(inode(0).out.numel());
      for (auto& v : d) v += gv;
      break;
    }
    case Op::SumAll: {
      if (!wants(0)) break;
      auto& d = gin(0);
      const double gv = g[0];
      for (auto& v : d) v += gv;
      break;
    }
    case Op::RowSum: {
      if (!wants(0)) break;
      const int64_t cols = inode(0).out.dim(1);
      auto& d = gin(0);
      for (int64_t r = 0; r < inode(0).out.dim(0); ++r) {
        double* dr = d.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) dr[j] += g[r];
      }
      break;
    }
    case Op::RowLogSumExp: {
      if (!wants(0)) break;
      const Tensor& x = inode(0).out;
      const int64_t cols = x.dim(1);
      auto& d = gin(0);
      for (int64_t r = 0; r < x.dim(0); ++r) {
        const double* xr = x.data() + r * cols;
        const double lse = n.out[r];
        double* dr = d.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) dr[j] += g[r] * std::exp(xr[j] - lse);
      }
      break;
    }
    case Op::TakeDiag: {
      if (!wants(0)) break;
      const int64_t k = inode(0).out.dim(0);
      auto& d = gin(0);
      for (int64_t i = 0; i < k; ++i) d[i * k + i] += g[i];
      break;
    }
    case Op::PairwiseSqDist: {
      const Tensor& a = inode(0).out;
      const Tensor& b = inode(1).out;
      const int64_t ka = a.dim(0), kb = b.dim(0), dd = a.dim(1);
      if (wants(0)) {
        auto& da = gin(0);
        for (int64_t i = 0; i < ka; ++i) {
          const double* ai = a.data() + i * dd;
          double* dai = da.data() + i * dd;
          for (int64_t j = 0; j < kb; ++j) {
            const double* bj = b.data() + j * dd;
            const double gij = 2.0 * g[i * kb + j];
            if (gij == 0.0) continue;
            for (int64_t t = 0; t < dd; ++t) dai[t] += gij * (ai[t] - bj[t]);
          }
        }
      }
      if (wants(1)) {
        auto& db = gin(1);
        for (int64_t j = 0; j < kb; ++j) {
          const double* bj = b.data() + j * dd;
          double* dbj = db.data() + j * dd;
          for (int64_t i = 0; i < ka; ++i) {
            const double* ai = a.data() + i * dd;
            const double gij = 2.0 * g[i * kb + j];
            if (gij == 0.0) continue;
            for (int64_t t = 0; t < dd; ++t) dbj[t] -= gij * (ai[t] - bj[t]);
          }
        }
      }
      break;
    }
    case Op::ConcatChan: {
      const Tensor& a = inode(0).out;
      const Tensor& b = inode(1).out;
      const int64_t outer = a.dim(0);
      const int64_t inner = a.rank() == 4 ? static_cast<int64_t>(a.dim(2)) * a.dim(3) : 1;
      const int64_t ca = a.dim(1) * inner, cb = b.dim(1) * inner;
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t i = 0; i < outer; ++i) {
          const double* gs = g.data() + i * (ca + cb);
          double* dst = d.data() + i * ca;
          for (int64_t j = 0; j < ca; ++j) dst[j] += gs[j];
        }
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t i = 0; i < outer; ++i) {
          const double* gs = g.data() + i * (ca + cb) + ca;
          double* dst = d.data() + i * cb;
          for (int64_t j = 0; j < cb; ++j) dst[j] += gs[j];
        }
      }
      break;
    }
    case Op::BroadcastSpatial: {
      if (!wants(0)) break;
      const int64_t rows = inode(0).out.numel();
      const int64_t spatial = static_cast<int64_t>(n.attrs.h) * n.attrs.w;
      auto& d = gin(0);
      for (int64_t r = 0; r < rows; ++r) {
        const double* gs = g.data() + r * spatial;
        double acc = 0.0;
        for (int64_t s = 0; s < spatial; ++s) acc += gs[s];
        d[r] += acc;
      }
      break;
    }
    case Op::BiasAddChan: {
      const Tensor& x = inode(0).out;
      const int64_t batch = x.dim(0), c = x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t bi = 0; bi < batch; ++bi) {
          for (int64_t ci = 0; ci < c; ++ci) {
            const double* gs = g.data() + (bi * c + ci) * spatial;
            double acc = 0.0;
            for (int64_t s = 0; s < spatial; ++s) acc += gs[s];
            d[ci] += acc;
          }
        }
      }
      break;
    }
    case Op::BiasAddRow: {
      const Tensor& x = inode(0).out;
      const int64_t rows = x.dim(0), cols = x.dim(1);
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t i = 0; i < numel; ++i) d[i] += g[i];
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t r = 0; r < rows; ++r) {
          const double* gs = g.data() + r * cols;
          for (int64_t j = 0; j < cols; ++j) d[j] += gs[j];
        }
      }
      break;
    }
    case Op::InstanceNorm: {
      if (!wants(0)) break;
      const Tensor& x = inode(0).out;
      const int64_t planes = static_cast<int64_t>(x.dim(0)) * x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      const double eps = n.attrs.alpha;
      auto& d = gin(0);
      parallel_for(planes, [&](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
          const double* src = x.data() + p * spatial;
          const double* y = n.out.data() + p * spatial;
          const double* gp = g.data() + p * spatial;
          double* dp = d.data() + p * spatial;
          double mean = 0.0;
          for (int64_t s = 0; s < spatial; ++s) mean += src[s];
          mean /= static_cast<double>(spatial);
          double var = 0.0;
          for (int64_t s = 0; s < spatial; ++s) {
            const double dv = src[s] - mean;
            var += dv * dv;
          }
          var /= static_cast<double>(spatial);
          const double istd = 1.0 / std::sqrt(var + eps);
          double gmean = 0.0, gydot = 0.0;
          for (int64_t s = 0; s < spatial; ++s) {
            gmean += gp[s];
            gydot += gp[s] * y[s];
          }
          gmean /= static_cast<double>(spatial);
          gydot /= static_cast<double>(spatial);
          for (int64_t s = 0; s < spatial; ++s) {
            dp[s] += istd * (gp[s] - gmean - y[s] * gydot);
          }
        }
      });
      break;
    }
    case Op::ChannelAffine: {
      const Tensor& x = inode(0).out;
      const Tensor& gm = inode(1).out;
      const int64_t batch = x.dim(0), c = x.dim(1);
      const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
      if (wants(0)) {
        auto& d = gin(0);
        for (int64_t bi = 0; bi < batch; ++bi) {
          for (int64_t ci = 0; ci < c; ++ci) {
            const double s = gm[ci];
            const double* gs = g.data() + (bi * c + ci) * spatial;
            double* dst = d.data() + (bi * c + ci) * spatial;
            for (int64_t k = 0; k < spatial; ++k) dst[k] += gs[k] * s;
          }
        }
      }
      if (wants(1)) {
        auto& d = gin(1);
        for (int64_t bi = 0; bi < batch; ++bi) {
          for (int64_t ci = 0; ci < c; ++ci) {
            const double* gs = g.data() + (bi * c + ci) * spatial;
            const double* xs = x.data() + (bi * c + ci) * spatial;
            double acc = 0.0;
            for (int64_t k = 0; k < spatial; ++k) acc += gs[k] * xs[k];
            d[ci] += acc;
          }
        }
      }
      if (wants(2)) {
        auto& d = gin(2);
        for (int64_t bi = 0; bi < batch; ++bi) {
          for (int64_t ci = 0; ci < c; ++ci) {
            const double* gs = g.data() + (bi * c + ci) * spatial;
            double acc = 0.0;
            for (int64_t k = 0; k < spatial; ++k) acc += gs[k];
            d[ci] += acc;
          }
        }
      }
      break;
    }
    default:
      throw ContractError("backward of leaf node");
  }
}

// ---- builder helpers -------------------------------------------------------

int add(Graph& g, int a, int b) { return g.apply(Op::Add, {a, b}); }
int sub(Graph& g, int a, int b) { return g.apply(Op::Sub, {a, b}); }
int mul(Graph& g, int a, int b) { return g.apply(Op::Mul, {a, b}); }
int add_const(Graph& g, int a, double c) {
  Attrs at;
  at.alpha = c;
  return g.apply(Op::AddConst, {a}, at);
}
int mul_const(Graph& g, int a, double c) {
  Attrs at;
  at.alpha = c;
  return g.apply(Op::MulConst, {a}, at);
}
int matmul(Graph& g, int a, int b, const std::string& name) {
  return g.apply(Op::MatMul, {a, b}, {}, name);
}
int conv2d(Graph& g, int x, int w, int bias, int stride, int pad, const std::string& name) {
  Attrs at;
  at.stride = stride;
  at.pad = pad;
  int y = g.apply(Op::Conv2d, {x, w}, at, name);
  if (bias >= 0) y = g.apply(Op::BiasAddChan, {y, bias}, {}, name);
  return y;
}
int convt2d(Graph& g, int x, int w, int bias, int stride, int pad, const std::string& name) {
  Attrs at;
  at.stride = stride;
  at.pad = pad;
  int y = g.apply(Op::ConvT2d, {x, w}, at, name);
  if (bias >= 0) y = g.apply(Op::BiasAddChan, {y, bias}, {}, name);
  return y;
}
int avg_pool2(Graph& g, int x) { return g.apply(Op::AvgPool2, {x}); }
int upsample_nearest2(Graph& g, int x) { return g.apply(Op::UpNearest2, {x}); }
int upsample_bilinear2(Graph& g, int x) { return g.apply(Op::UpBilinear2, {x}); }
int leaky_relu(Graph& g, int x, double slope) {
  Attrs at;
  at.alpha = slope;
  return g.apply(Op::LeakyRelu, {x}, at);
}
int relu(Graph& g, int x) { return g.apply(Op::Relu, {x}); }
int tanh_op(Graph& g, int x) { return g.apply(Op::Tanh, {x}); }
int sigmoid(Graph& g, int x) { return g.apply(Op::Sigmoid, {x}); }
int softplus(Graph& g, int x) { return g.apply(Op::Softplus, {x}); }
int softmax_last(Graph& g, int x) { return g.apply(Op::SoftmaxLast, {x}); }
int log_op(Graph& g, int x) { return g.apply(Op::Log, {x}); }
int exp_op(Graph& g, int x) { return g.apply(Op::Exp, {x}); }
int sqrt_op(Graph& g, int x) { return g.apply(Op::Sqrt, {x}); }
int square(Graph& g, int x) { return g.apply(Op::Square, {x}); }
int abs_op(Graph& g, int x) { return g.apply(Op::Abs, {x}); }
int mean_all(Graph& g, int x) { return g.apply(Op::MeanAll, {x}); }
int sum_all(Graph& g, int x) { return g.apply(Op::SumAll, {x}); }
int row_sum(Graph& g, int x) { return g.apply(Op::RowSum, {x}); }
int row_logsumexp(Graph& g, int x) { return g.apply(Op::RowLogSumExp, {x}); }
int take_diag(Graph& g, int x) { return g.apply(Op::TakeDiag, {x}); }
int pairwise_sqdist(Graph& g, int a, int b) { return g.apply(Op::PairwiseSqDist, {a, b}); }
int concat_chan(Graph& g, int a, int b) { return g.apply(Op::ConcatChan, {a, b}); }
int broadcast_spatial(Graph& g, int labels, int h, int w) {
  Attrs at;
  at.h = h;
  at.w = w;
  return g.apply(Op::BroadcastSpatial, {labels}, at);
}
int instance_norm(Graph& g, int x, double eps) {
  Attrs at;
  at.alpha = eps;
  return g.apply(Op::InstanceNorm, {x}, at);
}
int channel_affine(Graph& g, int x, int gamma, int beta) {
  return g.apply(Op::ChannelAffine, {x, gamma, beta});
}
int flatten(Graph& g, int x) { return g.apply(Op::Flatten, {x}); }
int reshape(Graph& g, int x, Shape shape) {
  Attrs at;
  at.shape = std::move(shape);
  return g.apply(Op::Reshape, {x}, at);
}
int check_unit_interval(Graph& g, int x, const std::string& name) {
  return g.apply(Op::CheckUnitInterval, {x}, {}, name);
}

}  // namespace bp
