#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "biphasic/tensor.hpp"

namespace bp {

// Operator set. Minimal closure over the networks and losses in this project.
enum class Op {
  Input,
  Const,
  Param,
  Identity,
  Add,
  Sub,
  Mul,
  AddConst,
  MulConst,
  MatMul,
  Conv2d,
  ConvT2d,
  AvgPool2,
  UpNearest2,
  UpBilinear2,
  LeakyRelu,
  Relu,
  Tanh,
  Sigmoid,
  Softplus,
  SoftmaxLast,
  Log,
  Exp,
  Sqrt,
  Square,
  Abs,
  MeanAll,
  SumAll,
  RowSum,
  RowLogSumExp,
  TakeDiag,
  PairwiseSqDist,
  ConcatChan,
  BroadcastSpatial,
  BiasAddChan,
  BiasAddRow,
  InstanceNorm,
  ChannelAffine,
  Flatten,
  Reshape,
  CheckUnitInterval,
};

const char* op_name(Op op);

struct Attrs {
  int stride = 1;
  int pad = 1;
  int h = 0;
  int w = 0;
  double alpha = 0.0;
  Shape shape;  // Reshape target
};

struct Node {
  Op op = Op::Const;
  std::string name;
  std::vector<int> in;
  Attrs attrs;
  std::shared_ptr<Tensor> param;  // Param nodes only
  Tensor out;
  std::vector<double> grad;  // d(output)/d(this), valid after backward
  bool needs_grad = false;
  bool bound = false;  // Input nodes: value supplied
};

// Reverse-mode autodiff over an explicit op graph. Nodes are appended in
// topological order by construction; backward walks them in exact reverse
// order. Shapes are inferred (and validated) when a node is added, so shape
// contract violations surface with the offending node's name.
class Graph {
 public:
  int input(const std::string& name, Shape shape, bool requires_grad = false);
  int constant(Tensor value, const std::string& name = "");
  // Adds (or reuses) the leaf node for a shared parameter tensor.
  int param(const std::shared_ptr<Tensor>& p, const std::string& name);
  int apply(Op op, std::vector<int> inputs, Attrs attrs = {}, const std::string& name = "");

  void mark_output(const std::string& name, int id);

  void bind(const std::string& input_name, Tensor value);
  void forward();
  // Binds the given inputs, runs forward, returns the marked outputs.
  std::map<std::string, Tensor> evaluate(const std::map<std::string, Tensor>& inputs);

  // Requires a prior forward() and a scalar-valued output node. Fills the
  // grad of every reachable requires-grad parameter/input with
  // d(output)/d(tensor); repeated calls yield identical results.
  void backward(int output_id);

  const Tensor& value(int id) const;
  const std::vector<double>& grad_of(int id) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
  bool forwarded() const { return forwarded_; }

 private:
  int add_node(Node n);
  Shape infer_shape(const Node& n) const;
  void forward_node(Node& n);
  void backward_node(int id);
  std::vector<double>& grad_buf(int id);
  [[noreturn]] void fail_shape(const Node& n, const std::string& what) const;
  std::string label(const Node& n) const;

  std::vector<Node> nodes_;
  std::map<std::string, int> inputs_by_name_;
  std::map<const Tensor*, int> params_by_ptr_;
  std::vector<std::pair<std::string, int>> outputs_;
  bool forwarded_ = false;
};

// ---- builder helpers -------------------------------------------------------

int add(Graph& g, int a, int b);
int sub(Graph& g, int a, int b);
int mul(Graph& g, int a, int b);
int add_const(Graph& g, int a, double c);
int mul_const(Graph& g, int a, double c);
int matmul(Graph& g, int a, int b, const std::string& name = "");
int conv2d(Graph& g, int x, int w, int bias, int stride, int pad, const std::string& name = "");
int convt2d(Graph& g, int x, int w, int bias, int stride, int pad, const std::string& name = "");
int avg_pool2(Graph& g, int x);
int upsample_nearest2(Graph& g, int x);
int upsample_bilinear2(Graph& g, int x);
int leaky_relu(Graph& g, int x, double slope = 0.2);
int relu(Graph& g, int x);
int tanh_op(Graph& g, int x);
int sigmoid(Graph& g, int x);
int softplus(Graph& g, int x);
int softmax_last(Graph& g, int x);
int log_op(Graph& g, int x);
int exp_op(Graph& g, int x);
int sqrt_op(Graph& g, int x);
int square(Graph& g, int x);
int abs_op(Graph& g, int x);
int mean_all(Graph& g, int x);
int sum_all(Graph& g, int x);
int row_sum(Graph& g, int x);
int row_logsumexp(Graph& g, int x);
int take_diag(Graph& g, int x);
int pairwise_sqdist(Graph& g, int a, int b);
int concat_chan(Graph& g, int a, int b);
int broadcast_spatial(Graph& g, int labels, int h, int w);
int instance_norm(Graph& g, int x, double eps = 1e-5);
int channel_affine(Graph& g, int x, int gamma, int beta);
int flatten(Graph& g, int x);
int reshape(Graph& g, int x, Shape shape);
int check_unit_interval(Graph& g, int x, const std::string& name = "");

}  // namespace bp
