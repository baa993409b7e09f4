#pragma once

#include <memory>
#include <vector>

#include "biphasic/tensor.hpp"

namespace bp {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed group of parameter tensors.
class AdamState {
 public:
  AdamState(std::vector<std::shared_ptr<Tensor>> params, AdamHyper hyper = {});

  // Applies one update using each parameter's current .grad(). Gradients must
  // be finite; shapes are pinned at construction.
  void step();

  int64_t t() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  const std::vector<std::shared_ptr<Tensor>>& params() const { return params_; }

 private:
  std::vector<std::shared_ptr<Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamHyper hyper_;
  int64_t t_ = 0;
};

}  // namespace bp
