#include "biphasic/adam.hpp"

#include <cmath>

namespace bp {

AdamState::AdamState(std::vector<std::shared_ptr<Tensor>> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p->numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p->numel()), 0.0);
  }
}

void AdamState::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const std::vector<double>& g = p.grad();
    if (g.size() != m_[i].size()) {
      throw ShapeError("adam_step: gradient size does not match optimizer state");
    }
    double* mv = m_[i].data();
    double* vv = v_[i].data();
    double* pv = p.data();
    const double b1 = hyper_.beta1, b2 = hyper_.beta2;
    for (size_t j = 0; j < g.size(); ++j) {
      const double gj = g[j];
      if (!std::isfinite(gj)) throw NumericError("adam_step: non-finite gradient");
      mv[j] = b1 * mv[j] + (1.0 - b1) * gj;
      vv[j] = b2 * vv[j] + (1.0 - b2) * gj * gj;
      const double mhat = mv[j] / bc1;
      const double vhat = vv[j] / bc2;
      pv[j] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

}  // namespace bp
