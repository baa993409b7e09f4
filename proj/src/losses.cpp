#include "biphasic/losses.hpp"

#include <algorithm>
#include <cmath>

namespace bp {

namespace {

// mean(-log(x)) with the vanilla-family range check
int mean_neg_log(Graph& g, int scores) {
  return mul_const(g, mean_all(g, log_op(g, scores)), -1.0);
}

int one_minus(Graph& g, int x) { return add_const(g, mul_const(g, x, -1.0), 1.0); }

int checked(Graph& g, int scores, Objective family, const char* who) {
  return family == Objective::Vanilla ? check_unit_interval(g, scores, who) : scores;
}

}  // namespace

Objective objective_from_string(const std::string& s) {
  if (s == "vanilla") return Objective::Vanilla;
  if (s == "lsgan") return Objective::Lsgan;
  throw ConfigError("unknown objective family '" + s + "' (vanilla|lsgan)");
}

const char* objective_name(Objective o) {
  return o == Objective::Vanilla ? "vanilla" : "lsgan";
}

const char* phase_name(Phase p) { return p == Phase::Initial ? "initial" : "enhancing"; }

int adv_loss_g_initial_node(Graph& g, int fake_scores, Objective family) {
  const int f = checked(g, fake_scores, family, "adv_loss_G.fake");
  if (family == Objective::Vanilla) {
    return mean_neg_log(g, f);
  }
  return mean_all(g, square(g, add_const(g, f, -1.0)));
}

int adv_loss_d_initial_node(Graph& g, int real_scores, int fake_scores, Objective family) {
  const int r = checked(g, real_scores, family, "adv_loss_D.real");
  const int f = checked(g, fake_scores, family, "adv_loss_D.fake");
  if (family == Objective::Vanilla) {
    return add(g, mean_neg_log(g, r), mean_neg_log(g, one_minus(g, f)));
  }
  return add(g, mean_all(g, square(g, add_const(g, r, -1.0))), mean_all(g, square(g, f)));
}

int inherited_adv_loss_d_node(Graph& g, int real_scores, int fake_scores,
                              const std::vector<double>& teacher_real, Objective family) {
  const Shape rs = g.node(real_scores).out.shape();
  if (rs.size() != 1 || rs[0] != static_cast<int>(teacher_real.size())) {
    throw ShapeError("inherited_adv_loss_D: teacher scores length " +
                     std::to_string(teacher_real.size()) + " does not match real scores " +
                     shape_str(rs));
  }
  const int r = checked(g, real_scores, family, "inherited_adv_loss_D.real");
  const int f = checked(g, fake_scores, family, "inherited_adv_loss_D.fake");
  const int t = g.constant(Tensor::vector1d(teacher_real), "teacher_real");
  if (family == Objective::Vanilla) {
    // fake term as in the ordinary loss; real term is soft-label cross-entropy
    const int fake_term = mean_neg_log(g, one_minus(g, f));
    const int a = mul(g, t, log_op(g, r));
    const int b = mul(g, one_minus(g, t), log_op(g, one_minus(g, r)));
    const int real_term = mul_const(g, mean_all(g, add(g, a, b)), -1.0);
    return add(g, fake_term, real_term);
  }
  // least-squares transliteration: fake -> 0, real -> teacher score
  const int fake_term = mean_all(g, square(g, f));
  const int real_term = mean_all(g, square(g, sub(g, r, t)));
  return add(g, fake_term, real_term);
}

std::vector<double> importance_weights(const std::vector<double>& teacher_real) {
  if (teacher_real.empty()) throw ContractError("importance_weights: empty batch");
  std::vector<double> tp(teacher_real.size());
  for (size_t i = 0; i < teacher_real.size(); ++i) {
    const double t = teacher_real[i];
    if (!(t >= 0.0 && t <= 1.0)) {
      throw NumericError("importance_weights: teacher score " + std::to_string(t) +
                         " outside [0, 1]");
    }
    tp[i] = 1.0 - t;
  }
  const auto [mn, mx] = std::minmax_element(tp.begin(), tp.end());
  const double span = *mx - *mn;
  std::vector<double> omega(tp.size(), 1.0);
  if (span < 1e-12) return omega;  // degenerate batch carries no ranking
  for (size_t i = 0; i < tp.size(); ++i) omega[i] = 1.0 + (tp[i] - *mn) / span;
  return omega;
}

int inherited_adv_loss_g_node(Graph& g, int fake_scores, const std::vector<double>& omega,
                              Objective family) {
  const Shape fs = g.node(fake_scores).out.shape();
  if (fs.size() != 1 || fs[0] != static_cast<int>(omega.size())) {
    throw ShapeError("inherited_adv_loss_G: omega length " + std::to_string(omega.size()) +
                     " does not match fake scores " + shape_str(fs));
  }
  const int f = checked(g, fake_scores, family, "inherited_adv_loss_G.fake");
  std::vector<double> half(omega.size());
  for (size_t i = 0; i < omega.size(); ++i) half[i] = 0.5 * omega[i];
  const int w = g.constant(Tensor::vector1d(half), "omega_half");
  if (family == Objective::Vanilla) {
    return mul_const(g, mean_all(g, mul(g, w, log_op(g, f))), -1.0);
  }
  return mean_all(g, mul(g, w, square(g, add_const(g, f, -1.0))));
}

int perceptual_distance_node(Graph& g, int emb1, int emb2) {
  if (g.node(emb1).out.shape() != g.node(emb2).out.shape()) {
    throw ShapeError("perceptual_distance: embedding shapes differ");
  }
  return sqrt_op(g, sum_all(g, square(g, sub(g, emb1, emb2))));
}

int infonce_mi_node(Graph& g, int src_emb, int trans_emb) {
  const Shape& s = g.node(src_emb).out.shape();
  const Shape& t = g.node(trans_emb).out.shape();
  if (s.size() != 2 || t.size() != 2 || s != t) {
    throw ShapeError("infonce_mi: expects aligned [K,d] embedding batches");
  }
  if (s[0] < 1) throw ContractError("infonce_mi: empty batch");
  const int d2 = pairwise_sqdist(g, src_emb, trans_emb);
  const int critic = mul_const(g, sqrt_op(g, d2), -1.0);
  const int matched = take_diag(g, critic);
  const int lse = row_logsumexp(g, critic);
  return mean_all(g, sub(g, matched, lse));
}

int mutual_perceptual_loss_node(Graph& g, int src_emb, int trans_emb) {
  return mul_const(g, infonce_mi_node(g, src_emb, trans_emb), -1.0);
}

double mi_hat_from(double i_hat, int batch) {
  return i_hat + std::log(static_cast<double>(batch));
}

int uv_loss_node(Graph& g, int predicted, int target) {
  if (g.node(predicted).out.shape() != g.node(target).out.shape()) {
    throw ShapeError("uv_loss: map shapes differ: " + shape_str(g.node(predicted).out.shape()) +
                     " vs " + shape_str(g.node(target).out.shape()));
  }
  return mean_all(g, abs_op(g, sub(g, predicted, target)));
}

int attr_loss_node(Graph& g, const std::vector<int>& group_logits, const Tensor& labels,
                   const DomainSpec& spec) {
  const size_t heads = spec.groups.size() + spec.flags.size();
  if (group_logits.size() != heads) {
    throw ShapeError("attr_loss: expected " + std::to_string(heads) + " logit heads, got " +
                     std::to_string(group_logits.size()));
  }
  if (labels.rank() != 2 || labels.dim(1) != spec.label_dim()) {
    throw ContractError("attr_loss: labels must be [B," + std::to_string(spec.label_dim()) + "]");
  }
  const int batch = labels.dim(0);
  for (int b = 0; b < batch; ++b) spec.validate_label(DomainSpec::label_row(labels, b));

  int total = -1;
  for (size_t gi = 0; gi < spec.groups.size(); ++gi) {
    const int size = static_cast<int>(spec.groups[gi].values.size());
    const int off = spec.group_offset(gi);
    const Shape& zs = g.node(group_logits[gi]).out.shape();
    if (zs != Shape{batch, size}) {
      throw ShapeError("attr_loss: group '" + spec.groups[gi].name + "' logits must be [" +
                       std::to_string(batch) + "," + std::to_string(size) + "], got " +
                       shape_str(zs));
    }
    Tensor mask(Shape{batch, size});
    for (int b = 0; b < batch; ++b) {
      for (int v = 0; v < size; ++v) mask.at2(b, v) = labels.at2(b, off + v);
    }
    const int z = group_logits[gi];
    const int lse = row_logsumexp(g, z);
    const int picked = row_sum(g, mul(g, z, g.constant(std::move(mask), "target_onehot")));
    const int ce = mean_all(g, sub(g, lse, picked));
    total = total < 0 ? ce : add(g, total, ce);
  }
  for (size_t fi = 0; fi < spec.flags.size(); ++fi) {
    const int z = group_logits[spec.groups.size() + fi];
    const Shape& zs = g.node(z).out.shape();
    if (zs != Shape{batch, 1}) {
      throw ShapeError("attr_loss: flag '" + spec.flags[fi] + "' logits must be [" +
                       std::to_string(batch) + ",1], got " + shape_str(zs));
    }
    Tensor y(Shape{batch, 1});
    for (int b = 0; b < batch; ++b) y.at2(b, 0) = labels.at2(b, spec.flag_offset(fi));
    const int ce = mean_all(g, sub(g, softplus(g, z), mul(g, z, g.constant(std::move(y), "target_flag"))));
    total = total < 0 ? ce : add(g, total, ce);
  }
  if (total < 0) throw ContractError("attr_loss: domain spec has no groups or flags");
  return total;
}

int cycle_loss_node(Graph& g, int x, int reconstructed) {
  if (g.node(x).out.shape() != g.node(reconstructed).out.shape()) {
    throw ShapeError("cycle_loss: shapes differ");
  }
  return mean_all(g, abs_op(g, sub(g, x, reconstructed)));
}

int total_loss_g_node(Graph& g, Phase phase, int adv, int mp, int geom, int attr,
                      bool mi_required, bool geom_required) {
  if (adv < 0) {
    throw ContractError(std::string("total_loss_G: adversarial term missing in ") +
                        phase_name(phase) + " phase");
  }
  if (attr < 0) {
    throw ContractError(std::string("total_loss_G: attribute term missing in ") +
                        phase_name(phase) + " phase");
  }
  if (mi_required && mp < 0) {
    throw ContractError(std::string("total_loss_G: consistency term missing in ") +
                        phase_name(phase) + " phase");
  }
  if (geom_required && geom < 0) {
    throw ContractError(std::string("total_loss_G: geometry term missing in ") +
                        phase_name(phase) + " phase");
  }
  int total = adv;
  if (mp >= 0) total = add(g, total, mp);
  if (geom >= 0) total = add(g, total, geom);
  total = add(g, total, attr);
  return total;
}

int total_loss_d_node(Graph& g, Phase phase, int adv, int geom_duv, int attr_da,
                      bool aux_required) {
  if (adv < 0) throw ContractError("total_loss_D: adversarial term missing");
  if (phase == Phase::Enhancing) {
    if (geom_duv >= 0 || attr_da >= 0) {
      throw ContractError(
          "total_loss_D: auxiliary (bracketed) terms are not part of the enhancing phase");
    }
    return adv;
  }
  if (aux_required && (geom_duv < 0 || attr_da < 0)) {
    throw ContractError("total_loss_D: initial phase requires geometry and attribute terms");
  }
  int total = adv;
  if (geom_duv >= 0) total = add(g, total, geom_duv);
  if (attr_da >= 0) total = add(g, total, attr_da);
  return total;
}

// ---- eager wrappers ----------------------------------------------------------

namespace {

void check_same_batch(const std::vector<double>& a, const std::vector<double>& b,
                      const char* who) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(who) + ": score vector lengths differ (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ContractError(std::string(who) + ": empty batch");
}

double run_scalar(Graph& g, int node) {
  g.forward();
  return g.value(node).item();
}

}  // namespace

double adv_loss_g_initial(const std::vector<double>& fake_scores, Objective family) {
  if (fake_scores.empty()) throw ContractError("adv_loss_G: empty batch");
  Graph g;
  const int f = g.constant(Tensor::vector1d(fake_scores), "fake_scores");
  return run_scalar(g, adv_loss_g_initial_node(g, f, family));
}

double adv_loss_d_initial(const std::vector<double>& real_scores,
                          const std::vector<double>& fake_scores, Objective family) {
  check_same_batch(real_scores, fake_scores, "adv_loss_D");
  Graph g;
  const int r = g.constant(Tensor::vector1d(real_scores), "real_scores");
  const int f = g.constant(Tensor::vector1d(fake_scores), "fake_scores");
  return run_scalar(g, adv_loss_d_initial_node(g, r, f, family));
}

double inherited_adv_loss_d(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores,
                            const std::vector<double>& teacher_real, Objective family) {
  check_same_batch(real_scores, fake_scores, "inherited_adv_loss_D");
  check_same_batch(real_scores, teacher_real, "inherited_adv_loss_D");
  Graph g;
  const int r = g.constant(Tensor::vector1d(real_scores), "real_scores");
  const int f = g.constant(Tensor::vector1d(fake_scores), "fake_scores");
  return run_scalar(g, inherited_adv_loss_d_node(g, r, f, teacher_real, family));
}

double inherited_adv_loss_g(const std::vector<double>& fake_scores,
                            const std::vector<double>& omega, Objective family) {
  check_same_batch(fake_scores, omega, "inherited_adv_loss_G");
  Graph g;
  const int f = g.constant(Tensor::vector1d(fake_scores), "fake_scores");
  return run_scalar(g, inherited_adv_loss_g_node(g, f, omega, family));
}

double perceptual_distance(const Tensor& x1, const Tensor& x2, const EmbedFn& embed) {
  if (!x1.same_shape(x2)) throw ShapeError("perceptual_distance: image shapes differ");
  auto as_batch = [](const Tensor& t) {
    if (t.rank() == 4) return t;
    if (t.rank() == 3) return Tensor(Shape{1, t.dim(0), t.dim(1), t.dim(2)}, t.values());
    throw ShapeError("perceptual_distance: expects [C,H,W] or [B,C,H,W] images");
  };
  Graph g;
  const int e1 = embed(g, g.constant(as_batch(x1), "x1"));
  const int e2 = embed(g, g.constant(as_batch(x2), "x2"));
  const int dim = g.node(e1).out.dim(1);
  const int d = perceptual_distance_node(g, reshape(g, e1, {dim}), reshape(g, e2, {dim}));
  return run_scalar(g, d);
}

double infonce_mi(const Tensor& src_batch, const Tensor& trans_batch, const EmbedFn& embed) {
  if (!src_batch.same_shape(trans_batch)) {
    throw ShapeError("infonce_mi: batch shapes differ");
  }
  if (src_batch.dim(0) < 1) throw ContractError("infonce_mi: empty batch");
  Graph g;
  const int e1 = embed(g, g.constant(src_batch, "src"));
  const int e2 = embed(g, g.constant(trans_batch, "translated"));
  return run_scalar(g, infonce_mi_node(g, e1, e2));
}

double mutual_perceptual_loss(const Tensor& src_batch, const Tensor& trans_batch,
                              const EmbedFn& embed) {
  return -infonce_mi(src_batch, trans_batch, embed);
}

double uv_loss(const Tensor& predicted, const Tensor& target) {
  Graph g;
  const int p = g.constant(predicted, "predicted");
  const int t = g.constant(target, "target");
  return run_scalar(g, uv_loss_node(g, p, t));
}

double cycle_loss(const Tensor& x, const Tensor& reconstructed) {
  Graph g;
  const int a = g.constant(x, "x");
  const int b = g.constant(reconstructed, "reconstructed");
  return run_scalar(g, cycle_loss_node(g, a, b));
}

}  // namespace bp
