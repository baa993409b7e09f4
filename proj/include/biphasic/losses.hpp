#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "biphasic/domain.hpp"
#include "biphasic/graph.hpp"

namespace bp {

enum class Objective { Vanilla, Lsgan };
enum class Phase { Initial, Enhancing };

Objective objective_from_string(const std::string& s);
const char* objective_name(Objective o);
const char* phase_name(Phase p);

// Maps an image batch node [B,C,H,W] to embeddings [B,d]; supplied by the
// network layer so the loss builders stay independent of architectures.
using EmbedFn = std::function<int(Graph&, int images)>;

// ---- graph-node builders ----------------------------------------------------
// Scores are 1-D [K] nodes. Vanilla-family scores are range-checked in-graph.

int adv_loss_g_initial_node(Graph& g, int fake_scores, Objective family);
int adv_loss_d_initial_node(Graph& g, int real_scores, int fake_scores, Objective family);

// Teacher-distilled discriminator loss: the frozen teacher's real-data scores
// replace the hard real label; fakes keep the ordinary target.
int inherited_adv_loss_d_node(Graph& g, int real_scores, int fake_scores,
                              const std::vector<double>& teacher_real, Objective family);

// omega_i = 1 + minmax-normalized (1 - t_i); range [1, 2]; all ones when the
// batch is degenerate (max spread < 1e-12).
std::vector<double> importance_weights(const std::vector<double>& teacher_real);

int inherited_adv_loss_g_node(Graph& g, int fake_scores, const std::vector<double>& omega,
                              Objective family);

// Embedding-space Euclidean distance; embeddings are 1-D [d] nodes.
int perceptual_distance_node(Graph& g, int emb1, int emb2);

// infoNCE estimate over aligned batches of embeddings [K,d]; critic is the
// negated perceptual distance; in-batch negatives (row-wise logsumexp).
int infonce_mi_node(Graph& g, int src_emb, int trans_emb);
int mutual_perceptual_loss_node(Graph& g, int src_emb, int trans_emb);

// Interpretable estimate reported alongside the loss (not part of it).
double mi_hat_from(double i_hat, int batch);

int uv_loss_node(Graph& g, int predicted, int target);

// Grouped cross-entropy: softmax CE per one-hot group, sigmoid CE per flag,
// summed over groups, averaged over the batch. Labels are validated rows.
int attr_loss_node(Graph& g, const std::vector<int>& group_logits, const Tensor& labels,
                   const DomainSpec& spec);

int cycle_loss_node(Graph& g, int x, int reconstructed);

// ---- totals ------------------------------------------------------------------

struct LossReport {
  Phase phase = Phase::Initial;
  std::optional<double> adv_g, adv_d, mp, geom_g, attr_g, geom_duv, attr_da;
  std::optional<double> total_g, total_d;
  std::optional<double> mi_hat;
};

// Unit-weight sum of the generator terms; pass -1 for an absent term.
// adv and attr are always required; mp unless mi_required=false (ablations);
// geom unless geom_required=false (geometry-changing attribute configs).
int total_loss_g_node(Graph& g, Phase phase, int adv, int mp, int geom, int attr,
                      bool mi_required = true, bool geom_required = true);

// Initial phase: adv + geom(Duv) + attr(Da). Enhancing phase: adv only; the
// bracketed auxiliary terms are a contract error there.
int total_loss_d_node(Graph& g, Phase phase, int adv, int geom_duv = -1, int attr_da = -1,
                      bool aux_required = true);

// ---- eager convenience (unit-test and oracle surface) ------------------------

double adv_loss_g_initial(const std::vector<double>& fake_scores, Objective family);
double adv_loss_d_initial(const std::vector<double>& real_scores,
                          const std::vector<double>& fake_scores, Objective family);
double inherited_adv_loss_d(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores,
                            const std::vector<double>& teacher_real, Objective family);
double inherited_adv_loss_g(const std::vector<double>& fake_scores,
                            const std::vector<double>& omega, Objective family);
double perceptual_distance(const Tensor& x1, const Tensor& x2, const EmbedFn& embed);
double infonce_mi(const Tensor& src_batch, const Tensor& trans_batch, const EmbedFn& embed);
double mutual_perceptual_loss(const Tensor& src_batch, const Tensor& trans_batch,
                              const EmbedFn& embed);
double uv_loss(const Tensor& predicted, const Tensor& target);
double cycle_loss(const Tensor& x, const Tensor& reconstructed);

}  // namespace bp
