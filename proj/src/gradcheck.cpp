#include "biphasic/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "biphasic/losses.hpp"

namespace bp::gradcheck {

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_grad: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double hi = f(probe);
    probe[i] = saved - eps;
    const double lo = f(probe);
    probe[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw NumericError("finite_difference_grad: non-finite function value");
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("max_rel_err: gradient sizes differ");
  }
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

CaseResult run_probe(const Probe& probe, uint64_t seed) {
  CaseResult res;
  res.name = probe.name;
  res.trials = probe.trials;
  Rng rng = Rng::derive(seed, probe.name);
  for (int trial = 0; trial < probe.trials; ++trial) {
    Probe::Built built = probe.build(rng);
    Graph& g = *built.graph;
    for (const auto& [name, value] : built.inputs) g.bind(name, value);
    g.forward();
    g.backward(built.output);

    for (const auto& [name, value] : built.inputs) {
      // find the input node id (inputs were created with these names)
      int node_id = -1;
      for (int i = 0; i < g.size(); ++i) {
        if (g.node(i).op == Op::Input && g.node(i).name == name) {
          node_id = i;
          break;
        }
      }
      std::vector<double> analytic = g.grad_of(node_id);
      if (probe.grad_tweak) probe.grad_tweak(analytic);

      auto f = [&](const Tensor& x) {
        g.bind(name, x);
        g.forward();
        return g.value(built.output).item();
      };
      const Tensor numeric = finite_difference_grad(f, value, probe.eps);
      g.bind(name, value);  // restore
      res.max_rel_err = std::max(res.max_rel_err, max_rel_err(analytic, numeric.values()));
    }
  }
  res.pass = res.max_rel_err <= probe.tol;
  return res;
}

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Uniform in [-2,2] excluding a band around non-differentiable points.
Tensor random_tensor_away_from(Rng& rng, Shape shape, double kink, double band) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) {
    double v;
    do {
      v = rng.uniform(-2.0, 2.0);
    } while (std::abs(v - kink) < band);
    t[i] = v;
  }
  return t;
}

// Reduce an arbitrary output to a scalar with a fixed random weighting so
// every output element influences the check.
int weighted_scalar(Graph& g, int node, Rng& rng) {
  const Tensor& out = g.node(node).out;
  Tensor w(out.shape());
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-1.0, 1.0);
  return sum_all(g, mul(g, node, g.constant(std::move(w), "probe_weights")));
}

using BuildBody = std::function<int(Graph&, const std::vector<int>&)>;

// Probe over inputs sampled in [-2, 2] (or a supplied sampler per input).
Probe make_probe(std::string name, std::vector<Shape> shapes, BuildBody body,
                 std::function<Tensor(Rng&, const Shape&)> sampler = {}, int trials = 100) {
  Probe p;
  p.name = std::move(name);
  p.trials = trials;
  p.build = [shapes = std::move(shapes), body = std::move(body),
             sampler = std::move(sampler)](Rng& rng) {
    Probe::Built built;
    built.graph = std::make_shared<Graph>();
    Graph& g = *built.graph;
    std::vector<int> ids;
    for (size_t i = 0; i < shapes.size(); ++i) {
      const std::string input_name = "x" + std::to_string(i);
      ids.push_back(g.input(input_name, shapes[i], /*requires_grad=*/true));
      Tensor v = sampler ? sampler(rng, shapes[i]) : random_tensor(rng, shapes[i], -2.0, 2.0);
      built.inputs.emplace_back(input_name, std::move(v));
    }
    const int out = body(g, ids);
    built.output = g.node(out).out.numel() == 1 ? out : weighted_scalar(g, out, rng);
    return built;
  };
  return p;
}

std::function<Tensor(Rng&, const Shape&)> positive_sampler(double lo, double hi) {
  return [lo, hi](Rng& rng, const Shape& s) { return random_tensor(rng, s, lo, hi); };
}

std::function<Tensor(Rng&, const Shape&)> kink_sampler(double kink, double band) {
  return [kink, band](Rng& rng, const Shape& s) {
    return random_tensor_away_from(rng, s, kink, band);
  };
}

}  // namespace

std::vector<Probe> standard_suite() {
  std::vector<Probe> ps;
  const Shape img{2, 2, 6, 6};
  const Shape evenimg{2, 2, 4, 4};
  const Shape vec{5};
  const Shape mat{3, 4};

  ps.push_back(make_probe("identity", {vec}, [](Graph& g, const std::vector<int>& in) {
    return g.apply(Op::Identity, {in[0]});
  }));
  ps.push_back(make_probe("add", {mat, mat}, [](Graph& g, const std::vector<int>& in) {
    return add(g, in[0], in[1]);
  }));
  ps.push_back(make_probe("sub", {mat, mat}, [](Graph& g, const std::vector<int>& in) {
    return sub(g, in[0], in[1]);
  }));
  ps.push_back(make_probe("mul", {mat, mat}, [](Graph& g, const std::vector<int>& in) {
    return mul(g, in[0], in[1]);
  }));
  ps.push_back(make_probe("add_const", {vec}, [](Graph& g, const std::vector<int>& in) {
    return add_const(g, in[0], 0.7);
  }));
  ps.push_back(make_probe("mul_const", {vec}, [](Graph& g, const std::vector<int>& in) {
    return mul_const(g, in[0], -1.3);
  }));
  ps.push_back(make_probe("matmul", {Shape{3, 4}, Shape{4, 2}},
                          [](Graph& g, const std::vector<int>& in) {
                            return matmul(g, in[0], in[1]);
                          }));
  ps.push_back(make_probe("conv2d_s1", {img, Shape{3, 2, 3, 3}, Shape{3}},
                          [](Graph& g, const std::vector<int>& in) {
                            return conv2d(g, in[0], in[1], in[2], 1, 1);
                          }));
  ps.push_back(make_probe("conv2d_s2", {img, Shape{3, 2, 3, 3}, Shape{3}},
                          [](Graph& g, const std::vector<int>& in) {
                            return conv2d(g, in[0], in[1], in[2], 2, 1);
                          }));
  ps.push_back(make_probe("conv_transpose2d_s2", {Shape{2, 2, 3, 3}, Shape{2, 3, 4, 4}, Shape{3}},
                          [](Graph& g, const std::vector<int>& in) {
                            return convt2d(g, in[0], in[1], in[2], 2, 1);
                          }));
  ps.push_back(make_probe("conv_transpose2d_s1", {Shape{2, 2, 4, 4}, Shape{2, 3, 3, 3}, Shape{3}},
                          [](Graph& g, const std::vector<int>& in) {
                            return convt2d(g, in[0], in[1], in[2], 1, 1);
                          }));
  ps.push_back(make_probe("avg_pool2", {evenimg}, [](Graph& g, const std::vector<int>& in) {
    return avg_pool2(g, in[0]);
  }));
  ps.push_back(make_probe("upsample_nearest2", {evenimg}, [](Graph& g, const std::vector<int>& in) {
    return upsample_nearest2(g, in[0]);
  }));
  ps.push_back(make_probe("upsample_bilinear2", {evenimg}, [](Graph& g, const std::vector<int>& in) {
    return upsample_bilinear2(g, in[0]);
  }));
  ps.push_back(make_probe(
      "leaky_relu", {img}, [](Graph& g, const std::vector<int>& in) { return leaky_relu(g, in[0]); },
      kink_sampler(0.0, 0.05)));
  ps.push_back(make_probe(
      "relu", {img}, [](Graph& g, const std::vector<int>& in) { return relu(g, in[0]); },
      kink_sampler(0.0, 0.05)));
  ps.push_back(make_probe("tanh", {mat}, [](Graph& g, const std::vector<int>& in) {
    return tanh_op(g, in[0]);
  }));
  ps.push_back(make_probe("sigmoid", {mat}, [](Graph& g, const std::vector<int>& in) {
    return sigmoid(g, in[0]);
  }));
  ps.push_back(make_probe("softplus", {mat}, [](Graph& g, const std::vector<int>& in) {
    return softplus(g, in[0]);
  }));
  ps.push_back(make_probe("softmax", {Shape{4, 5}}, [](Graph& g, const std::vector<int>& in) {
    return softmax_last(g, in[0]);
  }));
  ps.push_back(make_probe(
      "log", {vec}, [](Graph& g, const std::vector<int>& in) { return log_op(g, in[0]); },
      positive_sampler(0.1, 2.0)));
  ps.push_back(make_probe("exp", {vec}, [](Graph& g, const std::vector<int>& in) {
    return exp_op(g, in[0]);
  }));
  ps.push_back(make_probe(
      "sqrt", {vec}, [](Graph& g, const std::vector<int>& in) { return sqrt_op(g, in[0]); },
      positive_sampler(0.1, 2.0)));
  ps.push_back(make_probe("square", {mat}, [](Graph& g, const std::vector<int>& in) {
    return square(g, in[0]);
  }));
  ps.push_back(make_probe(
      "abs", {mat}, [](Graph& g, const std::vector<int>& in) { return abs_op(g, in[0]); },
      kink_sampler(0.0, 0.05)));
  ps.push_back(make_probe("mean", {img}, [](Graph& g, const std::vector<int>& in) {
    return mean_all(g, in[0]);
  }));
  ps.push_back(make_probe("sum", {img}, [](Graph& g, const std::vector<int>& in) {
    return sum_all(g, in[0]);
  }));
  ps.push_back(make_probe("row_sum", {Shape{3, 5}}, [](Graph& g, const std::vector<int>& in) {
    return row_sum(g, in[0]);
  }));
  ps.push_back(make_probe("row_logsumexp", {Shape{3, 5}}, [](Graph& g, const std::vector<int>& in) {
    return row_logsumexp(g, in[0]);
  }));
  ps.push_back(make_probe("take_diag", {Shape{4, 4}}, [](Graph& g, const std::vector<int>& in) {
    return take_diag(g, in[0]);
  }));
  ps.push_back(make_probe("pairwise_sqdist", {Shape{3, 4}, Shape{3, 4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return pairwise_sqdist(g, in[0], in[1]);
                          }));
  ps.push_back(make_probe("concat", {img, Shape{2, 3, 6, 6}},
                          [](Graph& g, const std::vector<int>& in) {
                            return concat_chan(g, in[0], in[1]);
                          }));
  ps.push_back(make_probe("broadcast_spatial", {Shape{2, 5}},
                          [](Graph& g, const std::vector<int>& in) {
                            return broadcast_spatial(g, in[0], 4, 4);
                          }));
  ps.push_back(make_probe("bias_add_chan", {img, Shape{2}},
                          [](Graph& g, const std::vector<int>& in) {
                            return g.apply(Op::BiasAddChan, {in[0], in[1]});
                          }));
  ps.push_back(make_probe("bias_add_row", {mat, Shape{4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return g.apply(Op::BiasAddRow, {in[0], in[1]});
                          }));
  ps.push_back(make_probe("instance_norm", {img}, [](Graph& g, const std::vector<int>& in) {
    return instance_norm(g, in[0]);
  }));
  ps.push_back(make_probe("channel_affine", {img, Shape{2}, Shape{2}},
                          [](Graph& g, const std::vector<int>& in) {
                            return channel_affine(g, in[0], in[1], in[2]);
                          }));
  ps.push_back(make_probe("flatten", {img}, [](Graph& g, const std::vector<int>& in) {
    return flatten(g, in[0]);
  }));
  ps.push_back(make_probe("reshape", {Shape{3, 4}}, [](Graph& g, const std::vector<int>& in) {
    return reshape(g, in[0], Shape{2, 6});
  }));
  ps.push_back(make_probe(
      "check_unit_interval", {vec},
      [](Graph& g, const std::vector<int>& in) { return check_unit_interval(g, in[0]); },
      positive_sampler(0.05, 0.95)));

  // ---- losses ----
  const auto scores01 = positive_sampler(0.05, 0.95);
  ps.push_back(make_probe(
      "loss_adv_G_vanilla", {Shape{4}},
      [](Graph& g, const std::vector<int>& in) {
        return adv_loss_g_initial_node(g, in[0], Objective::Vanilla);
      },
      scores01));
  ps.push_back(make_probe("loss_adv_G_lsgan", {Shape{4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return adv_loss_g_initial_node(g, in[0], Objective::Lsgan);
                          }));
  ps.push_back(make_probe(
      "loss_adv_D_vanilla", {Shape{4}, Shape{4}},
      [](Graph& g, const std::vector<int>& in) {
        return adv_loss_d_initial_node(g, in[0], in[1], Objective::Vanilla);
      },
      scores01));
  ps.push_back(make_probe("loss_adv_D_lsgan", {Shape{4}, Shape{4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return adv_loss_d_initial_node(g, in[0], in[1], Objective::Lsgan);
                          }));
  {
    Probe p = make_probe(
        "loss_inherited_D_vanilla", {Shape{4}, Shape{4}},
        [](Graph& g, const std::vector<int>& in) {
          return inherited_adv_loss_d_node(g, in[0], in[1], {0.9, 0.2, 0.55, 0.7},
                                           Objective::Vanilla);
        },
        scores01);
    ps.push_back(std::move(p));
  }
  ps.push_back(make_probe("loss_inherited_D_lsgan", {Shape{4}, Shape{4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return inherited_adv_loss_d_node(g, in[0], in[1],
                                                             {0.9, 0.2, 0.55, 0.7},
                                                             Objective::Lsgan);
                          }));
  ps.push_back(make_probe(
      "loss_inherited_G_vanilla", {Shape{4}},
      [](Graph& g, const std::vector<int>& in) {
        return inherited_adv_loss_g_node(g, in[0], {2.0, 1.0, 1.5, 1.25}, Objective::Vanilla);
      },
      scores01));
  ps.push_back(make_probe("loss_inherited_G_lsgan", {Shape{4}},
                          [](Graph& g, const std::vector<int>& in) {
                            return inherited_adv_loss_g_node(g, in[0], {2.0, 1.0, 1.5, 1.25},
                                                             Objective::Lsgan);
                          }));
  ps.push_back(make_probe("loss_perceptual_distance", {Shape{6}, Shape{6}},
                          [](Graph& g, const std::vector<int>& in) {
                            return perceptual_distance_node(g, in[0], in[1]);
                          }));
  ps.push_back(make_probe("loss_infonce_mi", {Shape{4, 5}, Shape{4, 5}},
                          [](Graph& g, const std::vector<int>& in) {
                            return infonce_mi_node(g, in[0], in[1]);
                          }));
  ps.push_back(make_probe("loss_mutual_perceptual", {Shape{4, 5}, Shape{4, 5}},
                          [](Graph& g, const std::vector<int>& in) {
                            return mutual_perceptual_loss_node(g, in[0], in[1]);
                          }));
  {
    // L1 losses have a kink at equality; keep operands separated.
    auto l1_probe = [](std::string name, bool cycle) {
      Probe p;
      p.name = std::move(name);
      p.trials = 100;
      p.build = [cycle](Rng& rng) {
        Probe::Built built;
        built.graph = std::make_shared<Graph>();
        Graph& g = *built.graph;
        const Shape s{1, 2, 4, 4};
        const int x = g.input("x0", s, true);
        Tensor pred = random_tensor(rng, s, -2.0, 2.0);
        Tensor target(s);
        for (int64_t i = 0; i < target.numel(); ++i) {
          double t;
          do {
            t = rng.uniform(-2.0, 2.0);
          } while (std::abs(t - pred[i]) < 0.05);
          target[i] = t;
        }
        built.inputs.emplace_back("x0", std::move(pred));
        const int tgt = g.constant(std::move(target), "target");
        built.output = cycle ? cycle_loss_node(g, tgt, x) : uv_loss_node(g, x, tgt);
        return built;
      };
      return p;
    };
    ps.push_back(l1_probe("loss_uv", false));
    ps.push_back(l1_probe("loss_cycle", true));
  }
  {
    Probe p;
    p.name = "loss_attr";
    p.trials = 100;
    p.build = [](Rng& rng) {
      Probe::Built built;
      built.graph = std::make_shared<Graph>();
      Graph& g = *built.graph;
      const DomainSpec spec = DomainSpec::default_spec();
      const int batch = 3;
      const int z0 = g.input("x0", Shape{batch, 3}, true);
      const int z1 = g.input("x1", Shape{batch, 1}, true);
      const int z2 = g.input("x2", Shape{batch, 1}, true);
      built.inputs.emplace_back("x0", random_tensor(rng, Shape{batch, 3}, -2.0, 2.0));
      built.inputs.emplace_back("x1", random_tensor(rng, Shape{batch, 1}, -2.0, 2.0));
      built.inputs.emplace_back("x2", random_tensor(rng, Shape{batch, 1}, -2.0, 2.0));
      Tensor labels(Shape{batch, spec.label_dim()});
      for (int b = 0; b < batch; ++b) {
        labels.at2(b, static_cast<int>(rng.uniform_index(3))) = 1.0;
        labels.at2(b, 3) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        labels.at2(b, 4) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      }
      built.output = attr_loss_node(g, {z0, z1, z2}, labels, spec);
      return built;
    };
    ps.push_back(std::move(p));
  }
  return ps;
}

bool run_suite(const std::string& ops, uint64_t seed,
               const std::function<void(const std::string&)>& line) {
  std::vector<Probe> suite = standard_suite();
  std::vector<const Probe*> selected;
  if (ops == "all" || ops.empty()) {
    for (const auto& p : suite) selected.push_back(&p);
  } else {
    std::stringstream ss(ops);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      bool found = false;
      for (const auto& p : suite) {
        if (p.name == tok) {
          selected.push_back(&p);
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError("gradcheck: unknown op '" + tok + "'");
    }
  }
  bool all_pass = true;
  for (const Probe* p : selected) {
    const CaseResult r = run_probe(*p, seed);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %s  max_rel_err=%.3e  trials=%d", r.name.c_str(),
                  r.pass ? "PASS" : "FAIL", r.max_rel_err, r.trials);
    line(buf);
    all_pass = all_pass && r.pass;
  }
  return all_pass;
}

}  // namespace bp::gradcheck
