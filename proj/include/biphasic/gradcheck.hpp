#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "biphasic/graph.hpp"
#include "biphasic/rng.hpp"

namespace bp::gradcheck {

// Central-difference gradient of a scalar function, same shape as x.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double eps);

// max_i |a_i - n_i| / max(1, |a_i|, |n_i|)
double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric);

// One randomized check target: a scalar graph function of named inputs.
struct Probe {
  struct Built {
    std::shared_ptr<Graph> graph;
    std::vector<std::pair<std::string, Tensor>> inputs;  // requires-grad inputs
    int output = -1;
  };
  std::string name;
  std::function<Built(Rng&)> build;
  int trials = 100;
  double tol = 1e-4;
  double eps = 1e-5;
  // Applied to each analytic gradient before comparison; used by the
  // fault-injection test to verify that a wrong gradient is detected.
  std::function<void(std::vector<double>&)> grad_tweak;
};

struct CaseResult {
  std::string name;
  double max_rel_err = 0.0;
  int trials = 0;
  bool pass = false;
};

CaseResult run_probe(const Probe& probe, uint64_t seed);

// All registered ops plus every loss, in a fixed order.
std::vector<Probe> standard_suite();

// Runs the named probes ("all" or comma-separated names); emits one report
// line per probe through `line`. Returns false if any probe fails.
bool run_suite(const std::string& ops, uint64_t seed,
               const std::function<void(const std::string&)>& line);

}  // namespace bp::gradcheck
