#pragma once

#include <string>
#include <vector>

#include "biphasic/tensor.hpp"

namespace bp {

// Declares the visual domains as attribute groups: one-hot groups (exactly
// one value active) plus binary flags. A domain is one full assignment.
struct DomainSpec {
  struct Group {
    std::string name;
    std::vector<std::string> values;
  };

  std::vector<Group> groups;
  std::vector<std::string> flags;

  static DomainSpec default_spec() {
    DomainSpec s;
    s.groups.push_back({"color", {"black", "blond", "brown"}});
    s.flags = {"makeup", "age"};
    return s;
  }

  int label_dim() const {
    int n = static_cast<int>(flags.size());
    for (const auto& g : groups) n += static_cast<int>(g.values.size());
    return n;
  }

  int domain_count() const {
    int n = 1;
    for (const auto& g : groups) n *= static_cast<int>(g.values.size());
    for (size_t i = 0; i < flags.size(); ++i) n *= 2;
    return n;
  }

  int group_offset(size_t gi) const {
    int off = 0;
    for (size_t i = 0; i < gi; ++i) off += static_cast<int>(groups[i].values.size());
    return off;
  }

  int flag_offset(size_t fi) const {
    return group_offset(groups.size()) + static_cast<int>(fi);
  }

  // Validates a single label vector: correct arity, one-hot groups, 0/1 flags.
  void validate_label(const std::vector<double>& label) const;

  // Extracts one row of a [B, L] label tensor.
  static std::vector<double> label_row(const Tensor& labels, int row);
};

}  // namespace bp
