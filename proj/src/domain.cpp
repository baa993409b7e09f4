#include "biphasic/domain.hpp"

#include "biphasic/common.hpp"

namespace bp {

void DomainSpec::validate_label(const std::vector<double>& label) const {
  if (static_cast<int>(label.size()) != label_dim()) {
    throw ContractError("label arity " + std::to_string(label.size()) + " does not match spec (" +
                        std::to_string(label_dim()) + " dims)");
  }
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const int off = group_offset(gi);
    int active = 0;
    for (size_t v = 0; v < groups[gi].values.size(); ++v) {
      const double x = label[static_cast<size_t>(off) + v];
      if (x != 0.0 && x != 1.0) {
        throw ContractError("label entry for group '" + groups[gi].name + "' must be 0 or 1");
      }
      if (x == 1.0) ++active;
    }
    if (active != 1) {
      throw ContractError("group '" + groups[gi].name + "' needs exactly one active value, got " +
                          std::to_string(active));
    }
  }
  for (size_t fi = 0; fi < flags.size(); ++fi) {
    const double x = label[static_cast<size_t>(flag_offset(fi))];
    if (x != 0.0 && x != 1.0) {
      throw ContractError("flag '" + flags[fi] + "' must be 0 or 1");
    }
  }
}

std::vector<double> DomainSpec::label_row(const Tensor& labels, int row) {
  if (labels.rank() != 2) throw ShapeError("labels tensor must be [B, L]");
  const int cols = labels.dim(1);
  std::vector<double> out(static_cast<size_t>(cols));
  for (int j = 0; j < cols; ++j) out[static_cast<size_t>(j)] = labels.at2(row, j);
  return out;
}

}  // namespace bp
