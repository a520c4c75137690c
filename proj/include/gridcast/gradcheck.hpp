#pragma once

#include <functional>
#include <string>

#include "gridcast/graph.hpp"

namespace gridcast::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

using LossBuilder = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients of every parameter entry against central
/// differences with step `step`. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport gradient_check(ParameterSet& params, const LossBuilder& build, double step = 1e-5,
                               double floor = 1e-6);

}  // namespace gridcast::ad
