#include "gridcast/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gridcast::ad {

namespace {
double evaluate(const ParameterSet& params, const LossBuilder& build) {
  Graph g(params);
  return g.value(build(g)).item();
}
}  // namespace

GradCheckReport gradient_check(ParameterSet& params, const LossBuilder& build, double step, double floor) {
  std::vector<Tensor> analytic;
  {
    Graph g(params);
    analytic = g.backward(build(g));
  }
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params.value(p);
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double saved = value[j];
      value[j] = saved + step;
      const double up = evaluate(params, build);
      value[j] = saved - step;
      const double down = evaluate(params, build);
      value[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p][j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++report.checked;
      if (report.checked == 1 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = params.name(p);
        report.worst_index = j;
      }
    }
  }
  return report;
}

}  // namespace gridcast::ad
