#include "dgwm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dgwm/errors.hpp"

namespace dgwm {

std::vector<double> finite_diff_grad(const std::function<double()>& fn,
                                     Tensor& param, double eps) {
  if (eps <= 0.0) throw ParameterError("finite_diff_grad: eps must be > 0");
  std::vector<double> values = param.value();
  std::vector<double> grad(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    param.set_value(values);
    const double up = fn();
    values[i] = saved - eps;
    param.set_value(values);
    const double down = fn();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  param.set_value(values);
  return grad;
}

double max_rel_error(std::span<const double> a, std::span<const double> b,
                     double floor) {
  if (a.size() != b.size()) {
    throw DimensionError("max_rel_error: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), floor});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace dgwm
