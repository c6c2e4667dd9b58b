#include "zcap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace zcap {

double relative_error(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Parameter*>& params, Rng& rng,
                           size_t coords_per_param, double fd_step) {
  GradCheckReport report;
  for (Parameter* p : params) {
    const size_t n = p->value.size();
    std::vector<size_t> coords;
    if (n <= coords_per_param) {
      for (size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (size_t c = 0; c < coords_per_param; ++c) coords.push_back(rng.uniform_int(n));
    }
    for (size_t idx : coords) {
      const double saved = p->value.v[idx];
      p->value.v[idx] = saved + fd_step;
      const double up = loss_fn();
      p->value.v[idx] = saved - fd_step;
      const double down = loss_fn();
      p->value.v[idx] = saved;
      const double numeric = (up - down) / (2.0 * fd_step);
      const double err = relative_error(p->grad.v[idx], numeric);
      ++report.coords_checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = p->name;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace zcap
