#pragma once

#include <functional>
#include <string>
#include <vector>

#include "zcap/optimizer.hpp"
#include "zcap/rng.hpp"

namespace zcap {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  size_t coords_checked = 0;
};

// Central finite differences (step 1e-5) against the analytic gradients
// already stored in each parameter. loss_fn must be a deterministic pure
// forward pass over the current parameter values. A random subsample of
// coordinates per parameter keeps the runtime bounded.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Parameter*>& params, Rng& rng,
                           size_t coords_per_param = 6, double fd_step = 1e-5);

// Symmetric relative error between analytic and numeric derivatives.
double relative_error(double analytic, double numeric);

}  // namespace zcap
