// Finite-difference verification of every differentiable operation plus the
// full encoder and decoder objectives.
#pragma once

#include <string>
#include <vector>

#include "zcap/rng.hpp"

namespace zcap {

struct GradSuiteRow {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradSuiteResult {
  std::vector<GradSuiteRow> rows;
  bool all_pass = true;
};

GradSuiteResult run_gradient_suite(uint64_t seed);

}  // namespace zcap
