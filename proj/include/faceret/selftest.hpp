#pragma once

#include <functional>
#include <string>
#include <vector>

#include "faceret/tensor.hpp"

namespace faceret {

struct SelfTestOptions {
  // Implementation under test for the average-biased rectifier; swapped out
  // to confirm the suite catches regressions.
  std::function<Tensor(const Tensor&, float)> ab_relu_impl;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Bundled invariant suite: activation identities, conv/pool oracles, the
// VGG shape chain, metric axioms, and a synthetic end-to-end retrieval.
// Seeded, so repeated runs give identical results.
std::vector<CheckResult> run_selftest(const SelfTestOptions& options = {});

}  // namespace faceret
