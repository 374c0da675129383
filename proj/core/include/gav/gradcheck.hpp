#pragma once

#include <functional>
#include <string>

#include "gav/tape.hpp"

namespace gav {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  /// Set when halving the step moves the numeric derivative by a large
  /// factor, i.e. the function looks non-differentiable at x.
  bool suspect_nonsmooth = false;
};

/// Compare the tape gradient of a scalar-valued function against central
/// finite differences, coordinate by coordinate.
/// Relative error: |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
GradCheckResult grad_check(const std::function<Var(Tape&, const Var&)>& fn,
                           const Tensor& x, double step);

}  // namespace gav
