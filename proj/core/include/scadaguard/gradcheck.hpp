#pragma once

#include <functional>
#include <vector>

#include "scadaguard/autodiff.hpp"

namespace scadaguard {

/// Builds a scalar loss graph on the given tape from the current values of
/// the checked parameters. Called repeatedly with perturbed values.
using LossBuilder = std::function<NodeId(Tape&)>;

/// Central finite-difference check of reverse-mode gradients.
/// Returns max over all parameter elements of
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Zero parameters -> 0 by convention. Non-finite loss at a perturbed point
/// is reported as an error.
double finite_diff_check(const LossBuilder& builder, std::vector<Parameter*> params,
                         double h = 1e-5);

}  // namespace scadaguard
