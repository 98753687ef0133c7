#pragma once

#include "seqnas/tensor.hpp"

#include <functional>
#include <span>

namespace seqnas {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares reverse-mode gradients of the scalar f() with central differences
// over every scalar of every input:
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// f must be deterministic and must read `inputs` (it is re-run with each
// scalar perturbed in place). Inputs are restored before returning.
GradCheckResult grad_check_detailed(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                    double eps = 1e-5);

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double eps = 1e-5);

}  // namespace seqnas
