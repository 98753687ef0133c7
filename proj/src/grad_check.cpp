#include "seqnas/grad_check.hpp"

#include "seqnas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace seqnas {

GradCheckResult grad_check_detailed(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                    double eps)
{
    if (eps <= 0.0) {
        throw ConfigError("grad_check: eps must be positive");
    }
    std::vector<bool> previous(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        previous[i] = inputs[i].requires_grad();
        inputs[i].set_requires_grad(true);
        inputs[i].zero_grad();
    }

    std::vector<std::vector<double>> analytic(inputs.size());
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f();
        if (loss.numel() != 1) {
            throw ShapeError("grad_check: f must return a scalar");
        }
        if (loss.tape() == &tape) {
            tape.backward(loss);
        }
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const auto g = inputs[i].grad();
            analytic[i].assign(g.begin(), g.end());
        }
    }

    GradCheckResult result;
    NoGradScope no_grad;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto data = inputs[i].data();
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double saved = data[j];
            data[j] = saved + eps;
            const double plus = f().item();
            data[j] = saved - eps;
            const double minus = f().item();
            data[j] = saved;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic[i][j];
            const double err =
                std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (err > result.max_rel_error || (i == 0 && j == 0)) {
                result = {err, i, j, a, numeric};
            }
        }
        inputs[i].zero_grad();
        inputs[i].set_requires_grad(previous[i]);
    }
    return result;
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs, double eps)
{
    return grad_check_detailed(f, inputs, eps).max_rel_error;
}

}  // namespace seqnas
