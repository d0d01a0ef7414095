#pragma once

#include "mg/autodiff.hpp"

#include <algorithm>
#include <functional>

namespace mg::ad {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    Eigen::Index elements = 0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Compares the analytic gradient of a scalar-valued graph w.r.t. `input`
/// against central finite differences. Relative error uses
/// |a-n| / max(|a|+|n|, 1) so near-zero gradients degrade to absolute error.
/// The function under check must be deterministic; it is re-evaluated 2N+1
/// times.
inline GradCheckReport grad_check(
    const std::function<NodePtr<double>(const NodePtr<double>&)>& f,
    const NodePtr<double>& input, double epsilon = 1e-4, double tolerance = 1e-3) {
    if (epsilon < 1e-6 || epsilon > 1e-2)
        throw ParamError("grad_check: epsilon outside [1e-6, 1e-2]");
    auto loss = f(input);
    const double base = loss->value[0];
    backward(loss);
    {  // determinism contract: re-evaluation must reproduce the value exactly
        auto again = f(input);
        if (again->value[0] != base)
            throw NumericError("grad_check: function under check is non-deterministic");
    }
    Arr<double> analytic = input->grad;

    GradCheckReport rep;
    rep.elements = input->numel();
    rep.tolerance = tolerance;
    for (Eigen::Index i = 0; i < input->numel(); ++i) {
        const double saved = input->value[i];
        input->value[i] = saved + epsilon;
        const double fp = f(input)->value[0];
        input->value[i] = saved - epsilon;
        const double fm = f(input)->value[0];
        input->value[i] = saved;
        const double numeric = (fp - fm) / (2.0 * epsilon);
        const double abs_err = std::abs(analytic[i] - numeric);
        const double rel_err =
            abs_err / std::max(std::abs(analytic[i]) + std::abs(numeric), 1.0);
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        rep.max_rel_err = std::max(rep.max_rel_err, rel_err);
    }
    rep.pass = rep.max_rel_err < tolerance;
    return rep;
}

}  // namespace mg::ad
