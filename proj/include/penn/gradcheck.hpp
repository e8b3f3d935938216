#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "penn/errors.hpp"

namespace penn::opt {

// Central-difference check of an analytic gradient. `f` maps a full parameter
// vector to a scalar and must be pure. Returns the worst relative error over
// all coordinates; relative means |fd - analytic| / max(|fd|, |analytic|, floor).
template <typename ValueFn>
double max_rel_grad_error(ValueFn&& f, std::span<const double> params,
                          std::span<const double> analytic, double h = 1e-6,
                          double floor = 1e-8) {
    if (params.size() != analytic.size())
        throw DomainError("max_rel_grad_error: gradient size mismatch");
    std::vector<double> p(params.begin(), params.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        const double step = h * std::max(1.0, std::fabs(keep));
        p[i] = keep + step;
        const double hi = f(std::span<const double>(p));
        p[i] = keep - step;
        const double lo = f(std::span<const double>(p));
        p[i] = keep;
        const double fd = (hi - lo) / (2.0 * step);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), floor});
        worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
    }
    return worst;
}

} // namespace penn::opt
