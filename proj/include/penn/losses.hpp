#pragma once

#include <cstddef>
#include <span>

#include "penn/errors.hpp"

namespace penn::model {

// Per-phase weighting of the two objectives: phase one trains with (1, 0),
// phase two with (0, 1).
struct LossWeights {
    double lambda_phy = 1.0;
    double beta_res = 0.0;
};

// Mean squared error of the physics estimate: (1/T) sum (phy_t - truth_t)^2.
template <class T>
T loss_phy(std::span<const T> phy, std::span<const double> truth) {
    if (phy.size() != truth.size() || phy.empty())
        throw DomainError("loss_phy: sequences must be nonempty and equal length");
    T acc(0.0);
    for (std::size_t t = 0; t < phy.size(); ++t) {
        T d = phy[t] - truth[t];
        acc = acc + d * d;
    }
    return acc * T(1.0 / static_cast<double>(phy.size()));
}

// Residual objective: (1/T) sum (res_t + phy_t - truth_t)^2. The residual
// learns what the physics estimate misses.
template <class T>
T loss_res(std::span<const T> res, std::span<const T> phy, std::span<const double> truth) {
    if (res.size() != phy.size() || phy.size() != truth.size() || res.empty())
        throw DomainError("loss_res: sequences must be nonempty and equal length");
    T acc(0.0);
    for (std::size_t t = 0; t < res.size(); ++t) {
        T d = res[t] + phy[t] - truth[t];
        acc = acc + d * d;
    }
    return acc * T(1.0 / static_cast<double>(res.size()));
}

template <class T>
T loss_total(const LossWeights& w, const T& l_phy, const T& l_res) {
    if (w.lambda_phy < 0.0 || w.beta_res < 0.0)
        throw DomainError("loss weights must be nonnegative");
    return T(w.lambda_phy) * l_phy + T(w.beta_res) * l_res;
}

} // namespace penn::model
