#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "penn/errors.hpp"

namespace penn::opt {

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& st) {
    if (params.size() != grads.size())
        throw DomainError("adam_step: " + std::to_string(params.size()) +
                          " params vs " + std::to_string(grads.size()) + " grads");
    if (st.m.empty() && st.v.empty()) st.init(params.size());
    if (st.m.size() != params.size() || st.v.size() != params.size())
        throw DomainError("adam_step: moment buffers sized for " +
                          std::to_string(st.m.size()) + " params, got " +
                          std::to_string(params.size()));

    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grads[i] * grads[i];
        const double m_hat = st.m[i] / bc1;
        const double v_hat = st.v[i] / bc2;
        params[i] -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
    }
}

} // namespace penn::opt
