#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "penn/errors.hpp"
#include "penn/trial.hpp"

namespace penn {

// One training example for the residual network: N excitation rows plus two
// history rows, W columns, column W-1 aligned with the target time index.
struct WindowSample {
    std::vector<double> x;  // rows x cols, row-major
    std::size_t rows = 0;
    std::size_t cols = 0;
    double target = 0.0;    // ground-truth angle at t_index, rad
    std::size_t t_index = 0;

    double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return x[r * cols + c]; }
};

// First target index the recursive estimator can produce: the two seed
// estimates occupy W-1 and W (the earliest indices with a full excitation
// window behind them), so estimation starts one step later.
inline std::size_t first_window_index(std::size_t w) { return w + 1; }

// Builds the sample targeting index t. history carries angle estimates (or
// ground truth under teacher forcing) for indices < t; entries at t-1 and t-2
// fill the two broadcast history rows.
inline WindowSample window_at(const Trial& trial, std::span<const double> history,
                              std::size_t w, std::size_t t) {
    const std::size_t n = trial.channels();
    const std::size_t len = trial.length();
    if (w < 1) throw DomainError("window length must be >= 1");
    if (t >= len) throw DomainError("window target index beyond trial end");
    if (t < first_window_index(w)) throw DomainError("window target index before first estimable step");
    if (history.size() < t) throw DomainError("history stream too short for window target");

    WindowSample s;
    s.rows = n + 2;
    s.cols = w;
    s.x.resize(s.rows * s.cols);
    s.target = trial.angle[t];
    s.t_index = t;
    const std::size_t start = t - (w - 1);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < w; ++c) s.at(r, c) = trial.emg[r][start + c];
    for (std::size_t c = 0; c < w; ++c) {
        s.at(n, c) = history[t - 1];
        s.at(n + 1, c) = history[t - 2];
    }
    return s;
}

// All estimable samples of a trial at stride 1. A trial must extend at least
// two steps past a full window (length >= W + 2) to yield one sample.
inline std::vector<WindowSample> make_windows(const Trial& trial,
                                              std::span<const double> history,
                                              std::size_t w) {
    const std::size_t len = trial.length();
    if (len < w + 2) throw DomainError("trial too short to form any window");
    if (history.size() < len)
        throw DomainError("history stream must cover the whole trial");
    std::vector<WindowSample> out;
    out.reserve(len - w - 1);
    for (std::size_t t = first_window_index(w); t < len; ++t)
        out.push_back(window_at(trial, history, w, t));
    return out;
}

} // namespace penn
