#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "penn/errors.hpp"
#include "penn/filters.hpp"

namespace penn::sig {

// Linear-interpolation resampling. The output covers the same time span,
// sampled on the fs_out grid starting at t = 0.
inline std::vector<double> resample_linear(std::span<const double> x, double fs_in,
                                           double fs_out) {
    if (!(fs_in > 0.0) || !(fs_out > 0.0)) throw DomainError("sample rates must be > 0");
    if (x.empty()) return {};
    if (x.size() == 1) return {x[0]};
    const double duration = static_cast<double>(x.size() - 1) / fs_in;
    const std::size_t n_out = static_cast<std::size_t>(std::floor(duration * fs_out + 1e-9)) + 1;
    std::vector<double> y(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        const double t = static_cast<double>(k) / fs_out * fs_in;  // position in input samples
        std::size_t j = static_cast<std::size_t>(t);
        if (j >= x.size() - 1) j = x.size() - 2;
        const double frac = t - static_cast<double>(j);
        y[k] = x[j] + frac * (x[j + 1] - x[j]);
    }
    return y;
}

struct EmgPipelineSpec {
    double band_lo_hz = 20.0;
    double band_hi_hz = 450.0;
    int band_order = 4;
    double envelope_hz = 4.0;
    int envelope_order = 4;
    double fs_out = 1000.0;
};

// Raw excitation channels -> normalized envelopes on the fs_out grid:
// bandpass, full-wave rectify, lowpass envelope, divide by per-channel MVC,
// clip to [0,1], resample.
inline std::vector<std::vector<double>> preprocess_emg(
    const std::vector<std::vector<double>>& raw, double fs_raw, std::span<const double> mvc,
    const EmgPipelineSpec& ps = {}) {
    if (raw.empty()) throw DomainError("preprocess needs at least one channel");
    if (mvc.size() != raw.size())
        throw DomainError("one MVC value per channel is required");
    for (double m : mvc)
        if (!(m > 0.0)) throw DomainError("MVC values must be > 0");
    if (fs_raw < 2.0 * ps.band_hi_hz)
        throw DomainError("raw sample rate must be at least twice the bandpass upper corner");

    FilterSpec band;
    band.kind = FilterKind::bandpass;
    band.order = ps.band_order;
    band.f1 = ps.band_lo_hz;
    band.f2 = ps.band_hi_hz;
    band.fs = fs_raw;
    const Sos band_sos = butterworth_design(band);

    FilterSpec env;
    env.kind = FilterKind::lowpass;
    env.order = ps.envelope_order;
    env.f1 = ps.envelope_hz;
    env.fs = fs_raw;
    const Sos env_sos = butterworth_design(env);

    std::vector<std::vector<double>> out;
    out.reserve(raw.size());
    for (std::size_t c = 0; c < raw.size(); ++c) {
        std::vector<double> ch = filt_filt(band_sos, raw[c]);
        for (double& v : ch) v = std::fabs(v);
        ch = filt_filt(env_sos, ch);
        const double inv_mvc = 1.0 / mvc[c];
        for (double& v : ch) v = std::clamp(v * inv_mvc, 0.0, 1.0);
        out.push_back(resample_linear(ch, fs_raw, ps.fs_out));
    }
    return out;
}

} // namespace penn::sig
