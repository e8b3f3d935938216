#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "penn/errors.hpp"

// IIR Butterworth design and zero-phase filtering on cascaded biquads.
// Design path: analog prototype -> bilinear transform with frequency
// pre-warping -> second-order sections.
namespace penn::sig {

enum class FilterKind { lowpass, highpass, bandpass };

struct FilterSpec {
    FilterKind kind = FilterKind::lowpass;
    int order = 4;       // analog prototype order, even
    double f1 = 0.0;     // corner Hz; lower corner for bandpass
    double f2 = 0.0;     // upper corner Hz, bandpass only
    double fs = 1000.0;  // sample rate Hz
};

// One section of H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

using Sos = std::vector<Biquad>;

inline void validate(const FilterSpec& s) {
    if (!(s.fs > 0.0)) throw ConfigError("filter sample rate must be > 0");
    if (s.order < 2 || s.order % 2 != 0)
        throw ConfigError("filter order must be an even integer >= 2");
    auto corner_ok = [&](double f) { return f > 0.0 && f < 0.5 * s.fs; };
    if (!corner_ok(s.f1)) throw ConfigError("filter corner must lie in (0, fs/2)");
    if (s.kind == FilterKind::bandpass) {
        if (!corner_ok(s.f2)) throw ConfigError("filter corner must lie in (0, fs/2)");
        if (!(s.f1 < s.f2)) throw ConfigError("bandpass corners must satisfy low < high");
    }
}

inline std::complex<double> biquad_response(const Biquad& q, double omega) {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
}

// Cascade frequency response at f_hz.
inline std::complex<double> sos_response(const Sos& sos, double f_hz, double fs) {
    const double omega = 2.0 * std::numbers::pi * f_hz / fs;
    std::complex<double> h(1.0, 0.0);
    for (const Biquad& q : sos) h *= biquad_response(q, omega);
    return h;
}

// Lowpass and highpass sections come out with their reference-point gain
// (DC respectively Nyquist) exactly 1: the numerator is rebuilt from the
// realized denominator sum, so the gain ratio divides a double by itself.
inline Sos butterworth_design(const FilterSpec& spec) {
    validate(spec);
    const double pi = std::numbers::pi;
    const int n = spec.order;
    Sos sos;

    if (spec.kind != FilterKind::bandpass) {
        const double K = std::tan(pi * spec.f1 / spec.fs);
        for (int m = 0; m < n / 2; ++m) {
            const double zeta = std::sin(pi * (2 * m + 1) / (2.0 * n));
            const double D = 1.0 + 2.0 * zeta * K + K * K;
            Biquad q;
            q.a1 = 2.0 * (K * K - 1.0) / D;
            q.a2 = (1.0 - 2.0 * zeta * K + K * K) / D;
            if (spec.kind == FilterKind::lowpass) {
                const double beta = (1.0 + q.a1 + q.a2) / 4.0;
                q.b0 = beta;
                q.b1 = 2.0 * beta;
                q.b2 = beta;
            } else {
                const double beta = (1.0 - q.a1 + q.a2) / 4.0;
                q.b0 = beta;
                q.b1 = -2.0 * beta;
                q.b2 = beta;
            }
            sos.push_back(q);
        }
        return sos;
    }

    // Bandpass: each prototype pole p maps through s^2 - p*bw*s + w0^2 = 0
    // into two poles; zeros land at z = +1 and z = -1, one pair per section.
    const double W1 = std::tan(pi * spec.f1 / spec.fs);
    const double W2 = std::tan(pi * spec.f2 / spec.fs);
    const double w0sq = W1 * W2;
    const double bw = W2 - W1;
    const double omega_c = 2.0 * std::atan(std::sqrt(w0sq));  // digital centre
    using cplx = std::complex<double>;
    for (int m = 0; m < n / 2; ++m) {
        const double theta = pi * (2 * m + 1) / (2.0 * n);
        const cplx p(-std::sin(theta), std::cos(theta));
        const cplx half = 0.5 * p * bw;
        const cplx disc = std::sqrt(half * half - cplx(w0sq, 0.0));
        for (const cplx& s : {half + disc, half - disc}) {
            const cplx zp = (1.0 + s) / (1.0 - s);
            Biquad q;
            q.a1 = -2.0 * zp.real();
            q.a2 = std::norm(zp);
            q.b0 = 1.0;
            q.b1 = 0.0;
            q.b2 = -1.0;
            const double g = std::abs(biquad_response(q, omega_c));
            q.b0 /= g;
            q.b2 /= g;
            sos.push_back(q);
        }
    }
    return sos;
}

namespace detail {

// Direct form II transposed, one section over the whole signal.
// steady_level, when non-null, seeds the state as if the input had been at
// *steady_level forever; on return it carries the section's DC response to
// that level, the seed for the next section in the cascade.
inline void apply_biquad(const Biquad& q, std::vector<double>& x, double* steady_level) {
    double s1 = 0.0, s2 = 0.0;
    if (steady_level) {
        const double h1 = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
        s1 = (h1 - q.b0) * *steady_level;
        s2 = (q.b2 - q.a2 * h1) * *steady_level;
        *steady_level *= h1;
    }
    for (double& v : x) {
        const double xin = v;
        const double y = q.b0 * xin + s1;
        s1 = q.b1 * xin - q.a1 * y + s2;
        s2 = q.b2 * xin - q.a2 * y;
        v = y;
    }
}

inline void cascade(const Sos& sos, std::vector<double>& x, bool steady_start) {
    double level = x.empty() ? 0.0 : x.front();
    for (const Biquad& q : sos) apply_biquad(q, x, steady_start ? &level : nullptr);
}

} // namespace detail

// Single-pass causal filtering from rest (zero initial state).
inline std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    detail::cascade(sos, y, false);
    return y;
}

// Largest pole magnitude across the cascade; sets the transient decay rate.
inline double max_pole_radius(const Sos& sos) {
    double r = 0.0;
    for (const Biquad& q : sos) {
        const double disc = q.a1 * q.a1 - 4.0 * q.a2;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            r = std::max({r, std::fabs((-q.a1 + s) / 2.0), std::fabs((-q.a1 - s) / 2.0)});
        } else {
            r = std::max(r, std::sqrt(q.a2));
        }
    }
    return r;
}

// Zero-phase forward-backward filtering with odd-reflection edge padding.
// Requires length > 3x the filter order (2 poles per section). The pad is
// stretched beyond that floor until edge transients decay below ~1e-13,
// capped at one signal length.
inline std::vector<double> filt_filt(const Sos& sos, std::span<const double> x) {
    if (sos.empty()) throw ConfigError("filt_filt needs at least one section");
    const std::size_t pad_floor = 3 * (2 * sos.size());
    if (x.size() <= pad_floor)
        throw DomainError("signal too short for zero-phase filtering (needs > 3x filter order)");
    const double decay = std::max(1e-6, 1.0 - max_pole_radius(sos));
    const std::size_t pad =
        std::min(x.size() - 1,
                 std::max(pad_floor, static_cast<std::size_t>(std::ceil(30.0 / decay))));

    const std::size_t n = x.size();
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x[0] - x[pad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    detail::cascade(sos, ext, true);
    std::reverse(ext.begin(), ext.end());
    detail::cascade(sos, ext, true);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

// Kinematics smoothing: zero-phase second-order 1 Hz lowpass.
inline std::vector<double> smooth_angle(std::span<const double> raw_angle, double fs) {
    FilterSpec spec;
    spec.kind = FilterKind::lowpass;
    spec.order = 2;
    spec.f1 = 1.0;
    spec.fs = fs;
    return filt_filt(butterworth_design(spec), raw_angle);
}

} // namespace penn::sig
