#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "penn/filters.hpp"
#include "penn/preprocess.hpp"
#include "penn/rng.hpp"
#include "penn/windows.hpp"

using namespace penn;
using namespace penn::sig;
using Catch::Matchers::WithinAbs;

namespace {

// Exact digital Butterworth magnitude under the prewarped bilinear transform:
// the response at f equals the analog prototype's at tan(pi f / fs).
double analytic_lp_mag(double f, double fc, double fs, int order) {
    const double r = std::tan(std::numbers::pi * f / fs) / std::tan(std::numbers::pi * fc / fs);
    return 1.0 / std::sqrt(1.0 + std::pow(r, 2 * order));
}

double analytic_hp_mag(double f, double fc, double fs, int order) {
    const double r = std::tan(std::numbers::pi * fc / fs) / std::tan(std::numbers::pi * f / fs);
    return 1.0 / std::sqrt(1.0 + std::pow(r, 2 * order));
}

std::vector<double> sine(double f, double fs, double dur, double amp = 1.0, double bias = 0.0) {
    std::vector<double> x(static_cast<std::size_t>(dur * fs));
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = bias + amp * std::sin(2.0 * std::numbers::pi * f * i / fs);
    return x;
}

} // namespace

TEST_CASE("lowpass design: exact DC gain, cutoff at 1/sqrt(2), analytic magnitude") {
    FilterSpec spec;
    spec.kind = FilterKind::lowpass;
    spec.order = 4;
    spec.f1 = 4.0;
    spec.fs = 1000.0;
    Sos sos = butterworth_design(spec);
    REQUIRE(sos.size() == 2);

    CHECK(std::abs(sos_response(sos, 0.0, 1000.0)) == 1.0);
    CHECK_THAT(std::abs(sos_response(sos, 4.0, 1000.0)),
               WithinAbs(1.0 / std::sqrt(2.0), 1e-6));
    for (double f : {1.0, 2.0, 4.0, 8.0, 40.0, 100.0, 400.0}) {
        CHECK_THAT(std::abs(sos_response(sos, f, 1000.0)),
                   WithinAbs(analytic_lp_mag(f, 4.0, 1000.0, 4), 1e-12));
    }
}

TEST_CASE("highpass design: exact Nyquist gain and analytic magnitude") {
    FilterSpec spec;
    spec.kind = FilterKind::highpass;
    spec.order = 4;
    spec.f1 = 20.0;
    spec.fs = 1000.0;
    Sos sos = butterworth_design(spec);

    CHECK(std::abs(sos_response(sos, 500.0, 1000.0)) == 1.0);
    CHECK_THAT(std::abs(sos_response(sos, 20.0, 1000.0)),
               WithinAbs(1.0 / std::sqrt(2.0), 1e-6));
    for (double f : {2.0, 10.0, 20.0, 50.0, 200.0}) {
        CHECK_THAT(std::abs(sos_response(sos, f, 1000.0)),
                   WithinAbs(analytic_hp_mag(f, 20.0, 1000.0, 4), 1e-12));
    }
}

TEST_CASE("bandpass design: unit gain near the centre, corner and stopband behaviour") {
    FilterSpec spec;
    spec.kind = FilterKind::bandpass;
    spec.order = 4;
    spec.f1 = 20.0;
    spec.f2 = 450.0;
    spec.fs = 2000.0;
    Sos sos = butterworth_design(spec);
    REQUIRE(sos.size() == 4);

    const double f_geo = std::sqrt(20.0 * 450.0);
    CHECK_THAT(std::abs(sos_response(sos, f_geo, 2000.0)), WithinAbs(1.0, 1e-3));
    // corners sit at half power
    CHECK_THAT(std::abs(sos_response(sos, 20.0, 2000.0)),
               WithinAbs(1.0 / std::sqrt(2.0), 1e-9));
    CHECK_THAT(std::abs(sos_response(sos, 450.0, 2000.0)),
               WithinAbs(1.0 / std::sqrt(2.0), 1e-9));
    // stopband points well outside the band
    CHECK(std::abs(sos_response(sos, 1.0, 2000.0)) < 1e-4);
    CHECK(std::abs(sos_response(sos, 995.0, 2000.0)) < 1e-4);
}

TEST_CASE("all designed biquads are strictly stable") {
    std::vector<FilterSpec> specs;
    for (int order : {2, 4, 6, 8}) {
        specs.push_back({FilterKind::lowpass, order, 4.0, 0.0, 1000.0});
        specs.push_back({FilterKind::lowpass, order, 450.0, 0.0, 1000.0});
        specs.push_back({FilterKind::highpass, order, 0.5, 0.0, 1000.0});
        specs.push_back({FilterKind::highpass, order, 490.0, 0.0, 1000.0});
        specs.push_back({FilterKind::bandpass, order, 20.0, 450.0, 2000.0});
        specs.push_back({FilterKind::bandpass, order, 0.5, 999.0, 2000.0});
    }
    for (const auto& spec : specs) {
        for (const Biquad& q : butterworth_design(spec)) {
            // Schur conditions for z^2 + a1 z + a2
            REQUIRE(std::fabs(q.a2) < 1.0);
            REQUIRE(std::fabs(q.a1) < 1.0 + q.a2);
        }
    }
}

TEST_CASE("design rejects invalid specs") {
    CHECK_THROWS_AS(butterworth_design({FilterKind::lowpass, 3, 4.0, 0.0, 1000.0}),
                    ConfigError);
    CHECK_THROWS_AS(butterworth_design({FilterKind::lowpass, 4, 600.0, 0.0, 1000.0}),
                    ConfigError);
    CHECK_THROWS_AS(butterworth_design({FilterKind::lowpass, 4, 0.0, 0.0, 1000.0}),
                    ConfigError);
    CHECK_THROWS_AS(butterworth_design({FilterKind::bandpass, 4, 450.0, 20.0, 2000.0}),
                    ConfigError);
}

TEST_CASE("filt_filt preserves constants") {
    FilterSpec spec{FilterKind::lowpass, 4, 4.0, 0.0, 1000.0};
    Sos sos = butterworth_design(spec);
    std::vector<double> x(500, 0.7);
    auto y = filt_filt(sos, x);
    REQUIRE(y.size() == x.size());
    for (double v : y) CHECK_THAT(v, WithinAbs(0.7, 1e-9));
}

TEST_CASE("filt_filt kills a 100 Hz sine through a 4 Hz lowpass") {
    FilterSpec spec{FilterKind::lowpass, 4, 4.0, 0.0, 1000.0};
    Sos sos = butterworth_design(spec);
    // whole number of periods, endpoints on zero crossings: the reflection
    // padding continues the sine exactly, so the measurement isolates the
    // cascade's attenuation from boundary effects
    std::vector<double> x(4001);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * std::numbers::pi * 100.0 * i / 1000.0);
    auto y = filt_filt(sos, x);
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::fabs(v));
    CHECK(peak < 1e-4);
}

TEST_CASE("filt_filt commutes with time reversal") {
    FilterSpec spec{FilterKind::lowpass, 4, 50.0, 0.0, 1000.0};
    Sos sos = butterworth_design(spec);
    Rng rng(3);
    std::vector<double> x(1000);
    for (double& v : x) v = rng.normal();
    auto fwd = filt_filt(sos, x);
    std::vector<double> xr(x.rbegin(), x.rend());
    auto rev = filt_filt(sos, xr);
    std::reverse(rev.begin(), rev.end());
    for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE_THAT(fwd[i], WithinAbs(rev[i], 1e-9));
}

TEST_CASE("filt_filt rejects signals at or below the padding length") {
    FilterSpec spec{FilterKind::lowpass, 4, 10.0, 0.0, 1000.0};
    Sos sos = butterworth_design(spec);  // 2 sections -> pad 12
    std::vector<double> x(12, 1.0);
    CHECK_THROWS_AS(filt_filt(sos, x), DomainError);
}

TEST_CASE("single-pass sosfilt matches the design magnitude in steady state") {
    FilterSpec spec{FilterKind::lowpass, 4, 40.0, 0.0, 1000.0};
    Sos sos = butterworth_design(spec);
    auto x = sine(10.0, 1000.0, 4.0);
    auto y = sosfilt(sos, x);
    // amplitude over the second half, transient long gone
    double peak = 0.0;
    for (std::size_t i = x.size() / 2; i < x.size(); ++i) peak = std::max(peak, std::fabs(y[i]));
    CHECK_THAT(peak, WithinAbs(analytic_lp_mag(10.0, 40.0, 1000.0, 4), 1e-3));
}

TEST_CASE("smooth_angle: constant preserved, 10 Hz tremor cut by more than 30 dB") {
    std::vector<double> flat(1000, 0.4);
    auto y = smooth_angle(flat, 1000.0);
    for (double v : y) CHECK_THAT(v, WithinAbs(0.4, 1e-9));

    auto x = sine(10.0, 1000.0, 3.0, 1.0, 0.0);
    auto z = smooth_angle(x, 1000.0);
    double rms_in = 0.0, rms_out = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        rms_in += x[i] * x[i];
        rms_out += z[i] * z[i];
    }
    CHECK(std::sqrt(rms_out / rms_in) < std::pow(10.0, -30.0 / 20.0));
}

TEST_CASE("resample_linear: identity rate, ramp exactness, length rule") {
    std::vector<double> ramp(11);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.5 * i;
    auto same = resample_linear(ramp, 100.0, 100.0);
    REQUIRE(same.size() == ramp.size());
    for (std::size_t i = 0; i < ramp.size(); ++i) CHECK_THAT(same[i], WithinAbs(ramp[i], 1e-12));

    // a linear ramp is reproduced exactly at any rate
    auto up = resample_linear(ramp, 100.0, 250.0);
    REQUIRE(up.size() == 26);  // 0.1 s span on a 250 Hz grid
    for (std::size_t k = 0; k < up.size(); ++k)
        CHECK_THAT(up[k], WithinAbs(0.5 * (k * 100.0 / 250.0), 1e-12));

    auto down = resample_linear(ramp, 100.0, 50.0);
    REQUIRE(down.size() == 6);
    for (std::size_t k = 0; k < down.size(); ++k)
        CHECK_THAT(down[k], WithinAbs(k * 1.0, 1e-12));
}

TEST_CASE("preprocess_emg: zeros map to zeros, output confined to [0,1]") {
    std::vector<std::vector<double>> raw(2, std::vector<double>(4000, 0.0));
    std::vector<double> mvc{1.0, 1.0};
    auto out = preprocess_emg(raw, 2000.0, mvc);
    REQUIRE(out.size() == 2);
    for (const auto& ch : out)
        for (double v : ch) CHECK_THAT(v, WithinAbs(0.0, 1e-12));

    Rng rng(11);
    for (auto& ch : raw)
        for (double& v : ch) v = rng.normal(0.0, 2.0);
    out = preprocess_emg(raw, 2000.0, mvc);
    for (const auto& ch : out)
        for (double v : ch) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
}

TEST_CASE("preprocess_emg: rectified 50 Hz sine settles near its mean level") {
    // amplitude = MVC; envelope of |sin| is 2/pi of the peak
    std::vector<std::vector<double>> raw{sine(50.0, 2000.0, 4.0)};
    std::vector<double> mvc{1.0};
    auto out = preprocess_emg(raw, 2000.0, mvc);
    double mean = 0.0;
    for (double v : out[0]) mean += v;
    mean /= static_cast<double>(out[0].size());
    CHECK(mean > 0.55);
    CHECK(mean < 0.70);
}

TEST_CASE("preprocess_emg is near-idempotent on band-limited normalized input") {
    std::vector<std::vector<double>> raw{sine(1.0, 2000.0, 4.0, 0.4, 0.5)};
    std::vector<double> mvc{1.0};
    auto once = preprocess_emg(raw, 2000.0, mvc);
    auto twice = preprocess_emg(once, 1000.0, mvc);
    REQUIRE(twice[0].size() == once[0].size());
    double max_diff = 0.0;
    for (std::size_t i = 0; i < once[0].size(); ++i)
        max_diff = std::max(max_diff, std::fabs(twice[0][i] - once[0][i]));
    CHECK(max_diff < 0.01);
}

TEST_CASE("preprocess_emg rejects bad MVC and undersampled input") {
    std::vector<std::vector<double>> raw{std::vector<double>(4000, 0.1)};
    CHECK_THROWS_AS(preprocess_emg(raw, 2000.0, std::vector<double>{0.0}), DomainError);
    CHECK_THROWS_AS(preprocess_emg(raw, 2000.0, std::vector<double>{1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(preprocess_emg(raw, 800.0, std::vector<double>{1.0}), DomainError);
}

namespace {

Trial small_trial(std::size_t n, std::size_t len) {
    Trial tr;
    tr.fs = 1000.0;
    tr.emg.assign(n, std::vector<double>(len));
    tr.angle.resize(len);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < len; ++i) tr.emg[r][i] = 10.0 * r + 0.01 * i;
    for (std::size_t i = 0; i < len; ++i) tr.angle[i] = 0.1 * i;
    return tr;
}

} // namespace

TEST_CASE("make_windows: counting rule and minimum length") {
    const std::size_t w = 16;
    Trial tr = small_trial(3, w + 2);
    auto windows = make_windows(tr, tr.angle, w);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].t_index == w + 1);

    Trial longer = small_trial(3, 100);
    auto more = make_windows(longer, longer.angle, w);
    CHECK(more.size() == 100 - w - 1);
    // consecutive targets, each index exactly once
    for (std::size_t i = 0; i < more.size(); ++i)
        CHECK(more[i].t_index == w + 1 + i);

    Trial tiny = small_trial(3, w + 1);
    CHECK_THROWS_AS(make_windows(tiny, tiny.angle, w), DomainError);
}

TEST_CASE("window_at: alignment, shape, history broadcast, no future reads") {
    const std::size_t w = 16;
    Trial tr = small_trial(3, 60);
    const std::size_t t = 25;
    WindowSample s = window_at(tr, tr.angle, w, t);

    CHECK(s.rows == 5);
    CHECK(s.cols == w);
    CHECK(s.target == tr.angle[t]);
    // column W-1 carries the excitation at the target time itself
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(s.at(r, w - 1) == tr.emg[r][t]);
        CHECK(s.at(r, 0) == tr.emg[r][t - w + 1]);
    }
    // history rows are the two previous stream values, broadcast
    for (std::size_t c = 0; c < w; ++c) {
        CHECK(s.at(3, c) == tr.angle[t - 1]);
        CHECK(s.at(4, c) == tr.angle[t - 2]);
    }
}

TEST_CASE("window_at rejects out-of-range targets and short history") {
    const std::size_t w = 16;
    Trial tr = small_trial(2, 60);
    CHECK_THROWS_AS(window_at(tr, tr.angle, w, w), DomainError);       // before first estimable
    CHECK_THROWS_AS(window_at(tr, tr.angle, w, 60), DomainError);      // past the end
    std::vector<double> short_hist(10, 0.0);
    CHECK_THROWS_AS(window_at(tr, short_hist, w, 30), DomainError);
}
