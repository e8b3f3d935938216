#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "penn/errors.hpp"

namespace penn::eval {

// Root-mean-square difference, in the units of its inputs.
inline double rmse(std::span<const double> truth, std::span<const double> est) {
    if (truth.size() != est.size()) throw DomainError("rmse needs equal-length sequences");
    if (truth.empty()) throw DomainError("rmse of empty sequences");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - est[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(truth.size()));
}

// Coefficient of determination against the evaluated segment's own mean.
// Undefined for constant ground truth; that is an error, not a zero.
inline double r_squared(std::span<const double> truth, std::span<const double> est) {
    if (truth.size() != est.size())
        throw DomainError("r_squared needs equal-length sequences");
    if (truth.empty()) throw DomainError("r_squared of empty sequences");
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = truth[i] - est[i];
        const double c = truth[i] - mean;
        num += e * e;
        den += c * c;
    }
    if (den == 0.0) throw DomainError("r_squared undefined for constant ground truth");
    return 1.0 - num / den;
}

namespace detail {

// Continued fraction for the regularized incomplete beta, Lentz's method.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericalError("incomplete beta continued fraction did not converge");
}

inline double inc_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // use the fraction on whichever side converges fast
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

} // namespace detail

// Student-t CDF with real dof via I_x(dof/2, 1/2) on the symmetric tail.
inline double student_cdf(double t, double dof) {
    if (!(dof > 0.0)) throw DomainError("degrees of freedom must be > 0");
    if (t == 0.0) return 0.5;
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * detail::inc_beta(0.5 * dof, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

// Inverse CDF by bisection; the CDF is strictly increasing and cheap.
inline double student_quantile(double q, double dof) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    double lo = -1e8, hi = 1e8;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (student_cdf(mid, dof) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline std::string stars_for(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double dof = 0.0;
    std::string stars;
    bool degenerate = false;  // zero-variance differences; t/p are conventions
};

// Two-sided paired t-test on matched samples. Zero-variance differences have
// no sampling distribution: equal pairs report t=0, p=1; a deterministic
// nonzero difference reports the +/-inf limit with p=0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("paired test needs equal-length samples");
    if (a.size() < 2) throw DomainError("paired test needs at least two pairs");
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    TTestResult r;
    r.dof = n - 1.0;
    const double var = ss / (n - 1.0);
    if (var == 0.0) {
        r.degenerate = true;
        if (mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p = 0.0;
        }
    } else {
        r.t = mean / std::sqrt(var / n);
        r.p = 2.0 * (1.0 - student_cdf(std::fabs(r.t), r.dof));
    }
    r.stars = stars_for(r.p);
    return r;
}

// Per-trial metrics plus aggregates, ready for table or CSV emission.
struct MetricReport {
    std::string method;
    std::string provenance;  // checkpoint and dataset identifiers
    std::vector<double> rmse_deg;
    std::vector<double> r2;
    double rmse_mean = 0.0;
    double rmse_std = 0.0;
    double r2_mean = 0.0;
    double r2_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace detail

inline MetricReport make_report(std::string method, std::string provenance,
                                std::vector<double> rmse_deg, std::vector<double> r2) {
    if (rmse_deg.size() != r2.size())
        throw DomainError("per-trial metric counts differ");
    if (rmse_deg.empty()) throw DomainError("report needs at least one trial");
    for (double v : rmse_deg)
        if (!(v >= 0.0)) throw DomainError("rmse must be >= 0");
    for (double v : r2)
        if (!(v <= 1.0)) throw DomainError("r_squared cannot exceed 1");
    MetricReport rep;
    rep.method = std::move(method);
    rep.provenance = std::move(provenance);
    rep.rmse_deg = std::move(rmse_deg);
    rep.r2 = std::move(r2);
    std::tie(rep.rmse_mean, rep.rmse_std) = detail::mean_std(rep.rmse_deg);
    std::tie(rep.r2_mean, rep.r2_std) = detail::mean_std(rep.r2);
    return rep;
}

// Per-trial rows, then labeled aggregate rows sharing the trial column.
inline std::string report_csv(const MetricReport& r) {
    std::ostringstream os;
    os << "trial,rmse_deg,r2\n";
    for (std::size_t i = 0; i < r.rmse_deg.size(); ++i)
        os << i << ',' << detail::fmt(r.rmse_deg[i]) << ',' << detail::fmt(r.r2[i])
           << '\n';
    os << "mean," << detail::fmt(r.rmse_mean) << ',' << detail::fmt(r.r2_mean) << '\n';
    os << "std," << detail::fmt(r.rmse_std) << ',' << detail::fmt(r.r2_std) << '\n';
    return os.str();
}

inline std::string report_table(const MetricReport& r) {
    std::ostringstream os;
    os << "method: " << r.method;
    if (!r.provenance.empty()) os << " (" << r.provenance << ")";
    os << '\n';
    char line[64];
    std::snprintf(line, sizeof line, "%8s %12s %10s\n", "trial", "rmse_deg", "r2");
    os << line;
    for (std::size_t i = 0; i < r.rmse_deg.size(); ++i) {
        std::snprintf(line, sizeof line, "%8zu %12.4f %10.4f\n", i, r.rmse_deg[i],
                      r.r2[i]);
        os << line;
    }
    std::snprintf(line, sizeof line, "%8s %12.4f %10.4f\n", "mean", r.rmse_mean,
                  r.r2_mean);
    os << line;
    std::snprintf(line, sizeof line, "%8s %12.4f %10.4f\n", "std", r.rmse_std, r.r2_std);
    os << line;
    return os.str();
}

} // namespace penn::eval
