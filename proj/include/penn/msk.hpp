#pragma once

#include <array>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "penn/errors.hpp"

// Hill-based muscle-tendon model and hinge-joint dynamics. Every function is
// a pure map over a scalar type T, so the same code runs on plain doubles
// (simulation) and on tape-recorded scalars (parameter gradients).
//
// Conventions: lengths in metres, angles in radians, forces in newtons.
// The tendon is rigid: fiber length follows from musculotendon length and the
// constant-height pennation geometry.
namespace penn::msk {

// Plain numeric value of a scalar, whether it is a double or a taped type.
template <class T>
double scalar_value(const T& x) {
    if constexpr (std::is_same_v<T, double>) return x;
    else return x.value();
}

template <class T>
struct MuscleParamsT {
    T f_max;            // maximum isometric force, N
    T l_opt;            // optimal fiber length, m
    T l_tendon_slack;   // tendon slack length, m
    T phi_opt;          // pennation angle at optimal fiber length, rad
    T k_fl;             // width of the active force-length bell
    double lambda_al = 0.15;    // activation shift of the effective optimal length
    double v_max_factor = 10.0; // max shortening speed, optimal fiber lengths / s
};

using MuscleParams = MuscleParamsT<double>;

template <class T>
struct ActivationParamsT {
    T a_shape;  // exponential shape coefficient, nonzero
};

using ActivationParams = ActivationParamsT<double>;

struct JointParams {
    double inertia;      // kg m^2
    double damping;      // N m s / rad
    double mass;         // kg
    double com_length;   // m, rotation centre to centre of mass
    double gravity = 9.81;
};

// Per-muscle cubic polynomials theta -> musculotendon length, valid on
// [theta_min, theta_max]. The moment arm is derived, never stored:
// r(theta) = -d l_mt / d theta (tendon excursion).
struct GeometryPoly {
    std::vector<std::array<double, 4>> mtu_coeffs;
    double theta_min = -1.5;
    double theta_max = 1.5;

    std::size_t size() const { return mtu_coeffs.size(); }
};

inline void validate(const MuscleParams& p) {
    if (!(p.f_max > 0.0)) throw DomainError("muscle f_max must be > 0");
    if (!(p.l_opt > 0.0)) throw DomainError("muscle l_opt must be > 0");
    if (!(p.l_tendon_slack >= 0.0)) throw DomainError("muscle l_tendon_slack must be >= 0");
    if (!(p.phi_opt >= 0.0 && p.phi_opt < 3.14159265358979323846 / 3.0))
        throw DomainError("muscle phi_opt must lie in [0, pi/3)");
    if (!(p.k_fl > 0.0)) throw DomainError("muscle k_fl must be > 0");
}

inline void validate(const ActivationParams& p) {
    const double a = p.a_shape;
    const bool ok = (a >= -5.0 && a <= -0.01) || (a >= 0.01 && a <= 5.0);
    if (!ok) throw DomainError("activation shape A must lie in [-5,-0.01] or [0.01,5]");
}

inline void validate(const JointParams& p) {
    if (!(p.inertia > 0.0)) throw DomainError("joint inertia must be > 0");
    if (!(p.damping >= 0.0)) throw DomainError("joint damping must be >= 0");
    if (!(p.mass > 0.0)) throw DomainError("joint mass must be > 0");
    if (!(p.com_length > 0.0)) throw DomainError("joint com_length must be > 0");
}

// Nonlinear excitation -> activation map: a = (e^{A u} - 1) / (e^A - 1).
// Fixed points a(0)=0, a(1)=1 for every admissible A.
template <class T>
T activation(const T& u, const ActivationParamsT<T>& ap) {
    using std::exp;
    double uv = scalar_value(u);
    if (uv < -1e-9 || uv > 1.0 + 1e-9) {
        std::ostringstream os;
        os << "excitation " << uv << " outside [0,1]";
        throw DomainError(os.str());
    }
    return (exp(ap.a_shape * u) - 1.0) / (exp(ap.a_shape) - 1.0);
}

// phi = arcsin(l_opt sin(phi_opt) / l_m); constant-height pennation.
template <class T>
T pennation_angle(const T& l_m, const MuscleParamsT<T>& p) {
    using std::asin;
    using std::sin;
    T arg = p.l_opt * sin(p.phi_opt) / l_m;
    double av = scalar_value(arg);
    if (av > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "pennation arcsin argument " << av << " exceeds 1 (fiber shorter than pennation height)";
        throw DomainError(os.str());
    }
    if (av > 1.0) return asin(T(1.0));
    return asin(arg);
}

// Fiber length normalized by the activation-dependent optimal length,
// l / (l_opt (lambda (1 - a) + 1)).
template <class T>
T normalized_active_fiber_length(const T& l_m, const T& a, const MuscleParamsT<T>& p) {
    return l_m / (p.l_opt * (p.lambda_al * (1.0 - a) + 1.0));
}

// Active force-length bell: exp(-(l-1)^2 / k), peak 1 at l = 1.
template <class T>
T active_force_length(const T& l_bar_a, const T& k_fl) {
    using std::exp;
    T d = l_bar_a - 1.0;
    return exp(-(d * d) / k_fl);
}

// Force-velocity gain. Shortening branch (v <= 0) vanishes at v = -1;
// lengthening branch rises from 1 toward the 2.34/1.3 = 1.8 asymptote.
// Output clamped to [0, 1.8]; both branches evaluate to exactly 1 at v = 0.
template <class T>
T force_velocity(const T& v_bar) {
    if (v_bar <= -1.0) return T(0.0);
    if (v_bar <= 0.0) return 0.3 * (v_bar + 1.0) / (0.3 - v_bar);
    T f = (2.34 * v_bar + 0.039) / (1.3 * v_bar + 0.039);
    if (f > 1.8) return T(1.8);
    return f;
}

// Passive stretch force: zero at or below optimal length, exponential above.
template <class T>
T passive_force(const T& l_m, const MuscleParamsT<T>& p) {
    using std::exp;
    if (l_m <= p.l_opt) return T(0.0);
    T l_bar = l_m / p.l_opt;
    return p.f_max * exp(10.0 * (l_bar - 1.0)) / std::exp(5.0);
}

// Rigid tendon: l_m = sqrt((l_mt - l_ts)^2 + (l_opt sin(phi_opt))^2), the
// constant-height pennation model. Satisfies l_m cos(phi(l_m)) = l_mt - l_ts.
template <class T>
T fiber_length_rigid_tendon(const T& l_mt, const MuscleParamsT<T>& p) {
    using std::sin;
    using std::sqrt;
    T path = l_mt - p.l_tendon_slack;
    double pv = scalar_value(path);
    if (pv <= 0.0) {
        std::ostringstream os;
        os << "musculotendon length " << scalar_value(l_mt) << " not longer than tendon slack "
           << scalar_value(p.l_tendon_slack);
        throw GeometryError(os.str());
    }
    T h = p.l_opt * sin(p.phi_opt);
    return sqrt(path * path + h * h);
}

// Time derivative of the rigid-tendon fiber length:
// v_m = (l_mt - l_ts) / l_m * v_mt.
template <class T>
T fiber_velocity_rigid_tendon(const T& l_mt, const T& v_mt, const MuscleParamsT<T>& p) {
    T l_m = fiber_length_rigid_tendon(l_mt, p);
    return (l_mt - p.l_tendon_slack) / l_m * v_mt;
}

// Full muscle-tendon force: F = (F_active + F_passive) cos(phi).
// cos(phi) is computed from the geometry directly, (l_mt - l_ts) / l_m, which
// equals cos(arcsin(h / l_m)) exactly.
template <class T>
T muscle_tendon_force(const T& u, const T& l_mt, const T& v_mt,
                      const MuscleParamsT<T>& p, const ActivationParamsT<T>& ap) {
    T a = activation(u, ap);
    T l_m = fiber_length_rigid_tendon(l_mt, p);
    T cos_phi = (l_mt - p.l_tendon_slack) / l_m;
    T v_m = cos_phi * v_mt;
    T v_bar = v_m / (p.v_max_factor * p.l_opt);
    T l_bar_a = normalized_active_fiber_length(l_m, a, p);
    T f_active = p.f_max * active_force_length(l_bar_a, p.k_fl) * force_velocity(v_bar) * a;
    return (f_active + passive_force(l_m, p)) * cos_phi;
}

// l_mt(theta) = c0 + c1 theta + c2 theta^2 + c3 theta^3.
template <class T>
T mtu_length(const T& theta, const GeometryPoly& g, std::size_t muscle) {
    double tv = scalar_value(theta);
    if (tv < g.theta_min || tv > g.theta_max) {
        std::ostringstream os;
        os << "joint angle " << tv << " outside configured range [" << g.theta_min
           << ", " << g.theta_max << "]";
        throw DomainError(os.str());
    }
    const auto& c = g.mtu_coeffs.at(muscle);
    return c[0] + theta * (c[1] + theta * (c[2] + theta * c[3]));
}

// Tendon excursion: r(theta) = -d l_mt / d theta. Positive for flexors
// (paths that shorten with increasing angle), negative for extensors.
template <class T>
T moment_arm(const T& theta, const GeometryPoly& g, std::size_t muscle) {
    double tv = scalar_value(theta);
    if (tv < g.theta_min || tv > g.theta_max) {
        std::ostringstream os;
        os << "joint angle " << tv << " outside configured range [" << g.theta_min
           << ", " << g.theta_max << "]";
        throw DomainError(os.str());
    }
    const auto& c = g.mtu_coeffs.at(muscle);
    return -(c[1] + theta * (2.0 * c[2] + theta * (3.0 * c[3])));
}

// Hinge joint: theta_dd = (tau - C theta_d - m g L sin(theta)) / I.
template <class T>
T joint_acceleration(const T& tau, const T& theta, const T& theta_dot, const JointParams& jp) {
    using std::sin;
    return (tau - jp.damping * theta_dot - jp.mass * jp.gravity * jp.com_length * sin(theta)) /
           jp.inertia;
}

// tau = sum_i r_i F_i.
template <class T>
T joint_torque_from_muscles(std::span<const T> forces, std::span<const T> arms) {
    if (forces.size() != arms.size() || forces.empty())
        throw DomainError("joint torque needs equal-length, nonempty force and arm vectors");
    T tau = forces[0] * arms[0];
    for (std::size_t i = 1; i < forces.size(); ++i) tau = tau + forces[i] * arms[i];
    return tau;
}

// Validates that every musculotendon path stays longer than its tendon slack
// across the configured joint range (dense sampling plus endpoints).
inline void validate(const GeometryPoly& g, const std::vector<MuscleParams>& muscles) {
    if (g.size() != muscles.size())
        throw DomainError("geometry has a different muscle count than the muscle set");
    if (!(g.theta_min < g.theta_max))
        throw DomainError("geometry joint range is empty");
    const int steps = 256;
    for (std::size_t m = 0; m < muscles.size(); ++m) {
        for (int i = 0; i <= steps; ++i) {
            double th = g.theta_min + (g.theta_max - g.theta_min) * i / steps;
            double lmt = mtu_length(th, g, m);
            if (lmt <= muscles[m].l_tendon_slack) {
                std::ostringstream os;
                os << "muscle " << m << ": musculotendon length " << lmt << " at theta " << th
                   << " does not exceed tendon slack " << muscles[m].l_tendon_slack;
                throw GeometryError(os.str());
            }
        }
    }
}

} // namespace penn::msk
