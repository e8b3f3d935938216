#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "penn/errors.hpp"
#include "penn/msk.hpp"
#include "penn/plant.hpp"
#include "penn/rng.hpp"
#include "penn/trial.hpp"

namespace penn::sim {

enum class ExcitationKind { sum_of_sines, random_walk };

struct ExcitationSpec {
    ExcitationKind kind = ExcitationKind::sum_of_sines;
    double base_lo = 0.25;   // per-muscle constant offset range
    double base_hi = 0.45;
    double amplitude = 0.25; // oscillation span around the offset
    double freq_lo_hz = 0.1; // sum-of-sines component band
    double freq_hi_hz = 0.8;
    int components = 3;
    double walk_step_std = 0.02;  // random-walk step scale (per sample)
    double walk_tau_s = 0.4;      // smoothing time constant, applied twice
};

struct SimConfig {
    double dt = 0.001;     // integration and sample period, s
    double duration = 10.0;
    double theta_0 = 0.0;
    double theta_dot_0 = 0.0;
    ExcitationSpec excitation;
    double noise_std = 0.0;  // generator-level additive noise on emitted channels
    std::uint64_t seed = 1;
};

// Joint angular acceleration at a known state: evaluates every muscle's
// path length, moment arm, and force, sums torques, applies the rigid-body
// balance. Shared by the simulator and the estimator so both integrate the
// exact same dynamics.
template <class T>
T joint_accel_at(const T& theta, const T& theta_dot, std::span<const T> u,
                 const std::vector<msk::MuscleParamsT<T>>& muscles,
                 const msk::ActivationParamsT<T>& ap, const msk::GeometryPoly& geometry,
                 const msk::JointParams& jp) {
    if (u.size() != muscles.size())
        throw DomainError("one excitation per muscle is required");
    std::vector<T> forces;
    std::vector<T> arms;
    forces.reserve(muscles.size());
    arms.reserve(muscles.size());
    for (std::size_t i = 0; i < muscles.size(); ++i) {
        T l_mt = msk::mtu_length(theta, geometry, i);
        T r = msk::moment_arm(theta, geometry, i);
        T v_mt = -r * theta_dot;
        forces.push_back(msk::muscle_tendon_force(u[i], l_mt, v_mt, muscles[i], ap));
        arms.push_back(r);
    }
    T tau = msk::joint_torque_from_muscles<T>(forces, arms);
    return msk::joint_acceleration(tau, theta, theta_dot, jp);
}

// One explicit central-difference step: velocity from the two past angles,
// acceleration at the most recent one, position update second order in dt.
template <class T>
T physics_step(const T& theta_prev, const T& theta_prev2, std::span<const T> u,
               const std::vector<msk::MuscleParamsT<T>>& muscles,
               const msk::ActivationParamsT<T>& ap, const msk::GeometryPoly& geometry,
               const msk::JointParams& jp, double dt) {
    if (!(dt > 0.0)) throw ConfigError("integration step dt must be > 0");
    T theta_dot = (theta_prev - theta_prev2) / dt;
    T theta_dd = joint_accel_at(theta_prev, theta_dot, u, muscles, ap, geometry, jp);
    return 2.0 * theta_prev - theta_prev2 + (dt * dt) * theta_dd;
}

// double-typed convenience over a Plant
inline double physics_step(double theta_prev, double theta_prev2, std::span<const double> u,
                           const Plant& plant, double dt) {
    return physics_step<double>(theta_prev, theta_prev2, u, plant.muscles, plant.activation,
                                plant.geometry, plant.joint, dt);
}

namespace detail {

inline std::vector<double> excitation_channel(const ExcitationSpec& spec, std::size_t n,
                                              double dt, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> u(n);
    if (spec.kind == ExcitationKind::sum_of_sines) {
        const double base = rng.uniform(spec.base_lo, spec.base_hi);
        std::vector<double> freq(spec.components), phase(spec.components), w(spec.components);
        double wsum = 0.0;
        for (int j = 0; j < spec.components; ++j) {
            freq[j] = rng.uniform(spec.freq_lo_hz, spec.freq_hi_hz);
            phase[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            w[j] = rng.uniform(0.5, 1.0);
            wsum += w[j];
        }
        for (int j = 0; j < spec.components; ++j) w[j] *= spec.amplitude / wsum;
        for (std::size_t t = 0; t < n; ++t) {
            double v = base;
            const double time = static_cast<double>(t) * dt;
            for (int j = 0; j < spec.components; ++j)
                v += w[j] * std::sin(2.0 * std::numbers::pi * freq[j] * time + phase[j]);
            u[t] = std::clamp(v, 0.0, 1.0);
        }
        return u;
    }
    // random walk, smoothed by two exponential moving averages
    const double alpha = dt / (spec.walk_tau_s + dt);
    double w = rng.uniform(spec.base_lo, spec.base_hi);
    double e1 = w, e2 = w;
    for (std::size_t t = 0; t < n; ++t) {
        w = std::clamp(w + rng.normal(0.0, spec.walk_step_std), 0.0, 1.0);
        e1 += alpha * (w - e1);
        e2 += alpha * (e1 - e2);
        u[t] = std::clamp(e2, 0.0, 1.0);
    }
    return u;
}

} // namespace detail

// Per-muscle excitation streams, one independent substream per channel.
inline std::vector<std::vector<double>> generate_excitations(const ExcitationSpec& spec,
                                                             std::size_t n_muscles,
                                                             std::size_t n_samples, double dt,
                                                             std::uint64_t seed) {
    std::vector<std::vector<double>> u;
    u.reserve(n_muscles);
    for (std::size_t i = 0; i < n_muscles; ++i)
        u.push_back(detail::excitation_channel(spec, n_samples, dt,
                                               Rng::derive(seed, 0xE000 + i)));
    return u;
}

// Explicit scheme stability bound for the gravity mode: dt * sqrt(mgL/I).
inline double stability_margin(const SimConfig& cfg, const Plant& plant) {
    const double omega0 = std::sqrt(plant.joint.mass * plant.joint.gravity *
                                    plant.joint.com_length / plant.joint.inertia);
    return cfg.dt * omega0;
}

// Rolls the integrator over the horizon and emits the clean trial:
// excitations as generated, angle as integrated, no measurement noise.
inline Trial simulate_trajectory(const SimConfig& cfg, const Plant& plant) {
    validate(plant);
    if (!(cfg.dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(cfg.duration >= 2.0 * cfg.dt))
        throw ConfigError("duration must cover at least two samples");
    if (stability_margin(cfg, plant) > 0.5) {
        std::ostringstream os;
        os << "dt " << cfg.dt << " too large for explicit integration: dt*sqrt(mgL/I) = "
           << stability_margin(cfg, plant) << " exceeds 0.5";
        throw ConfigError(os.str());
    }

    const std::size_t len = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
    auto u = generate_excitations(cfg.excitation, plant.size(), len, cfg.dt, cfg.seed);

    std::vector<double> theta(len);
    std::vector<double> ut(plant.size());
    theta[0] = cfg.theta_0;
    if (len >= 2) {
        for (std::size_t i = 0; i < plant.size(); ++i) ut[i] = u[i][0];
        const double a0 = joint_accel_at<double>(cfg.theta_0, cfg.theta_dot_0, ut,
                                                 plant.muscles, plant.activation,
                                                 plant.geometry, plant.joint);
        theta[1] = cfg.theta_0 + cfg.dt * cfg.theta_dot_0 + 0.5 * cfg.dt * cfg.dt * a0;
    }
    for (std::size_t t = 2; t < len; ++t) {
        for (std::size_t i = 0; i < plant.size(); ++i) ut[i] = u[i][t];
        theta[t] = physics_step(theta[t - 1], theta[t - 2], ut, plant, cfg.dt);
        if (std::fabs(theta[t]) > 10.0) {
            std::ostringstream os;
            os << "trajectory diverged: |theta| = " << std::fabs(theta[t]) << " rad at sample "
               << t;
            throw NumericalError(os.str());
        }
    }

    Trial tr;
    tr.fs = 1.0 / cfg.dt;
    tr.emg = std::move(u);
    tr.angle = std::move(theta);
    std::ostringstream meta;
    meta << "synthetic seed=" << cfg.seed << " dt=" << cfg.dt << " duration=" << cfg.duration
         << " noise_std=" << cfg.noise_std;
    tr.meta = meta.str();
    return tr;
}

// n_trials independent trials: fresh excitation seed per trial, optional
// Gaussian noise on the emitted channels (re-clipped), angle kept clean.
inline std::vector<Trial> generate_synthetic_dataset(const SimConfig& cfg, const Plant& plant,
                                                     std::size_t n_trials) {
    if (n_trials < 1) throw ConfigError("dataset needs at least one trial");
    std::vector<Trial> out;
    out.reserve(n_trials);
    for (std::size_t k = 0; k < n_trials; ++k) {
        SimConfig c = cfg;
        c.seed = Rng::derive(cfg.seed, 1000 + k);
        Trial tr = simulate_trajectory(c, plant);
        if (cfg.noise_std > 0.0) {
            for (std::size_t i = 0; i < tr.emg.size(); ++i) {
                Rng noise(Rng::derive(c.seed, 0xA000 + i));
                for (double& v : tr.emg[i])
                    v = std::clamp(v + noise.normal(0.0, cfg.noise_std), 0.0, 1.0);
            }
        }
        out.push_back(std::move(tr));
    }
    return out;
}

} // namespace penn::sim
