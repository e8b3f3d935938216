#pragma once

#include <cmath>
#include <vector>

#include "penn/msk.hpp"

namespace penn {

// Everything the forward dynamics needs: muscle set, excitation-to-activation
// shape, joint geometry polynomials, and the rigid-body joint parameters.
struct Plant {
    std::vector<msk::MuscleParams> muscles;
    msk::ActivationParams activation{-1.5};
    msk::GeometryPoly geometry;
    msk::JointParams joint{};

    std::size_t size() const { return muscles.size(); }
};

inline void validate(const Plant& p) {
    if (p.muscles.empty()) throw DomainError("plant needs at least one muscle");
    for (const auto& m : p.muscles) msk::validate(m);
    msk::validate(p.activation);
    msk::validate(p.joint);
    msk::validate(p.geometry, p.muscles);
}

// Five-muscle wrist flexion/extension model: two flexors (positive moment
// arms) and three extensors. Paths are cubics around the neutral posture with
// fibers at optimal length at theta = 0. Values are physiologically plausible
// but synthetic; they define the ground-truth plant for generated datasets.
inline Plant default_wrist_plant() {
    Plant p;
    const double f_max[5] = {74.0, 120.0, 65.0, 88.0, 45.0};
    const double l_opt[5] = {0.070, 0.060, 0.080, 0.065, 0.062};
    const double l_ts[5] = {0.120, 0.130, 0.110, 0.120, 0.125};
    const double phi[5] = {0.05, 0.12, 0.02, 0.16, 0.06};
    const double c1[5] = {-0.012, -0.014, 0.011, 0.013, 0.010};
    const double c2[5] = {0.0015, -0.0010, 0.0012, -0.0014, 0.0010};
    const double c3[5] = {-0.0003, 0.0004, -0.0002, 0.0003, -0.0004};

    p.geometry.theta_min = -1.2;
    p.geometry.theta_max = 1.2;
    for (int i = 0; i < 5; ++i) {
        msk::MuscleParams m;
        m.f_max = f_max[i];
        m.l_opt = l_opt[i];
        m.l_tendon_slack = l_ts[i];
        m.phi_opt = phi[i];
        m.k_fl = 0.45;
        p.muscles.push_back(m);
        const double c0 = l_ts[i] + l_opt[i] * std::cos(phi[i]);
        p.geometry.mtu_coeffs.push_back({c0, c1[i], c2[i], c3[i]});
    }
    p.activation.a_shape = -1.5;

    p.joint.inertia = 0.005;
    p.joint.damping = 0.04;
    p.joint.mass = 0.5;
    p.joint.com_length = 0.06;
    return p;
}

// Gravity pendulum in muscle clothing: constant-length paths (zero moment
// arms) with fibers held short of optimal, so active and passive muscle
// forces contribute no torque. Wide angle range so the divergence guard, not
// the geometry check, catches runaways.
inline Plant pendulum_plant() {
    Plant p;
    msk::MuscleParams m;
    m.f_max = 50.0;
    m.l_opt = 0.07;
    m.l_tendon_slack = 0.12;
    m.phi_opt = 0.05;
    m.k_fl = 0.45;
    p.muscles.push_back(m);
    p.geometry.theta_min = -50.0;
    p.geometry.theta_max = 50.0;
    p.geometry.mtu_coeffs.push_back({m.l_tendon_slack + 0.9 * m.l_opt, 0.0, 0.0, 0.0});
    p.activation.a_shape = -1.5;
    p.joint.inertia = 0.005;
    p.joint.damping = 0.0;
    p.joint.mass = 0.5;
    p.joint.com_length = 0.06;
    return p;
}

} // namespace penn
