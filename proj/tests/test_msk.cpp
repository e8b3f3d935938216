#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "penn/msk.hpp"
#include "penn/rng.hpp"
#include "penn/tape.hpp"

using namespace penn;
using penn::ad::Tape;
using penn::ad::Var;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

msk::MuscleParams test_muscle() {
    msk::MuscleParams p;
    p.f_max = 100.0;
    p.l_opt = 0.05;
    p.l_tendon_slack = 0.15;
    p.phi_opt = 0.1;
    p.k_fl = 0.45;
    return p;
}

msk::MuscleParamsT<Var> on_tape(Tape& t, const msk::MuscleParams& p) {
    msk::MuscleParamsT<Var> q{t.leaf(p.f_max), t.leaf(p.l_opt), t.leaf(p.l_tendon_slack),
                              t.leaf(p.phi_opt), t.leaf(p.k_fl)};
    q.lambda_al = p.lambda_al;
    q.v_max_factor = p.v_max_factor;
    return q;
}

} // namespace

TEST_CASE("activation matches frozen values and fixed points") {
    msk::ActivationParams neg{-1.0};
    msk::ActivationParams pos{2.0};
    CHECK_THAT(msk::activation(0.5, neg), WithinAbs(0.6224593312018546, 1e-15));
    CHECK_THAT(msk::activation(0.25, pos), WithinAbs(0.1015363240915518, 1e-15));
    CHECK(msk::activation(0.0, neg) == 0.0);
    CHECK(msk::activation(1.0, neg) == 1.0);
    CHECK(msk::activation(0.0, pos) == 0.0);
    CHECK(msk::activation(1.0, pos) == 1.0);
}

TEST_CASE("activation rejects excitation outside [0,1]") {
    msk::ActivationParams ap{-1.0};
    CHECK_THROWS_AS(msk::activation(-0.1, ap), DomainError);
    CHECK_THROWS_AS(msk::activation(1.05, ap), DomainError);
}

TEST_CASE("activation is monotone increasing and bounded for admissible shapes") {
    Rng rng(91);
    for (int trial = 0; trial < 200; ++trial) {
        double mag = rng.uniform(0.01, 5.0);
        msk::ActivationParams ap{rng.bernoulli(0.5) ? mag : -mag};
        double u1 = rng.uniform();
        double u2 = rng.uniform();
        if (u1 > u2) std::swap(u1, u2);
        double a1 = msk::activation(u1, ap);
        double a2 = msk::activation(u2, ap);
        REQUIRE(a1 >= 0.0);
        REQUIRE(a2 <= 1.0);
        if (u2 - u1 > 1e-12) REQUIRE(a1 < a2 + 1e-15);
    }
}

TEST_CASE("pennation angle matches arcsin oracle") {
    msk::MuscleParams p = test_muscle();
    p.l_opt = 0.05;
    p.phi_opt = std::asin(0.2);  // fiber height 0.01
    double l_m = 0.04;           // arg = 0.01 / 0.04 = 0.25
    CHECK_THAT(msk::pennation_angle(l_m, p), WithinAbs(0.25268025514207865, 1e-15));
}

TEST_CASE("pennation angle rejects fibers shorter than the pennation height") {
    msk::MuscleParams p = test_muscle();
    p.phi_opt = 0.5;
    double h = p.l_opt * std::sin(p.phi_opt);
    CHECK_THROWS_AS(msk::pennation_angle(h * 0.9, p), DomainError);
}

TEST_CASE("normalized fiber length: activation shifts the reference") {
    msk::MuscleParams p = test_muscle();
    CHECK_THAT(msk::normalized_active_fiber_length(0.05, 0.0, p),
               WithinAbs(0.8695652173913044, 1e-15));
    CHECK_THAT(msk::normalized_active_fiber_length(0.05, 1.0, p), WithinAbs(1.0, 1e-15));
}

TEST_CASE("active force-length bell: frozen value, peak, symmetry") {
    CHECK_THAT(msk::active_force_length(1.5, 0.45), WithinAbs(0.5737534207374327, 1e-15));
    CHECK(msk::active_force_length(1.0, 0.45) == 1.0);

    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        double d = rng.uniform(0.0, 0.8);
        double k = rng.uniform(0.1, 2.0);
        CHECK_THAT(msk::active_force_length(1.0 + d, k),
                   WithinAbs(msk::active_force_length(1.0 - d, k), 1e-15));
    }
}

TEST_CASE("force-velocity: frozen values, boundary, clamp") {
    CHECK_THAT(msk::force_velocity(-0.5), WithinAbs(0.1875, 1e-15));
    CHECK_THAT(msk::force_velocity(1.0), WithinAbs(1.7766990291262137, 1e-15));
    CHECK_THAT(msk::force_velocity(0.1), WithinAbs(1.615384615384615, 1e-14));
    CHECK(msk::force_velocity(-1.0) == 0.0);
    CHECK(msk::force_velocity(-1.5) == 0.0);
    CHECK(msk::force_velocity(0.0) == 1.0);
    // the two branches agree at the rest point
    CHECK_THAT(msk::force_velocity(-1e-9), WithinAbs(1.0, 1e-7));
    CHECK_THAT(msk::force_velocity(1e-9), WithinAbs(1.0, 1e-7));
    // asymptote: gain never exceeds 1.8
    CHECK(msk::force_velocity(1e9) <= 1.8);
    CHECK(msk::force_velocity(1e9) > 1.79);
}

TEST_CASE("force-velocity is monotone nondecreasing") {
    Rng rng(23);
    for (int i = 0; i < 300; ++i) {
        double v1 = rng.uniform(-1.3, 3.0);
        double v2 = rng.uniform(-1.3, 3.0);
        if (v1 > v2) std::swap(v1, v2);
        REQUIRE(msk::force_velocity(v1) <= msk::force_velocity(v2) + 1e-12);
    }
}

TEST_CASE("passive force: zero up to optimal length, exponential above") {
    msk::MuscleParams p = test_muscle();
    CHECK(msk::passive_force(0.04, p) == 0.0);
    CHECK(msk::passive_force(0.05, p) == 0.0);
    CHECK_THAT(msk::passive_force(0.06, p), WithinRel(4.978706836786395, 1e-13));
    // height of the step at l_opt: F_max / e^5
    CHECK_THAT(msk::passive_force(0.05 * (1.0 + 1e-12), p),
               WithinAbs(0.6737946999085467, 1e-6));
}

TEST_CASE("rigid-tendon fiber length and the pennation identity") {
    msk::MuscleParams p = test_muscle();
    CHECK_THAT(msk::fiber_length_rigid_tendon(0.20, p),
               WithinAbs(0.05024855000593001, 1e-15));

    Rng rng(41);
    for (int i = 0; i < 200; ++i) {
        msk::MuscleParams q = test_muscle();
        q.l_opt = rng.uniform(0.02, 0.12);
        q.phi_opt = rng.uniform(0.0, 0.6);
        q.l_tendon_slack = rng.uniform(0.05, 0.3);
        double l_mt = q.l_tendon_slack + rng.uniform(0.2, 1.8) * q.l_opt;
        double l_m = msk::fiber_length_rigid_tendon(l_mt, q);
        // projection back onto the tendon line recovers the path length
        double cos_phi = std::cos(msk::pennation_angle(l_m, q));
        REQUIRE_THAT(l_m * cos_phi, WithinAbs(l_mt - q.l_tendon_slack, 1e-12));
    }
}

TEST_CASE("rigid tendon rejects paths at or below slack length") {
    msk::MuscleParams p = test_muscle();
    CHECK_THROWS_AS(msk::fiber_length_rigid_tendon(0.15, p), GeometryError);
    CHECK_THROWS_AS(msk::fiber_length_rigid_tendon(0.10, p), GeometryError);
}

TEST_CASE("fiber velocity is the projected path velocity") {
    msk::MuscleParams p = test_muscle();
    double l_mt = 0.205;
    double l_m = msk::fiber_length_rigid_tendon(l_mt, p);
    double expect = (l_mt - p.l_tendon_slack) / l_m * -0.01;
    CHECK_THAT(msk::fiber_velocity_rigid_tendon(l_mt, -0.01, p), WithinAbs(expect, 1e-16));
}

TEST_CASE("muscle-tendon force matches the frozen composite oracle") {
    msk::MuscleParams p = test_muscle();
    msk::ActivationParams ap{-1.0};
    double f = msk::muscle_tendon_force(0.5, 0.205, -0.01, p, ap);
    CHECK_THAT(f, WithinRel(58.6226408173583, 1e-12));
}

TEST_CASE("muscle-tendon force on tape is bitwise identical to the double path") {
    msk::MuscleParams p = test_muscle();
    msk::ActivationParams ap{-1.0};
    Rng rng(7);
    Tape t;
    for (int i = 0; i < 50; ++i) {
        double u = rng.uniform();
        double l_mt = 0.15 + rng.uniform(0.2, 1.8) * 0.05;
        double v_mt = rng.uniform(-0.2, 0.2);
        double fd = msk::muscle_tendon_force(u, l_mt, v_mt, p, ap);

        t.reset();
        auto q = on_tape(t, p);
        msk::ActivationParamsT<Var> aq{t.leaf(ap.a_shape)};
        Var fv = msk::muscle_tendon_force(Var(u), t.leaf(l_mt), Var(v_mt), q, aq);
        double fvv = fv.value();
        REQUIRE(std::memcmp(&fd, &fvv, sizeof(double)) == 0);
    }
}

TEST_CASE("muscle-force parameter gradients match finite differences") {
    msk::MuscleParams base = test_muscle();
    msk::ActivationParams ap{-1.5};
    const double u = 0.6, l_mt = 0.206, v_mt = -0.015;

    Tape t;
    auto q = on_tape(t, base);
    msk::ActivationParamsT<Var> aq{t.leaf(ap.a_shape)};
    Var f = msk::muscle_tendon_force(Var(u), t.leaf(l_mt), Var(v_mt), q, aq);
    t.backward(f);

    auto fd = [&](auto&& set, double h) {
        msk::MuscleParams lo = base, hi = base;
        msk::ActivationParams alo = ap, ahi = ap;
        set(lo, alo, -h);
        set(hi, ahi, +h);
        double a = msk::muscle_tendon_force(u, l_mt, v_mt, lo, alo);
        double b = msk::muscle_tendon_force(u, l_mt, v_mt, hi, ahi);
        return (b - a) / (2.0 * h);
    };
    auto check = [&](double got, double want) {
        double denom = std::max({std::fabs(got), std::fabs(want), 1e-8});
        REQUIRE(std::fabs(got - want) / denom < 1e-5);
    };

    check(q.f_max.adjoint(),
          fd([](auto& m, auto&, double h) { m.f_max += h; }, 1e-4));
    check(q.l_opt.adjoint(),
          fd([](auto& m, auto&, double h) { m.l_opt += h; }, 1e-7));
    check(q.l_tendon_slack.adjoint(),
          fd([](auto& m, auto&, double h) { m.l_tendon_slack += h; }, 1e-7));
    check(q.phi_opt.adjoint(),
          fd([](auto& m, auto&, double h) { m.phi_opt += h; }, 1e-6));
    check(q.k_fl.adjoint(),
          fd([](auto& m, auto&, double h) { m.k_fl += h; }, 1e-6));
    check(aq.a_shape.adjoint(),
          fd([](auto&, auto& a, double h) { a.a_shape += h; }, 1e-6));
}

TEST_CASE("mtu length and moment arm: cubic oracle and excursion identity") {
    msk::GeometryPoly g;
    g.mtu_coeffs.push_back({0.2, -0.015, 0.002, 0.0005});
    g.theta_min = -1.2;
    g.theta_max = 1.2;

    CHECK_THAT(msk::mtu_length(0.3, g, 0), WithinAbs(0.1956935, 1e-15));
    CHECK_THAT(msk::moment_arm(0.3, g, 0), WithinAbs(0.013665, 1e-15));

    // r = -dl/dtheta against central differences
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        double th = rng.uniform(-1.1, 1.1);
        double h = 1e-5;
        double num = -(msk::mtu_length(th + h, g, 0) - msk::mtu_length(th - h, g, 0)) / (2 * h);
        REQUIRE_THAT(msk::moment_arm(th, g, 0), WithinAbs(num, 1e-9));
    }
}

TEST_CASE("geometry rejects angles outside the configured range") {
    msk::GeometryPoly g;
    g.mtu_coeffs.push_back({0.2, -0.015, 0.0, 0.0});
    g.theta_min = -1.0;
    g.theta_max = 1.0;
    CHECK_THROWS_AS(msk::mtu_length(1.5, g, 0), DomainError);
    CHECK_THROWS_AS(msk::moment_arm(-1.5, g, 0), DomainError);
}

TEST_CASE("joint acceleration matches the rigid-pendulum balance") {
    msk::JointParams jp;
    jp.inertia = 0.005;
    jp.damping = 0.05;
    jp.mass = 0.5;
    jp.com_length = 0.06;
    double want = (0.5 - 0.05 * 1.0 - 0.5 * 9.81 * 0.06 * std::sin(0.2)) / 0.005;
    CHECK_THAT(msk::joint_acceleration(0.5, 0.2, 1.0, jp), WithinAbs(want, 1e-15));
}

TEST_CASE("joint torque is the moment-arm weighted sum of forces") {
    std::vector<double> f{2.0, 3.0};
    std::vector<double> r{0.5, -0.25};
    CHECK_THAT(msk::joint_torque_from_muscles<double>(f, r), WithinAbs(0.25, 1e-15));
    std::vector<double> bad{1.0};
    CHECK_THROWS_AS(msk::joint_torque_from_muscles<double>(f, bad), DomainError);
}

TEST_CASE("geometry validation flags slack violations across the range") {
    msk::MuscleParams p = test_muscle();  // slack 0.15
    msk::GeometryPoly ok;
    ok.mtu_coeffs.push_back({0.2, -0.015, 0.0, 0.0});
    ok.theta_min = -1.0;
    ok.theta_max = 1.0;
    CHECK_NOTHROW(msk::validate(ok, {p}));

    msk::GeometryPoly bad = ok;
    bad.mtu_coeffs[0][0] = 0.16;  // dips to 0.145 at theta = 1
    CHECK_THROWS_AS(msk::validate(bad, {p}), GeometryError);
}

TEST_CASE("parameter validation rejects out-of-range values") {
    msk::MuscleParams p = test_muscle();
    CHECK_NOTHROW(msk::validate(p));
    auto bad = p;
    bad.f_max = 0.0;
    CHECK_THROWS_AS(msk::validate(bad), DomainError);
    bad = p;
    bad.l_opt = -0.01;
    CHECK_THROWS_AS(msk::validate(bad), DomainError);
    bad = p;
    bad.phi_opt = 1.2;
    CHECK_THROWS_AS(msk::validate(bad), DomainError);

    CHECK_NOTHROW(msk::validate(msk::ActivationParams{-1.0}));
    CHECK_THROWS_AS(msk::validate(msk::ActivationParams{0.0}), DomainError);
    CHECK_THROWS_AS(msk::validate(msk::ActivationParams{6.0}), DomainError);

    msk::JointParams jp;
    jp.inertia = 0.005;
    jp.damping = 0.05;
    jp.mass = 0.5;
    jp.com_length = 0.06;
    CHECK_NOTHROW(msk::validate(jp));
    jp.inertia = 0.0;
    CHECK_THROWS_AS(msk::validate(jp), DomainError);
}
