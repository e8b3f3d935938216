#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "penn/dynamics.hpp"
#include "penn/errors.hpp"
#include "penn/nn.hpp"
#include "penn/plant.hpp"
#include "penn/rng.hpp"
#include "penn/tape.hpp"
#include "penn/trial.hpp"
#include "penn/windows.hpp"

// The recursive estimator: a differentiable forward-dynamics core plus a
// small convolutional residual network. Physics parameters are stored as
// unbounded coordinates and squashed into physiological ranges on decode, so
// the optimizer can never step the model into an invalid geometry.
namespace penn::model {

using penn::ad::Tape;
using penn::ad::Var;

template <class T>
T sigmoid(const T& z) {
    using std::exp;
    return T(1.0) / (T(1.0) + exp(-z));
}

inline double logit(double s) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("logit argument outside (0,1)");
    return std::log(s / (1.0 - s));
}

// Muscle parameters decode to scale factors in (0.5, 1.5) of their initial
// values; the shared activation shape trains inside a symmetric window around
// its initial value, capped so it can never leave [-5, -0.01]. Both maps are
// exact at z = 0: a fresh model reproduces its reference plant bit for bit.
inline constexpr double kScaleLo = 0.5;
inline constexpr double kShapeMin = -5.0;
inline constexpr double kShapeMax = -0.01;
inline constexpr std::size_t kPhysicsPerMuscle = 5;

struct ModelConfig {
    std::size_t window = 16;       // W, samples of excitation history per input
    double dropout_rate = 0.3;
    std::size_t conv_channels = 32;
    std::size_t conv_kernel = 3;
    std::size_t hidden = 32;
    std::size_t pool_stride = 1;   // 2 shortens the feature map (ablation switch)
};

template <class T>
struct ResidualNetT {
    nn::Conv1dLayer<T> conv;
    nn::DenseLayer<T> hidden;
    nn::DenseLayer<T> fusion;  // (hidden + 1) -> 1, zero-initialized
};

using ResidualNet = ResidualNetT<double>;

struct PennModel {
    Plant reference;        // anchors the bounded reparameterization
    std::vector<double> z;  // kPhysicsPerMuscle per muscle + shared shape
    ResidualNet net;
    ModelConfig cfg;
};

inline std::size_t physics_param_count(const Plant& p) {
    return kPhysicsPerMuscle * p.muscles.size() + 1;
}

// Half-width of the trainable window for the activation shape: symmetric
// around the initial value, clipped by the admissible range.
inline double shape_span(double a_init) {
    if (!(a_init > kShapeMin && a_init < kShapeMax))
        throw ConfigError("activation shape must start strictly inside (-5, -0.01)");
    return 2.0 * std::min(a_init - kShapeMin, kShapeMax - a_init);
}

inline PennModel make_model(const Plant& plant, ModelConfig cfg, std::uint64_t seed) {
    validate(plant);
    shape_span(plant.activation.a_shape);
    if (cfg.window < 1) throw ConfigError("model window must be >= 1");
    if (cfg.conv_kernel > cfg.window + 2)
        throw ConfigError("conv kernel exceeds padded window");
    PennModel m;
    m.reference = plant;
    m.cfg = cfg;
    m.z.assign(physics_param_count(plant), 0.0);
    Rng rng(Rng::derive(seed, 1));
    m.net.conv = nn::make_conv1d(plant.size() + 2, cfg.conv_channels, cfg.conv_kernel,
                                 1, 1, rng);
    m.net.hidden = nn::make_dense(cfg.conv_channels, cfg.hidden, rng);
    m.net.fusion = nn::make_dense_zero(cfg.hidden + 1, 1);
    return m;
}

template <class T>
struct DecodedPhysics {
    std::vector<msk::MuscleParamsT<T>> muscles;
    msk::ActivationParamsT<T> activation;
};

template <class T>
DecodedPhysics<T> decode_physics(const Plant& ref, std::span<const T> z) {
    if (z.size() != physics_param_count(ref))
        throw DomainError("physics coordinate vector has wrong size");
    DecodedPhysics<T> out;
    out.muscles.reserve(ref.muscles.size());
    for (std::size_t i = 0; i < ref.muscles.size(); ++i) {
        const auto& r = ref.muscles[i];
        const T* q = &z[i * kPhysicsPerMuscle];
        msk::MuscleParamsT<T> mp{
            r.f_max * (kScaleLo + sigmoid(q[0])),
            r.l_opt * (kScaleLo + sigmoid(q[1])),
            r.l_tendon_slack * (kScaleLo + sigmoid(q[2])),
            r.phi_opt * (kScaleLo + sigmoid(q[3])),
            r.k_fl * (kScaleLo + sigmoid(q[4])),
        };
        mp.lambda_al = r.lambda_al;
        mp.v_max_factor = r.v_max_factor;
        out.muscles.push_back(mp);
    }
    const double a0 = ref.activation.a_shape;
    out.activation.a_shape = a0 + shape_span(a0) * (sigmoid(z[z.size() - 1]) - 0.5);
    return out;
}

inline DecodedPhysics<double> decode_physics(const PennModel& m) {
    return decode_physics<double>(m.reference, std::span<const double>(m.z));
}

// Formats decoded parameters for diagnostics (divergence reports).
inline std::string describe_physics(const DecodedPhysics<double>& p) {
    std::ostringstream os;
    os.precision(6);
    for (std::size_t i = 0; i < p.muscles.size(); ++i) {
        const auto& m = p.muscles[i];
        os << "m" << i << "{f_max=" << m.f_max << " l_opt=" << m.l_opt
           << " l_ts=" << m.l_tendon_slack << " phi=" << m.phi_opt
           << " k=" << m.k_fl << "} ";
    }
    os << "A=" << p.activation.a_shape;
    return os.str();
}

// One recursive physics estimate. Geometry and rigid-body constants come from
// the reference plant; only muscle parameters and the activation shape train.
template <class T>
T physics_forward(const T& theta_prev, const T& theta_prev2, std::span<const T> u,
                  const DecodedPhysics<T>& phys, const Plant& ref, double dt) {
    return sim::physics_step<T>(theta_prev, theta_prev2, u, phys.muscles,
                                phys.activation, ref.geometry, ref.joint, dt);
}

template <class T>
nn::TensorT<T> window_tensor(const WindowSample& w) {
    nn::TensorT<T> x(w.rows, w.cols);
    for (std::size_t i = 0; i < w.x.size(); ++i) x.data[i] = T(w.x[i]);
    return x;
}

// Residual head: convolution over the window, pooled features, one hidden
// layer, then fusion with the physics estimate into a scalar correction.
template <class T>
T residual_forward(const nn::TensorT<T>& x, const T& theta_phy,
                   const ResidualNetT<T>& net, const ModelConfig& cfg, bool training,
                   Rng* dropout_rng) {
    nn::TensorT<T> h = nn::conv1d(x, net.conv);
    h = nn::relu(h);
    nn::MaxPoolSpec pool;
    pool.stride = cfg.pool_stride;
    h = nn::maxpool1d(h, pool);
    if (training) {
        if (dropout_rng == nullptr)
            throw DomainError("training-mode dropout requires an RNG");
        nn::dropout_inplace(h, cfg.dropout_rate, true, *dropout_rng);
    }
    std::vector<T> f = nn::global_avg_pool(h);
    f = nn::dense(f, net.hidden);
    f = nn::relu(f);
    if (training) nn::dropout_inplace(f, cfg.dropout_rate, true, *dropout_rng);
    f.push_back(theta_phy);
    return nn::dense(f, net.fusion)[0];
}

template <class T>
struct EstimateT {
    T theta_phy;
    T theta_res;
    T theta_hat;
};

using Estimate = EstimateT<double>;

// Full estimator on one window: excitations at the target time feed the
// physics step, the whole window feeds the residual head, and the two
// estimates add.
template <class T>
EstimateT<T> penn_estimate(const WindowSample& w, const Plant& ref,
                           const ModelConfig& cfg, const DecodedPhysics<T>& phys,
                           const ResidualNetT<T>& net, double dt, bool training = false,
                           Rng* dropout_rng = nullptr) {
    const std::size_t n = ref.size();
    if (w.rows != n + 2 || w.cols != cfg.window)
        throw DomainError("window shape does not match the model");
    std::vector<T> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = T(w.at(i, w.cols - 1));
    T th1 = T(w.at(n, w.cols - 1));
    T th2 = T(w.at(n + 1, w.cols - 1));
    EstimateT<T> e;
    e.theta_phy = physics_forward<T>(th1, th2, u, phys, ref, dt);
    nn::TensorT<T> x = window_tensor<T>(w);
    e.theta_res = residual_forward(x, e.theta_phy, net, cfg, training, dropout_rng);
    e.theta_hat = e.theta_phy + e.theta_res;
    return e;
}

inline Estimate penn_estimate(const WindowSample& w, const PennModel& m, double dt) {
    return penn_estimate<double>(w, m.reference, m.cfg, decode_physics(m), m.net, dt);
}

struct TrialEstimate {
    std::size_t first = 0;  // earliest estimated index; earlier entries are seeds
    std::vector<double> theta_phy;
    std::vector<double> theta_res;
    std::vector<double> theta_hat;
};

// Runs the estimator across a trial. Teacher-forced mode reads ground-truth
// history; free-running mode threads the model's own estimates back in, with
// the two seed entries taken from ground truth.
inline TrialEstimate estimate_trial(const PennModel& m, const Trial& trial,
                                    bool teacher_forced) {
    validate(trial);
    const std::size_t w = m.cfg.window;
    const std::size_t first = first_window_index(w);
    if (trial.length() < w + 2)
        throw DomainError("trial too short for the estimator window");
    if (trial.channels() != m.reference.size())
        throw DomainError("trial channel count does not match the model");
    const double dt = 1.0 / trial.fs;
    auto phys = decode_physics(m);

    TrialEstimate out;
    out.first = first;
    out.theta_phy = trial.angle;
    out.theta_res.assign(trial.length(), 0.0);
    out.theta_hat = trial.angle;
    std::vector<double> history = trial.angle;
    for (std::size_t t = first; t < trial.length(); ++t) {
        WindowSample sample = window_at(trial, history, w, t);
        Estimate e = penn_estimate<double>(sample, m.reference, m.cfg, phys, m.net, dt);
        out.theta_phy[t] = e.theta_phy;
        out.theta_res[t] = e.theta_res;
        out.theta_hat[t] = e.theta_hat;
        if (!teacher_forced) history[t] = e.theta_hat;
    }
    return out;
}

// Flat parameter views in a fixed order (conv w, conv b, hidden w, hidden b,
// fusion w, fusion b) shared by the optimizer and the checkpoint format.
inline std::size_t net_param_count(const ResidualNet& n) {
    return n.conv.w.size() + n.conv.b.size() + n.hidden.w.size() + n.hidden.b.size() +
           n.fusion.w.size() + n.fusion.b.size();
}

inline void net_params_out(const ResidualNet& n, std::vector<double>& flat) {
    flat.clear();
    flat.reserve(net_param_count(n));
    for (const auto* part : {&n.conv.w, &n.conv.b, &n.hidden.w, &n.hidden.b,
                             &n.fusion.w, &n.fusion.b})
        flat.insert(flat.end(), part->begin(), part->end());
}

inline void net_params_in(ResidualNet& n, std::span<const double> flat) {
    if (flat.size() != net_param_count(n))
        throw DomainError("flat parameter vector does not match the network");
    std::size_t at = 0;
    for (auto* part : {&n.conv.w, &n.conv.b, &n.hidden.w, &n.hidden.b, &n.fusion.w,
                       &n.fusion.b}) {
        std::copy(flat.begin() + static_cast<long>(at),
                  flat.begin() + static_cast<long>(at + part->size()), part->begin());
        at += part->size();
    }
}

inline ResidualNetT<Var> lift_net(Tape& t, const ResidualNet& n) {
    ResidualNetT<Var> out;
    out.conv.c_in = n.conv.c_in;
    out.conv.c_out = n.conv.c_out;
    out.conv.kernel = n.conv.kernel;
    out.conv.stride = n.conv.stride;
    out.conv.padding = n.conv.padding;
    out.hidden.in = n.hidden.in;
    out.hidden.out = n.hidden.out;
    out.fusion.in = n.fusion.in;
    out.fusion.out = n.fusion.out;
    auto lift = [&t](const std::vector<double>& src, std::vector<Var>& dst) {
        dst.reserve(src.size());
        for (double v : src) dst.push_back(t.leaf(v));
    };
    lift(n.conv.w, out.conv.w);
    lift(n.conv.b, out.conv.b);
    lift(n.hidden.w, out.hidden.w);
    lift(n.hidden.b, out.hidden.b);
    lift(n.fusion.w, out.fusion.w);
    lift(n.fusion.b, out.fusion.b);
    return out;
}

inline void net_grads(const ResidualNetT<Var>& lifted, std::vector<double>& g) {
    g.clear();
    for (const auto* part : {&lifted.conv.w, &lifted.conv.b, &lifted.hidden.w,
                             &lifted.hidden.b, &lifted.fusion.w, &lifted.fusion.b})
        for (const Var& v : *part) g.push_back(v.adjoint());
}

} // namespace penn::model
