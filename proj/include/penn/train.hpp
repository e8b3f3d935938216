#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "penn/adam.hpp"
#include "penn/errors.hpp"
#include "penn/losses.hpp"
#include "penn/model.hpp"
#include "penn/rng.hpp"
#include "penn/trial.hpp"
#include "penn/windows.hpp"

namespace penn::train {

using penn::ad::Tape;
using penn::ad::Var;

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch_phase1 = 1;
    std::size_t batch_phase2 = 32;
    std::size_t patience = 30;        // phase-two early stopping, epochs
    double split_train = 0.85;
    double phase1_rel_tol = 1e-4;     // relative epoch-loss improvement
    std::size_t phase1_tol_epochs = 5;
    std::size_t phase1_max_epochs = 200;
    std::size_t phase2_max_epochs = 200;
    bool unfreeze_physics_phase2 = false;
    std::uint64_t seed = 1;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based within its phase
    int phase = 0;
    double l_phy = 0.0;
    double l_res = 0.0;
    double l_total = 0.0;
    std::string split;  // "train" or "val"
};

// Trial-level split: no window of one trial ever lands on both sides.
// Train side gets floor(fraction * n), clamped so both sides are nonempty.
inline std::pair<std::vector<Trial>, std::vector<Trial>> split_dataset(
    const std::vector<Trial>& trials, double train_fraction, std::uint64_t seed) {
    if (trials.size() < 2) throw ConfigError("need at least 2 trials to split");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0, 1)");
    const double n = static_cast<double>(trials.size());
    std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * n + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, trials.size() - 1);

    std::vector<std::size_t> idx(trials.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(Rng::derive(seed, 5));
    rng.shuffle(idx);
    std::pair<std::vector<Trial>, std::vector<Trial>> out;
    for (std::size_t k = 0; k < idx.size(); ++k)
        (k < n_train ? out.first : out.second).push_back(trials[idx[k]]);
    return out;
}

namespace detail {

struct Sample {
    std::size_t trial = 0;
    std::size_t t = 0;
};

inline std::vector<Sample> collect_samples(const std::vector<Trial>& trials,
                                           std::size_t window,
                                           const model::PennModel& m) {
    std::vector<Sample> samples;
    for (std::size_t k = 0; k < trials.size(); ++k) {
        validate(trials[k]);
        if (trials[k].channels() != m.reference.size())
            throw ConfigError("trial channel count does not match the model");
        if (trials[k].length() < window + 2)
            throw ConfigError("trial too short to form any training window");
        for (std::size_t t = first_window_index(window); t < trials[k].length(); ++t)
            samples.push_back({k, t});
    }
    if (samples.empty()) throw ConfigError("no training samples");
    return samples;
}

[[noreturn]] inline void report_divergence(int phase, std::size_t epoch,
                                           const model::PennModel& m) {
    std::ostringstream os;
    os << "phase " << phase << " diverged at epoch " << epoch
       << "; decoded parameters: " << model::describe_physics(model::decode_physics(m));
    throw NumericalError(os.str());
}

} // namespace detail

// Phase one: calibrate the physics parameters alone, teacher forced, one
// window per optimizer step. The fusion layer must still be zero (a fresh
// model), so the residual head plays no role yet and L_res == L_phy.
inline std::vector<EpochLog> train_phase_one(const std::vector<Trial>& trials,
                                             model::PennModel& m,
                                             const TrainConfig& cfg) {
    for (double v : m.net.fusion.w)
        if (v != 0.0) throw ConfigError("phase one requires a zero fusion layer");
    for (double v : m.net.fusion.b)
        if (v != 0.0) throw ConfigError("phase one requires a zero fusion layer");
    if (cfg.batch_phase1 != 1)
        throw ConfigError("phase one optimizes one window per step");

    auto samples = detail::collect_samples(trials, m.cfg.window, m);
    opt::AdamState adam;
    adam.lr = cfg.lr;
    adam.init(m.z.size());
    Rng shuffler(Rng::derive(cfg.seed, 2));
    Tape tape;
    std::vector<double> grads(m.z.size());
    std::vector<EpochLog> log;

    double prev_loss = std::numeric_limits<double>::quiet_NaN();
    std::size_t flat_epochs = 0;
    for (std::size_t epoch = 1; epoch <= cfg.phase1_max_epochs; ++epoch) {
        shuffler.shuffle(samples);
        double sum = 0.0;
        for (const auto& s : samples) {
            const Trial& tr = trials[s.trial];
            const double dt = 1.0 / tr.fs;
            tape.reset();
            std::vector<Var> zv;
            zv.reserve(m.z.size());
            for (double z : m.z) zv.push_back(tape.leaf(z));
            auto phys = model::decode_physics<Var>(m.reference, zv);
            std::vector<Var> u(tr.channels());
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = Var(tr.emg[i][s.t]);
            Var phy = model::physics_forward<Var>(Var(tr.angle[s.t - 1]),
                                                  Var(tr.angle[s.t - 2]), u, phys,
                                                  m.reference, dt);
            Var d = phy - tr.angle[s.t];
            Var loss = d * d;
            if (!std::isfinite(loss.value()))
                detail::report_divergence(1, epoch, m);
            tape.backward(loss);
            for (std::size_t i = 0; i < zv.size(); ++i) grads[i] = zv[i].adjoint();
            opt::adam_step(m.z, grads, adam);
            sum += loss.value();
        }
        const double epoch_loss = sum / static_cast<double>(samples.size());
        if (!std::isfinite(epoch_loss)) detail::report_divergence(1, epoch, m);
        // fusion layer is zero, so the residual estimate is identically zero
        // and the two objectives coincide
        log.push_back({epoch, 1, epoch_loss, epoch_loss, epoch_loss, "train"});

        if (epoch_loss < 1e-12) break;
        if (epoch > 1) {
            const double rel = (prev_loss - epoch_loss) / std::max(prev_loss, 1e-300);
            flat_epochs = (rel < cfg.phase1_rel_tol) ? flat_epochs + 1 : 0;
            if (flat_epochs >= cfg.phase1_tol_epochs) break;
        }
        prev_loss = epoch_loss;
    }
    return log;
}

namespace detail {

// Window inputs and targets materialized once; the physics estimate is
// appended when parameters are frozen (it is then a constant of training).
struct Prepared {
    std::vector<WindowSample> windows;
    std::vector<double> theta_phy;
    std::vector<double> dt;  // per window, from its trial's sampling rate
};

inline Prepared prepare(const std::vector<Trial>& trials, const model::PennModel& m,
                        bool with_physics) {
    Prepared p;
    auto samples = collect_samples(trials, m.cfg.window, m);
    auto phys = model::decode_physics(m);
    p.windows.reserve(samples.size());
    p.dt.reserve(samples.size());
    for (const auto& s : samples) {
        const Trial& tr = trials[s.trial];
        p.windows.push_back(window_at(tr, tr.angle, m.cfg.window, s.t));
        p.dt.push_back(1.0 / tr.fs);
        if (with_physics) {
            const WindowSample& w = p.windows.back();
            const std::size_t n = tr.channels();
            std::vector<double> u(n);
            for (std::size_t i = 0; i < n; ++i) u[i] = w.at(i, w.cols - 1);
            p.theta_phy.push_back(model::physics_forward<double>(
                w.at(n, w.cols - 1), w.at(n + 1, w.cols - 1), u, phys, m.reference,
                p.dt.back()));
        }
    }
    return p;
}

inline double mean_l_phy(const Prepared& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.windows.size(); ++i) {
        const double d = p.theta_phy[i] - p.windows[i].target;
        s += d * d;
    }
    return s / static_cast<double>(p.windows.size());
}

// Physics loss under the model's current parameters (for unfrozen phase two,
// where the frozen precomputation does not exist).
inline double eval_l_phy(const Prepared& p, const model::PennModel& m) {
    auto phys = model::decode_physics(m);
    double s = 0.0;
    for (std::size_t i = 0; i < p.windows.size(); ++i) {
        const WindowSample& w = p.windows[i];
        const std::size_t n = w.rows - 2;
        std::vector<double> u(n);
        for (std::size_t c = 0; c < n; ++c) u[c] = w.at(c, w.cols - 1);
        const double phy = model::physics_forward<double>(
            w.at(n, w.cols - 1), w.at(n + 1, w.cols - 1), u, phys, m.reference,
            p.dt[i]);
        const double d = phy - w.target;
        s += d * d;
    }
    return s / static_cast<double>(p.windows.size());
}

// Held-out residual loss in evaluation mode (no dropout), double path.
inline double eval_l_res(const Prepared& p, const model::PennModel& m) {
    auto phys = model::decode_physics(m);
    double s = 0.0;
    for (std::size_t i = 0; i < p.windows.size(); ++i) {
        auto e = model::penn_estimate<double>(p.windows[i], m.reference, m.cfg, phys,
                                              m.net, p.dt[i]);
        const double d = e.theta_hat - p.windows[i].target;
        s += d * d;
    }
    return s / static_cast<double>(p.windows.size());
}

} // namespace detail

// Phase two: train the residual network on shuffled window batches, teacher
// forced, monitoring the residual loss on a held-out split. Physics
// parameters stay frozen unless explicitly unfrozen; on stop, the best
// weights seen on the held-out split are restored.
inline std::vector<EpochLog> train_phase_two(const std::vector<Trial>& train_trials,
                                             const std::vector<Trial>& val_trials,
                                             model::PennModel& m,
                                             const TrainConfig& cfg) {
    if (cfg.batch_phase2 < 1) throw ConfigError("phase two batch size must be >= 1");
    if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
    const bool frozen = !cfg.unfreeze_physics_phase2;

    detail::Prepared tr = detail::prepare(train_trials, m, frozen);
    detail::Prepared va = detail::prepare(val_trials, m, frozen);

    std::vector<double> params;
    model::net_params_out(m.net, params);
    const std::size_t n_net = params.size();
    if (!frozen) params.insert(params.end(), m.z.begin(), m.z.end());

    opt::AdamState adam;
    adam.lr = cfg.lr;
    adam.init(params.size());
    Rng shuffler(Rng::derive(cfg.seed, 3));
    Rng dropout(Rng::derive(cfg.seed, 4));
    Tape tape;

    std::vector<std::size_t> order(tr.windows.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> log;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = params;
    std::size_t stale = 0;
    std::vector<double> grads;

    for (std::size_t epoch = 1; epoch <= cfg.phase2_max_epochs; ++epoch) {
        shuffler.shuffle(order);
        double sum = 0.0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_phase2) {
            const std::size_t stop = std::min(order.size(), at + cfg.batch_phase2);
            tape.reset();
            auto net = model::lift_net(tape, m.net);
            std::vector<Var> zv;
            model::DecodedPhysics<Var> physv;
            if (!frozen) {
                zv.reserve(m.z.size());
                for (double z : m.z) zv.push_back(tape.leaf(z));
                physv = model::decode_physics<Var>(m.reference, zv);
            }
            Var batch_loss(0.0);
            for (std::size_t k = at; k < stop; ++k) {
                const WindowSample& w = tr.windows[order[k]];
                Var phy(0.0);
                if (frozen) {
                    phy = Var(tr.theta_phy[order[k]]);
                } else {
                    const std::size_t n = w.rows - 2;
                    std::vector<Var> u(n);
                    for (std::size_t i = 0; i < n; ++i) u[i] = Var(w.at(i, w.cols - 1));
                    phy = model::physics_forward<Var>(Var(w.at(n, w.cols - 1)),
                                                      Var(w.at(n + 1, w.cols - 1)), u,
                                                      physv, m.reference,
                                                      tr.dt[order[k]]);
                }
                auto x = model::window_tensor<Var>(w);
                Var res = model::residual_forward(x, phy, net, m.cfg, true, &dropout);
                Var d = res + phy - w.target;
                batch_loss = batch_loss + d * d;
            }
            batch_loss = batch_loss * Var(1.0 / static_cast<double>(stop - at));
            if (!std::isfinite(batch_loss.value()))
                detail::report_divergence(2, epoch, m);
            tape.backward(batch_loss);
            model::net_grads(net, grads);
            if (!frozen)
                for (const Var& z : zv) grads.push_back(z.adjoint());
            opt::adam_step(params, grads, adam);
            model::net_params_in(m.net, std::span<const double>(params.data(), n_net));
            if (!frozen)
                std::copy(params.begin() + static_cast<long>(n_net), params.end(),
                          m.z.begin());
            sum += batch_loss.value() * static_cast<double>(stop - at);
        }
        const double train_l_res = sum / static_cast<double>(order.size());
        if (!std::isfinite(train_l_res)) detail::report_divergence(2, epoch, m);

        const double train_l_phy =
            frozen ? detail::mean_l_phy(tr) : detail::eval_l_phy(tr, m);
        const double val_l_phy =
            frozen ? detail::mean_l_phy(va) : detail::eval_l_phy(va, m);
        const double val_l_res = detail::eval_l_res(va, m);
        log.push_back({epoch, 2, train_l_phy, train_l_res, train_l_res, "train"});
        log.push_back({epoch, 2, val_l_phy, val_l_res, val_l_res, "val"});

        if (val_l_res < best_val) {
            best_val = val_l_res;
            best_params = params;
            stale = 0;
        } else {
            ++stale;
            if (stale >= cfg.patience) break;
        }
    }

    model::net_params_in(m.net, std::span<const double>(best_params.data(), n_net));
    if (!frozen)
        std::copy(best_params.begin() + static_cast<long>(n_net), best_params.end(),
                  m.z.begin());
    return log;
}

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t phase1_epochs = 0;
    std::size_t phase2_epochs = 0;
    double best_val_l_res = std::numeric_limits<double>::quiet_NaN();
    std::vector<Trial> train_set;
    std::vector<Trial> val_set;
};

// Full recipe: trial-level split, physics calibration, then residual training.
inline TrainResult train_penn(const std::vector<Trial>& trials, model::PennModel& m,
                              const TrainConfig& cfg) {
    TrainResult out;
    auto [tr, va] = split_dataset(trials, cfg.split_train, cfg.seed);
    out.train_set = std::move(tr);
    out.val_set = std::move(va);

    auto log1 = train_phase_one(out.train_set, m, cfg);
    out.phase1_epochs = log1.size();
    out.log = std::move(log1);

    auto log2 = train_phase_two(out.train_set, out.val_set, m, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : log2)
        if (row.split == "val") best = std::min(best, row.l_res);
    out.best_val_l_res = best;
    out.phase2_epochs = log2.empty() ? 0 : log2.back().epoch;
    out.log.insert(out.log.end(), log2.begin(), log2.end());
    return out;
}

} // namespace penn::train
