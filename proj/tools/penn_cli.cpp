#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "penn/checkpoint.hpp"
#include "penn/config.hpp"
#include "penn/dynamics.hpp"
#include "penn/hash.hpp"
#include "penn/metrics.hpp"
#include "penn/model.hpp"
#include "penn/preprocess.hpp"
#include "penn/train.hpp"
#include "penn/trial_io.hpp"

// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

namespace {

using namespace penn;
namespace fs = std::filesystem;

constexpr double kRadToDeg = 180.0 / io::kPi;

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + p.string());
}

cfg::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    return cfg::parse_run_config(read_text(path), path, sets);
}

// flag wins over the [paths] fallback; both empty is an error
fs::path pick_dir(const std::string& flag, const std::string& fallback,
                  const char* what, const char* hint) {
    if (!flag.empty()) return flag;
    if (!fallback.empty()) return fallback;
    throw ConfigError(std::string("no ") + what + ": pass " + hint +
                      " or set it under [paths]");
}

std::vector<fs::path> list_trial_csvs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw ConfigError("no .csv trials in " + dir.string());
    return out;
}

std::vector<Trial> load_trials(const std::vector<fs::path>& files, std::size_t channels) {
    std::vector<Trial> trials;
    trials.reserve(files.size());
    for (const auto& f : files) {
        Trial t = io::load_trial(f);
        if (t.channels() != channels)
            throw ConfigError(f.string() + ": " + std::to_string(t.channels()) +
                              " channels, expected " + std::to_string(channels));
        trials.push_back(std::move(t));
    }
    return trials;
}

void write_hashes(const fs::path& out_dir, const std::vector<fs::path>& inputs) {
    std::string h;
    for (const auto& p : inputs) h += file_hash_hex(p) + "  " + p.string() + "\n";
    write_text(out_dir / "input_hashes.txt", h);
}

fs::path weights_path_for(const fs::path& manifest) {
    fs::path p = manifest;
    p.replace_extension();
    p += ".weights.bin";
    return p;
}

std::string losses_csv(const std::vector<train::EpochLog>& log) {
    std::string o = "epoch,phase,l_phy,l_res,l_total,split\n";
    for (const auto& row : log) {
        o += std::to_string(row.epoch);
        o += ',';
        o += std::to_string(row.phase);
        o += ',';
        o += fmt(row.l_phy);
        o += ',';
        o += fmt(row.l_res);
        o += ',';
        o += fmt(row.l_total);
        o += ',';
        o += row.split;
        o += '\n';
    }
    return o;
}

std::string trajectory_csv(const Trial& t, const model::TrialEstimate& est) {
    std::string o = "time_s,theta_deg,theta_phy_deg,theta_res_deg,theta_hat_deg\n";
    for (std::size_t k = 0; k < t.length(); ++k) {
        o += fmt(static_cast<double>(k) / t.fs);
        o += ',';
        o += fmt(t.angle[k] * kRadToDeg);
        o += ',';
        o += fmt(est.theta_phy[k] * kRadToDeg);
        o += ',';
        o += fmt(est.theta_res[k] * kRadToDeg);
        o += ',';
        o += fmt(est.theta_hat[k] * kRadToDeg);
        o += '\n';
    }
    return o;
}

struct TrialScores {
    std::vector<double> rmse_deg;
    std::vector<double> r2;
};

// metrics over the estimated span only (the first window+1 samples seed the
// recursion and are echoes of ground truth)
TrialScores score_trials(const model::PennModel& m, const std::vector<Trial>& trials,
                         bool teacher_forced) {
    TrialScores s;
    for (const auto& t : trials) {
        const auto est = model::estimate_trial(m, t, teacher_forced);
        std::span<const double> truth(t.angle.data() + est.first,
                                      t.angle.size() - est.first);
        std::span<const double> hat(est.theta_hat.data() + est.first,
                                    est.theta_hat.size() - est.first);
        s.rmse_deg.push_back(eval::rmse(truth, hat) * kRadToDeg);
        s.r2.push_back(eval::r_squared(truth, hat));
    }
    return s;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& sets,
                 const std::string& out_flag) {
    const auto rc = load_config(config_path, sets);
    const fs::path out = pick_dir(out_flag, rc.out_dir, "output directory", "--out");
    fs::create_directories(out);

    const auto trials = sim::generate_synthetic_dataset(rc.sim, rc.plant, rc.n_trials);
    char name[32];
    for (std::size_t i = 0; i < trials.size(); ++i) {
        std::snprintf(name, sizeof name, "trial_%03zu", i + 1);
        io::save_trial(out / name, trials[i]);
    }
    write_text(out / "resolved.ini", cfg::config_to_ini(rc));
    write_hashes(out, {config_path});

    std::printf("simulated %zu trials: %zu samples each, %s s at dt=%s s, %zu muscles -> %s\n",
                trials.size(), trials.front().length(), fmt(rc.sim.duration).c_str(),
                fmt(rc.sim.dt).c_str(), rc.plant.size(), out.string().c_str());
    return 0;
}

int cmd_preprocess(const std::string& config_path, const std::vector<std::string>& sets,
                   const std::string& raw_flag, const std::string& mvc_flag,
                   const std::string& out_flag) {
    const auto rc = load_config(config_path, sets);
    const fs::path raw = pick_dir(raw_flag, rc.data_dir, "raw directory", "--raw");
    const fs::path out = pick_dir(out_flag, rc.out_dir, "output directory", "--out");
    if (mvc_flag.empty() && rc.mvc_file.empty())
        throw ConfigError("no MVC table: pass --mvc or set it under [paths]");
    const fs::path mvc_path = mvc_flag.empty() ? fs::path(rc.mvc_file) : fs::path(mvc_flag);
    fs::create_directories(out);

    const auto files = list_trial_csvs(raw);
    Trial first = io::load_trial(files.front());
    const std::size_t channels = first.channels();
    const auto mvc = io::load_mvc(mvc_path, channels);
    auto trials = load_trials(files, channels);

    for (std::size_t i = 0; i < trials.size(); ++i) {
        const Trial& t = trials[i];
        Trial o;
        o.fs = rc.filters.fs_out;
        o.emg = sig::preprocess_emg(t.emg, t.fs, mvc, rc.filters);
        o.angle = sig::resample_linear(sig::smooth_angle(t.angle, t.fs), t.fs,
                                       rc.filters.fs_out);
        o.meta = t.meta + " | preprocessed";
        validate_normalized(o);
        io::save_trial(out / files[i].stem(), o);
    }

    write_text(out / "resolved.ini", cfg::config_to_ini(rc));
    std::vector<fs::path> inputs{config_path, mvc_path};
    inputs.insert(inputs.end(), files.begin(), files.end());
    write_hashes(out, inputs);

    std::printf("preprocessed %zu trials (%zu channels) at %s Hz -> %s\n", trials.size(),
                channels, fmt(rc.filters.fs_out).c_str(), out.string().c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data_flag, const std::string& out_flag,
              const std::string& resume_path) {
    const auto rc = load_config(config_path, sets);
    const fs::path data = pick_dir(data_flag, rc.data_dir, "data directory", "--data");
    const fs::path out = pick_dir(out_flag, rc.out_dir, "output directory", "--out");
    fs::create_directories(out);

    const auto files = list_trial_csvs(data);
    const auto trials = load_trials(files, rc.plant.size());
    auto [tr, va] = train::split_dataset(trials, rc.train.split_train, rc.train.seed);

    model::PennModel m;
    std::vector<train::EpochLog> log;
    if (resume_path.empty()) {
        m = model::make_model(rc.plant, rc.model, rc.train.seed);
        log = train::train_phase_one(tr, m, rc.train);
        ckpt::CheckpointMeta meta1;
        meta1.phase = 1;
        meta1.epoch = log.size();
        meta1.seed = rc.train.seed;
        if (!log.empty()) {
            meta1.l_phy = log.back().l_phy;
            meta1.l_total = log.back().l_total;
        }
        ckpt::save_checkpoint(out / "phase1", m, meta1);
        if (log.empty())
            std::printf("phase one: skipped (phase1_max_epochs = 0)\n");
        else
            std::printf("phase one: %zu epochs, final L_phy=%s\n", log.size(),
                        fmt(log.back().l_phy).c_str());
    } else {
        auto lc = ckpt::load_checkpoint(resume_path);
        if (lc.meta.phase < 1)
            throw ConfigError(resume_path + ": checkpoint has not completed phase one");
        if (lc.model.reference.size() != trials.front().channels())
            throw ConfigError(resume_path + ": checkpoint muscle count does not match data");
        m = std::move(lc.model);
        std::printf("resumed from %s (phase %d, epoch %zu)\n", resume_path.c_str(),
                    lc.meta.phase, lc.meta.epoch);
    }

    const auto log2 = train::train_phase_two(tr, va, m, rc.train);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : log2)
        if (row.split == "val") best = std::min(best, row.l_res);
    log.insert(log.end(), log2.begin(), log2.end());

    ckpt::CheckpointMeta meta2;
    meta2.phase = 2;
    meta2.epoch = log2.size() / 2;  // one train row and one val row per epoch
    meta2.seed = rc.train.seed;
    if (std::isfinite(best)) {
        meta2.l_res = best;
        meta2.l_total = best;
    }
    ckpt::save_checkpoint(out / "phase2", m, meta2);

    write_text(out / "losses.csv", losses_csv(log));
    write_text(out / "resolved.ini", cfg::config_to_ini(rc));
    std::vector<fs::path> inputs{config_path};
    inputs.insert(inputs.end(), files.begin(), files.end());
    if (!resume_path.empty()) {
        inputs.push_back(resume_path);
        inputs.push_back(weights_path_for(resume_path));
    }
    write_hashes(out, inputs);

    const std::string best_s = std::isfinite(best) ? fmt(best) : "n/a";
    std::printf("phase two: %zu epochs, best val L_res=%s\n", log2.size() / 2,
                best_s.c_str());
    std::printf("checkpoints and losses.csv -> %s\n", out.string().c_str());
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_flag,
                 const std::string& out_flag, const std::string& compare_path) {
    auto lc = ckpt::load_checkpoint(ckpt_path);
    const fs::path data = pick_dir(data_flag, "", "data directory", "--data");
    const fs::path out = pick_dir(out_flag, "", "output directory", "--out");
    fs::create_directories(out);

    const auto files = list_trial_csvs(data);
    const auto trials = load_trials(files, lc.model.reference.size());

    TrialScores free_run;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto est = model::estimate_trial(lc.model, trials[i], false);
        write_text(out / (files[i].stem().string() + "_trajectory.csv"),
                   trajectory_csv(trials[i], est));
    }
    free_run = score_trials(lc.model, trials, false);
    const TrialScores teacher = score_trials(lc.model, trials, true);

    const std::string tag = fs::path(ckpt_path).stem().string() + " on " + data.string();
    const auto rep_free =
        eval::make_report("free-running", tag, free_run.rmse_deg, free_run.r2);
    const auto rep_teacher =
        eval::make_report("teacher-forced", tag, teacher.rmse_deg, teacher.r2);

    write_text(out / "metrics.csv", eval::report_csv(rep_free));
    write_text(out / "metrics_teacher_forced.csv", eval::report_csv(rep_teacher));

    std::string report = eval::report_table(rep_free) + "\n" + eval::report_table(rep_teacher);

    std::vector<fs::path> inputs{ckpt_path, weights_path_for(ckpt_path)};
    inputs.insert(inputs.end(), files.begin(), files.end());

    if (!compare_path.empty()) {
        auto other = ckpt::load_checkpoint(compare_path);
        if (other.model.reference.size() != lc.model.reference.size())
            throw ConfigError(compare_path + ": muscle count differs from " + ckpt_path);
        const TrialScores other_free = score_trials(other.model, trials, false);
        const auto tt = eval::paired_t_test(free_run.rmse_deg, other_free.rmse_deg);
        double mean_b = 0.0;
        for (double v : other_free.rmse_deg) mean_b += v;
        mean_b /= static_cast<double>(other_free.rmse_deg.size());
        std::string block = "\npaired t-test on per-trial free-running rmse_deg (A - B)\n";
        block += "  A = " + ckpt_path + " (mean " + fmt(rep_free.rmse_mean) + ")\n";
        block += "  B = " + compare_path + " (mean " + fmt(mean_b) + ")\n";
        block += "  t = " + fmt(tt.t) + ", dof = " + fmt(tt.dof) + ", p = " + fmt(tt.p);
        if (!tt.stars.empty()) block += " " + tt.stars;
        if (tt.degenerate) block += " (degenerate: zero-variance differences)";
        block += "\n";
        report += block;
        inputs.push_back(compare_path);
        inputs.push_back(weights_path_for(compare_path));
    }

    write_text(out / "report.txt", report);
    write_hashes(out, inputs);
    std::fputs(report.c_str(), stdout);
    std::printf("trajectories and metrics -> %s\n", out.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"surface-EMG driven joint angle estimation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_flag, data_flag, raw_flag, mvc_flag;
    std::string ckpt_path, compare_path, resume_path;
    std::vector<std::string> sets;

    auto* sim_cmd = app.add_subcommand("simulate", "synthesize trials from the configured plant");
    sim_cmd->add_option("--config", config_path, "run configuration (INI)")->required();
    sim_cmd->add_option("--set", sets, "override: section.key=value");
    sim_cmd->add_option("--out", out_flag, "output directory");

    auto* pre_cmd = app.add_subcommand("preprocess", "filter, normalize, and resample raw trials");
    pre_cmd->add_option("--config", config_path, "run configuration (INI)")->required();
    pre_cmd->add_option("--set", sets, "override: section.key=value");
    pre_cmd->add_option("--raw", raw_flag, "directory of raw trial CSVs");
    pre_cmd->add_option("--mvc", mvc_flag, "MVC table (channel,mvc)");
    pre_cmd->add_option("--out", out_flag, "output directory");

    auto* train_cmd = app.add_subcommand("train", "two-phase training on a trial directory");
    train_cmd->add_option("--config", config_path, "run configuration (INI)")->required();
    train_cmd->add_option("--set", sets, "override: section.key=value");
    train_cmd->add_option("--data", data_flag, "directory of trial CSVs");
    train_cmd->add_option("--out", out_flag, "output directory");
    train_cmd->add_option("--resume", resume_path, "phase-one checkpoint manifest to resume from");

    auto* eval_cmd = app.add_subcommand("evaluate", "free-running estimation and metric reports");
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint manifest (.json)")->required();
    eval_cmd->add_option("--data", data_flag, "directory of trial CSVs")->required();
    eval_cmd->add_option("--out", out_flag, "output directory")->required();
    eval_cmd->add_option("--compare", compare_path, "second checkpoint for a paired t-test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help exits 0; any usage problem is a configuration error
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (sim_cmd->parsed()) return cmd_simulate(config_path, sets, out_flag);
        if (pre_cmd->parsed())
            return cmd_preprocess(config_path, sets, raw_flag, mvc_flag, out_flag);
        if (train_cmd->parsed())
            return cmd_train(config_path, sets, data_flag, out_flag, resume_path);
        if (eval_cmd->parsed())
            return cmd_evaluate(ckpt_path, data_flag, out_flag, compare_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const GeometryError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
