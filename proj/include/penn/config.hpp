#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "penn/dynamics.hpp"
#include "penn/errors.hpp"
#include "penn/model.hpp"
#include "penn/plant.hpp"
#include "penn/preprocess.hpp"
#include "penn/train.hpp"

// Run configuration: a strict INI dialect with dotted sections. Every key is
// schema-checked, unknown keys are errors with file:line locations, and the
// resolved state serializes back to canonical text with exact doubles so a
// run can be reproduced from the artifact it wrote.

namespace penn::cfg {

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;  // <= 0 means the entry came from a command-line override
    bool used = false;
};

struct IniSection {
    std::string name;
    int line = 0;
    bool visited = false;
    std::vector<IniEntry> entries;
};

struct IniDoc {
    std::string source;  // label used in error messages, typically the filename
    std::vector<IniSection> sections;

    IniSection* find(std::string_view name) {
        for (auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline bool key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!key_char(c)) return false;
    return true;
}

// dot-separated key parts, each nonempty
inline bool valid_section(std::string_view s) {
    std::size_t at = 0;
    while (true) {
        const auto dot = s.find('.', at);
        const auto part = s.substr(at, dot == std::string_view::npos ? dot : dot - at);
        if (!valid_key(part)) return false;
        if (dot == std::string_view::npos) return true;
        at = dot + 1;
    }
}

inline std::string loc(const IniDoc& doc, int line) {
    if (line <= 0) return "--set";
    return doc.source + ":" + std::to_string(line);
}

inline double parse_double(const IniDoc& doc, const IniEntry& e, const std::string& path) {
    double v = 0.0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end)
        throw ConfigError(loc(doc, e.line) + ": " + path + " is not a number: '" +
                          e.value + "'");
    return v;
}

inline std::uint64_t parse_u64(const IniDoc& doc, const IniEntry& e, const std::string& path) {
    std::uint64_t v = 0;
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end)
        throw ConfigError(loc(doc, e.line) + ": " + path +
                          " is not a non-negative integer: '" + e.value + "'");
    return v;
}

inline bool parse_bool(const IniDoc& doc, const IniEntry& e, const std::string& path) {
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    throw ConfigError(loc(doc, e.line) + ": " + path + " must be true or false, got '" +
                      e.value + "'");
}

// shortest text that parses back to the identical double
inline std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

} // namespace detail

inline IniDoc parse_ini(std::string_view text, std::string source) {
    IniDoc doc;
    doc.source = std::move(source);
    int line_no = 0;
    std::size_t at = 0;
    while (at <= text.size()) {
        const auto nl = text.find('\n', at);
        const auto raw = text.substr(at, nl == std::string_view::npos ? nl : nl - at);
        at = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(detail::loc(doc, line_no) + ": unterminated section header");
            const std::string name = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            if (!detail::valid_section(name))
                throw ConfigError(detail::loc(doc, line_no) + ": invalid section name '" +
                                  name + "'");
            if (doc.find(name))
                throw ConfigError(detail::loc(doc, line_no) + ": duplicate section [" +
                                  name + "]");
            doc.sections.push_back({name, line_no, false, {}});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(detail::loc(doc, line_no) +
                              ": expected 'key = value' or '[section]'");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (!detail::valid_key(key))
            throw ConfigError(detail::loc(doc, line_no) + ": invalid key '" + key + "'");
        if (value.empty())
            throw ConfigError(detail::loc(doc, line_no) + ": key '" + key +
                              "' has no value");
        if (doc.sections.empty())
            throw ConfigError(detail::loc(doc, line_no) + ": key '" + key +
                              "' appears before any [section]");
        auto& sec = doc.sections.back();
        for (const auto& e : sec.entries)
            if (e.key == key)
                throw ConfigError(detail::loc(doc, line_no) + ": duplicate key '" + key +
                                  "' in [" + sec.name + "]");
        sec.entries.push_back({key, value, line_no, false});
    }
    return doc;
}

// "section.key=value" from a --set flag; the deepest dot splits section from
// key so muscle sections address as muscle.<name>.<key>.
inline void apply_override(IniDoc& doc, std::string_view spec) {
    const auto eq = spec.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("--set expects section.key=value, got '" + std::string(spec) + "'");
    const std::string path = detail::trim(spec.substr(0, eq));
    const std::string value = detail::trim(spec.substr(eq + 1));
    const auto dot = path.rfind('.');
    if (dot == std::string::npos)
        throw ConfigError("--set path '" + path + "' has no section");
    const std::string section = path.substr(0, dot);
    const std::string key = path.substr(dot + 1);
    if (!detail::valid_section(section) || !detail::valid_key(key))
        throw ConfigError("--set path '" + path + "' is not a valid section.key");
    if (value.empty()) throw ConfigError("--set '" + path + "' has no value");

    IniSection* sec = doc.find(section);
    if (!sec) {
        doc.sections.push_back({section, 0, false, {}});
        sec = &doc.sections.back();
    }
    for (auto& e : sec->entries)
        if (e.key == key) {
            e.value = value;
            e.line = 0;
            return;
        }
    sec->entries.push_back({key, value, 0, false});
}

struct RunConfig {
    std::uint64_t seed = 1;
    Plant plant;
    std::vector<std::string> muscle_names;  // section labels, channel order
    sim::SimConfig sim;
    std::size_t n_trials = 5;
    sig::EmgPipelineSpec filters;
    model::ModelConfig model;
    train::TrainConfig train;
    std::string out_dir;   // optional path defaults, flags take precedence
    std::string data_dir;
    std::string mvc_file;
};

namespace detail {

// typed access to one section; getters mark entries consumed so the final
// sweep can flag anything the schema did not recognize
class SectionReader {
  public:
    SectionReader(IniDoc& doc, std::string name) : doc_(doc), name_(std::move(name)) {
        sec_ = doc.find(name_);
        if (sec_) sec_->visited = true;
    }

    bool present() const { return sec_ != nullptr; }
    int header_line() const { return sec_ ? sec_->line : 0; }

    const IniEntry* raw(const std::string& key) {
        if (!sec_) return nullptr;
        for (auto& e : sec_->entries)
            if (e.key == key) {
                e.used = true;
                return &e;
            }
        return nullptr;
    }

    double number(const std::string& key, double def) {
        const auto* e = raw(key);
        return e ? parse_double(doc_, *e, path(key)) : def;
    }

    std::uint64_t u64(const std::string& key, std::uint64_t def) {
        const auto* e = raw(key);
        return e ? parse_u64(doc_, *e, path(key)) : def;
    }

    std::size_t usize(const std::string& key, std::size_t def) {
        const auto* e = raw(key);
        return e ? static_cast<std::size_t>(parse_u64(doc_, *e, path(key))) : def;
    }

    bool boolean(const std::string& key, bool def) {
        const auto* e = raw(key);
        return e ? parse_bool(doc_, *e, path(key)) : def;
    }

    std::string text(const std::string& key, std::string def) {
        const auto* e = raw(key);
        return e ? e->value : std::move(def);
    }

    double required_number(const std::string& key) {
        const auto* e = raw(key);
        if (!e)
            throw ConfigError(loc(doc_, header_line()) + ": [" + name_ +
                              "] is missing required key '" + key + "' (" + path(key) + ")");
        return parse_double(doc_, *e, path(key));
    }

  private:
    std::string path(const std::string& key) const { return name_ + "." + key; }

    IniDoc& doc_;
    std::string name_;
    IniSection* sec_ = nullptr;
};

} // namespace detail

inline RunConfig config_from_ini(IniDoc& doc) {
    RunConfig rc;

    detail::SectionReader run(doc, "run");
    rc.seed = run.u64("seed", 1);

    detail::SectionReader paths(doc, "paths");
    rc.out_dir = paths.text("out_dir", "");
    rc.data_dir = paths.text("data_dir", "");
    rc.mvc_file = paths.text("mvc_file", "");

    detail::SectionReader joint(doc, "joint");
    rc.plant.joint.inertia = joint.number("inertia", 0.005);
    rc.plant.joint.damping = joint.number("damping", 0.04);
    rc.plant.joint.mass = joint.number("mass", 0.5);
    rc.plant.joint.com_length = joint.number("com_length", 0.06);
    rc.plant.joint.gravity = joint.number("gravity", 9.81);

    detail::SectionReader act(doc, "activation");
    rc.plant.activation.a_shape = act.number("a_shape", -1.5);

    detail::SectionReader geom(doc, "geometry");
    rc.plant.geometry.theta_min = geom.number("theta_min_rad", -1.2);
    rc.plant.geometry.theta_max = geom.number("theta_max_rad", 1.2);

    for (auto& sec : doc.sections) {
        if (!sec.name.starts_with("muscle.")) continue;
        const std::string name = sec.name.substr(7);
        detail::SectionReader mu(doc, sec.name);
        msk::MuscleParams m;
        m.f_max = mu.required_number("f_max");
        m.l_opt = mu.required_number("l_opt");
        m.l_tendon_slack = mu.required_number("l_tendon_slack");
        m.phi_opt = mu.required_number("phi_opt_rad");
        m.k_fl = mu.required_number("k_fl");
        m.lambda_al = mu.number("lambda_al", m.lambda_al);
        m.v_max_factor = mu.number("v_max_factor", m.v_max_factor);
        std::array<double, 4> c{};
        c[0] = mu.required_number("mtu_c0");
        c[1] = mu.required_number("mtu_c1");
        c[2] = mu.required_number("mtu_c2");
        c[3] = mu.required_number("mtu_c3");
        rc.plant.muscles.push_back(m);
        rc.plant.geometry.mtu_coeffs.push_back(c);
        rc.muscle_names.push_back(name);
    }

    detail::SectionReader simr(doc, "simulate");
    rc.sim.dt = simr.number("dt", 0.001);
    rc.sim.duration = simr.number("duration", 10.0);
    rc.sim.theta_0 = simr.number("theta_0_rad", 0.0);
    rc.sim.theta_dot_0 = simr.number("theta_dot_0_rad_s", 0.0);
    rc.sim.noise_std = simr.number("noise_std", 0.0);
    rc.sim.seed = simr.u64("seed", rc.seed);
    rc.n_trials = simr.usize("n_trials", 5);

    detail::SectionReader exc(doc, "excitation");
    {
        auto& e = rc.sim.excitation;
        const std::string kind = exc.text("kind", "sum_of_sines");
        if (kind == "sum_of_sines")
            e.kind = sim::ExcitationKind::sum_of_sines;
        else if (kind == "random_walk")
            e.kind = sim::ExcitationKind::random_walk;
        else
            throw ConfigError(detail::loc(doc, exc.raw("kind") ? exc.raw("kind")->line : 0) +
                              ": excitation.kind must be sum_of_sines or random_walk, got '" +
                              kind + "'");
        e.base_lo = exc.number("base_lo", e.base_lo);
        e.base_hi = exc.number("base_hi", e.base_hi);
        e.amplitude = exc.number("amplitude", e.amplitude);
        e.freq_lo_hz = exc.number("freq_lo_hz", e.freq_lo_hz);
        e.freq_hi_hz = exc.number("freq_hi_hz", e.freq_hi_hz);
        e.components = static_cast<int>(exc.u64("components", static_cast<std::uint64_t>(e.components)));
        e.walk_step_std = exc.number("walk_step_std", e.walk_step_std);
        e.walk_tau_s = exc.number("walk_tau_s", e.walk_tau_s);
    }

    detail::SectionReader fil(doc, "filters");
    rc.filters.band_lo_hz = fil.number("band_lo_hz", rc.filters.band_lo_hz);
    rc.filters.band_hi_hz = fil.number("band_hi_hz", rc.filters.band_hi_hz);
    rc.filters.band_order = static_cast<int>(fil.u64("band_order", static_cast<std::uint64_t>(rc.filters.band_order)));
    rc.filters.envelope_hz = fil.number("envelope_hz", rc.filters.envelope_hz);
    rc.filters.envelope_order = static_cast<int>(fil.u64("envelope_order", static_cast<std::uint64_t>(rc.filters.envelope_order)));
    rc.filters.fs_out = fil.number("fs_out", rc.filters.fs_out);

    detail::SectionReader mod(doc, "model");
    rc.model.window = mod.usize("window", rc.model.window);
    rc.model.dropout_rate = mod.number("dropout_rate", rc.model.dropout_rate);
    rc.model.conv_channels = mod.usize("conv_channels", rc.model.conv_channels);
    rc.model.conv_kernel = mod.usize("conv_kernel", rc.model.conv_kernel);
    rc.model.hidden = mod.usize("hidden", rc.model.hidden);
    rc.model.pool_stride = mod.usize("pool_stride", rc.model.pool_stride);

    detail::SectionReader trn(doc, "train");
    rc.train.lr = trn.number("lr", rc.train.lr);
    rc.train.batch_phase1 = trn.usize("batch_phase1", rc.train.batch_phase1);
    rc.train.batch_phase2 = trn.usize("batch_phase2", rc.train.batch_phase2);
    rc.train.patience = trn.usize("patience", rc.train.patience);
    rc.train.split_train = trn.number("split_train", rc.train.split_train);
    rc.train.phase1_rel_tol = trn.number("phase1_rel_tol", rc.train.phase1_rel_tol);
    rc.train.phase1_tol_epochs = trn.usize("phase1_tol_epochs", rc.train.phase1_tol_epochs);
    rc.train.phase1_max_epochs = trn.usize("phase1_max_epochs", rc.train.phase1_max_epochs);
    rc.train.phase2_max_epochs = trn.usize("phase2_max_epochs", rc.train.phase2_max_epochs);
    rc.train.unfreeze_physics_phase2 = trn.boolean("unfreeze_physics_phase2", false);
    rc.train.seed = trn.u64("seed", rc.seed);

    for (const auto& sec : doc.sections) {
        if (!sec.visited)
            throw ConfigError(detail::loc(doc, sec.line) + ": unknown section [" +
                              sec.name + "]");
        for (const auto& e : sec.entries)
            if (!e.used)
                throw ConfigError(detail::loc(doc, e.line) + ": unknown key '" + e.key +
                                  "' in [" + sec.name + "]");
    }

    if (rc.plant.muscles.empty())
        throw ConfigError(doc.source + ": at least one [muscle.<name>] section is required");
    if (rc.n_trials < 1)
        throw ConfigError(doc.source + ": simulate.n_trials must be at least 1");
    try {
        validate(rc.plant);
    } catch (const DomainError& e) {
        throw ConfigError(doc.source + ": invalid plant: " + std::string(e.what()));
    }
    return rc;
}

// canonical resolved form: every value materialized, exact doubles, section
// order fixed, no comments
inline std::string config_to_ini(const RunConfig& rc) {
    using detail::fmt;
    std::string o;
    auto kv = [&o](const std::string& k, const std::string& v) {
        o += k;
        o += " = ";
        o += v;
        o += "\n";
    };

    o += "[run]\n";
    kv("seed", std::to_string(rc.seed));

    if (!rc.out_dir.empty() || !rc.data_dir.empty() || !rc.mvc_file.empty()) {
        o += "\n[paths]\n";
        if (!rc.out_dir.empty()) kv("out_dir", rc.out_dir);
        if (!rc.data_dir.empty()) kv("data_dir", rc.data_dir);
        if (!rc.mvc_file.empty()) kv("mvc_file", rc.mvc_file);
    }

    o += "\n[joint]\n";
    kv("inertia", fmt(rc.plant.joint.inertia));
    kv("damping", fmt(rc.plant.joint.damping));
    kv("mass", fmt(rc.plant.joint.mass));
    kv("com_length", fmt(rc.plant.joint.com_length));
    kv("gravity", fmt(rc.plant.joint.gravity));

    o += "\n[activation]\n";
    kv("a_shape", fmt(rc.plant.activation.a_shape));

    o += "\n[geometry]\n";
    kv("theta_min_rad", fmt(rc.plant.geometry.theta_min));
    kv("theta_max_rad", fmt(rc.plant.geometry.theta_max));

    for (std::size_t i = 0; i < rc.plant.muscles.size(); ++i) {
        const auto& m = rc.plant.muscles[i];
        const auto& c = rc.plant.geometry.mtu_coeffs[i];
        o += "\n[muscle." + rc.muscle_names[i] + "]\n";
        kv("f_max", fmt(m.f_max));
        kv("l_opt", fmt(m.l_opt));
        kv("l_tendon_slack", fmt(m.l_tendon_slack));
        kv("phi_opt_rad", fmt(m.phi_opt));
        kv("k_fl", fmt(m.k_fl));
        kv("lambda_al", fmt(m.lambda_al));
        kv("v_max_factor", fmt(m.v_max_factor));
        kv("mtu_c0", fmt(c[0]));
        kv("mtu_c1", fmt(c[1]));
        kv("mtu_c2", fmt(c[2]));
        kv("mtu_c3", fmt(c[3]));
    }

    o += "\n[simulate]\n";
    kv("dt", fmt(rc.sim.dt));
    kv("duration", fmt(rc.sim.duration));
    kv("theta_0_rad", fmt(rc.sim.theta_0));
    kv("theta_dot_0_rad_s", fmt(rc.sim.theta_dot_0));
    kv("noise_std", fmt(rc.sim.noise_std));
    kv("seed", std::to_string(rc.sim.seed));
    kv("n_trials", std::to_string(rc.n_trials));

    o += "\n[excitation]\n";
    kv("kind", rc.sim.excitation.kind == sim::ExcitationKind::sum_of_sines
                   ? "sum_of_sines"
                   : "random_walk");
    kv("base_lo", fmt(rc.sim.excitation.base_lo));
    kv("base_hi", fmt(rc.sim.excitation.base_hi));
    kv("amplitude", fmt(rc.sim.excitation.amplitude));
    kv("freq_lo_hz", fmt(rc.sim.excitation.freq_lo_hz));
    kv("freq_hi_hz", fmt(rc.sim.excitation.freq_hi_hz));
    kv("components", std::to_string(rc.sim.excitation.components));
    kv("walk_step_std", fmt(rc.sim.excitation.walk_step_std));
    kv("walk_tau_s", fmt(rc.sim.excitation.walk_tau_s));

    o += "\n[filters]\n";
    kv("band_lo_hz", fmt(rc.filters.band_lo_hz));
    kv("band_hi_hz", fmt(rc.filters.band_hi_hz));
    kv("band_order", std::to_string(rc.filters.band_order));
    kv("envelope_hz", fmt(rc.filters.envelope_hz));
    kv("envelope_order", std::to_string(rc.filters.envelope_order));
    kv("fs_out", fmt(rc.filters.fs_out));

    o += "\n[model]\n";
    kv("window", std::to_string(rc.model.window));
    kv("dropout_rate", fmt(rc.model.dropout_rate));
    kv("conv_channels", std::to_string(rc.model.conv_channels));
    kv("conv_kernel", std::to_string(rc.model.conv_kernel));
    kv("hidden", std::to_string(rc.model.hidden));
    kv("pool_stride", std::to_string(rc.model.pool_stride));

    o += "\n[train]\n";
    kv("lr", fmt(rc.train.lr));
    kv("batch_phase1", std::to_string(rc.train.batch_phase1));
    kv("batch_phase2", std::to_string(rc.train.batch_phase2));
    kv("patience", std::to_string(rc.train.patience));
    kv("split_train", fmt(rc.train.split_train));
    kv("phase1_rel_tol", fmt(rc.train.phase1_rel_tol));
    kv("phase1_tol_epochs", std::to_string(rc.train.phase1_tol_epochs));
    kv("phase1_max_epochs", std::to_string(rc.train.phase1_max_epochs));
    kv("phase2_max_epochs", std::to_string(rc.train.phase2_max_epochs));
    kv("unfreeze_physics_phase2", rc.train.unfreeze_physics_phase2 ? "true" : "false");
    kv("seed", std::to_string(rc.train.seed));
    return o;
}

inline RunConfig parse_run_config(std::string_view text, std::string source,
                                  const std::vector<std::string>& overrides = {}) {
    IniDoc doc = parse_ini(text, std::move(source));
    for (const auto& s : overrides) apply_override(doc, s);
    return config_from_ini(doc);
}

} // namespace penn::cfg
