#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "penn/errors.hpp"
#include "penn/hash.hpp"
#include "penn/model.hpp"
#include "penn/plant.hpp"

// Checkpoint = JSON manifest + raw weights blob. The manifest carries the
// training state, hyperparameters, and the full reference plant, so a
// checkpoint alone reconstructs the model; the blob carries every trainable
// double verbatim for bit-exact resume.
namespace penn::ckpt {

static_assert(std::endian::native == std::endian::little,
              "weights blob stores raw little-endian doubles");

inline constexpr char kMagic[8] = {'P', 'E', 'N', 'N', 'W', 'B', '0', '1'};
inline constexpr int kVersion = 1;

struct CheckpointMeta {
    int phase = 0;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
    double l_phy = std::numeric_limits<double>::quiet_NaN();
    double l_res = std::numeric_limits<double>::quiet_NaN();
    double l_total = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

using nlohmann::json;

// flat trainable vector: physics coordinates first, then the network in its
// canonical parameter order
inline std::vector<double> flatten(const model::PennModel& m) {
    std::vector<double> flat(m.z.begin(), m.z.end());
    std::vector<double> net;
    model::net_params_out(m.net, net);
    flat.insert(flat.end(), net.begin(), net.end());
    return flat;
}

inline json plant_to_json(const Plant& p) {
    json muscles = json::array();
    for (const auto& m : p.muscles)
        muscles.push_back({{"f_max", m.f_max},
                           {"l_opt", m.l_opt},
                           {"l_tendon_slack", m.l_tendon_slack},
                           {"phi_opt", m.phi_opt},
                           {"k_fl", m.k_fl},
                           {"lambda_al", m.lambda_al},
                           {"v_max_factor", m.v_max_factor}});
    json coeffs = json::array();
    for (const auto& c : p.geometry.mtu_coeffs) coeffs.push_back({c[0], c[1], c[2], c[3]});
    return {{"muscles", muscles},
            {"activation", {{"a_shape", p.activation.a_shape}}},
            {"geometry",
             {{"theta_min", p.geometry.theta_min},
              {"theta_max", p.geometry.theta_max},
              {"mtu_coeffs", coeffs}}},
            {"joint",
             {{"inertia", p.joint.inertia},
              {"damping", p.joint.damping},
              {"mass", p.joint.mass},
              {"com_length", p.joint.com_length},
              {"gravity", p.joint.gravity}}}};
}

inline Plant plant_from_json(const json& j) {
    Plant p;
    for (const auto& jm : j.at("muscles")) {
        msk::MuscleParams m;
        m.f_max = jm.at("f_max").get<double>();
        m.l_opt = jm.at("l_opt").get<double>();
        m.l_tendon_slack = jm.at("l_tendon_slack").get<double>();
        m.phi_opt = jm.at("phi_opt").get<double>();
        m.k_fl = jm.at("k_fl").get<double>();
        m.lambda_al = jm.at("lambda_al").get<double>();
        m.v_max_factor = jm.at("v_max_factor").get<double>();
        p.muscles.push_back(m);
    }
    p.activation.a_shape = j.at("activation").at("a_shape").get<double>();
    const auto& jg = j.at("geometry");
    p.geometry.theta_min = jg.at("theta_min").get<double>();
    p.geometry.theta_max = jg.at("theta_max").get<double>();
    for (const auto& jc : jg.at("mtu_coeffs"))
        p.geometry.mtu_coeffs.push_back({jc.at(0).get<double>(), jc.at(1).get<double>(),
                                         jc.at(2).get<double>(), jc.at(3).get<double>()});
    const auto& jj = j.at("joint");
    p.joint.inertia = jj.at("inertia").get<double>();
    p.joint.damping = jj.at("damping").get<double>();
    p.joint.mass = jj.at("mass").get<double>();
    p.joint.com_length = jj.at("com_length").get<double>();
    p.joint.gravity = jj.at("gravity").get<double>();
    return p;
}

inline void write_blob(const std::filesystem::path& path, std::span<const double> w) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write weights blob: " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t count = w.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!out) throw ConfigError("short write on weights blob: " + path.string());
}

inline std::vector<double> read_blob(const std::filesystem::path& path,
                                     std::uint64_t expected_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read weights blob: " + path.string());
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ConfigError("weights blob has a wrong magic header: " + path.string());
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || count != expected_count)
        throw ConfigError("weights blob count does not match the manifest");
    std::vector<double> w(count);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw ConfigError("weights blob truncated: " + path.string());
    return w;
}

} // namespace detail

// Writes <prefix>.json and <prefix>.weights.bin.
inline void save_checkpoint(const std::filesystem::path& prefix,
                            const model::PennModel& m, const CheckpointMeta& meta) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(prefix).concat(".json");
    const fs::path blob_path = fs::path(prefix).concat(".weights.bin");

    const std::vector<double> flat = detail::flatten(m);
    detail::write_blob(blob_path, flat);

    detail::json j;
    j["format"] = "penn-checkpoint";
    j["version"] = kVersion;
    j["phase"] = meta.phase;
    j["epoch"] = meta.epoch;
    j["seed"] = meta.seed;
    j["losses"] = {{"l_phy", meta.l_phy}, {"l_res", meta.l_res}, {"l_total", meta.l_total}};
    j["model"] = {{"window", m.cfg.window},
                  {"dropout_rate", m.cfg.dropout_rate},
                  {"conv_channels", m.cfg.conv_channels},
                  {"conv_kernel", m.cfg.conv_kernel},
                  {"hidden", m.cfg.hidden},
                  {"pool_stride", m.cfg.pool_stride}};
    j["plant"] = detail::plant_to_json(m.reference);
    j["weights"] = {{"file", blob_path.filename().string()},
                    {"count", flat.size()},
                    {"fnv1a64", file_hash_hex(blob_path)}};

    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest: " + manifest_path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("short write on manifest: " + manifest_path.string());
}

struct LoadedCheckpoint {
    model::PennModel model;
    CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open checkpoint manifest: " + manifest_path.string());
    detail::json j;
    try {
        in >> j;
    } catch (const detail::json::exception& e) {
        throw ConfigError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
    }

    try {
        if (j.at("format").get<std::string>() != "penn-checkpoint")
            throw ConfigError("not a checkpoint manifest: " + manifest_path.string());
        if (j.at("version").get<int>() != kVersion)
            throw ConfigError("unsupported checkpoint version");

        model::ModelConfig cfg;
        const auto& jm = j.at("model");
        cfg.window = jm.at("window").get<std::size_t>();
        cfg.dropout_rate = jm.at("dropout_rate").get<double>();
        cfg.conv_channels = jm.at("conv_channels").get<std::size_t>();
        cfg.conv_kernel = jm.at("conv_kernel").get<std::size_t>();
        cfg.hidden = jm.at("hidden").get<std::size_t>();
        cfg.pool_stride = jm.at("pool_stride").get<std::size_t>();

        Plant plant = detail::plant_from_json(j.at("plant"));

        LoadedCheckpoint out{model::make_model(plant, cfg, 1), {}};
        out.meta.phase = j.at("phase").get<int>();
        out.meta.epoch = j.at("epoch").get<std::size_t>();
        out.meta.seed = j.at("seed").get<std::uint64_t>();
        // JSON has no NaN; unset losses round-trip as null
        const auto& jl = j.at("losses");
        auto loss = [](const detail::json& v) {
            return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                               : v.get<double>();
        };
        out.meta.l_phy = loss(jl.at("l_phy"));
        out.meta.l_res = loss(jl.at("l_res"));
        out.meta.l_total = loss(jl.at("l_total"));

        const auto& jw = j.at("weights");
        const auto count = jw.at("count").get<std::uint64_t>();
        const std::size_t want =
            out.model.z.size() + model::net_param_count(out.model.net);
        if (count != want)
            throw ConfigError("checkpoint weight count does not match its own plant/model");

        const std::filesystem::path blob_path =
            manifest_path.parent_path() / jw.at("file").get<std::string>();
        const std::string want_hash = jw.at("fnv1a64").get<std::string>();
        if (file_hash_hex(blob_path) != want_hash)
            throw ConfigError("weights blob hash mismatch: " + blob_path.string());

        const std::vector<double> flat = detail::read_blob(blob_path, count);
        std::copy(flat.begin(), flat.begin() + static_cast<long>(out.model.z.size()),
                  out.model.z.begin());
        model::net_params_in(
            out.model.net,
            std::span<const double>(flat.data() + out.model.z.size(),
                                    flat.size() - out.model.z.size()));
        return out;
    } catch (const detail::json::exception& e) {
        throw ConfigError("checkpoint manifest is missing fields: " + std::string(e.what()));
    }
}

} // namespace penn::ckpt
