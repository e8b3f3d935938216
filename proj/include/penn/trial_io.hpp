#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "penn/errors.hpp"
#include "penn/trial.hpp"

// Trial files: a CSV (time_s, emg_1..emg_N, angle_deg) plus a binary metadata
// sidecar <stem>.meta holding the exact sample rate and provenance. Angles are
// degrees in the CSV and radians in memory. Doubles are written in shortest
// round-trip form, so re-reading a file yields the written values exactly
// (the angle unit conversion costs at most one ulp).

namespace penn::io {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr char kMetaMagic[8] = {'P', 'E', 'N', 'N', 'M', 'T', '0', '1'};

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError(where + ": not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t at = 0;
    while (true) {
        const auto comma = line.find(',', at);
        out.push_back(line.substr(at, comma == std::string_view::npos ? comma : comma - at));
        if (comma == std::string_view::npos) return out;
        at = comma + 1;
    }
}

} // namespace detail

inline std::string trial_csv_header(std::size_t channels) {
    std::string h = "time_s";
    for (std::size_t c = 1; c <= channels; ++c) h += ",emg_" + std::to_string(c);
    h += ",angle_deg";
    return h;
}

inline std::string trial_to_csv(const Trial& t) {
    validate(t);
    std::string o = trial_csv_header(t.channels()) + "\n";
    for (std::size_t k = 0; k < t.length(); ++k) {
        o += detail::fmt(static_cast<double>(k) / t.fs);
        for (const auto& ch : t.emg) {
            o += ',';
            o += detail::fmt(ch[k]);
        }
        o += ',';
        o += detail::fmt(t.angle[k] * (180.0 / kPi));
        o += '\n';
    }
    return o;
}

// sidecar: magic, u32 little-endian payload length, JSON payload
inline void write_meta(const std::filesystem::path& path, const Trial& t) {
    nlohmann::json j;
    j["fs"] = t.fs;
    j["channels"] = t.channels();
    j["samples"] = t.length();
    j["meta"] = t.meta;
    const std::string payload = j.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(kMetaMagic, sizeof kMetaMagic);
    const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw ConfigError("write failed: " + path.string());
}

struct TrialMeta {
    double fs = 0.0;
    std::size_t channels = 0;
    std::size_t samples = 0;
    std::string meta;
};

inline TrialMeta read_meta(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMetaMagic, sizeof magic) != 0)
        throw ConfigError(path.string() + ": not a trial metadata file");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in) throw ConfigError(path.string() + ": truncated metadata header");
    std::string payload(len, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(len));
    if (!in) throw ConfigError(path.string() + ": truncated metadata payload");
    TrialMeta m;
    try {
        const auto j = nlohmann::json::parse(payload);
        m.fs = j.at("fs").get<double>();
        m.channels = j.at("channels").get<std::size_t>();
        m.samples = j.at("samples").get<std::size_t>();
        m.meta = j.at("meta").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": bad metadata payload: " + e.what());
    }
    return m;
}

// writes <prefix>.csv and <prefix>.meta
inline void save_trial(const std::filesystem::path& prefix, const Trial& t) {
    const auto csv_path = std::filesystem::path(prefix).concat(".csv");
    std::ofstream out(csv_path, std::ios::binary);  // binary: no CRLF translation
    if (!out) throw ConfigError("cannot write " + csv_path.string());
    out << trial_to_csv(t);
    if (!out) throw ConfigError("write failed: " + csv_path.string());
    out.close();
    write_meta(std::filesystem::path(prefix).concat(".meta"), t);
}

// Reads <stem>.csv; takes fs and provenance from the <stem>.meta sidecar when
// present, otherwise falls back to the span of the time column.
inline Trial load_trial(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + csv_path.string());
    const std::string name = csv_path.filename().string();

    std::string line;
    if (!std::getline(in, line)) throw ConfigError(name + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto head = detail::split_csv(line);
    if (head.size() < 3 || head.front() != "time_s" || head.back() != "angle_deg")
        throw ConfigError(name + ":1: header must be " + trial_csv_header(1) +
                          " with one emg_<i> column per channel");
    const std::size_t channels = head.size() - 2;
    for (std::size_t c = 1; c <= channels; ++c)
        if (head[c] != "emg_" + std::to_string(c))
            throw ConfigError(name + ":1: expected column 'emg_" + std::to_string(c) +
                              "', got '" + std::string(head[c]) + "'");

    Trial t;
    t.emg.resize(channels);
    std::vector<double> time;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        const std::string where = name + ":" + std::to_string(line_no);
        if (fields.size() != channels + 2)
            throw ConfigError(where + ": expected " + std::to_string(channels + 2) +
                              " fields, got " + std::to_string(fields.size()));
        time.push_back(detail::parse_double(fields[0], where));
        for (std::size_t c = 0; c < channels; ++c)
            t.emg[c].push_back(detail::parse_double(fields[c + 1], where));
        t.angle.push_back(detail::parse_double(fields.back(), where) * (kPi / 180.0));
    }
    if (t.angle.empty()) throw ConfigError(name + ": no data rows");

    const auto meta_path = std::filesystem::path(csv_path).replace_extension(".meta");
    if (std::filesystem::exists(meta_path)) {
        const TrialMeta m = read_meta(meta_path);
        if (m.channels != channels || m.samples != t.angle.size())
            throw ConfigError(meta_path.string() + ": metadata disagrees with " + name +
                              " (" + std::to_string(m.channels) + "x" +
                              std::to_string(m.samples) + " vs " +
                              std::to_string(channels) + "x" +
                              std::to_string(t.angle.size()) + ")");
        t.fs = m.fs;
        t.meta = m.meta;
    } else {
        if (time.size() < 2 || !(time.back() > time.front()))
            throw ConfigError(name + ": cannot infer sample rate from the time column");
        t.fs = static_cast<double>(time.size() - 1) / (time.back() - time.front());
        t.meta = "loaded from " + name;
    }
    validate(t);
    return t;
}

// MVC table: header "channel,mvc", one row per channel, 1-based dense indices
inline std::vector<double> load_mvc(const std::filesystem::path& path,
                                    std::size_t channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    const std::string name = path.filename().string();
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(name + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "channel,mvc")
        throw ConfigError(name + ":1: header must be 'channel,mvc'");

    std::vector<double> mvc(channels, 0.0);
    std::vector<bool> seen(channels, false);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(line_no);
        const auto fields = detail::split_csv(line);
        if (fields.size() != 2)
            throw ConfigError(where + ": expected 'channel,mvc'");
        const double chan = detail::parse_double(fields[0], where);
        const std::size_t c = static_cast<std::size_t>(chan);
        if (chan != static_cast<double>(c) || c < 1 || c > channels)
            throw ConfigError(where + ": channel index must be an integer in [1, " +
                              std::to_string(channels) + "]");
        if (seen[c - 1])
            throw ConfigError(where + ": duplicate channel " + std::string(fields[0]));
        mvc[c - 1] = detail::parse_double(fields[1], where);
        seen[c - 1] = true;
    }
    for (std::size_t c = 0; c < channels; ++c)
        if (!seen[c])
            throw ConfigError(name + ": missing MVC entry for channel " +
                              std::to_string(c + 1));
    return mvc;
}

} // namespace penn::io
