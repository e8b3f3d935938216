#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "penn/errors.hpp"

namespace penn {

// One recording: N excitation channels plus the joint angle, sampled at fs.
// Angles are radians everywhere inside the library; file readers and writers
// convert at the boundary.
struct Trial {
    double fs = 0.0;
    std::vector<std::vector<double>> emg;  // N channels, each length T
    std::vector<double> angle;             // length T, rad
    std::string meta;                      // provenance: source file or synthesis summary

    std::size_t channels() const { return emg.size(); }
    std::size_t length() const { return angle.size(); }
};

inline void validate(const Trial& t) {
    if (!(t.fs > 0.0)) throw DomainError("trial fs must be > 0");
    if (t.emg.empty()) throw DomainError("trial needs at least one excitation channel");
    for (const auto& ch : t.emg)
        if (ch.size() != t.angle.size())
            throw DomainError("trial channels must all share the angle stream length");
    if (t.angle.empty()) throw DomainError("trial is empty");
}

// Stricter check used after pre-processing: excitations must sit in [0,1].
inline void validate_normalized(const Trial& t) {
    validate(t);
    for (const auto& ch : t.emg)
        for (double v : ch)
            if (v < 0.0 || v > 1.0)
                throw DomainError("normalized excitation outside [0,1]");
}

} // namespace penn
