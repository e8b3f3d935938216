#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "penn/errors.hpp"
#include "penn/rng.hpp"
#include "penn/tape.hpp"

namespace penn::nn {

// Dense row-major (channels, length) buffer. Feature vectors are plain
// std::vector<T>; this type is for the convolutional part of the stack.
template <typename T>
struct TensorT {
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::size_t c, std::size_t l) : channels(c), length(l), data(c * l) {}

    T& at(std::size_t c, std::size_t l) { return data[c * length + l]; }
    const T& at(std::size_t c, std::size_t l) const { return data[c * length + l]; }
};

using Tensor = TensorT<double>;

template <typename T>
struct Conv1dLayer {
    std::size_t c_in = 0;
    std::size_t c_out = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    std::vector<T> w;  // (c_out, c_in, kernel), row-major
    std::vector<T> b;  // (c_out)
};

template <typename T>
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<T> w;  // (out, in), row-major
    std::vector<T> b;  // (out)
};

struct MaxPoolSpec {
    std::size_t kernel = 2;
    std::size_t stride = 1;
    std::size_t padding = 1;
};

inline Conv1dLayer<double> make_conv1d(std::size_t c_in, std::size_t c_out,
                                       std::size_t kernel, std::size_t stride,
                                       std::size_t padding, Rng& rng) {
    Conv1dLayer<double> ly;
    ly.c_in = c_in;
    ly.c_out = c_out;
    ly.kernel = kernel;
    ly.stride = stride;
    ly.padding = padding;
    const double limit = std::sqrt(6.0 / static_cast<double>(c_in * kernel));
    ly.w.resize(c_out * c_in * kernel);
    for (double& v : ly.w) v = rng.uniform(-limit, limit);
    ly.b.assign(c_out, 0.0);
    return ly;
}

inline DenseLayer<double> make_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer<double> ly;
    ly.in = in;
    ly.out = out;
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    ly.w.resize(out * in);
    for (double& v : ly.w) v = rng.uniform(-limit, limit);
    ly.b.assign(out, 0.0);
    return ly;
}

inline DenseLayer<double> make_dense_zero(std::size_t in, std::size_t out) {
    DenseLayer<double> ly;
    ly.in = in;
    ly.out = out;
    ly.w.assign(out * in, 0.0);
    ly.b.assign(out, 0.0);
    return ly;
}

template <typename T>
TensorT<T> conv1d(const TensorT<T>& x, const Conv1dLayer<T>& ly) {
    if (x.channels != ly.c_in)
        throw DomainError("conv1d: input has " + std::to_string(x.channels) +
                          " channels, layer expects " + std::to_string(ly.c_in));
    if (ly.w.size() != ly.c_out * ly.c_in * ly.kernel || ly.b.size() != ly.c_out)
        throw DomainError("conv1d: weight buffers do not match layer shape");
    if (x.length + 2 * ly.padding < ly.kernel)
        throw DomainError("conv1d: input too short for kernel");

    const std::size_t l_out = (x.length + 2 * ly.padding - ly.kernel) / ly.stride + 1;
    TensorT<T> y(ly.c_out, l_out);
    for (std::size_t co = 0; co < ly.c_out; ++co) {
        for (std::size_t o = 0; o < l_out; ++o) {
            T acc = ly.b[co];
            for (std::size_t ci = 0; ci < ly.c_in; ++ci) {
                const T* wrow = &ly.w[(co * ly.c_in + ci) * ly.kernel];
                for (std::size_t k = 0; k < ly.kernel; ++k) {
                    // signed arithmetic: index into the virtually padded input
                    const long idx = static_cast<long>(o * ly.stride + k) -
                                     static_cast<long>(ly.padding);
                    if (idx < 0 || idx >= static_cast<long>(x.length)) continue;
                    acc = acc + wrow[k] * x.at(ci, static_cast<std::size_t>(idx));
                }
            }
            y.at(co, o) = acc;
        }
    }
    return y;
}

template <typename T>
T relu(const T& x) {
    if (penn::ad::value_of(x) > 0.0) return x;
    return T(0.0);
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> y(x.channels, x.length);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = relu(x.data[i]);
    return y;
}

template <typename T>
std::vector<T> relu(const std::vector<T>& x) {
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = relu(x[i]);
    return y;
}

// Padding slots hold an implicit -inf: they never win a window max, and with
// kernel 2 / stride 1 / padding 1 every window still covers a real sample.
// Ties go to the lowest index so gradient routing is deterministic.
template <typename T>
TensorT<T> maxpool1d(const TensorT<T>& x, const MaxPoolSpec& spec = {}) {
    if (x.length < 1) throw DomainError("maxpool1d: empty input");
    if (x.length + 2 * spec.padding < spec.kernel)
        throw DomainError("maxpool1d: input too short for kernel");
    const std::size_t l_out =
        (x.length + 2 * spec.padding - spec.kernel) / spec.stride + 1;
    TensorT<T> y(x.channels, l_out);
    for (std::size_t c = 0; c < x.channels; ++c) {
        for (std::size_t o = 0; o < l_out; ++o) {
            bool seen = false;
            T best{};
            for (std::size_t k = 0; k < spec.kernel; ++k) {
                const long idx = static_cast<long>(o * spec.stride + k) -
                                 static_cast<long>(spec.padding);
                if (idx < 0 || idx >= static_cast<long>(x.length)) continue;
                const T& cand = x.at(c, static_cast<std::size_t>(idx));
                if (!seen || penn::ad::value_of(cand) > penn::ad::value_of(best)) {
                    best = cand;
                    seen = true;
                }
            }
            if (!seen) throw DomainError("maxpool1d: window covers only padding");
            y.at(c, o) = best;
        }
    }
    return y;
}

template <typename T>
std::vector<T> global_avg_pool(const TensorT<T>& x) {
    if (x.length == 0) throw DomainError("global_avg_pool: empty input");
    std::vector<T> y(x.channels);
    const double inv = 1.0 / static_cast<double>(x.length);
    for (std::size_t c = 0; c < x.channels; ++c) {
        T acc = x.at(c, 0);
        for (std::size_t l = 1; l < x.length; ++l) acc = acc + x.at(c, l);
        y[c] = acc * T(inv);
    }
    return y;
}

template <typename T>
std::vector<T> dense(const std::vector<T>& x, const DenseLayer<T>& ly) {
    if (x.size() != ly.in)
        throw DomainError("dense: input has " + std::to_string(x.size()) +
                          " features, layer expects " + std::to_string(ly.in));
    if (ly.w.size() != ly.out * ly.in || ly.b.size() != ly.out)
        throw DomainError("dense: weight buffers do not match layer shape");
    std::vector<T> y(ly.out);
    for (std::size_t o = 0; o < ly.out; ++o) {
        T acc = ly.b[o];
        const T* wrow = &ly.w[o * ly.in];
        for (std::size_t i = 0; i < ly.in; ++i) acc = acc + wrow[i] * x[i];
        y[o] = acc;
    }
    return y;
}

// Inverted dropout: kept activations are scaled by 1/(1-rate) during training
// so evaluation is the identity. Mask draws always consume one uniform per
// element, keeping RNG streams aligned across code paths.
template <typename T>
void dropout_inplace(std::span<T> x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return;
    const double scale = 1.0 / (1.0 - rate);
    for (T& v : x) {
        if (rng.uniform() < rate)
            v = T(0.0);
        else
            v = v * T(scale);
    }
}

template <typename T>
void dropout_inplace(std::vector<T>& x, double rate, bool training, Rng& rng) {
    dropout_inplace(std::span<T>(x), rate, training, rng);
}

template <typename T>
void dropout_inplace(TensorT<T>& x, double rate, bool training, Rng& rng) {
    dropout_inplace(std::span<T>(x.data), rate, training, rng);
}

} // namespace penn::nn
