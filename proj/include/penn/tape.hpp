#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace penn::ad {

class Tape;

// Scalar handle for reverse-mode differentiation. A Var constructed from a
// plain double is "detached": it behaves as a constant and records nothing.
// Attached Vars index a node on their tape. Local partial derivatives are
// stored at record time, so the backward sweep is a single pass of
// multiply-accumulates with no op dispatch.
class Var {
public:
    Var() = default;
    Var(double v) : val_(v) {}  // implicit: lets generic code mix doubles in

    double value() const { return val_; }
    bool attached() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int index() const { return idx_; }
    double adjoint() const;

    // Branch decisions compare values only.
    friend bool operator<(const Var& a, const Var& b) { return a.val_ < b.val_; }
    friend bool operator>(const Var& a, const Var& b) { return a.val_ > b.val_; }
    friend bool operator<=(const Var& a, const Var& b) { return a.val_ <= b.val_; }
    friend bool operator>=(const Var& a, const Var& b) { return a.val_ >= b.val_; }
    friend bool operator==(const Var& a, const Var& b) { return a.val_ == b.val_; }
    friend bool operator!=(const Var& a, const Var& b) { return a.val_ != b.val_; }

private:
    friend class Tape;
    Var(Tape* t, int i, double v) : tape_(t), idx_(i), val_(v) {}

    Tape* tape_ = nullptr;
    int idx_ = -1;
    double val_ = 0.0;
};

class Tape {
public:
    Var leaf(double value) { return Var(this, emit(-1, -1, 0.0, 0.0), value); }

    // Drops all nodes but keeps buffer capacity (tapes are rebuilt per sample).
    void reset() {
        pa_.clear(); pb_.clear(); da_.clear(); db_.clear(); adj_.clear();
    }

    std::size_t size() const { return pa_.size(); }

    // Reverse sweep from `root`, accumulating adjoints for every node below it.
    void backward(const Var& root, double seed = 1.0) {
        adj_.assign(pa_.size(), 0.0);
        if (!root.attached() || root.index() < 0) return;
        adj_[static_cast<std::size_t>(root.index())] = seed;
        for (int i = root.index(); i >= 0; --i) {
            const double a = adj_[static_cast<std::size_t>(i)];
            if (a == 0.0) continue;
            const std::size_t u = static_cast<std::size_t>(i);
            if (pa_[u] >= 0) { adj_[static_cast<std::size_t>(pa_[u])] += a * da_[u]; ++bwd_ops_; }
            if (pb_[u] >= 0) { adj_[static_cast<std::size_t>(pb_[u])] += a * db_[u]; ++bwd_ops_; }
        }
    }

    double adjoint_of(int idx) const {
        if (idx < 0 || static_cast<std::size_t>(idx) >= adj_.size()) return 0.0;
        return adj_[static_cast<std::size_t>(idx)];
    }

    // Op-count instrumentation: nodes emitted (forward) vs. partial
    // applications replayed (backward).
    std::uint64_t forward_ops() const { return fwd_ops_; }
    std::uint64_t backward_ops() const { return bwd_ops_; }
    void reset_op_counts() { fwd_ops_ = bwd_ops_ = 0; }

    Var record_unary(const Var& x, double dx, double val) {
        return Var(this, emit(x.index(), -1, dx, 0.0), val);
    }
    Var record_binary(const Var& x, const Var& y, double dx, double dy, double val) {
        return Var(this, emit(x.index(), y.index(), dx, dy), val);
    }

private:
    int emit(int a, int b, double da, double db) {
        pa_.push_back(a); pb_.push_back(b);
        da_.push_back(da); db_.push_back(db);
        ++fwd_ops_;
        return static_cast<int>(pa_.size()) - 1;
    }

    std::vector<int> pa_, pb_;
    std::vector<double> da_, db_;
    std::vector<double> adj_;
    std::uint64_t fwd_ops_ = 0, bwd_ops_ = 0;
};

inline double Var::adjoint() const { return tape_ ? tape_->adjoint_of(idx_) : 0.0; }

namespace detail {
// Records a binary op, handling mixed attached/detached operands: only
// attached parents enter the tape. Operands attached to different tapes are
// not supported (one tape per model evaluation by construction).
inline Var rec2(const Var& x, const Var& y, double dx, double dy, double val) {
    if (x.attached() && y.attached()) return x.tape()->record_binary(x, y, dx, dy, val);
    if (x.attached()) return x.tape()->record_unary(x, dx, val);
    if (y.attached()) return y.tape()->record_unary(y, dy, val);
    return Var(val);
}
inline Var rec1(const Var& x, double dx, double val) {
    if (x.attached()) return x.tape()->record_unary(x, dx, val);
    return Var(val);
}
} // namespace detail

inline Var operator+(const Var& x, const Var& y) {
    return detail::rec2(x, y, 1.0, 1.0, x.value() + y.value());
}
inline Var operator-(const Var& x, const Var& y) {
    return detail::rec2(x, y, 1.0, -1.0, x.value() - y.value());
}
inline Var operator*(const Var& x, const Var& y) {
    return detail::rec2(x, y, y.value(), x.value(), x.value() * y.value());
}
inline Var operator/(const Var& x, const Var& y) {
    const double inv = 1.0 / y.value();
    return detail::rec2(x, y, inv, -x.value() * inv * inv, x.value() / y.value());
}
inline Var operator-(const Var& x) { return detail::rec1(x, -1.0, -x.value()); }
inline Var operator+(const Var& x) { return x; }

inline Var exp(const Var& x) {
    const double e = std::exp(x.value());
    return detail::rec1(x, e, e);
}
inline Var log(const Var& x) {
    return detail::rec1(x, 1.0 / x.value(), std::log(x.value()));
}
inline Var sqrt(const Var& x) {
    const double s = std::sqrt(x.value());
    return detail::rec1(x, 0.5 / s, s);
}
inline Var sin(const Var& x) {
    return detail::rec1(x, std::cos(x.value()), std::sin(x.value()));
}
inline Var cos(const Var& x) {
    return detail::rec1(x, -std::sin(x.value()), std::cos(x.value()));
}
inline Var asin(const Var& x) {
    return detail::rec1(x, 1.0 / std::sqrt(1.0 - x.value() * x.value()),
                        std::asin(x.value()));
}

// Generic value extraction so templated code can inspect magnitudes.
inline double value_of(const Var& x) { return x.value(); }
inline double value_of(double x) { return x; }

} // namespace penn::ad
