// SPDX-License-Identifier: Apache-2.0
#include "bspinn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspinn/errors.hpp"

namespace bspinn::ad {

namespace {

Tape* tape_of(const Var& a, const Var& b) { return a.tape != nullptr ? a.tape : b.tape; }

void check_log_arg(double x) {
    if (!(x > 0.0)) throw DomainError("ln of non-positive value " + std::to_string(x));
}

}  // namespace

double relu(double x) { return x > 0.0 ? x : 0.0; }

double powi(double x, int n) {
    if (x == 0.0 && n < 0) throw DomainError("negative integer power of zero");
    double result = 1.0;
    double base = n < 0 ? 1.0 / x : x;
    for (unsigned k = n < 0 ? static_cast<unsigned>(-n) : static_cast<unsigned>(n); k != 0; k >>= 1) {
        if (k & 1U) result *= base;
        base *= base;
    }
    return result;
}

Var Tape::leaf(double value) {
    Node n;
    n.value = value;
    n.op = Op::Leaf;
    leaves_.push_back(static_cast<std::uint32_t>(nodes_.size()));
    nodes_.push_back(n);
    Var v;
    v.tape = this;
    v.index = leaves_.back();
    v.val = value;
    return v;
}

Var Tape::constant(double value) {
    Node n;
    n.value = value;
    n.op = Op::Const;
    nodes_.push_back(n);
    Var v;
    v.tape = this;
    v.index = static_cast<std::uint32_t>(nodes_.size() - 1);
    v.val = value;
    return v;
}

void Tape::clear() {
    nodes_.clear();
    leaves_.clear();
}

std::uint32_t Tape::ensure_recorded(const Var& v) {
    return v.active() ? v.index : constant(v.val).index;
}

Var Tape::push(Op op, double value, const Var& a, double da, std::int32_t exponent) {
    Node n;
    n.value = value;
    n.op = op;
    n.exponent = exponent;
    n.arity = 1;
    n.parent[0] = ensure_recorded(a);
    n.partial[0] = da;
    nodes_.push_back(n);
    Var v;
    v.tape = this;
    v.index = static_cast<std::uint32_t>(nodes_.size() - 1);
    v.val = value;
    return v;
}

Var Tape::push(Op op, double value, const Var& a, double da, const Var& b, double db) {
    Node n;
    n.value = value;
    n.op = op;
    n.arity = 2;
    n.parent[0] = ensure_recorded(a);
    n.parent[1] = ensure_recorded(b);
    n.partial[0] = da;
    n.partial[1] = db;
    nodes_.push_back(n);
    Var v;
    v.tape = this;
    v.index = static_cast<std::uint32_t>(nodes_.size() - 1);
    v.val = value;
    return v;
}

double Tape::evaluate(std::span<const double> leaf_values, Var output) {
    if (leaf_values.size() != leaves_.size())
        throw ShapeError("evaluate: expected " + std::to_string(leaves_.size()) + " leaf values, got " +
                         std::to_string(leaf_values.size()));
    std::size_t next_leaf = 0;
    for (auto& n : nodes_) {
        const double a = n.arity > 0 ? nodes_[n.parent[0]].value : 0.0;
        const double b = n.arity > 1 ? nodes_[n.parent[1]].value : 0.0;
        switch (n.op) {
            case Op::Leaf: n.value = leaf_values[next_leaf++]; break;
            case Op::Const: break;
            case Op::Add:
                n.value = a + b;
                break;
            case Op::Mul:
                n.value = a * b;
                n.partial[0] = b;
                n.partial[1] = a;
                break;
            case Op::Neg: n.value = -a; break;
            case Op::Tanh:
                n.value = std::tanh(a);
                n.partial[0] = 1.0 - n.value * n.value;
                break;
            case Op::Exp:
                n.value = std::exp(a);
                n.partial[0] = n.value;
                break;
            case Op::Ln:
                check_log_arg(a);
                n.value = std::log(a);
                n.partial[0] = 1.0 / a;
                break;
            case Op::PowInt:
                n.value = powi(a, n.exponent);
                n.partial[0] = n.exponent == 0 ? 0.0 : n.exponent * powi(a, n.exponent - 1);
                break;
            case Op::Relu:
                n.value = relu(a);
                n.partial[0] = a > 0.0 ? 1.0 : 0.0;
                break;
        }
    }
    return output.active() ? nodes_[output.index].value : output.val;
}

void Tape::reverse_sweep(Var output) const {
    adjoint_.assign(nodes_.size(), 0.0);
    if (!output.active()) return;
    adjoint_[output.index] = 1.0;
    for (std::size_t i = output.index + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        const double bar = adjoint_[i];
        if (bar == 0.0) continue;
        for (std::uint8_t k = 0; k < n.arity; ++k) adjoint_[n.parent[k]] += bar * n.partial[k];
    }
}

std::vector<double> Tape::gradient(Var output) const {
    std::vector<double> out(leaves_.size());
    gradient(output, out);
    return out;
}

void Tape::gradient(Var output, std::span<double> out) const {
    if (out.size() != leaves_.size())
        throw ShapeError("gradient: output span has wrong length");
    reverse_sweep(output);
    std::transform(leaves_.begin(), leaves_.end(), out.begin(),
                   [&](std::uint32_t idx) { return adjoint_[idx]; });
}

void Tape::adjoints(Var output, std::span<const Var> wrt, std::span<double> out) const {
    if (out.size() != wrt.size()) throw ShapeError("adjoints: output span has wrong length");
    reverse_sweep(output);
    for (std::size_t k = 0; k < wrt.size(); ++k)
        out[k] = wrt[k].active() && wrt[k].tape == this ? adjoint_[wrt[k].index] : 0.0;
}

Var operator+(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    if (t == nullptr) return Var(a.val + b.val);
    if (!a.active() && a.val == 0.0) return b;
    if (!b.active() && b.val == 0.0) return a;
    return t->push(Op::Add, a.val + b.val, a, 1.0, b, 1.0);
}

Var operator-(const Var& a) {
    if (!a.active()) return Var(-a.val);
    return a.tape->push(Op::Neg, -a.val, a, -1.0);
}

Var operator-(const Var& a, const Var& b) {
    if (!b.active()) return a + Var(-b.val);
    return a + (-b);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    if (t == nullptr) return Var(a.val * b.val);
    // passive 0 and 1 factors record nothing
    if (!a.active() && (a.val == 0.0 || a.val == 1.0)) return a.val == 0.0 ? Var(0.0) : b;
    if (!b.active() && (b.val == 0.0 || b.val == 1.0)) return b.val == 0.0 ? Var(0.0) : a;
    return t->push(Op::Mul, a.val * b.val, a, b.val, b, a.val);
}

Var operator/(const Var& a, const Var& b) {
    if (!b.active()) {
        if (b.val == 0.0) throw DomainError("division by zero");
        return a * Var(1.0 / b.val);
    }
    return a * powi(b, -1);
}

Var tanh(const Var& x) {
    const double v = std::tanh(x.val);
    if (!x.active()) return Var(v);
    return x.tape->push(Op::Tanh, v, x, 1.0 - v * v);
}

Var exp(const Var& x) {
    const double v = std::exp(x.val);
    if (!x.active()) return Var(v);
    return x.tape->push(Op::Exp, v, x, v);
}

Var log(const Var& x) {
    check_log_arg(x.val);
    const double v = std::log(x.val);
    if (!x.active()) return Var(v);
    return x.tape->push(Op::Ln, v, x, 1.0 / x.val);
}

Var powi(const Var& x, int n) {
    const double v = powi(x.val, n);
    if (!x.active()) return Var(v);
    return x.tape->push(Op::PowInt, v, x, n == 0 ? 0.0 : n * powi(x.val, n - 1), n);
}

Var relu(const Var& x) {
    const double v = relu(x.val);
    if (!x.active()) return Var(v);
    return x.tape->push(Op::Relu, v, x, x.val > 0.0 ? 1.0 : 0.0);
}

}  // namespace bspinn::ad
