// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bspinn::ad {

enum class Op : std::uint8_t { Leaf, Const, Add, Mul, Neg, Tanh, Exp, Ln, PowInt, Relu };

/// One entry of the Wengert list. Parents always precede the node.
struct Node {
    double value = 0.0;
    double partial[2] = {0.0, 0.0};  ///< d(node)/d(parent[k])
    std::uint32_t parent[2] = {0, 0};
    std::int32_t exponent = 0;  ///< PowInt only
    Op op = Op::Const;
    std::uint8_t arity = 0;
};

class Tape;

/// Handle to a tape node, or a passive constant when `tape == nullptr`.
///
/// Passive values take part in arithmetic without recording anything; an
/// operation that mixes a passive and an active operand records the passive
/// one as a Const node first.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t index = 0;
    double val = 0.0;

    Var() = default;
    Var(double constant) : val(constant) {}  // NOLINT(google-explicit-constructor)

    bool active() const { return tape != nullptr; }
    double value() const { return val; }
};

/// Reverse-mode scalar tape. One tape per worker; not thread-safe.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(double value);
    Var constant(double value);

    /// Drop all nodes but keep the allocation (one tape reused per training step).
    void clear();
    void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

    std::size_t size() const { return nodes_.size(); }
    std::size_t leaf_count() const { return leaves_.size(); }
    const Node& node(std::uint32_t index) const { return nodes_[index]; }

    /// Replay the recorded graph with new leaf values (in registration order) and
    /// return the value of `output`. Branch decisions taken while recording (Relu
    /// partials excepted) are not revisited. Throws DomainError on ln(x <= 0).
    double evaluate(std::span<const double> leaf_values, Var output);

    /// d(output)/d(leaf) for every leaf, in registration order.
    std::vector<double> gradient(Var output) const;
    /// Same as gradient() but writes into `out` (size leaf_count()).
    void gradient(Var output, std::span<double> out) const;

    /// Adjoints of arbitrary nodes: runs the reverse sweep from `output` and
    /// returns d(output)/d(node) for each handle in `wrt` (passive handles get 0).
    void adjoints(Var output, std::span<const Var> wrt, std::span<double> out) const;

    Var push(Op op, double value, const Var& a, double da, std::int32_t exponent = 0);
    Var push(Op op, double value, const Var& a, double da, const Var& b, double db);

private:
    void reverse_sweep(Var output) const;
    std::uint32_t ensure_recorded(const Var& v);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> leaves_;
    mutable std::vector<double> adjoint_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var tanh(const Var& x);
Var exp(const Var& x);
/// Throws DomainError for x <= 0.
Var log(const Var& x);
/// x^n for integer n; throws DomainError for x == 0 with n < 0.
Var powi(const Var& x, int n);
/// max(x, 0) with partial 1 for x > 0 and 0 otherwise.
Var relu(const Var& x);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

double relu(double x);
double powi(double x, int n);

}  // namespace bspinn::ad
