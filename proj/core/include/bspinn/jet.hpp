// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "bspinn/autodiff.hpp"

namespace bspinn {

/// Forward-mode carrier for the input derivatives the Black-Scholes operator needs:
/// value, dV/dS, d2V/dS2 and dV/dt.
///
/// The (value, s, ss) triple is a second-order dual number in S; `t` is an
/// ordinary first-order tangent. Instantiated with `double` it is plain forward
/// mode; with `ad::Var` each component is recorded on a reverse tape
/// (forward-over-reverse), which is how parameter gradients of the PDE residual
/// are obtained without a third-order graph.
template <class T>
struct Jet {
    T v{};
    T s{};
    T ss{};
    T t{};

    static Jet constant(T value) { return Jet{value, T(0.0), T(0.0), T(0.0)}; }
    /// Seed for the spot input: dS/dS = 1.
    static Jet spot(T value) { return Jet{value, T(1.0), T(0.0), T(0.0)}; }
    /// Seed for the time input: dt/dt = 1.
    static Jet time(T value) { return Jet{value, T(0.0), T(0.0), T(1.0)}; }
};

using JetD = Jet<double>;
using JetV = Jet<ad::Var>;

namespace jet_detail {
using std::exp;
using std::log;
using std::tanh;
using ad::exp;
using ad::log;
using ad::tanh;
}  // namespace jet_detail

/// Chain rule for a scalar function f with f(v)=f0, f'(v)=f1, f''(v)=f2.
template <class T>
Jet<T> chain(const Jet<T>& x, const T& f0, const T& f1, const T& f2) {
    return Jet<T>{f0, f1 * x.s, f1 * x.ss + f2 * x.s * x.s, f1 * x.t};
}

template <class T>
Jet<T> operator+(const Jet<T>& a, const Jet<T>& b) {
    return {a.v + b.v, a.s + b.s, a.ss + b.ss, a.t + b.t};
}

template <class T>
Jet<T> operator-(const Jet<T>& a, const Jet<T>& b) {
    return {a.v - b.v, a.s - b.s, a.ss - b.ss, a.t - b.t};
}

template <class T>
Jet<T> operator-(const Jet<T>& a) {
    return {-a.v, -a.s, -a.ss, -a.t};
}

template <class T>
Jet<T> operator*(const Jet<T>& a, const Jet<T>& b) {
    return {a.v * b.v, a.s * b.v + a.v * b.s, a.ss * b.v + T(2.0) * a.s * b.s + a.v * b.ss,
            a.t * b.v + a.v * b.t};
}

template <class T>
Jet<T> operator*(const Jet<T>& a, const T& c) {
    return {a.v * c, a.s * c, a.ss * c, a.t * c};
}

template <class T>
Jet<T> operator*(const T& c, const Jet<T>& a) {
    return a * c;
}

template <class T>
Jet<T> operator+(const Jet<T>& a, const T& c) {
    return {a.v + c, a.s, a.ss, a.t};
}

/// Lift a passive jet (e.g. a function of the inputs only) into T.
template <class T>
Jet<T> lift(const JetD& a) {
    return {T(a.v), T(a.s), T(a.ss), T(a.t)};
}

template <class T>
Jet<T> tanh(const Jet<T>& x) {
    using jet_detail::tanh;
    const T f0 = tanh(x.v);
    const T f1 = T(1.0) - f0 * f0;
    const T f2 = T(-2.0) * f0 * f1;
    return chain(x, f0, f1, f2);
}

template <class T>
Jet<T> exp(const Jet<T>& x) {
    using jet_detail::exp;
    const T f0 = exp(x.v);
    return chain(x, f0, f0, f0);
}

/// Throws DomainError when x.v <= 0.
template <class T>
Jet<T> log(const Jet<T>& x) {
    using jet_detail::log;
    const T f0 = log(x.v);
    const T inv = T(1.0) / x.v;
    return chain(x, f0, inv, -(inv * inv));
}

/// Logistic function 1/(1+e^-x).
template <class T>
Jet<T> sigmoid(const Jet<T>& x) {
    using jet_detail::exp;
    const T f0 = T(1.0) / (T(1.0) + exp(-x.v));
    const T f1 = f0 * (T(1.0) - f0);
    const T f2 = f1 * (T(1.0) - T(2.0) * f0);
    return chain(x, f0, f1, f2);
}

}  // namespace bspinn
