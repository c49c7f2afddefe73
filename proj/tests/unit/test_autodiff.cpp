// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bspinn/autodiff.hpp"
#include "bspinn/errors.hpp"
#include "bspinn/jet.hpp"
#include "oracles.hpp"

using namespace bspinn;
using bspinn::ad::Tape;
using bspinn::ad::Var;

TEST(Tape, EvaluatesHandCheckableGraphs) {
    Tape tape;
    Var x = tape.leaf(3.0);
    Var sq = x * x;
    EXPECT_DOUBLE_EQ(sq.value(), 9.0);
    EXPECT_DOUBLE_EQ(tape.evaluate(std::vector<double>{3.0}, sq), 9.0);

    Tape t2;
    Var z = t2.leaf(0.0);
    EXPECT_EQ(ad::tanh(z).value(), 0.0);

    Tape t3;
    Var a = t3.leaf(2.0);
    Var b = t3.leaf(3.0);
    Var f = a * b + b;
    EXPECT_DOUBLE_EQ(f.value(), 9.0);
    EXPECT_DOUBLE_EQ(t3.evaluate(std::vector<double>{4.0, -1.0}, f), -5.0);
}

TEST(Tape, GradientOfSimpleFunctions) {
    Tape tape;
    Var theta = tape.leaf(3.0);
    EXPECT_DOUBLE_EQ(tape.gradient(theta * theta)[0], 6.0);

    Tape t2;
    Var a = t2.leaf(2.0);
    Var b = t2.leaf(5.0);
    const auto g = t2.gradient(a * b);
    EXPECT_DOUBLE_EQ(g[0], 5.0);
    EXPECT_DOUBLE_EQ(g[1], 2.0);
}

TEST(Tape, DomainErrors) {
    Tape tape;
    Var x = tape.leaf(0.0);
    EXPECT_THROW(ad::log(x), DomainError);
    EXPECT_THROW(ad::powi(x, -2), DomainError);
    Var y = tape.leaf(2.0);
    Var l = ad::log(y);
    EXPECT_THROW(tape.evaluate(std::vector<double>{0.0, -1.0}, l), DomainError);
    EXPECT_THROW(tape.evaluate(std::vector<double>{1.0}, l), ShapeError);
}

TEST(Tape, PassiveConstantsRecordNothing) {
    Tape tape;
    Var x = tape.leaf(1.5);
    const std::size_t before = tape.size();
    Var p = Var(2.0) * Var(3.0) + Var(1.0);
    EXPECT_EQ(tape.size(), before);
    EXPECT_FALSE(p.active());
    EXPECT_DOUBLE_EQ(p.value(), 7.0);
    Var same = x + Var(0.0);
    EXPECT_EQ(same.index, x.index);
    Var zero = x * Var(0.0);
    EXPECT_FALSE(zero.active());
}

TEST(Tape, ReluPartialIsOneOnlyForPositiveInput) {
    Tape tape;
    Var a = tape.leaf(2.0);
    Var b = tape.leaf(-2.0);
    EXPECT_DOUBLE_EQ(tape.gradient(ad::relu(a))[0], 1.0);
    EXPECT_DOUBLE_EQ(tape.gradient(ad::relu(b))[1], 0.0);
    EXPECT_DOUBLE_EQ(ad::relu(b).value(), 0.0);
}

namespace {

// Random composite graph over n leaves using every recorded op.
Var random_graph(const std::vector<Var>& x, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(x.size()) - 1);
    std::uniform_int_distribution<int> op(0, 6);
    Var acc = x[static_cast<std::size_t>(pick(rng))];
    for (int k = 0; k < 12; ++k) {
        const Var& y = x[static_cast<std::size_t>(pick(rng))];
        switch (op(rng)) {
            case 0: acc = acc + y; break;
            case 1: acc = acc * y; break;
            case 2: acc = ad::tanh(acc) - y; break;
            case 3: acc = ad::exp(Var(0.3) * acc) * y; break;
            case 4: acc = ad::log(acc * acc + Var(1.0)) + y; break;
            case 5: acc = ad::powi(acc, 3) * Var(0.1) + y; break;
            default: acc = acc / (y * y + Var(2.0)); break;
        }
    }
    return acc;
}

}  // namespace

TEST(Tape, GradientMatchesCentralDifferencesOnRandomGraphs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int probe = 0; probe < 100; ++probe) {
        const std::uint64_t graph_seed = rng();
        std::vector<double> point(4);
        for (double& p : point) p = u(rng);

        Tape tape;
        std::vector<Var> x;
        for (double p : point) x.push_back(tape.leaf(p));
        std::mt19937_64 g1(graph_seed);
        const Var out = random_graph(x, g1);
        const auto grad = tape.gradient(out);

        for (std::size_t i = 0; i < point.size(); ++i) {
            auto f = [&](double xi) {
                Tape t;
                std::vector<Var> v;
                for (std::size_t j = 0; j < point.size(); ++j) v.push_back(t.leaf(j == i ? xi : point[j]));
                std::mt19937_64 g2(graph_seed);
                return random_graph(v, g2).value();
            };
            const double fd = oracle::central_difference(f, point[i], 1e-5);
            EXPECT_LE(std::abs(fd - grad[i]), 1e-4 * std::max(1.0, std::abs(fd)))
                << "probe " << probe << " leaf " << i;
        }
    }
}

TEST(Tape, ReplayAgreesWithRecording) {
    Tape tape;
    Var a = tape.leaf(0.4);
    Var b = tape.leaf(-0.7);
    Var f = ad::tanh(a * b + ad::exp(a)) * ad::powi(b, 2);
    const double replayed = tape.evaluate(std::vector<double>{1.1, 0.3}, f);
    Tape fresh;
    Var a2 = fresh.leaf(1.1);
    Var b2 = fresh.leaf(0.3);
    EXPECT_EQ(replayed, (ad::tanh(a2 * b2 + ad::exp(a2)) * ad::powi(b2, 2)).value());
}

TEST(Tape, BitwiseDeterministic) {
    auto run = [] {
        Tape tape;
        std::vector<Var> x;
        for (int i = 0; i < 4; ++i) x.push_back(tape.leaf(0.1 * (i + 1)));
        std::mt19937_64 g(99);
        return tape.gradient(random_graph(x, g));
    };
    EXPECT_EQ(run(), run());
}

TEST(Tape, AdjointsOfInteriorNodes) {
    Tape tape;
    Var x = tape.leaf(2.0);
    Var mid = x * x;        // 4
    Var out = mid * mid;    // 16, d/dmid = 2 mid = 8
    std::vector<Var> wrt{mid, Var(5.0)};
    std::vector<double> adj(2);
    tape.adjoints(out, wrt, adj);
    EXPECT_DOUBLE_EQ(adj[0], 8.0);
    EXPECT_DOUBLE_EQ(adj[1], 0.0);
}

TEST(Jet, PolynomialIdentitiesAreExact) {
    const double s = 3.5;
    const double t = 0.25;
    const JetD S = JetD::spot(s);
    const JetD T = JetD::time(t);

    const JetD sq = S * S;
    EXPECT_EQ(sq.v, s * s);
    EXPECT_EQ(sq.s, 2.0 * s);
    EXPECT_EQ(sq.ss, 2.0);
    EXPECT_EQ(sq.t, 0.0);

    const JetD st = S * T;
    EXPECT_EQ(st.v, s * t);
    EXPECT_EQ(st.s, t);
    EXPECT_EQ(st.ss, 0.0);
    EXPECT_EQ(st.t, s);

    const JetD affine = S * 3.0 + JetD::constant(2.0);
    EXPECT_EQ(affine.ss, 0.0);
}

TEST(Jet, ForwardOverReverseGivesParameterGradientOfSecondDerivative) {
    // f(S) = tanh(w S); d2f/dS2 = w^2 tanh''(w S). Differentiate that in w.
    const double w0 = 0.8;
    const double s = 1.3;
    Tape tape;
    Var w = tape.leaf(w0);
    const JetV x = lift<Var>(JetD::spot(s));
    const JetV f = tanh(x * w);
    const double grad = tape.gradient(f.ss)[0];

    auto fss = [&](double w_) {
        const double u = std::tanh(w_ * s);
        return w_ * w_ * (-2.0 * u * (1.0 - u * u));
    };
    EXPECT_NEAR(f.ss.value(), fss(w0), 1e-14);
    EXPECT_LE(oracle::relative_gap(grad, oracle::central_difference(fss, w0, 1e-5)), 1e-8);
}
