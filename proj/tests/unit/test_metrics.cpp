// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bspinn/errors.hpp"
#include "bspinn/metrics.hpp"

using namespace bspinn;

TEST(Metrics, PerfectPrediction) {
    const std::vector<double> y{1.0, 2.0, 4.0, 8.0};
    const MetricReport r = compute_metrics(y, y);
    EXPECT_EQ(r.mae, 0.0);
    EXPECT_EQ(r.rmse, 0.0);
    EXPECT_EQ(r.ev, 1.0);
    EXPECT_EQ(r.relative_error_percent, 0.0);
    EXPECT_EQ(r.n, 4u);
}

TEST(Metrics, ConstantOffset) {
    const MetricReport r = compute_metrics(std::vector<double>{1.0, 2.0}, std::vector<double>{1.5, 2.5});
    EXPECT_DOUBLE_EQ(r.mae, 0.5);
    EXPECT_DOUBLE_EQ(r.rmse, 0.5);
    EXPECT_DOUBLE_EQ(r.ev, 1.0);
    EXPECT_DOUBLE_EQ(r.relative_error_percent, 100.0 * (0.5 / 1.0 + 0.5 / 2.0) / 2.0);
    EXPECT_DOUBLE_EQ(r.max_relative_error_percent, 50.0);
    EXPECT_DOUBLE_EQ(r.max_abs_error, 0.5);
}

TEST(Metrics, ExplainedVarianceUsesSampleVariance) {
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> yhat{1.0, 2.5, 2.5, 4.0};
    // errors 0, 0.5, -0.5, 0: mean 0, sample var 0.5/3; Var(y) = 5/3.
    EXPECT_NEAR(compute_metrics(y, yhat).ev, 1.0 - (0.5 / 3.0) / (5.0 / 3.0), 1e-15);
}

TEST(Metrics, ZeroTargetsAreExcludedFromRelativeError) {
    const MetricReport r = compute_metrics(std::vector<double>{0.0, 2.0, 0.0, 4.0},
                                           std::vector<double>{0.1, 2.2, 0.0, 4.0});
    EXPECT_EQ(r.relative_excluded, 2u);
    EXPECT_NEAR(r.relative_error_percent, 100.0 * (0.2 / 2.0) / 2.0, 1e-12);
}

TEST(Metrics, ConstantTargetsLeaveEvUndefined) {
    const MetricReport r = compute_metrics(std::vector<double>{3.0, 3.0, 3.0}, std::vector<double>{3.0, 3.1, 2.9});
    EXPECT_FALSE(r.ev_defined);
    EXPECT_TRUE(std::isnan(r.ev));
}

TEST(Metrics, ShapeErrors) {
    EXPECT_THROW(compute_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}), ShapeError);
    EXPECT_THROW(compute_metrics(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}), ShapeError);
}

TEST(Metrics, MaeNeverExceedsRmseAndEvAtMostOne) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 3.0);
    std::uniform_int_distribution<int> len(2, 200);
    for (int trial = 0; trial < 500; ++trial) {
        const int size = len(rng);
        std::vector<double> y(static_cast<std::size_t>(size));
        std::vector<double> yhat(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = n(rng);
            yhat[i] = y[i] + n(rng) * (trial % 5);
        }
        const MetricReport r = compute_metrics(y, yhat);
        EXPECT_LE(r.mae, r.rmse + 1e-15);
        EXPECT_LE(r.ev, 1.0);
    }
}

TEST(EnsembleStats, TwoMembers) {
    const std::vector<double> s{45.0};
    const std::vector<double> t{0.0};
    const EnsemblePrediction p = ensemble_stats({{1.0}, {3.0}}, s, t);
    EXPECT_DOUBLE_EQ(p.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(p.stddev[0], std::sqrt(2.0));
    EXPECT_EQ(p.members, 2u);
}

TEST(EnsembleStats, IdenticalMembersAndPermutation) {
    const std::vector<double> s{1.0, 2.0, 3.0};
    const std::vector<double> t{0.0, 0.0, 0.0};
    const EnsemblePrediction same = ensemble_stats({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}, s, t);
    for (double sd : same.stddev) EXPECT_EQ(sd, 0.0);

    std::vector<std::vector<double>> members{{1.0, 5.0, 2.0}, {2.0, 4.0, 9.0}, {0.5, 7.0, 3.0}, {1.5, 6.0, 4.0}};
    const EnsemblePrediction a = ensemble_stats(members, s, t);
    std::reverse(members.begin(), members.end());
    std::swap(members[0], members[2]);
    const EnsemblePrediction b = ensemble_stats(members, s, t);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(a.mean[i], b.mean[i], 1e-14);
        EXPECT_NEAR(a.stddev[i], b.stddev[i], 1e-14);
        EXPECT_GE(a.mean[i], std::min({members[0][i], members[1][i], members[2][i], members[3][i]}));
        EXPECT_LE(a.mean[i], std::max({members[0][i], members[1][i], members[2][i], members[3][i]}));
    }
}

TEST(EnsembleStats, RejectsSingleMemberAndRaggedInput) {
    const std::vector<double> s{1.0, 2.0};
    const std::vector<double> t{0.0, 0.0};
    EXPECT_THROW(ensemble_stats({{1.0, 2.0}}, s, t), ConfigError);
    EXPECT_THROW(ensemble_stats({{1.0, 2.0}, {1.0}}, s, t), ShapeError);
}

TEST(Bands, NestingFlooringAndDegenerateSpread) {
    const std::vector<double> s{30.0, 44.0, 60.0};
    const std::vector<double> t{0.0, 0.0, 0.0};
    const EnsemblePrediction p = ensemble_stats({{15.0, 1.0, 0.1}, {15.4, 1.6, 0.3}, {14.8, 0.7, 0.0}}, s, t);
    const Band one = bands(p, 1.0);
    const Band two = bands(p, 2.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(two.lower[i], one.lower[i]);
        EXPECT_GE(two.upper[i], one.upper[i]);
    }
    const Band floored = bands(p, 2.0, InstrumentKind::AmerPut, 45.0);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_GE(floored.lower[i], std::max(45.0 - s[i], 0.0));

    const EnsemblePrediction flat = ensemble_stats({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}, s, t);
    const Band b = bands(flat, 2.0);
    EXPECT_EQ(b.lower, flat.mean);
    EXPECT_EQ(b.upper, flat.mean);
}
