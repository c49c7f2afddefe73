// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bspinn/bounds.hpp"
#include "bspinn/errors.hpp"
#include "bspinn/network.hpp"
#include "oracles.hpp"

using namespace bspinn;

namespace {

Scaling default_scaling(InstrumentKind kind = InstrumentKind::EuroPut) {
    MarketParams m;
    m.kind = kind;
    return Scaling::make(m, 0.0, 3.0 * m.strike);
}

}  // namespace

TEST(MlpConfig, DefaultParameterCount) {
    const MlpConfig cfg;
    EXPECT_EQ(cfg.param_count(), 7851u);
    EXPECT_EQ(cfg.param_count(), (2u * 50 + 50) + 3u * (50 * 50 + 50) + (50 + 1));
    const auto layers = layer_layout(cfg);
    ASSERT_EQ(layers.size(), 5u);
    EXPECT_EQ(layers.back().bias_offset + layers.back().out, 7851u);
    EXPECT_EQ(layers[1].weight_offset, 150u);
}

TEST(MlpConfig, RejectsEmptyArchitecture) {
    MlpConfig cfg;
    cfg.hidden_layers = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Init, DeterministicGlorotWithZeroBiases) {
    const MlpConfig cfg;
    const Surrogate a = init_surrogate(cfg, default_scaling(), 11);
    const Surrogate b = init_surrogate(cfg, default_scaling(), 11);
    EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));

    for (const LayerLayout& L : layer_layout(cfg)) {
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        for (std::size_t i = 0; i < L.in * L.out; ++i) EXPECT_LE(std::abs(a.params()[L.weight_offset + i]), limit);
        for (std::size_t j = 0; j < L.out; ++j) EXPECT_EQ(a.params()[L.bias_offset + j], 0.0);
    }
}

TEST(Init, DifferentSeedsDifferAlmostEverywhere) {
    const MlpConfig cfg;
    const Surrogate a = init_surrogate(cfg, default_scaling(), 1);
    const Surrogate b = init_surrogate(cfg, default_scaling(), 2);
    std::size_t weights = 0;
    std::size_t differ = 0;
    for (const LayerLayout& L : layer_layout(cfg))
        for (std::size_t i = 0; i < L.in * L.out; ++i, ++weights)
            differ += a.params()[L.weight_offset + i] != b.params()[L.weight_offset + i];
    EXPECT_GE(static_cast<double>(differ), 0.99 * static_cast<double>(weights));
}

TEST(Forward, ZeroNetworkOutputsZero) {
    const MlpConfig cfg;
    const Surrogate net(cfg, default_scaling(), std::vector<double>(cfg.param_count(), 0.0));
    for (double s : {0.0, 10.0, 45.0, 135.0})
        for (double t : {0.0, 0.3, 0.5}) EXPECT_EQ(forward(net, s, t), 0.0);
}

TEST(Forward, LipschitzProbe) {
    const Surrogate net = init_surrogate(MlpConfig{}, default_scaling(), 5);
    for (double s : {1.0, 30.0, 45.0, 90.0, 134.0}) {
        // Bound on |dV/dS| over [s, s + 1e-6] from the derivative at both ends, with slack.
        const double slope = std::max(std::abs(input_derivatives(net, s, 0.2).d_spot),
                                      std::abs(input_derivatives(net, s + 1e-6, 0.2).d_spot));
        EXPECT_LE(std::abs(forward(net, s + 1e-6, 0.2) - forward(net, s, 0.2)), 2.0 * slope * 1e-6 + 1e-15);
    }
}

TEST(Forward, BoundedLogitStaysInsideBounds) {
    MlpConfig cfg;
    cfg.output_transform = OutputTransform::BoundedLogit;
    for (InstrumentKind kind : {InstrumentKind::EuroPut, InstrumentKind::AmerPut, InstrumentKind::EuroCall}) {
        const Scaling sc = default_scaling(kind);
        const Surrogate net = init_surrogate(cfg, sc, 3);
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> us(1.0, 135.0);
        std::uniform_real_distribution<double> ut(0.0, 0.49);
        for (int i = 0; i < 200; ++i) {
            const double s = us(rng);
            const double t = ut(rng);
            const PriceBounds b = bounds_for(kind, s, sc.market.strike, sc.market.rate, sc.market.maturity - t);
            const double v = forward(net, s, t);
            EXPECT_GT(v, b.lower);
            EXPECT_LT(v, b.upper);
        }
    }
}

TEST(Forward, BoundedLogitFallsBackToIdentityOnDegenerateBounds) {
    MlpConfig cfg;
    cfg.output_transform = OutputTransform::BoundedLogit;
    const Scaling sc = default_scaling(InstrumentKind::EuroPut);
    const Surrogate net = init_surrogate(cfg, sc, 3);
    MlpConfig plain = cfg;
    plain.output_transform = OutputTransform::Identity;
    const Surrogate twin(plain, sc, std::vector<double>(net.params().begin(), net.params().end()));
    // At S = 0, t = T the put bounds collapse to L = U = K.
    EXPECT_EQ(forward(net, 0.0, sc.market.maturity), forward(twin, 0.0, sc.market.maturity));
}

TEST(Flatten, RoundTripIsBitIdentical) {
    const Surrogate net = init_surrogate(MlpConfig{}, default_scaling(), 21);
    const ParamVector flat = flatten(net);
    EXPECT_EQ(flat.size(), 7851u);
    const Surrogate back = unflatten(net.config(), net.scaling(), flat);
    EXPECT_TRUE(std::equal(net.params().begin(), net.params().end(), back.params().begin()));
}

TEST(Flatten, WrongLengthIsShapeError) {
    const Surrogate net = init_surrogate(MlpConfig{}, default_scaling(), 21);
    ParamVector flat = flatten(net);
    flat.values.pop_back();
    EXPECT_THROW(unflatten(net.config(), net.scaling(), flat), ShapeError);
    ParamVector other = flatten(net);
    other.layer_sizes = {2, 10, 1};
    EXPECT_THROW(unflatten(net.config(), net.scaling(), other), ShapeError);
}

TEST(InputDerivatives, MatchCentralDifferences) {
    for (InputTransform tr : {InputTransform::Identity, InputTransform::LogS}) {
        MlpConfig cfg;
        cfg.input_transform = tr;
        MarketParams m;
        const Scaling sc = Scaling::make(m, tr == InputTransform::LogS ? 1.0 : 0.0, 135.0);
        const Surrogate net = init_surrogate(cfg, sc, 8);
        const double s = 45.0;
        const double t = 0.25;
        const InputDerivatives d = input_derivatives(net, s, t);
        auto v_s = [&](double x) { return forward(net, x, t); };
        auto v_t = [&](double x) { return forward(net, s, x); };
        auto dv_s = [&](double x) { return oracle::central_difference(v_s, x, 1e-4); };
        EXPECT_EQ(d.value, forward(net, s, t));
        EXPECT_LE(oracle::relative_gap(d.d_spot, oracle::central_difference(v_s, s, 1e-4)), 1e-4);
        EXPECT_LE(oracle::relative_gap(d.d2_spot, oracle::central_difference(dv_s, s, 1e-2)), 1e-4);
        EXPECT_LE(oracle::relative_gap(d.d_time, oracle::central_difference(v_t, t, 1e-5)), 1e-4);
    }
}

TEST(InputDerivatives, ConstantNetworkHasExactlyZeroDerivatives) {
    const MlpConfig cfg;
    Surrogate net = init_surrogate(cfg, default_scaling(), 2);
    const LayerLayout first = layer_layout(cfg).front();
    for (std::size_t i = 0; i < first.in * first.out; ++i) net.mutable_params()[first.weight_offset + i] = 0.0;
    for (std::size_t j = 0; j < first.out; ++j) net.mutable_params()[first.bias_offset + j] = 0.1 * (j % 7);
    const InputDerivatives d = input_derivatives(net, 40.0, 0.1);
    EXPECT_EQ(d.d_spot, 0.0);
    EXPECT_EQ(d.d2_spot, 0.0);
    EXPECT_EQ(d.d_time, 0.0);
}

TEST(InputFeatures, LogTransformRejectsNonPositiveSpot) {
    MlpConfig cfg;
    cfg.input_transform = InputTransform::LogS;
    const Scaling sc = Scaling::make(MarketParams{}, 1.0, 135.0);
    EXPECT_THROW(input_features(cfg, sc, 0.0, 0.1), DomainError);
    EXPECT_THROW(Scaling::make(MarketParams{}, 0.0, 135.0).validate(cfg), ConfigError);
}

TEST(BatchEvaluator, MatchesScalarJets) {
    const Surrogate net = init_surrogate(MlpConfig{}, default_scaling(), 13);
    const std::vector<double> spots{0.0, 12.5, 44.0, 45.0, 100.0, 135.0};
    const std::vector<double> times{0.5, 0.1, 0.25, 0.0, 0.4, 0.3};
    BatchEvaluator batch;
    batch.forward(net, spots, times, 4);
    for (std::size_t i = 0; i < spots.size(); ++i) {
        const JetD ref = raw_output_jet(net.config(), net.scaling(), net.params(), spots[i], times[i]);
        EXPECT_NEAR(batch.y(i), ref.v, 1e-13);
        if (i < 4) {
            EXPECT_NEAR(batch.y_s(i), ref.s, 1e-13);
            EXPECT_NEAR(batch.y_ss(i), ref.ss, 1e-13);
            EXPECT_NEAR(batch.y_t(i), ref.t, 1e-13);
        }
    }
}

TEST(Checkpoint, RoundTripAndByteStability) {
    const Surrogate a = init_surrogate(MlpConfig{}, default_scaling(InstrumentKind::AmerPut), 77);
    const Surrogate b = init_surrogate(MlpConfig{}, default_scaling(InstrumentKind::AmerPut), 77);
    const auto bytes = checkpoint_bytes(a);
    EXPECT_EQ(bytes, checkpoint_bytes(b));
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BSPN");

    const Surrogate back = surrogate_from_bytes(bytes);
    EXPECT_EQ(checkpoint_bytes(back), bytes);
    EXPECT_EQ(back.scaling().market.kind, InstrumentKind::AmerPut);

    const auto path = std::filesystem::temp_directory_path() / "bspinn_test_checkpoint.bspn";
    save_checkpoint(a, path);
    EXPECT_EQ(checkpoint_bytes(load_checkpoint(path)), bytes);
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptInput) {
    const auto bytes = checkpoint_bytes(init_surrogate(MlpConfig{}, default_scaling(), 1));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(surrogate_from_bytes(bad_magic), ShapeError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(surrogate_from_bytes(truncated), ShapeError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(surrogate_from_bytes(trailing), ShapeError);
}
