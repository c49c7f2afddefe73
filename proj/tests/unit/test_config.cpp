// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include "bspinn/config.hpp"
#include "bspinn/errors.hpp"

using namespace bspinn;

namespace {

std::string error_of(const std::string& json) {
    try {
        parse_config(json);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    const RunConfig c = parse_config("{}");
    EXPECT_EQ(c.plan.market.strike, 45.0);
    EXPECT_EQ(c.plan.market.volatility, 0.2);
    EXPECT_EQ(c.plan.market.rate, 0.05);
    EXPECT_EQ(c.plan.market.maturity, 0.5);
    EXPECT_EQ(c.plan.market.kind, InstrumentKind::EuroPut);
    EXPECT_EQ(c.plan.domain.s_max, 135.0);
    EXPECT_EQ(c.evaluation.points, 201u);
    EXPECT_EQ(c.evaluation.slices, (std::vector<double>{0.0, 0.25, 0.5}));
    EXPECT_EQ(c.plan.collocation.interior, 150u);
    EXPECT_EQ(c.plan.collocation.terminal + c.plan.collocation.boundary, 256u);
    EXPECT_EQ(config_to_json(c), config_to_json(default_config()));
}

TEST(Config, StrikeDrivesDerivedDefaults) {
    const RunConfig c = parse_config(R"({"market": {"strike": 100, "maturity": 1.0}})");
    EXPECT_EQ(c.plan.domain.s_max, 300.0);
    EXPECT_EQ(c.evaluation.s_max, 300.0);
    EXPECT_EQ(c.fd.s_max, 300.0);
    EXPECT_EQ(c.plan.domain.maturity, 1.0);
    EXPECT_EQ(c.evaluation.slices, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(Config, DumpRoundTrips) {
    const RunConfig c = parse_config(R"({
        "market": {"instrument": "amer_put", "volatility": 0.3},
        "network": {"output_transform": "bounded_logit"},
        "loss": {"obstacle_mode": "both"},
        "train": {"seed": 18446744073709551615, "anchor_mode": "perturbed",
                  "stage2_adam": {"learning_rate": 5e-4}, "stage2_schedule": "restart"},
        "collocation": {"interior_sampling": "latin_hypercube"},
        "output_dir": "runs/x"})");
    EXPECT_EQ(c.plan.seed, 18446744073709551615ULL);
    const std::string dumped = config_to_json(c);
    const RunConfig back = parse_config(dumped);
    EXPECT_EQ(config_to_json(back), dumped);
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(back.plan.stage2_adam.learning_rate, 5e-4);
    EXPECT_EQ(back.plan.network.output_transform, OutputTransform::BoundedLogit);
    EXPECT_EQ(back.plan.stage2_schedule, Stage2Schedule::Restart);
}

TEST(Config, HashIsGitBlobSha1) {
    const RunConfig c = default_config();
    const std::string h = config_hash(c);
    EXPECT_EQ(h.size(), 40u);
    EXPECT_EQ(h, config_hash(parse_config("{}")));
    RunConfig other = c;
    other.plan.seed += 1;
    EXPECT_NE(config_hash(other), h);
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_NE(error_of(R"({"market": {"volatility": -0.2}})").find("market.volatility"), std::string::npos);
    EXPECT_NE(error_of(R"({"market": {"vol": 0.2}})").find("market.vol"), std::string::npos);
    EXPECT_NE(error_of(R"({"train": {"stage1_adam": {"learning_rate": "fast"}}})")
                  .find("train.stage1_adam.learning_rate"),
              std::string::npos);
    EXPECT_NE(error_of(R"({"market": {"instrument": "bermudan"}})").find("market.instrument"), std::string::npos);
    EXPECT_NE(error_of(R"({"evaluation": {"slices": [0, 2.0]}})").find("evaluation.slices[1]"), std::string::npos);
    EXPECT_NE(error_of(R"({"collocation": {"interior": -3}})").find("collocation.interior"), std::string::npos);
    EXPECT_NE(error_of(R"({"train": {"ensemble_size": 1}})").find("train.ensemble_size"), std::string::npos);
    EXPECT_NE(error_of(R"({"train": {"stage2_schedule": "warm"}})").find("train.stage2_schedule"), std::string::npos);
    EXPECT_NE(error_of(R"({"network": {"input_transform": "log_s"}})").find("network"), std::string::npos);
    EXPECT_NE(error_of("{not json").find("JSON"), std::string::npos);
    EXPECT_NE(error_of(R"({"market": 3})").find("market"), std::string::npos);
}

TEST(Config, LogSpotNeedsPositiveLowerEdge) {
    const RunConfig c = parse_config(R"({"network": {"input_transform": "log_s"}, "domain": {"s_min": 1.0}})");
    EXPECT_EQ(c.plan.network.input_transform, InputTransform::LogS);
}

TEST(Config, OutputDirectoryEnvironmentOverride) {
    RunConfig c = default_config();
    c.output_dir = "from_config";
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(resolve_output_dir(c), "from_config");
    ::setenv(kOutputDirEnv, "/tmp/override", 1);
    EXPECT_EQ(resolve_output_dir(c), "/tmp/override");
    ::unsetenv(kOutputDirEnv);
}
