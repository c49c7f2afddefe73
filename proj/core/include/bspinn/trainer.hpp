// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bspinn/losses.hpp"
#include "bspinn/network.hpp"
#include "bspinn/sampler.hpp"

namespace bspinn {

struct AdamOptions {
    double learning_rate = 1e-3;  ///< eta_0
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double decay_rate = 0.96;  ///< gamma
    int decay_steps = 1000;    ///< eta(step) = eta_0 gamma^(step / decay_steps)

    void validate() const;
};

/// Bias-corrected Adam with an exponentially decaying step size.
class Adam {
public:
    /// `schedule_offset` shifts the decay clock: eta = eta_0 gamma^((offset + step) / decay_steps).
    Adam(std::size_t size, AdamOptions options, std::int64_t schedule_offset = 0);

    /// Throws NumericalError if any gradient entry is non-finite; theta is left untouched then.
    void step(std::span<double> theta, std::span<const double> grad);

    /// Step size used by the next call to step().
    double learning_rate() const;
    std::int64_t steps() const { return steps_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

private:
    AdamOptions options_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::int64_t steps_ = 0;
    std::int64_t offset_ = 0;
};

enum class AnchorMode {
    Shared,     ///< every member anchored at theta^(1)
    Perturbed,  ///< member m anchored at theta^(1) + zeta_m, zeta_m ~ N(0, s^2)
};
AnchorMode parse_anchor_mode(std::string_view name);
std::string_view to_string(AnchorMode mode);

/// Stage-2 learning-rate clock. Continue: the decay picks up at step E_1, so
/// fine-tuning runs at the rate stage 1 ended with. Restart: clock starts at 0.
enum class Stage2Schedule { Continue, Restart };
Stage2Schedule parse_stage2_schedule(std::string_view name);
std::string_view to_string(Stage2Schedule schedule);

/// Everything a two-stage run needs. "Epoch" means one full-batch optimizer step.
struct TrainPlan {
    MarketParams market;
    Domain domain;
    MlpConfig network;
    SamplerConfig collocation;
    LossWeights weights;
    LossOptions loss;
    AdamOptions stage1_adam;
    AdamOptions stage2_adam;
    int stage1_epochs = 50000;  ///< E_1
    int stage2_epochs = 5000;   ///< E_2
    int ensemble_size = 30;     ///< M
    std::uint64_t seed = 20240501;
    AnchorMode anchor_mode = AnchorMode::Shared;
    Stage2Schedule stage2_schedule = Stage2Schedule::Continue;
    double anchor_perturbation = 0.05;  ///< s / RMS(theta^(1)) for AnchorMode::Perturbed
    int threads = 0;                    ///< 0: hardware concurrency

    /// Throws ConfigError with the offending field path.
    void validate() const;
    Scaling scaling() const;
};

/// Per-epoch loss log.
struct TrainLog {
    std::vector<LossBreakdown> epochs;

    /// CSV `epoch,residual,terminal,boundary,obstacle,anchor,total`, epochs numbered from 1.
    void write_csv(const std::filesystem::path& path) const;
};

struct StageResult {
    Surrogate net;
    TrainLog log;
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;

/// Seed of ensemble member m derived from the plan seed (SplitMix64).
std::uint64_t member_seed(std::uint64_t seed, int member);

/// Stage 1: minimise the PINN loss for E_1 epochs from a Glorot initialisation
/// on one fixed collocation set. Throws NumericalError on a non-finite loss or gradient.
StageResult train_stage1(const TrainPlan& plan, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Stage 2 for one member: start from theta^(1), fine-tune the anchored loss for
/// E_2 epochs on a collocation set resampled with `seed`.
StageResult train_stage2_member(const Surrogate& stage1, std::span<const double> anchor, const TrainPlan& plan,
                                std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Anchor for member m under the plan's anchor mode.
std::vector<double> member_anchor(const Surrogate& stage1, const TrainPlan& plan, int member);

struct EnsembleResult {
    std::vector<Surrogate> members;
    std::vector<TrainLog> logs;
    std::vector<double> anchor_distances;  ///< ||theta^(m) - theta_anc|| per member
};

/// Stage 2 repeated M times (in parallel when threads > 1). Results are ordered
/// by member index and independent of the thread count. Any member failure fails the run.
EnsembleResult run_ensemble(const Surrogate& stage1, const TrainPlan& plan);

}  // namespace bspinn
