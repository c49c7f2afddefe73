// SPDX-License-Identifier: Apache-2.0
#include "bspinn/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "bspinn/errors.hpp"

namespace bspinn {

void AdamOptions::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam.learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam.beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam.beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam.epsilon must be > 0");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("adam.decay_rate must lie in (0, 1]");
    if (decay_steps < 1) throw ConfigError("adam.decay_steps must be >= 1");
}

Adam::Adam(std::size_t size, AdamOptions options, std::int64_t schedule_offset)
    : options_(options), m_(size, 0.0), v_(size, 0.0), offset_(schedule_offset) {
    options_.validate();
    if (schedule_offset < 0) throw ConfigError("adam: negative schedule offset");
}

double Adam::learning_rate() const {
    return options_.learning_rate *
           std::pow(options_.decay_rate,
                    static_cast<double>(offset_ + steps_) / static_cast<double>(options_.decay_steps));
}

void Adam::step(std::span<double> theta, std::span<const double> grad) {
    if (theta.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("adam: vector length mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NumericalError("adam: non-finite gradient entry " + std::to_string(i) + " at step " +
                                 std::to_string(steps_ + 1));
    const double lr = learning_rate();
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
        v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = m_[i] / correction1;
        const double v_hat = v_[i] / correction2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
}

AnchorMode parse_anchor_mode(std::string_view name) {
    if (name == "shared") return AnchorMode::Shared;
    if (name == "perturbed") return AnchorMode::Perturbed;
    throw ConfigError("unknown anchor_mode '" + std::string(name) + "' (expected shared or perturbed)");
}

std::string_view to_string(AnchorMode mode) { return mode == AnchorMode::Perturbed ? "perturbed" : "shared"; }

Stage2Schedule parse_stage2_schedule(std::string_view name) {
    if (name == "continue") return Stage2Schedule::Continue;
    if (name == "restart") return Stage2Schedule::Restart;
    throw ConfigError("unknown stage2_schedule '" + std::string(name) + "' (expected continue or restart)");
}

std::string_view to_string(Stage2Schedule schedule) {
    return schedule == Stage2Schedule::Restart ? "restart" : "continue";
}

void TrainPlan::validate() const {
    market.validate();
    domain.validate();
    network.validate();
    collocation.validate();
    weights.validate();
    stage1_adam.validate();
    stage2_adam.validate();
    if (domain.maturity != market.maturity) throw ConfigError("domain.maturity must equal market.maturity");
    scaling().validate(network);
    if (stage1_epochs < 1) throw ConfigError("train.stage1_epochs must be >= 1");
    if (stage2_epochs < 1) throw ConfigError("train.stage2_epochs must be >= 1");
    if (ensemble_size < 1) throw ConfigError("train.ensemble_size must be >= 1");
    if (!(anchor_perturbation >= 0.0)) throw ConfigError("train.anchor_perturbation must be >= 0");
    if (threads < 0) throw ConfigError("train.threads must be >= 0");
}

Scaling TrainPlan::scaling() const { return Scaling::make(market, domain.s_min, domain.s_max); }

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "# bspinn trainlog v1\nepoch,residual,terminal,boundary,obstacle,anchor,total\n";
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        const LossBreakdown& l = epochs[e];
        out << e + 1 << ',' << l.residual << ',' << l.terminal << ',' << l.boundary << ',' << l.obstacle << ','
            << l.anchor << ',' << l.total << '\n';
    }
}

std::uint64_t member_seed(std::uint64_t seed, int member) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(member) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

std::string describe(const LossBreakdown& l) {
    std::ostringstream os;
    os << "residual=" << l.residual << " terminal=" << l.terminal << " boundary=" << l.boundary
       << " obstacle=" << l.obstacle << " anchor=" << l.anchor << " total=" << l.total;
    return os.str();
}

StageResult optimise(Surrogate net, const CollocationSet& set, const TrainPlan& plan, const AdamOptions& adam_options,
                     int epochs, std::int64_t schedule_offset, std::span<const double> anchor, const char* stage,
                     const EpochCallback& on_epoch) {
    LossEvaluator evaluator;
    Adam adam(net.param_count(), adam_options, schedule_offset);
    std::vector<double> grad(net.param_count());
    TrainLog log;
    log.epochs.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const LossBreakdown loss = evaluator.evaluate(net, set, plan.weights, anchor, grad, plan.loss);
        if (!std::isfinite(loss.total))
            throw NumericalError(std::string(stage) + ": non-finite loss at epoch " + std::to_string(epoch) + " (" +
                                 describe(loss) + ")");
        try {
            adam.step(net.mutable_params(), grad);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(stage) + ": epoch " + std::to_string(epoch) + ": " + e.what() + " (" +
                                 describe(loss) + ")");
        }
        log.epochs.push_back(loss);
        if (on_epoch) on_epoch(epoch, loss);
    }
    return StageResult{std::move(net), std::move(log)};
}

double rms(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return v.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

StageResult train_stage1(const TrainPlan& plan, std::uint64_t seed, const EpochCallback& on_epoch) {
    plan.validate();
    const Surrogate init = init_surrogate(plan.network, plan.scaling(), seed);
    const CollocationSet set = sample_collocation(plan.market, plan.domain, plan.collocation, seed);
    return optimise(init, set, plan, plan.stage1_adam, plan.stage1_epochs, 0, {}, "stage 1", on_epoch);
}

StageResult train_stage2_member(const Surrogate& stage1, std::span<const double> anchor, const TrainPlan& plan,
                                std::uint64_t seed, const EpochCallback& on_epoch) {
    plan.validate();
    if (anchor.size() != stage1.param_count()) throw ShapeError("stage 2: anchor length mismatch");
    const CollocationSet set = sample_collocation(plan.market, plan.domain, plan.collocation, seed);
    const std::int64_t offset = plan.stage2_schedule == Stage2Schedule::Continue ? plan.stage1_epochs : 0;
    return optimise(stage1, set, plan, plan.stage2_adam, plan.stage2_epochs, offset, anchor, "stage 2", on_epoch);
}

std::vector<double> member_anchor(const Surrogate& stage1, const TrainPlan& plan, int member) {
    std::vector<double> anchor(stage1.params().begin(), stage1.params().end());
    if (plan.anchor_mode == AnchorMode::Perturbed) {
        const double scale = plan.anchor_perturbation * rms(stage1.params());
        std::mt19937_64 rng(member_seed(plan.seed ^ 0xA5A5A5A5A5A5A5A5ULL, member));
        std::normal_distribution<double> noise(0.0, scale);
        for (double& a : anchor) a += noise(rng);
    }
    return anchor;
}

EnsembleResult run_ensemble(const Surrogate& stage1, const TrainPlan& plan) {
    plan.validate();
    const auto m = static_cast<std::size_t>(plan.ensemble_size);
    std::vector<std::optional<StageResult>> results(m);
    std::vector<std::string> failures(m);
    std::vector<double> distances(m, 0.0);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < m; i = next++) {
            const int member = static_cast<int>(i);
            try {
                const std::vector<double> anchor = member_anchor(stage1, plan, member);
                results[i] = train_stage2_member(stage1, anchor, plan, member_seed(plan.seed, member));
                double d2 = 0.0;
                const auto theta = results[i]->net.params();
                for (std::size_t k = 0; k < theta.size(); ++k) d2 += (theta[k] - anchor[k]) * (theta[k] - anchor[k]);
                distances[i] = std::sqrt(d2);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
    const std::size_t n_threads =
        std::min<std::size_t>(m, plan.threads > 0 ? static_cast<std::size_t>(plan.threads) : hw);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    }

    std::string failed;
    for (std::size_t i = 0; i < m; ++i)
        if (!results[i]) failed += "\n  member " + std::to_string(i) + ": " + failures[i];
    if (!failed.empty()) throw NumericalError("ensemble members failed:" + failed);

    EnsembleResult out;
    for (std::size_t i = 0; i < m; ++i) {
        out.members.push_back(std::move(results[i]->net));
        out.logs.push_back(std::move(results[i]->log));
    }
    out.anchor_distances = std::move(distances);
    return out;
}

}  // namespace bspinn
