// SPDX-License-Identifier: Apache-2.0
#include "bspinn/losses.hpp"

#include <cmath>
#include <string>

#include "bspinn/errors.hpp"

namespace bspinn {

void LossWeights::validate() const {
    if (!(residual > 0.0)) throw ConfigError("weights.residual must be > 0");
    if (!(terminal > 0.0)) throw ConfigError("weights.terminal must be > 0");
    if (!(boundary > 0.0)) throw ConfigError("weights.boundary must be > 0");
    if (!(obstacle >= 0.0)) throw ConfigError("weights.obstacle must be >= 0");
    if (!(anchor >= 0.0)) throw ConfigError("weights.anchor must be >= 0");
}

ObstacleMode parse_obstacle_mode(std::string_view name) {
    if (name == "penalty") return ObstacleMode::Penalty;
    if (name == "projection") return ObstacleMode::Projection;
    if (name == "both") return ObstacleMode::Both;
    throw ConfigError("unknown obstacle_mode '" + std::string(name) + "' (expected penalty, projection or both)");
}

std::string_view to_string(ObstacleMode mode) {
    switch (mode) {
        case ObstacleMode::Penalty: return "penalty";
        case ObstacleMode::Projection: return "projection";
        case ObstacleMode::Both: return "both";
    }
    return "penalty";
}

namespace {

bool uses_penalty(const MarketParams& m, ObstacleMode mode) {
    return is_american(m.kind) && mode != ObstacleMode::Projection;
}

bool uses_projection(const MarketParams& m, ObstacleMode mode) {
    return is_american(m.kind) && mode != ObstacleMode::Penalty;
}

template <class T>
struct InteriorTerms {
    T residual_sq;
    T obstacle_sq;
};

template <class T>
InteriorTerms<T> interior_terms(const Surrogate& net, const Jet<T>& y, double spot, double time, ObstacleMode mode) {
    const MarketParams& m = net.scaling().market;
    Jet<T> v = map_output(net.config(), net.scaling(), y, spot, time);
    T obstacle(0.0);
    if (uses_penalty(m, mode)) {
        const T gap = ad::relu(T(payoff(m.kind, spot, m.strike)) - v.v);
        obstacle = gap * gap;
    }
    if (uses_projection(m, mode)) v = project_payoff(v, m, spot);
    const T r = bs_residual(v, m, spot);
    return {r * r, obstacle};
}

template <class T>
T value_term(const Surrogate& net, const T& y, double spot, double time, double target, ObstacleMode mode) {
    const MarketParams& m = net.scaling().market;
    Jet<T> v = map_output(net.config(), net.scaling(), Jet<T>{y, T(0.0), T(0.0), T(0.0)}, spot, time);
    if (uses_projection(m, mode)) v = project_payoff(v, m, spot);
    const T diff = v.v - T(target);
    return diff * diff;
}

LossBreakdown finish(const LossWeights& w, const MarketParams& m, double res_sum, double term_sum, double bound_sum,
                     double obs_sum, std::size_t n_r, std::size_t n_i, std::size_t n_b, double anchor_mean) {
    LossBreakdown out;
    out.residual = res_sum / static_cast<double>(n_r);
    out.terminal = term_sum / static_cast<double>(n_i);
    out.boundary = bound_sum / static_cast<double>(n_b);
    out.obstacle = is_american(m.kind) ? obs_sum / static_cast<double>(n_r) : 0.0;
    out.anchor = anchor_mean;
    out.total = w.residual * out.residual + w.terminal * out.terminal + w.boundary * out.boundary +
                w.obstacle * out.obstacle + w.anchor * out.anchor;
    return out;
}

void check_set(const CollocationSet& set) {
    if (set.interior_s.empty() || set.terminal_s.empty() || set.boundary_s.empty())
        throw ConfigError("loss: collocation sets must be non-empty");
    if (set.interior_s.size() != set.interior_t.size() || set.terminal_s.size() != set.terminal_target.size() ||
        set.boundary_s.size() != set.boundary_t.size() || set.boundary_s.size() != set.boundary_target.size())
        throw ShapeError("loss: inconsistent collocation set");
}

}  // namespace

double bs_residual(const Surrogate& net, double spot, double time) {
    const JetD v = evaluate_jet<double>(net.config(), net.scaling(), net.params(), spot, time);
    return bs_residual(v, net.scaling().market, spot);
}

double obstacle_penalty(const Surrogate& net, std::span<const double> spots, std::span<const double> times) {
    const MarketParams& m = net.scaling().market;
    if (!is_american(m.kind)) throw ConfigError("obstacle_penalty: instrument must be American");
    if (spots.size() != times.size()) throw ShapeError("obstacle_penalty: length mismatch");
    if (spots.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < spots.size(); ++i) {
        const double gap = std::max(payoff(m.kind, spots[i], m.strike) - forward(net, spots[i], times[i]), 0.0);
        sum += gap * gap;
    }
    return sum / static_cast<double>(spots.size());
}

double anchor_penalty(std::span<const double> theta, std::span<const double> anchor, double lambda) {
    if (theta.size() != anchor.size())
        throw ShapeError("anchor_penalty: lengths " + std::to_string(theta.size()) + " and " +
                         std::to_string(anchor.size()) + " differ");
    if (theta.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double d = theta[i] - anchor[i];
        sum += d * d;
    }
    return lambda / static_cast<double>(theta.size()) * sum;
}

LossBreakdown LossEvaluator::evaluate(const Surrogate& net, const CollocationSet& set, const LossWeights& w,
                                      std::span<const double> anchor, std::span<double> grad,
                                      const LossOptions& options) {
    check_set(set);
    const MarketParams& m = net.scaling().market;
    const std::size_t n_r = set.interior_s.size();
    const std::size_t n_i = set.terminal_s.size();
    const std::size_t n_b = set.boundary_s.size();
    const std::size_t n = n_r + n_i + n_b;
    const bool want_grad = !grad.empty();
    if (want_grad && grad.size() != net.param_count()) throw ShapeError("loss: gradient length mismatch");
    if (!anchor.empty() && anchor.size() != net.param_count()) throw ShapeError("loss: anchor length mismatch");

    spots_.assign(set.interior_s.begin(), set.interior_s.end());
    times_.assign(set.interior_t.begin(), set.interior_t.end());
    spots_.insert(spots_.end(), set.terminal_s.begin(), set.terminal_s.end());
    times_.insert(times_.end(), n_i, set.maturity);
    spots_.insert(spots_.end(), set.boundary_s.begin(), set.boundary_s.end());
    times_.insert(times_.end(), set.boundary_t.begin(), set.boundary_t.end());
    batch_.forward(net, spots_, times_, n_r);

    if (want_grad) adjoint_.setZero(static_cast<Eigen::Index>(n + 3 * n_r));
    const double c_res = w.residual / static_cast<double>(n_r);
    const double c_obs = w.obstacle / static_cast<double>(n_r);
    const double c_term = w.terminal / static_cast<double>(n_i);
    const double c_bound = w.boundary / static_cast<double>(n_b);
    const ObstacleMode mode = options.obstacle_mode;

    double res_sum = 0.0;
    double obs_sum = 0.0;
    for (std::size_t j = 0; j < n_r; ++j) {
        const double s = spots_[j];
        const double t = times_[j];
        if (!want_grad) {
            const auto terms = interior_terms<double>(net, batch_.y_jet(j), s, t, mode);
            res_sum += terms.residual_sq;
            obs_sum += terms.obstacle_sq;
            continue;
        }
        tape_.clear();
        const JetV y{tape_.leaf(batch_.y(j)), tape_.leaf(batch_.y_s(j)), tape_.leaf(batch_.y_ss(j)),
                     tape_.leaf(batch_.y_t(j))};
        const auto terms = interior_terms<ad::Var>(net, y, s, t, mode);
        res_sum += terms.residual_sq.value();
        obs_sum += terms.obstacle_sq.value();
        const ad::Var contribution = c_res * terms.residual_sq + c_obs * terms.obstacle_sq;
        double g[4];
        tape_.gradient(contribution, g);
        const auto col = static_cast<Eigen::Index>(j);
        const auto nn = static_cast<Eigen::Index>(n);
        const auto nr = static_cast<Eigen::Index>(n_r);
        adjoint_(col) += g[0];
        adjoint_(nn + col) += g[1];
        adjoint_(nn + nr + col) += g[2];
        adjoint_(nn + 2 * nr + col) += g[3];
    }

    auto value_terms = [&](std::size_t offset, std::span<const double> targets, double weight) {
        double sum = 0.0;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const std::size_t i = offset + k;
            if (!want_grad) {
                sum += value_term<double>(net, batch_.y(i), spots_[i], times_[i], targets[k], mode);
                continue;
            }
            tape_.clear();
            const ad::Var y = tape_.leaf(batch_.y(i));
            const ad::Var sq = value_term<ad::Var>(net, y, spots_[i], times_[i], targets[k], mode);
            sum += sq.value();
            double g = 0.0;
            tape_.gradient(weight * sq, std::span<double>(&g, 1));
            adjoint_(static_cast<Eigen::Index>(i)) += g;
        }
        return sum;
    };
    const double term_sum = value_terms(n_r, set.terminal_target, c_term);
    const double bound_sum = value_terms(n_r + n_i, set.boundary_target, c_bound);

    double anchor_mean = 0.0;
    if (!anchor.empty()) anchor_mean = anchor_penalty(net.params(), anchor, 1.0);

    if (want_grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        batch_.backward(net, adjoint_, grad);
        if (!anchor.empty()) {
            const double c = 2.0 * w.anchor / static_cast<double>(net.param_count());
            const auto theta = net.params();
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += c * (theta[i] - anchor[i]);
        }
    }
    return finish(w, m, res_sum, term_sum, bound_sum, obs_sum, n_r, n_i, n_b, anchor_mean);
}

LossBreakdown pinn_loss(const Surrogate& net, const CollocationSet& set, const LossWeights& weights,
                        const LossOptions& options) {
    LossEvaluator evaluator;
    return evaluator.evaluate(net, set, weights, {}, {}, options);
}

LossBreakdown reference_loss(const Surrogate& net, const CollocationSet& set, const LossWeights& w,
                             std::span<const double> anchor, std::span<double> grad, const LossOptions& options) {
    check_set(set);
    const MarketParams& m = net.scaling().market;
    if (!grad.empty() && grad.size() != net.param_count()) throw ShapeError("loss: gradient length mismatch");
    if (!anchor.empty() && anchor.size() != net.param_count()) throw ShapeError("loss: anchor length mismatch");
    const std::size_t n_r = set.interior_s.size();
    const std::size_t n_i = set.terminal_s.size();
    const std::size_t n_b = set.boundary_s.size();
    const ObstacleMode mode = options.obstacle_mode;

    ad::Tape tape;
    std::vector<ad::Var> theta;
    theta.reserve(net.param_count());
    for (double p : net.params()) theta.push_back(tape.leaf(p));
    const std::span<const ad::Var> th(theta);

    ad::Var res_sum(0.0), obs_sum(0.0), term_sum(0.0), bound_sum(0.0);
    for (std::size_t j = 0; j < n_r; ++j) {
        const double s = set.interior_s[j];
        const double t = set.interior_t[j];
        const auto terms = interior_terms<ad::Var>(net, raw_output_jet(net.config(), net.scaling(), th, s, t), s, t, mode);
        res_sum += terms.residual_sq;
        obs_sum += terms.obstacle_sq;
    }
    for (std::size_t k = 0; k < n_i; ++k) {
        const double s = set.terminal_s[k];
        const ad::Var y = raw_output_jet(net.config(), net.scaling(), th, s, set.maturity).v;
        term_sum += value_term<ad::Var>(net, y, s, set.maturity, set.terminal_target[k], mode);
    }
    for (std::size_t k = 0; k < n_b; ++k) {
        const double s = set.boundary_s[k];
        const double t = set.boundary_t[k];
        const ad::Var y = raw_output_jet(net.config(), net.scaling(), th, s, t).v;
        bound_sum += value_term<ad::Var>(net, y, s, t, set.boundary_target[k], mode);
    }
    ad::Var anchor_sum(0.0);
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        const ad::Var d = theta[i] - anchor[i];
        anchor_sum += d * d;
    }
    const double np = static_cast<double>(net.param_count());
    ad::Var total = (w.residual / static_cast<double>(n_r)) * res_sum + (w.terminal / static_cast<double>(n_i)) * term_sum +
                    (w.boundary / static_cast<double>(n_b)) * bound_sum + (w.anchor / np) * anchor_sum;
    if (is_american(m.kind)) total += (w.obstacle / static_cast<double>(n_r)) * obs_sum;
    if (!grad.empty()) tape.gradient(total, grad);
    return finish(w, m, res_sum.value(), term_sum.value(), bound_sum.value(), obs_sum.value(), n_r, n_i, n_b,
                  anchor.empty() ? 0.0 : anchor_sum.value() / np);
}

}  // namespace bspinn
