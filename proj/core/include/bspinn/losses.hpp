// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "bspinn/autodiff.hpp"
#include "bspinn/jet.hpp"
#include "bspinn/network.hpp"
#include "bspinn/sampler.hpp"

namespace bspinn {

struct LossWeights {
    double residual = 1.0;   ///< lambda_r
    double terminal = 10.0;  ///< lambda_i
    double boundary = 10.0;  ///< lambda_b
    double obstacle = 10.0;  ///< lambda_obs, American only
    double anchor = 1e-3;    ///< lambda_anc

    void validate() const;
};

/// How V >= payoff enters training for American options. Inference always projects.
enum class ObstacleMode {
    Penalty,     ///< lambda_obs * mean(max(payoff - V, 0)^2) over interior points
    Projection,  ///< residual, terminal and boundary terms see max(V, payoff)
    Both,
};
ObstacleMode parse_obstacle_mode(std::string_view name);
std::string_view to_string(ObstacleMode mode);

/// Unweighted loss components and the weighted total:
/// total = l_r residual + l_i terminal + l_b boundary + l_obs obstacle + l_anc anchor,
/// where `anchor` is ||theta - theta_anc||^2 / N_theta.
struct LossBreakdown {
    double residual = 0.0;
    double terminal = 0.0;
    double boundary = 0.0;
    double obstacle = 0.0;
    double anchor = 0.0;
    double total = 0.0;
};

/// dV/dt + 1/2 sigma^2 S^2 d2V/dS2 + r S dV/dS - r V for a price jet.
template <class T>
T bs_residual(const Jet<T>& v, const MarketParams& m, double spot) {
    const double diffusion = 0.5 * m.volatility * m.volatility * spot * spot;
    return v.t + T(diffusion) * v.ss + T(m.rate * spot) * v.s - T(m.rate) * v.v;
}

/// max(V, g) on a jet, g = payoff. Uses the branch active at the point.
template <class T>
Jet<T> project_payoff(const Jet<T>& v, const MarketParams& m, double spot) {
    const double g = payoff(m.kind, spot, m.strike);
    if (ad::value_of(v.v) >= g) return v;
    const double slope = g > 0.0 ? (is_call(m.kind) ? 1.0 : -1.0) : 0.0;
    return Jet<T>{T(g), T(slope), T(0.0), T(0.0)};
}

/// BS residual of the surrogate at one point.
double bs_residual(const Surrogate& net, double spot, double time);

/// Mean over interior points of max(payoff(S) - V(S, t), 0)^2.
double obstacle_penalty(const Surrogate& net, std::span<const double> spots, std::span<const double> times);

/// (lambda / N) ||theta - anchor||^2. Throws ShapeError on a length mismatch.
double anchor_penalty(std::span<const double> theta, std::span<const double> anchor, double lambda);

struct LossOptions {
    ObstacleMode obstacle_mode = ObstacleMode::Penalty;
};

/// Evaluates the composite PINN / anchored loss and its parameter gradient with
/// the batched layer-level evaluator. Holds workspace; one instance per worker.
class LossEvaluator {
public:
    /// PINN loss (plus obstacle term for American options). With a non-empty
    /// `anchor`, adds the anchor term. When `grad` is non-empty it receives
    /// d(total)/d(theta) (overwritten).
    LossBreakdown evaluate(const Surrogate& net, const CollocationSet& set, const LossWeights& weights,
                           std::span<const double> anchor = {}, std::span<double> grad = {},
                           const LossOptions& options = {});

private:
    BatchEvaluator batch_;
    ad::Tape tape_;
    std::vector<double> spots_;
    std::vector<double> times_;
    Eigen::RowVectorXd adjoint_;
};

/// Convenience wrapper: loss without gradient.
LossBreakdown pinn_loss(const Surrogate& net, const CollocationSet& set, const LossWeights& weights,
                        const LossOptions& options = {});

/// Same loss and gradient computed point-by-point on the scalar tape
/// (forward-over-reverse jets through the whole network). Slow; used to verify
/// the batched route.
LossBreakdown reference_loss(const Surrogate& net, const CollocationSet& set, const LossWeights& weights,
                             std::span<const double> anchor, std::span<double> grad, const LossOptions& options = {});

}  // namespace bspinn
