// SPDX-License-Identifier: Apache-2.0
#include "bspinn/analytic.hpp"

#include <cmath>
#include <numbers>

#include "bspinn/errors.hpp"

namespace bspinn {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bs_price(const MarketParams& params, double spot, double time) {
    if (is_american(params.kind)) throw ConfigError("bs_price: closed form only exists for European options");
    if (!(spot >= 0.0)) throw ConfigError("bs_price: spot must be >= 0");
    if (time > params.maturity) throw ConfigError("bs_price: time exceeds maturity");
    const double tau = params.maturity - time;
    if (tau <= 0.0) return payoff(params.kind, spot, params.strike);
    const double discounted_strike = params.strike * std::exp(-params.rate * tau);
    if (spot == 0.0) return is_call(params.kind) ? 0.0 : discounted_strike;

    const double vol_sqrt_tau = params.volatility * std::sqrt(tau);
    const double d1 = (std::log(spot / params.strike) + (params.rate + 0.5 * params.volatility * params.volatility) * tau) /
                      vol_sqrt_tau;
    const double d2 = d1 - vol_sqrt_tau;
    if (is_call(params.kind)) return spot * norm_cdf(d1) - discounted_strike * norm_cdf(d2);
    return discounted_strike * norm_cdf(-d2) - spot * norm_cdf(-d1);
}

}  // namespace bspinn
