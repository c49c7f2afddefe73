// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bspinn/market.hpp"

namespace bspinn {

/// Standard normal CDF via erfc.
double norm_cdf(double x);

/// Closed-form Black-Scholes value of a European call or put at (S, t), tau = T - t.
/// At t = T returns the payoff; at S = 0 returns the limits (call 0, put K e^{-r tau}).
/// Throws ConfigError for American instruments, S < 0 or t > T.
double bs_price(const MarketParams& params, double spot, double time);

}  // namespace bspinn
