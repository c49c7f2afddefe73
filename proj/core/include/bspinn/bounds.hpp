// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "bspinn/jet.hpp"
#include "bspinn/market.hpp"

namespace bspinn {

/// No-arbitrage price interval (L, U) for one instrument at one (S, tau).
///
///   AmerPut:  L = max(K - S, 0),            U = K
///   EuroCall: L = max(S - K e^{-r tau}, 0), U = S
///   EuroPut:  L = max(K e^{-r tau} - S, 0), U = K e^{-r tau}
struct PriceBounds {
    double lower = 0.0;
    double upper = 0.0;
    InstrumentKind kind = InstrumentKind::EuroPut;

    double width() const { return upper - lower; }
};

/// Throws ConfigError for S < 0 or tau < 0, DomainError when L == U (e.g. a call at S = 0).
PriceBounds bounds_for(InstrumentKind kind, double spot, double strike, double rate, double tau);

/// Relative clipping margin applied before the logit: y is kept in [L + m, U - m], m = 1e-6 (U - L).
inline constexpr double kLogitMargin = 1e-6;

/// z = log(f / (1 - f)) with f = (y - L) / (U - L), after clipping y into the
/// margin interior. Labels strictly outside [L, U] increment `*clipped`.
double to_logit(double price, const PriceBounds& bounds, std::size_t* clipped = nullptr);

/// y = L + (U - L) sigmoid(z); always inside (L, U) up to rounding at extreme z.
double from_logit(double z, const PriceBounds& bounds);

/// Clip a label into [L, U]; returns true when it had to move.
bool clip_to_bounds(double& price, const PriceBounds& bounds);

/// L and U as functions of (S, t) carried as input jets (value, d/dS, d2/dS2, d/dt),
/// using the branch of each max(.) active at the given point.
struct BoundJets {
    JetD lower;
    JetD upper;
};
BoundJets bound_jets(const MarketParams& market, double spot, double time);

}  // namespace bspinn
