// SPDX-License-Identifier: Apache-2.0
#include "bspinn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspinn/errors.hpp"

namespace bspinn {

PriceBounds bounds_for(InstrumentKind kind, double spot, double strike, double rate, double tau) {
    if (!(spot >= 0.0)) throw ConfigError("bounds_for: spot must be >= 0");
    if (!(tau >= 0.0)) throw ConfigError("bounds_for: tau must be >= 0");
    PriceBounds b;
    b.kind = kind;
    const double discounted_strike = strike * std::exp(-rate * tau);
    switch (kind) {
        case InstrumentKind::AmerPut:
            b.lower = std::max(strike - spot, 0.0);
            b.upper = strike;
            break;
        case InstrumentKind::EuroCall:
            b.lower = std::max(spot - discounted_strike, 0.0);
            b.upper = spot;
            break;
        case InstrumentKind::EuroPut:
            b.lower = std::max(discounted_strike - spot, 0.0);
            b.upper = discounted_strike;
            break;
    }
    if (!(b.upper > b.lower))
        throw DomainError("degenerate price bounds L=U=" + std::to_string(b.lower) + " at S=" +
                          std::to_string(spot));
    return b;
}

bool clip_to_bounds(double& price, const PriceBounds& bounds) {
    const double clipped = std::clamp(price, bounds.lower, bounds.upper);
    const bool moved = clipped != price;
    price = clipped;
    return moved;
}

double to_logit(double price, const PriceBounds& bounds, std::size_t* clipped) {
    if ((price < bounds.lower || price > bounds.upper) && clipped != nullptr) ++*clipped;
    const double margin = kLogitMargin * bounds.width();
    const double y = std::clamp(price, bounds.lower + margin, bounds.upper - margin);
    const double f = (y - bounds.lower) / bounds.width();
    return std::log(f / (1.0 - f));
}

double from_logit(double z, const PriceBounds& bounds) {
    const double f = 1.0 / (1.0 + std::exp(-z));
    return bounds.lower + bounds.width() * f;
}

BoundJets bound_jets(const MarketParams& m, double spot, double time) {
    const double tau = m.maturity - time;
    const double dk = m.strike * std::exp(-m.rate * tau);
    // d/dt of K e^{-r (T - t)} = r K e^{-r (T - t)}
    const double dk_t = m.rate * dk;
    BoundJets out;
    switch (m.kind) {
        case InstrumentKind::AmerPut:
            out.lower = spot < m.strike ? JetD{m.strike - spot, -1.0, 0.0, 0.0} : JetD{};
            out.upper = JetD::constant(m.strike);
            break;
        case InstrumentKind::EuroCall:
            out.lower = spot > dk ? JetD{spot - dk, 1.0, 0.0, -dk_t} : JetD{};
            out.upper = JetD::spot(spot);
            break;
        case InstrumentKind::EuroPut:
            out.lower = dk > spot ? JetD{dk - spot, -1.0, 0.0, dk_t} : JetD{};
            out.upper = JetD{dk, 0.0, 0.0, dk_t};
            break;
    }
    return out;
}

}  // namespace bspinn
