// SPDX-License-Identifier: Apache-2.0
#include "bspinn/market.hpp"

#include <algorithm>
#include <cmath>

#include "bspinn/errors.hpp"

namespace bspinn {

std::string_view to_string(InstrumentKind kind) {
    switch (kind) {
        case InstrumentKind::EuroCall: return "euro_call";
        case InstrumentKind::EuroPut: return "euro_put";
        case InstrumentKind::AmerPut: return "amer_put";
    }
    return "unknown";
}

InstrumentKind parse_instrument(std::string_view name) {
    if (name == "euro_call") return InstrumentKind::EuroCall;
    if (name == "euro_put") return InstrumentKind::EuroPut;
    if (name == "amer_put") return InstrumentKind::AmerPut;
    throw ConfigError("unknown instrument '" + std::string(name) +
                      "' (expected euro_call, euro_put or amer_put)");
}

void MarketParams::validate() const {
    if (!(volatility > 0.0) || !std::isfinite(volatility))
        throw ConfigError("market.volatility must be positive and finite");
    if (!(strike > 0.0) || !std::isfinite(strike))
        throw ConfigError("market.strike must be positive and finite");
    if (!(maturity > 0.0) || !std::isfinite(maturity))
        throw ConfigError("market.maturity must be positive and finite");
    if (!std::isfinite(rate)) throw ConfigError("market.rate must be finite");
}

double payoff(InstrumentKind kind, double spot, double strike) {
    return is_call(kind) ? std::max(spot - strike, 0.0) : std::max(strike - spot, 0.0);
}

}  // namespace bspinn
