// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace bspinn {

enum class InstrumentKind { EuroCall, EuroPut, AmerPut };

std::string_view to_string(InstrumentKind kind);
/// Accepts "euro_call", "euro_put", "amer_put" (case-sensitive). Throws ConfigError otherwise.
InstrumentKind parse_instrument(std::string_view name);

inline bool is_call(InstrumentKind kind) { return kind == InstrumentKind::EuroCall; }
inline bool is_american(InstrumentKind kind) { return kind == InstrumentKind::AmerPut; }

/// Black-Scholes market and contract parameters. No dividends.
struct MarketParams {
    double rate = 0.05;        ///< risk-free rate r, per year
    double volatility = 0.2;   ///< sigma, per sqrt(year)
    double strike = 45.0;      ///< K
    double maturity = 0.5;     ///< T, years
    InstrumentKind kind = InstrumentKind::EuroPut;

    /// Throws ConfigError unless sigma > 0, K > 0, T > 0 and r finite.
    void validate() const;
};

/// Exercise value: max(S-K,0) for calls, max(K-S,0) for puts.
double payoff(InstrumentKind kind, double spot, double strike);

}  // namespace bspinn
