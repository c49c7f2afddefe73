// SPDX-License-Identifier: Apache-2.0
#include "bspinn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "bspinn/errors.hpp"

namespace bspinn {

InteriorSampling parse_interior_sampling(std::string_view name) {
    if (name == "uniform") return InteriorSampling::Uniform;
    if (name == "latin_hypercube") return InteriorSampling::LatinHypercube;
    throw ConfigError("unknown interior sampling '" + std::string(name) + "' (expected uniform or latin_hypercube)");
}

std::string_view to_string(InteriorSampling mode) {
    return mode == InteriorSampling::LatinHypercube ? "latin_hypercube" : "uniform";
}

void Domain::validate() const {
    if (!(s_min >= 0.0)) throw ConfigError("domain.s_min must be >= 0");
    if (!(s_max > s_min)) throw ConfigError("domain: empty S interval");
    if (!(maturity > 0.0)) throw ConfigError("domain: empty time interval");
}

void SamplerConfig::validate() const {
    if (interior < 1 || terminal < 1 || boundary < 1)
        throw ConfigError("collocation counts must all be >= 1");
    if (!(kink_fraction >= 0.0 && kink_fraction <= 1.0))
        throw ConfigError("collocation.kink_fraction must lie in [0, 1]");
}

namespace {

/// Uniform draw from the open interval (lo, hi).
double open_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (;;) {
        const double x = dist(rng);
        if (x > lo && x < hi) return x;
    }
}

}  // namespace

CollocationSet sample_collocation(const MarketParams& market, const Domain& domain, const SamplerConfig& config,
                                  std::uint64_t seed) {
    domain.validate();
    config.validate();
    std::mt19937_64 rng(seed);
    CollocationSet set;
    set.seed = seed;
    set.maturity = domain.maturity;
    const double T = domain.maturity;

    const auto n_kink = static_cast<std::size_t>(std::llround(config.kink_fraction * static_cast<double>(config.interior)));
    const std::size_t n_uniform = config.interior - n_kink;
    set.interior_s.reserve(config.interior);
    set.interior_t.reserve(config.interior);
    if (config.interior_sampling == InteriorSampling::LatinHypercube) {
        std::vector<std::size_t> perm(n_uniform);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const double width_s = (domain.s_max - domain.s_min) / static_cast<double>(n_uniform);
        const double width_t = T / static_cast<double>(n_uniform);
        for (std::size_t i = 0; i < n_uniform; ++i) {
            const double lo_s = domain.s_min + static_cast<double>(i) * width_s;
            const double lo_t = static_cast<double>(perm[i]) * width_t;
            set.interior_s.push_back(open_uniform(rng, lo_s, lo_s + width_s));
            set.interior_t.push_back(open_uniform(rng, lo_t, lo_t + width_t));
        }
    } else {
        for (std::size_t i = 0; i < n_uniform; ++i) {
            set.interior_s.push_back(open_uniform(rng, domain.s_min, domain.s_max));
            set.interior_t.push_back(open_uniform(rng, 0.0, T));
        }
    }
    std::normal_distribution<double> kink(market.strike, kKinkScale * market.strike);
    for (std::size_t i = 0; i < n_kink; ++i) {
        double s = kink(rng);
        while (!(s > domain.s_min && s < domain.s_max)) s = kink(rng);
        set.interior_s.push_back(s);
        set.interior_t.push_back(open_uniform(rng, 0.0, T));
    }

    const double width = (domain.s_max - domain.s_min) / static_cast<double>(config.terminal);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < config.terminal; ++i) {
        const double s = domain.s_min + (static_cast<double>(i) + unit(rng)) * width;
        set.terminal_s.push_back(s);
        set.terminal_target.push_back(payoff(market.kind, s, market.strike));
    }

    const std::size_t n_low = (config.boundary + 1) / 2;
    std::uniform_real_distribution<double> time(0.0, T);
    for (std::size_t i = 0; i < config.boundary; ++i) {
        set.boundary_s.push_back(i < n_low ? domain.s_min : domain.s_max);
        set.boundary_t.push_back(time(rng));
    }
    set.boundary_target = boundary_targets(market, domain, set.boundary_s, set.boundary_t);
    return set;
}

double boundary_target(const MarketParams& m, const Domain& domain, double spot, double time) {
    const double tau = domain.maturity - time;
    const double dk = m.strike * std::exp(-m.rate * tau);
    if (spot == domain.s_max) return is_call(m.kind) ? domain.s_max - dk : 0.0;
    if (spot != domain.s_min)
        throw ConfigError("boundary_target: S=" + std::to_string(spot) + " is not on the S boundary");
    switch (m.kind) {
        case InstrumentKind::EuroCall: return 0.0;
        case InstrumentKind::EuroPut: return std::max(dk - spot, 0.0);
        case InstrumentKind::AmerPut: return std::max(m.strike - spot, 0.0);
    }
    return 0.0;
}

std::vector<double> boundary_targets(const MarketParams& market, const Domain& domain, std::span<const double> spots,
                                     std::span<const double> times) {
    if (spots.size() != times.size()) throw ShapeError("boundary_targets: length mismatch");
    std::vector<double> out(spots.size());
    for (std::size_t i = 0; i < spots.size(); ++i) out[i] = boundary_target(market, domain, spots[i], times[i]);
    return out;
}

void write_collocation_csv(const CollocationSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "# bspinn collocation v1 seed=" << set.seed << "\nrole,S,t,target\n";
    for (std::size_t i = 0; i < set.interior_s.size(); ++i)
        out << "interior," << set.interior_s[i] << ',' << set.interior_t[i] << ",\n";
    for (std::size_t i = 0; i < set.terminal_s.size(); ++i)
        out << "terminal," << set.terminal_s[i] << ',' << set.maturity << ',' << set.terminal_target[i] << '\n';
    for (std::size_t i = 0; i < set.boundary_s.size(); ++i)
        out << "boundary," << set.boundary_s[i] << ',' << set.boundary_t[i] << ',' << set.boundary_target[i] << '\n';
}

}  // namespace bspinn
