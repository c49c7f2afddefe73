// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "bspinn/market.hpp"

namespace bspinn {

/// Training domain [s_min, s_max] x [0, T].
struct Domain {
    double s_min = 0.0;
    double s_max = 135.0;
    double maturity = 0.5;

    void validate() const;
};

enum class InteriorSampling { Uniform, LatinHypercube };
InteriorSampling parse_interior_sampling(std::string_view name);
std::string_view to_string(InteriorSampling mode);

struct SamplerConfig {
    std::size_t interior = 150;  ///< N_r
    std::size_t terminal = 128;  ///< N_i
    std::size_t boundary = 128;  ///< N_b
    double kink_fraction = 0.3;  ///< share of N_r drawn near S = K
    InteriorSampling interior_sampling = InteriorSampling::Uniform;

    void validate() const;
};

/// Scale of the truncated normal used for kink points, relative to K.
inline constexpr double kKinkScale = 0.1;

struct CollocationSet {
    std::vector<double> interior_s;
    std::vector<double> interior_t;
    std::vector<double> terminal_s;
    std::vector<double> terminal_target;  ///< payoff(S)
    std::vector<double> boundary_s;       ///< s_min or s_max exactly
    std::vector<double> boundary_t;
    std::vector<double> boundary_target;  ///< Dirichlet value h(S_b, t_b)
    double maturity = 0.0;  ///< time of the terminal points
    std::uint64_t seed = 0;
};

/// Interior points strictly inside the domain (uniform or LHS, plus a truncated
/// normal around K for the kink share), stratified terminal spots at t = T, and
/// boundary points split evenly between s_min and s_max with uniform times.
CollocationSet sample_collocation(const MarketParams& market, const Domain& domain, const SamplerConfig& config,
                                  std::uint64_t seed);

/// Dirichlet target at a boundary point. At S = 0 and S = s_max these are the
/// FD boundary values; for s_min > 0 the deep in/out-of-the-money asymptotes
/// (EuroPut K e^{-r tau} - S, AmerPut K - S, EuroCall 0) are used.
/// Throws ConfigError when S is not exactly s_min or s_max.
double boundary_target(const MarketParams& market, const Domain& domain, double spot, double time);
std::vector<double> boundary_targets(const MarketParams& market, const Domain& domain, std::span<const double> spots,
                                     std::span<const double> times);

/// CSV dump with header `role,S,t,target` (role: interior, terminal, boundary).
void write_collocation_csv(const CollocationSet& set, const std::filesystem::path& path);

}  // namespace bspinn
