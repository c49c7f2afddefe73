// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "bspinn/market.hpp"

namespace bspinn {

/// Uniform (S, t) grid: n_s + 1 nodes on [0, s_max], n_t + 1 nodes on [0, T].
struct FDGridSpec {
    std::size_t n_s = 800;
    std::size_t n_t = 800;
    double s_max = 135.0;

    void validate() const;
};

/// Solution on a uniform grid. Row k holds time t_k = k T / n_t; column i holds S_i = i s_max / n_s.
struct FDGrid {
    FDGridSpec spec;
    double maturity = 0.0;
    std::vector<double> values;  ///< (n_t + 1) x (n_s + 1), row-major over t then S
    std::vector<int> iterations;  ///< PSOR only: sweeps per linear solve, n_t + 1 of them (the start-up takes two)
    /// PSOR only: final complementarity residual per backward step.
    std::vector<double> residuals;

    double ds() const { return spec.s_max / static_cast<double>(spec.n_s); }
    double dt() const { return maturity / static_cast<double>(spec.n_t); }
    double spot(std::size_t i) const { return static_cast<double>(i) * ds(); }
    double time(std::size_t k) const { return static_cast<double>(k) * dt(); }
    double at(std::size_t k, std::size_t i) const { return values[k * (spec.n_s + 1) + i]; }
    double& at(std::size_t k, std::size_t i) { return values[k * (spec.n_s + 1) + i]; }

    /// Linear interpolation in S on time row k. S outside [0, s_max] throws ConfigError.
    double interpolate(std::size_t k, double spot) const;
    /// Bilinear interpolation in (S, t).
    double value_at(double spot, double time) const;
};

/// Dirichlet values at S = 0 and S = s_max for time t (tau = T - t):
/// EuroCall 0 and s_max - K e^{-r tau}; EuroPut K e^{-r tau} and 0; AmerPut K and 0.
double lower_boundary_value(const MarketParams& params, double time);
double upper_boundary_value(const MarketParams& params, double s_max, double time);

/// Crank-Nicolson for European options, marching backward from the payoff with a
/// Rannacher start-up (the first step is taken as two implicit-Euler half steps).
FDGrid crank_nicolson(const MarketParams& params, const FDGridSpec& spec);

struct PsorOptions {
    double omega = 1.5;
    double tol = 1e-8;
    int max_iter = 10000;

    void validate() const;
};

/// Same time stepping as crank_nicolson, with each linear system replaced by the
/// complementarity problem V >= payoff solved by projected SOR.
/// Throws ConvergenceError when a step exceeds max_iter sweeps.
FDGrid psor_american_put(const MarketParams& params, const FDGridSpec& spec, const PsorOptions& options = {});

/// Cox-Ross-Rubinstein tree value at (S, t = 0); early exercise at every node for AmerPut.
double binomial_tree(const MarketParams& params, double spot, int steps);
/// Tree with explicit up/down factors (risk-neutral p = (e^{r dt} - d) / (u - d)).
double binomial_tree(const MarketParams& params, double spot, int steps, double up, double down);

/// CSV with header `S,t,value`, rows ordered by t then S.
void write_grid_csv(const FDGrid& grid, const std::filesystem::path& path);

}  // namespace bspinn
