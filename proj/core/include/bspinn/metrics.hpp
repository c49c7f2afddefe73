// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bspinn/market.hpp"

namespace bspinn {

/// Point-error metrics of predictions against targets.
///
/// EV = 1 - Var(y - yhat) / Var(y) with sample (N - 1) variances; relative error
/// (%) = 100/N' sum |y - yhat| / |y| over the N' points with y != 0.
struct MetricReport {
    std::string slice = "all";
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double ev = 0.0;
    bool ev_defined = true;  ///< false for constant targets (EV reported as NaN)
    double relative_error_percent = 0.0;
    double max_relative_error_percent = 0.0;
    std::size_t relative_excluded = 0;  ///< points with y == 0 left out of the relative errors
    double max_abs_error = 0.0;
};

/// Throws ShapeError for mismatched lengths or fewer than two points.
MetricReport compute_metrics(std::span<const double> targets, std::span<const double> predictions,
                             std::string slice = "all");

/// Pointwise ensemble mean and sample standard deviation (M - 1 denominator).
struct EnsemblePrediction {
    std::vector<double> spots;
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t members = 0;
};

/// `member_values[m][i]` is member m's prediction at point i.
/// Throws ConfigError for M < 2 and ShapeError for ragged inputs.
EnsemblePrediction ensemble_stats(const std::vector<std::vector<double>>& member_values, std::span<const double> spots,
                                  std::span<const double> times);

struct Band {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// mu -/+ k sigma. With `floor_kind` set to an American instrument, the lower
/// curve is floored at the payoff.
Band bands(const EnsemblePrediction& pred, double k, std::optional<InstrumentKind> floor_kind = std::nullopt,
           double strike = 0.0);

}  // namespace bspinn
