// SPDX-License-Identifier: Apache-2.0
#include "bspinn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bspinn/errors.hpp"

namespace bspinn {

namespace {

double sample_variance(std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

}  // namespace

MetricReport compute_metrics(std::span<const double> y, std::span<const double> yhat, std::string slice) {
    if (y.size() != yhat.size()) throw ShapeError("metrics: target and prediction lengths differ");
    if (y.size() < 2) throw ShapeError("metrics: need at least two points");
    MetricReport r;
    r.slice = std::move(slice);
    r.n = y.size();
    std::vector<double> err(y.size());
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double rel_sum = 0.0;
    std::size_t rel_n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err[i] = y[i] - yhat[i];
        const double a = std::abs(err[i]);
        abs_sum += a;
        sq_sum += a * a;
        r.max_abs_error = std::max(r.max_abs_error, a);
        if (y[i] == 0.0) {
            ++r.relative_excluded;
            continue;
        }
        const double rel = 100.0 * a / std::abs(y[i]);
        rel_sum += rel;
        r.max_relative_error_percent = std::max(r.max_relative_error_percent, rel);
        ++rel_n;
    }
    const auto n = static_cast<double>(y.size());
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);
    r.relative_error_percent = rel_n > 0 ? rel_sum / static_cast<double>(rel_n) : 0.0;
    const double var_y = sample_variance(y);
    if (var_y > 0.0) {
        r.ev = 1.0 - sample_variance(err) / var_y;
    } else {
        r.ev = std::numeric_limits<double>::quiet_NaN();
        r.ev_defined = false;
    }
    return r;
}

EnsemblePrediction ensemble_stats(const std::vector<std::vector<double>>& members, std::span<const double> spots,
                                  std::span<const double> times) {
    if (members.size() < 2) throw ConfigError("ensemble_stats: need M >= 2 members for a sample standard deviation");
    if (spots.size() != times.size()) throw ShapeError("ensemble_stats: spot/time length mismatch");
    const std::size_t n = spots.size();
    for (const auto& m : members)
        if (m.size() != n) throw ShapeError("ensemble_stats: member predictions do not share the point set");
    EnsemblePrediction out;
    out.spots.assign(spots.begin(), spots.end());
    out.times.assign(times.begin(), times.end());
    out.members = members.size();
    out.mean.assign(n, 0.0);
    out.stddev.assign(n, 0.0);
    const auto m = static_cast<double>(members.size());
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& member : members) sum += member[i];
        const double mu = sum / m;
        double ss = 0.0;
        for (const auto& member : members) ss += (member[i] - mu) * (member[i] - mu);
        out.mean[i] = mu;
        out.stddev[i] = std::sqrt(ss / (m - 1.0));
    }
    return out;
}

Band bands(const EnsemblePrediction& pred, double k, std::optional<InstrumentKind> floor_kind, double strike) {
    Band b;
    b.lower.resize(pred.mean.size());
    b.upper.resize(pred.mean.size());
    for (std::size_t i = 0; i < pred.mean.size(); ++i) {
        b.lower[i] = pred.mean[i] - k * pred.stddev[i];
        b.upper[i] = pred.mean[i] + k * pred.stddev[i];
        if (floor_kind && is_american(*floor_kind))
            b.lower[i] = std::max(b.lower[i], payoff(*floor_kind, pred.spots[i], strike));
    }
    return b;
}

}  // namespace bspinn
