// SPDX-License-Identifier: Apache-2.0
#include "bspinn/fd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "bspinn/errors.hpp"

namespace bspinn {

void FDGridSpec::validate() const {
    if (n_s < 4) throw ConfigError("fd.n_s must be >= 4");
    if (n_t < 4) throw ConfigError("fd.n_t must be >= 4");
    if (!(s_max > 0.0) || !std::isfinite(s_max)) throw ConfigError("fd.s_max must be positive");
}

void PsorOptions::validate() const {
    if (!(omega > 1.0 && omega < 2.0)) throw ConfigError("psor.omega must lie in (1, 2)");
    if (!(tol > 0.0)) throw ConfigError("psor.tol must be positive");
    if (max_iter < 1) throw ConfigError("psor.max_iter must be >= 1");
}

double FDGrid::interpolate(std::size_t k, double s) const {
    if (!(s >= 0.0 && s <= spec.s_max)) throw ConfigError("interpolate: spot outside the grid");
    const double x = s / ds();
    const auto i = std::min(static_cast<std::size_t>(x), spec.n_s - 1);
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * at(k, i) + w * at(k, i + 1);
}

double FDGrid::value_at(double s, double t) const {
    if (!(t >= 0.0 && t <= maturity)) throw ConfigError("value_at: time outside the grid");
    const double y = t / dt();
    const auto k = std::min(static_cast<std::size_t>(y), spec.n_t - 1);
    const double w = y - static_cast<double>(k);
    return (1.0 - w) * interpolate(k, s) + w * interpolate(k + 1, s);
}

double lower_boundary_value(const MarketParams& p, double time) {
    const double tau = p.maturity - time;
    switch (p.kind) {
        case InstrumentKind::EuroCall: return 0.0;
        case InstrumentKind::EuroPut: return p.strike * std::exp(-p.rate * tau);
        case InstrumentKind::AmerPut: return p.strike;
    }
    return 0.0;
}

double upper_boundary_value(const MarketParams& p, double s_max, double time) {
    const double tau = p.maturity - time;
    return is_call(p.kind) ? s_max - p.strike * std::exp(-p.rate * tau) : 0.0;
}

namespace {

/// Tridiagonal system (I - theta h L) V_new = (I + (1 - theta) h L) V_old on interior nodes.
struct ThetaSystem {
    std::vector<double> sub, diag, sup, rhs;
};

ThetaSystem build_system(const MarketParams& p, const std::vector<double>& old, double h, double theta,
                         double lower_new, double upper_new) {
    const std::size_t n = old.size() - 1;
    ThetaSystem sys;
    sys.sub.assign(n + 1, 0.0);
    sys.diag.assign(n + 1, 1.0);
    sys.sup.assign(n + 1, 0.0);
    sys.rhs.assign(n + 1, 0.0);
    const double var = p.volatility * p.volatility;
    for (std::size_t i = 1; i < n; ++i) {
        const auto x = static_cast<double>(i);
        const double lo = 0.5 * var * x * x - 0.5 * p.rate * x;
        const double mid = -(var * x * x + p.rate);
        const double up = 0.5 * var * x * x + 0.5 * p.rate * x;
        sys.sub[i] = -theta * h * lo;
        sys.diag[i] = 1.0 - theta * h * mid;
        sys.sup[i] = -theta * h * up;
        sys.rhs[i] = old[i] + (1.0 - theta) * h * (lo * old[i - 1] + mid * old[i] + up * old[i + 1]);
    }
    sys.rhs[1] -= sys.sub[1] * lower_new;
    sys.rhs[n - 1] -= sys.sup[n - 1] * upper_new;
    return sys;
}

void solve_tridiagonal(const ThetaSystem& sys, std::vector<double>& out) {
    const std::size_t n = out.size() - 1;
    std::vector<double> c(n + 1, 0.0), d(n + 1, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        const double denom = sys.diag[i] - (i > 1 ? sys.sub[i] * c[i - 1] : 0.0);
        if (!(std::abs(denom) > 1e-300)) throw NumericalError("tridiagonal solve: zero pivot at row " + std::to_string(i));
        c[i] = sys.sup[i] / denom;
        d[i] = (sys.rhs[i] - (i > 1 ? sys.sub[i] * d[i - 1] : 0.0)) / denom;
    }
    out[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 1;) out[i] = d[i] - c[i] * out[i + 1];
}

/// Projected SOR on the LCP  A V >= rhs, V >= g, (A V - rhs)(V - g) = 0.
/// `v` holds the initial guess and the boundary values on entry.
std::pair<int, double> solve_psor(const ThetaSystem& sys, const std::vector<double>& obstacle, std::vector<double>& v,
                                  const PsorOptions& opt) {
    const std::size_t n = v.size() - 1;
    for (std::size_t i = 1; i < n; ++i) v[i] = std::max(v[i], obstacle[i]);
    auto residual = [&] {
        double worst = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            const double r = sys.sub[i] * v[i - 1] + sys.diag[i] * v[i] + sys.sup[i] * v[i + 1] - sys.rhs[i];
            worst = std::max(worst, v[i] > obstacle[i] ? std::abs(r) : std::max(-r, 0.0));
        }
        return worst;
    };
    double err = residual();
    int iter = 0;
    while (err > opt.tol) {
        if (iter == opt.max_iter)
            throw ConvergenceError("PSOR did not converge in " + std::to_string(opt.max_iter) +
                                       " sweeps (residual " + std::to_string(err) + ")",
                                   err);
        for (std::size_t i = 1; i < n; ++i) {
            const double gs = (sys.rhs[i] - sys.sub[i] * v[i - 1] - sys.sup[i] * v[i + 1]) / sys.diag[i];
            v[i] = std::max(obstacle[i], v[i] + opt.omega * (gs - v[i]));
        }
        ++iter;
        err = residual();
    }
    return {iter, err};
}

FDGrid march(const MarketParams& p, const FDGridSpec& spec, const PsorOptions* psor) {
    spec.validate();
    p.validate();
    FDGrid grid;
    grid.spec = spec;
    grid.maturity = p.maturity;
    const std::size_t ns = spec.n_s;
    const std::size_t nt = spec.n_t;
    grid.values.assign((nt + 1) * (ns + 1), 0.0);

    std::vector<double> obstacle(ns + 1);
    for (std::size_t i = 0; i <= ns; ++i) obstacle[i] = payoff(p.kind, grid.spot(i), p.strike);
    std::vector<double> v = obstacle;
    for (std::size_t i = 0; i <= ns; ++i) grid.at(nt, i) = v[i];

    std::vector<double> next(ns + 1);
    auto step = [&](double h, double theta, double t_new) {
        next = v;
        next[0] = lower_boundary_value(p, t_new);
        next[ns] = upper_boundary_value(p, spec.s_max, t_new);
        const ThetaSystem sys = build_system(p, v, h, theta, next[0], next[ns]);
        if (psor == nullptr) {
            solve_tridiagonal(sys, next);
        } else {
            const auto [iters, res] = solve_psor(sys, obstacle, next, *psor);
            grid.iterations.push_back(iters);
            grid.residuals.push_back(res);
        }
        v.swap(next);
    };

    const double dt = grid.dt();
    for (std::size_t k = nt; k-- > 0;) {
        const double t_new = grid.time(k);
        if (k + 1 == nt) {
            // Rannacher start-up: two implicit-Euler half steps damp the payoff kink.
            step(0.5 * dt, 1.0, t_new + 0.5 * dt);
            step(0.5 * dt, 1.0, t_new);
        } else {
            step(dt, 0.5, t_new);
        }
        for (std::size_t i = 0; i <= ns; ++i) grid.at(k, i) = v[i];
    }
    return grid;
}

}  // namespace

FDGrid crank_nicolson(const MarketParams& params, const FDGridSpec& spec) {
    if (is_american(params.kind)) throw ConfigError("crank_nicolson: use psor_american_put for American options");
    return march(params, spec, nullptr);
}

FDGrid psor_american_put(const MarketParams& params, const FDGridSpec& spec, const PsorOptions& options) {
    if (params.kind != InstrumentKind::AmerPut) throw ConfigError("psor_american_put: instrument must be amer_put");
    options.validate();
    return march(params, spec, &options);
}

double binomial_tree(const MarketParams& params, double spot, int steps) {
    if (steps < 1) throw ConfigError("binomial_tree: steps must be >= 1");
    const double dt = params.maturity / steps;
    const double up = std::exp(params.volatility * std::sqrt(dt));
    return binomial_tree(params, spot, steps, up, 1.0 / up);
}

double binomial_tree(const MarketParams& params, double spot, int steps, double up, double down) {
    if (steps < 1) throw ConfigError("binomial_tree: steps must be >= 1");
    if (!(up > down && down > 0.0)) throw ConfigError("binomial_tree: need up > down > 0");
    const double dt = params.maturity / steps;
    const double growth = std::exp(params.rate * dt);
    const double p = (growth - down) / (up - down);
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("binomial_tree: risk-neutral probability outside (0, 1)");
    const double disc = 1.0 / growth;
    const bool american = is_american(params.kind);

    std::vector<double> v(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) {
        const double s = spot * std::pow(up, j) * std::pow(down, steps - j);
        v[static_cast<std::size_t>(j)] = payoff(params.kind, s, params.strike);
    }
    for (int n = steps - 1; n >= 0; --n) {
        for (int j = 0; j <= n; ++j) {
            const auto u = static_cast<std::size_t>(j);
            double cont = disc * (p * v[u + 1] + (1.0 - p) * v[u]);
            if (american) {
                const double s = spot * std::pow(up, j) * std::pow(down, n - j);
                cont = std::max(cont, payoff(params.kind, s, params.strike));
            }
            v[u] = cont;
        }
    }
    return v[0];
}

void write_grid_csv(const FDGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "# bspinn grid v1\nS,t,value\n";
    for (std::size_t k = 0; k <= grid.spec.n_t; ++k)
        for (std::size_t i = 0; i <= grid.spec.n_s; ++i)
            out << grid.spot(i) << ',' << grid.time(k) << ',' << grid.at(k, i) << '\n';
}

}  // namespace bspinn
