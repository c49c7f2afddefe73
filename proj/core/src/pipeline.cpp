// SPDX-License-Identifier: Apache-2.0
#include "bspinn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bspinn/analytic.hpp"
#include "bspinn/errors.hpp"
#include "bspinn/fd.hpp"

namespace bspinn {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

EvalGrid make_eval_grid(const EvalGridSpec& spec) {
    if (spec.points < 2) throw ConfigError("evaluation.points must be >= 2");
    EvalGrid grid;
    grid.slices = spec.slices;
    grid.points_per_slice = spec.points;
    const double step = (spec.s_max - spec.s_min) / static_cast<double>(spec.points - 1);
    for (double t : spec.slices) {
        for (std::size_t i = 0; i < spec.points; ++i) {
            // Last point pinned to s_max so the grid ends exactly on the domain edge.
            grid.spots.push_back(i + 1 == spec.points ? spec.s_max : spec.s_min + static_cast<double>(i) * step);
            grid.times.push_back(t);
        }
    }
    return grid;
}

std::vector<double> reference_values(const RunConfig& config, const EvalGrid& grid) {
    const MarketParams& m = config.plan.market;
    std::vector<double> out(grid.size());
    if (is_american(m.kind)) {
        const double top = *std::max_element(grid.spots.begin(), grid.spots.end());
        if (top > config.fd.s_max) throw ConfigError("fd.s_max must cover the evaluation grid");
        const FDGrid fd = psor_american_put(m, config.fd, config.psor);
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = fd.value_at(grid.spots[i], grid.times[i]);
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = bs_price(m, grid.spots[i], grid.times[i]);
    }
    return out;
}

std::vector<double> predict_values(const Surrogate& net, const std::vector<double>& spots,
                                   const std::vector<double>& times) {
    if (spots.size() != times.size()) throw ShapeError("predict_values: spots and times differ in length");
    const MarketParams& m = net.scaling().market;
    std::vector<double> out(spots.size());
    for (std::size_t i = 0; i < spots.size(); ++i) {
        out[i] = forward(net, spots[i], times[i]);
        if (is_american(m.kind)) out[i] = std::max(out[i], payoff(m.kind, spots[i], m.strike));
    }
    return out;
}

EnsemblePrediction predict_ensemble(const std::vector<Surrogate>& members, const EvalGrid& grid) {
    std::vector<std::vector<double>> values;
    values.reserve(members.size());
    for (const Surrogate& net : members) values.push_back(predict_values(net, grid.spots, grid.times));
    return ensemble_stats(values, grid.spots, grid.times);
}

PointQuote quote(const std::vector<Surrogate>& members, double spot, double time, double k) {
    if (members.empty()) throw ConfigError("quote: no networks given");
    PointQuote q{spot, time};
    q.members = members.size();
    std::vector<double> v;
    for (const Surrogate& net : members) v.push_back(predict_values(net, {spot}, {time}).front());
    for (double x : v) q.mean += x;
    q.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - q.mean) * (x - q.mean);
        q.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    q.lower = q.mean - k * q.stddev;
    q.upper = q.mean + k * q.stddev;
    const MarketParams& m = members.front().scaling().market;
    if (is_american(m.kind)) q.lower = std::max(q.lower, payoff(m.kind, spot, m.strike));
    return q;
}

// ---------------------------------------------------------------------------

bool CsvTable::has(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ShapeError("csv: missing column '" + name + "'");
    return columns[static_cast<std::size_t>(it - header.begin())];
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    return out;
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

Json metric_json(const MetricReport& r) {
    Json j;
    j["slice"] = r.slice;
    j["n"] = r.n;
    j["mae"] = r.mae;
    j["rmse"] = r.rmse;
    j["ev"] = r.ev_defined ? Json(r.ev) : Json(nullptr);
    j["ev_defined"] = r.ev_defined;
    j["relative_error_percent"] = r.relative_error_percent;
    j["max_relative_error_percent"] = r.max_relative_error_percent;
    j["relative_excluded"] = r.relative_excluded;
    j["max_abs_error"] = r.max_abs_error;
    return j;
}

bool same_coordinate(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

std::string slice_label(double t) { return "t=" + format_number(t); }

}  // namespace

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split(line);
        if (table.header.empty()) {
            table.header = cells;
            table.columns.resize(cells.size());
            continue;
        }
        if (cells.size() != table.header.size())
            throw ShapeError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cells[c].size())
                throw ShapeError(path.string() + ":" + std::to_string(line_no) + ": '" + cells[c] +
                                 "' is not a number");
            table.columns[c].push_back(v);
        }
    }
    if (table.header.empty()) throw ShapeError(path.string() + ": no header row");
    return table;
}

void write_values_csv(const fs::path& path, const std::vector<double>& spots, const std::vector<double>& times,
                      const std::vector<double>& values) {
    if (spots.size() != times.size() || spots.size() != values.size())
        throw ShapeError("write_values_csv: column lengths differ");
    auto out = open_out(path);
    out << "# bspinn values v1\nS,t,value\n";
    for (std::size_t i = 0; i < spots.size(); ++i) out << spots[i] << ',' << times[i] << ',' << values[i] << '\n';
}

void write_ensemble_csv(const fs::path& path, const EnsemblePrediction& pred, double k, const MarketParams& market) {
    const std::optional<InstrumentKind> floor =
        is_american(market.kind) ? std::optional<InstrumentKind>(market.kind) : std::nullopt;
    const Band band = bands(pred, k, floor, market.strike);
    const std::string tag = "k" + format_number(k);
    auto out = open_out(path);
    out << "# bspinn ensemble v1 members=" << pred.members << "\nS,t,mu,sigma,lower_" << tag << ",upper_" << tag
        << '\n';
    for (std::size_t i = 0; i < pred.spots.size(); ++i)
        out << pred.spots[i] << ',' << pred.times[i] << ',' << pred.mean[i] << ',' << pred.stddev[i] << ','
            << band.lower[i] << ',' << band.upper[i] << '\n';
}

void write_errors_csv(const fs::path& path, const std::vector<double>& spots, const std::vector<double>& times,
                      const std::vector<double>& errors, const std::vector<double>& sigma) {
    if (spots.size() != times.size() || spots.size() != errors.size() || spots.size() != sigma.size())
        throw ShapeError("write_errors_csv: column lengths differ");
    auto out = open_out(path);
    out << "# bspinn errors v1\nS,t,error,sigma\n";
    for (std::size_t i = 0; i < spots.size(); ++i)
        out << spots[i] << ',' << times[i] << ',' << errors[i] << ',' << sigma[i] << '\n';
}

EvaluationReport evaluate_tables(const CsvTable& prediction, const CsvTable& reference) {
    const auto& ps = prediction.column("S");
    const auto& pt = prediction.column("t");
    const auto& pv = prediction.column(prediction.has("mu") ? "mu" : "value");
    const auto& rs = reference.column("S");
    const auto& rt = reference.column("t");
    const auto& rv = reference.column("value");
    if (ps.size() != rs.size())
        throw ShapeError("evaluate: prediction has " + std::to_string(ps.size()) + " rows, reference has " +
                         std::to_string(rs.size()));
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (!same_coordinate(ps[i], rs[i]) || !same_coordinate(pt[i], rt[i]))
            throw ShapeError("evaluate: grids differ at row " + std::to_string(i + 1));

    EvaluationReport report;
    report.spots = ps;
    report.times = pt;
    report.errors.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) report.errors[i] = pv[i] - rv[i];
    report.sigma = prediction.has("sigma") ? prediction.column("sigma") : std::vector<double>(ps.size(), 0.0);

    std::vector<double> slices = pt;
    std::sort(slices.begin(), slices.end());
    slices.erase(std::unique(slices.begin(), slices.end()), slices.end());
    for (double t : slices) {
        std::vector<double> y;
        std::vector<double> yhat;
        for (std::size_t i = 0; i < pt.size(); ++i)
            if (pt[i] == t) {
                y.push_back(rv[i]);
                yhat.push_back(pv[i]);
            }
        if (y.size() >= 2) report.slices.push_back(compute_metrics(y, yhat, slice_label(t)));
    }
    report.overall = compute_metrics(rv, pv, "all");
    return report;
}

std::string metrics_json(const EvaluationReport& report) {
    Json doc;
    doc["format"] = "bspinn metrics v1";
    doc["overall"] = metric_json(report.overall);
    doc["slices"] = Json::array();
    for (const MetricReport& r : report.slices) doc["slices"].push_back(metric_json(r));
    return doc.dump(2);
}

void append_results_csv(const fs::path& path, const std::string& run, const EvaluationReport& report) {
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    auto out = open_out(path, std::ios::app);
    if (fresh)
        out << "# bspinn results v1\nrun,slice,n,mae,rmse,ev,relative_error_percent,max_relative_error_percent,"
               "relative_excluded,max_abs_error\n";
    auto row = [&](const MetricReport& r) {
        out << run << ',' << r.slice << ',' << r.n << ',' << r.mae << ',' << r.rmse << ',';
        if (r.ev_defined)
            out << r.ev;
        else
            out << "nan";
        out << ',' << r.relative_error_percent << ',' << r.max_relative_error_percent << ',' << r.relative_excluded
            << ',' << r.max_abs_error << '\n';
    };
    for (const MetricReport& r : report.slices) row(r);
    row(report.overall);
}

// ---------------------------------------------------------------------------

fs::path stage1_checkpoint_path(const fs::path& dir) { return dir / "stage1.bspn"; }

fs::path member_checkpoint_path(const fs::path& dir, int member) {
    return dir / ("member_" + std::to_string(member) + ".bspn");
}

ArtifactList run_oracle(const RunConfig& config, const fs::path& dir) {
    config.validate();
    const EvalGrid grid = make_eval_grid(config.evaluation);
    const std::vector<double> values = reference_values(config, grid);
    ArtifactList out;
    out.files.push_back(dir / "oracle.csv");
    write_values_csv(out.files.back(), grid.spots, grid.times, values);
    write_manifest(dir / "manifest_oracle.json", config, "oracle", out);
    return out;
}

ArtifactList run_fd(const RunConfig& config, const fs::path& dir) {
    config.validate();
    const MarketParams& m = config.plan.market;
    const FDGrid grid = is_american(m.kind) ? psor_american_put(m, config.fd, config.psor) : crank_nicolson(m, config.fd);
    ArtifactList out;
    out.files.push_back(dir / "fd_grid.csv");
    fs::create_directories(dir);
    write_grid_csv(grid, out.files.back());
    write_manifest(dir / "manifest_fd.json", config, "fd", out);
    return out;
}

ArtifactList run_train(const RunConfig& config, const fs::path& dir, const EpochCallback& on_epoch) {
    config.validate();
    fs::create_directories(dir);
    const StageResult result = train_stage1(config.plan, config.plan.seed, on_epoch);
    ArtifactList out;
    out.files.push_back(stage1_checkpoint_path(dir));
    save_checkpoint(result.net, out.files.back());
    out.files.push_back(dir / "stage1_log.csv");
    result.log.write_csv(out.files.back());
    write_manifest(dir / "manifest_train.json", config, "train", out);
    return out;
}

ArtifactList run_ensemble_command(const RunConfig& config, const fs::path& dir, const fs::path& stage1_path) {
    config.validate();
    if (!fs::exists(stage1_path)) throw ConfigError("stage-1 checkpoint not found: " + stage1_path.string());
    const Surrogate stage1 = load_checkpoint(stage1_path);
    if (stage1.config().layer_sizes() != config.plan.network.layer_sizes())
        throw ShapeError("stage-1 checkpoint architecture does not match network config");
    if (stage1.scaling().market.kind != config.plan.market.kind)
        throw ConfigError("stage-1 checkpoint instrument does not match market.instrument");

    fs::create_directories(dir);
    const EnsembleResult ensemble = run_ensemble(stage1, config.plan);
    const EvalGrid grid = make_eval_grid(config.evaluation);

    ArtifactList out;
    std::vector<std::vector<double>> member_values;
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
        const int id = static_cast<int>(m);
        out.files.push_back(member_checkpoint_path(dir, id));
        save_checkpoint(ensemble.members[m], out.files.back());
        out.files.push_back(dir / ("member_" + std::to_string(id) + "_log.csv"));
        ensemble.logs[m].write_csv(out.files.back());
        member_values.push_back(predict_values(ensemble.members[m], grid.spots, grid.times));
        out.files.push_back(dir / ("member_" + std::to_string(id) + "_pred.csv"));
        write_values_csv(out.files.back(), grid.spots, grid.times, member_values.back());
    }
    if (member_values.size() >= 2) {
        const EnsemblePrediction pred = ensemble_stats(member_values, grid.spots, grid.times);
        out.files.push_back(dir / "ensemble.csv");
        write_ensemble_csv(out.files.back(), pred, config.evaluation.band_k, config.plan.market);
    }
    write_manifest(dir / "manifest_ensemble.json", config, "ensemble", out);
    return out;
}

ArtifactList run_evaluate(const RunConfig& config, const fs::path& dir, const fs::path& prediction_csv,
                          const fs::path& reference_csv) {
    config.validate();
    const EvaluationReport report = evaluate_tables(read_csv(prediction_csv), read_csv(reference_csv));
    ArtifactList out;
    out.files.push_back(dir / "metrics.json");
    open_out(out.files.back()) << metrics_json(report) << '\n';
    out.files.push_back(dir / "errors.csv");
    write_errors_csv(out.files.back(), report.spots, report.times, report.errors, report.sigma);
    out.files.push_back(dir / "results.csv");
    append_results_csv(out.files.back(), prediction_csv.stem().string(), report);
    write_manifest(dir / "manifest_evaluate.json", config, "evaluate", out);
    return out;
}

void write_manifest(const fs::path& path, const RunConfig& config, const std::string& command,
                    const ArtifactList& artifacts) {
    const TrainPlan& p = config.plan;
    Json doc;
    doc["format"] = "bspinn manifest v1";
    doc["command"] = command;
    doc["config_hash"] = config_hash(config);
    doc["config"] = Json::parse(config_to_json(config));
    Json seeds;
    seeds["stage1"] = p.seed;
    seeds["members"] = Json::array();
    for (int m = 0; m < p.ensemble_size; ++m) seeds["members"].push_back(member_seed(p.seed, m));
    doc["seeds"] = seeds;
    doc["artifacts"] = Json::array();
    for (const fs::path& f : artifacts.files) doc["artifacts"].push_back(f.filename().string());
    open_out(path) << doc.dump(2) << '\n';
}

}  // namespace bspinn
