// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bspinn/config.hpp"
#include "bspinn/metrics.hpp"
#include "bspinn/network.hpp"
#include "bspinn/trainer.hpp"

namespace bspinn {

/// Points of the evaluation grid, ordered by time slice then spot.
struct EvalGrid {
    std::vector<double> spots;
    std::vector<double> times;
    std::vector<double> slices;
    std::size_t points_per_slice = 0;

    std::size_t size() const { return spots.size(); }
};

EvalGrid make_eval_grid(const EvalGridSpec& spec);

/// Oracle values on the grid: closed form for European options, PSOR
/// (bilinearly interpolated) for the American put.
std::vector<double> reference_values(const RunConfig& config, const EvalGrid& grid);

/// Surrogate prices at each point; American prices are projected onto max(V, payoff).
std::vector<double> predict_values(const Surrogate& net, const std::vector<double>& spots,
                                   const std::vector<double>& times);

/// Ensemble statistics of the members' (projected) predictions.
EnsemblePrediction predict_ensemble(const std::vector<Surrogate>& members, const EvalGrid& grid);

struct PointQuote {
    double spot = 0.0;
    double time = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  ///< 0 for a single network
    double lower = 0.0;
    double upper = 0.0;
    std::size_t members = 0;
};

/// Price one point with its mu -/+ k sigma band. Throws ConfigError for an empty member list.
PointQuote quote(const std::vector<Surrogate>& members, double spot, double time, double k);

// ---------------------------------------------------------------------------
// CSV artifacts. Every file starts with a `# bspinn <kind> v1` line.

/// Numeric CSV read back by column name. Comment lines (`#`) are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    bool has(const std::string& name) const;
    /// Throws ShapeError when the column is absent.
    const std::vector<double>& column(const std::string& name) const;
    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

CsvTable read_csv(const std::filesystem::path& path);

/// `S,t,value`.
void write_values_csv(const std::filesystem::path& path, const std::vector<double>& spots,
                      const std::vector<double>& times, const std::vector<double>& values);

/// `S,t,mu,sigma,lower_k<k>,upper_k<k>`; the lower band is floored at the payoff for American options.
void write_ensemble_csv(const std::filesystem::path& path, const EnsemblePrediction& pred, double k,
                        const MarketParams& market);

/// `S,t,error,sigma` with error = prediction - reference.
void write_errors_csv(const std::filesystem::path& path, const std::vector<double>& spots,
                      const std::vector<double>& times, const std::vector<double>& errors,
                      const std::vector<double>& sigma);

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluationReport {
    std::vector<MetricReport> slices;  ///< one per distinct t, ascending
    MetricReport overall;
    std::vector<double> spots;
    std::vector<double> times;
    std::vector<double> errors;  ///< prediction - reference
    std::vector<double> sigma;   ///< from the prediction file, zeros when absent
};

/// Compare a prediction CSV (column `mu`, else `value`) with a reference CSV
/// (`value`). Throws ShapeError when the (S, t) grids differ.
EvaluationReport evaluate_tables(const CsvTable& prediction, const CsvTable& reference);

std::string metrics_json(const EvaluationReport& report);

/// Append one row per slice plus `all` to a results CSV, writing the header when the file is new.
void append_results_csv(const std::filesystem::path& path, const std::string& run, const EvaluationReport& report);

// ---------------------------------------------------------------------------
// Run directory commands. Each writes its artifacts and a manifest under `dir`.

struct ArtifactList {
    std::vector<std::filesystem::path> files;
};

std::filesystem::path stage1_checkpoint_path(const std::filesystem::path& dir);
std::filesystem::path member_checkpoint_path(const std::filesystem::path& dir, int member);

/// oracle.csv on the evaluation grid.
ArtifactList run_oracle(const RunConfig& config, const std::filesystem::path& dir);

/// fd_grid.csv: full Crank-Nicolson (European) or PSOR (American) grid.
ArtifactList run_fd(const RunConfig& config, const std::filesystem::path& dir);

/// stage1.bspn and stage1_log.csv.
ArtifactList run_train(const RunConfig& config, const std::filesystem::path& dir, const EpochCallback& on_epoch = {});

/// member_<m>.bspn, member_<m>_log.csv, member_<m>_pred.csv and ensemble.csv.
ArtifactList run_ensemble_command(const RunConfig& config, const std::filesystem::path& dir,
                                  const std::filesystem::path& stage1_path);

/// metrics.json, errors.csv, and a row block appended to results.csv.
ArtifactList run_evaluate(const RunConfig& config, const std::filesystem::path& dir,
                          const std::filesystem::path& prediction_csv, const std::filesystem::path& reference_csv);

/// Manifest: full config, its hash, every seed used, and the artifacts written.
void write_manifest(const std::filesystem::path& path, const RunConfig& config, const std::string& command,
                    const ArtifactList& artifacts);

}  // namespace bspinn
