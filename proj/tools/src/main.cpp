// SPDX-License-Identifier: Apache-2.0
// bspinn: command-line driver for oracle grids, two-stage training, ensembles and evaluation.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bspinn/config.hpp"
#include "bspinn/errors.hpp"
#include "bspinn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bspinn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

RunConfig load(const std::string& path) { return path.empty() ? default_config() : load_config(path); }

void report(const ArtifactList& artifacts) {
    for (const fs::path& f : artifacts.files) std::cout << f.string() << '\n';
}

/// member_<m>.bspn files in `dir`, ordered by member index.
std::vector<fs::path> member_files(const fs::path& dir) {
    static const std::regex pattern(R"(member_(\d+)\.bspn)");
    std::vector<std::pair<int, fs::path>> found;
    if (!fs::is_directory(dir)) return {};
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch match;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, match, pattern)) found.emplace_back(std::stoi(match[1]), entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    for (auto& [_, p] : found) out.push_back(p);
    return out;
}

EpochCallback progress(int total, bool quiet) {
    if (quiet) return {};
    const auto start = std::chrono::steady_clock::now();
    const int every = std::max(1, total / 50);
    return [=](int epoch, const LossBreakdown& loss) {
        if (epoch % every != 0 && epoch != total) return;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "epoch %d/%d  loss %.4e  (res %.3e term %.3e bnd %.3e obs %.3e)  %.1fs\n", epoch, total,
                     loss.total, loss.residual, loss.terminal, loss.boundary, loss.obstacle, secs);
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed neural network option pricer with anchored-ensemble uncertainty"};
    app.require_subcommand(1);

    std::string config_path;
    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "JSON run configuration (defaults when omitted)")
            ->check(CLI::ExistingFile);
    };

    auto* cmd_defaults = app.add_subcommand("defaults", "Print the default configuration as JSON");

    auto* cmd_oracle = app.add_subcommand("oracle", "Reference prices on the evaluation grid (oracle.csv)");
    add_config(cmd_oracle);

    auto* cmd_fd = app.add_subcommand("fd", "Full finite-difference grid (fd_grid.csv)");
    add_config(cmd_fd);

    bool quiet = false;
    auto* cmd_train = app.add_subcommand("train", "Stage 1: train the surrogate from scratch (stage1.bspn)");
    add_config(cmd_train);
    cmd_train->add_flag("-q,--quiet", quiet, "No progress output");

    std::string stage1_path;
    auto* cmd_ensemble = app.add_subcommand("ensemble", "Stage 2: anchored ensemble from a stage-1 checkpoint");
    add_config(cmd_ensemble);
    cmd_ensemble->add_option("--stage1", stage1_path, "Stage-1 checkpoint (default <output_dir>/stage1.bspn)");

    std::string prediction_csv;
    std::string reference_csv;
    auto* cmd_evaluate = app.add_subcommand("evaluate", "Metrics of a prediction CSV against a reference CSV");
    add_config(cmd_evaluate);
    cmd_evaluate->add_option("--prediction", prediction_csv, "Prediction CSV (mu or value column)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_evaluate->add_option("--reference", reference_csv, "Reference CSV (value column)")
        ->required()
        ->check(CLI::ExistingFile);

    double spot = 0.0;
    double time = 0.0;
    std::vector<std::string> checkpoints;
    auto* cmd_predict = app.add_subcommand("predict", "Price one (S, t) point with its uncertainty band");
    add_config(cmd_predict);
    cmd_predict->add_option("-S,--spot", spot, "Underlying price")->required();
    cmd_predict->add_option("-t,--time", time, "Calendar time in [0, T]")->required();
    cmd_predict->add_option("--checkpoint", checkpoints,
                            "Checkpoint(s) to use (default: ensemble members in output_dir, else stage1.bspn)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*cmd_defaults) {
            std::cout << config_to_json(default_config()) << '\n';
            return kExitOk;
        }
        const RunConfig config = load(config_path);
        const fs::path dir = resolve_output_dir(config);

        if (*cmd_oracle) report(run_oracle(config, dir));
        if (*cmd_fd) report(run_fd(config, dir));
        if (*cmd_train) report(run_train(config, dir, progress(config.plan.stage1_epochs, quiet)));
        if (*cmd_ensemble)
            report(run_ensemble_command(config, dir,
                                        stage1_path.empty() ? stage1_checkpoint_path(dir) : fs::path(stage1_path)));
        if (*cmd_evaluate) {
            report(run_evaluate(config, dir, prediction_csv, reference_csv));
            std::cout << read_csv(dir / "errors.csv").rows() << " points evaluated\n";
        }
        if (*cmd_predict) {
            std::vector<fs::path> paths(checkpoints.begin(), checkpoints.end());
            if (paths.empty()) paths = member_files(dir);
            if (paths.empty()) paths.push_back(stage1_checkpoint_path(dir));
            std::vector<Surrogate> nets;
            for (const fs::path& p : paths) {
                if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p.string());
                nets.push_back(load_checkpoint(p));
            }
            const PointQuote q = quote(nets, spot, time, config.evaluation.band_k);
            std::printf("{\"S\": %.17g, \"t\": %.17g, \"mu\": %.17g, \"sigma\": %.17g, \"lower\": %.17g, "
                        "\"upper\": %.17g, \"members\": %zu}\n",
                        q.spot, q.time, q.mean, q.stddev, q.lower, q.upper, q.members);
        }
        return kExitOk;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "file error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
