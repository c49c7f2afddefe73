// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bspinn/fd.hpp"
#include "bspinn/trainer.hpp"

namespace bspinn {

/// Evaluation grid: `points` uniform spots on [s_min, s_max] at each time slice.
struct EvalGridSpec {
    std::size_t points = 201;
    double s_min = 0.0;
    double s_max = 135.0;
    std::vector<double> slices{0.0, 0.25, 0.5};
    double band_k = 2.0;

    void validate(double maturity) const;
};

/// One experiment: everything needed to reproduce every artifact of a run directory.
struct RunConfig {
    TrainPlan plan;
    EvalGridSpec evaluation;
    FDGridSpec fd;
    PsorOptions psor;
    std::filesystem::path output_dir = "runs/default";

    /// Throws ConfigError naming the offending field path.
    void validate() const;
};

/// Paper-scale defaults: K=45, sigma=0.2, r=0.05, T=0.5, European put, domain [0, 3K].
RunConfig default_config();

/// Parse a JSON document. Missing keys take defaults; S-range keys default to
/// 3K and time slices to {0, T/2, T} of the configured market. Unknown keys are
/// rejected. Throws ConfigError with the field path on any problem.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Complete JSON dump (all defaults filled in), stable key order.
std::string config_to_json(const RunConfig& config);

/// Git-style blob hash (SHA-1 of "blob <len>\0<canonical JSON>") in hex.
std::string config_hash(const RunConfig& config);

/// Environment variable that overrides `output_dir`.
inline constexpr const char* kOutputDirEnv = "BSPINN_OUTPUT_DIR";

/// `output_dir`, or the value of BSPINN_OUTPUT_DIR when it is set and non-empty.
std::filesystem::path resolve_output_dir(const RunConfig& config);

}  // namespace bspinn
