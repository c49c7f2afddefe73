// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bspinn/bounds.hpp"
#include "bspinn/errors.hpp"
#include "bspinn/jet.hpp"
#include "bspinn/market.hpp"

namespace bspinn {

enum class InputTransform : std::uint32_t { Identity = 0, LogS = 1 };
enum class OutputTransform : std::uint32_t { Identity = 0, BoundedLogit = 1 };

InputTransform parse_input_transform(std::string_view name);
OutputTransform parse_output_transform(std::string_view name);
std::string_view to_string(InputTransform t);
std::string_view to_string(OutputTransform t);

/// Architecture of the surrogate: 2 inputs, `hidden_layers` x `hidden_width` tanh units, 1 output.
struct MlpConfig {
    int hidden_layers = 4;
    int hidden_width = 50;
    InputTransform input_transform = InputTransform::Identity;
    OutputTransform output_transform = OutputTransform::Identity;

    void validate() const;
    /// {2, width, ..., width, 1}
    std::vector<std::size_t> layer_sizes() const;
    std::size_t param_count() const;
};

/// Constants mapping raw (S, t) to network features and the raw output to a price.
///
/// Features: x1 = 2 (S - s_min) / (s_max - s_min) - 1 (identity) or
/// x1 = ln(S / K) / (sigma sqrt(T)) (log-S); x2 = t / T.
/// Output: V = output_scale * y (identity) or V = L + (U - L) sigmoid(y) (bounded logit).
struct Scaling {
    MarketParams market;
    double s_min = 0.0;
    double s_max = 135.0;
    double output_scale = 45.0;

    static Scaling make(const MarketParams& market, double s_min, double s_max);
    void validate(const MlpConfig& config) const;
};

/// Width below which (relative to K) the bounded-logit output falls back to identity.
inline constexpr double kDegenerateBoundsWidth = 1e-8;

/// Offsets of one affine layer inside the flat parameter vector. Weights are
/// stored row-major (out x in) followed by the `out` biases.
struct LayerLayout {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};
std::vector<LayerLayout> layer_layout(const MlpConfig& config);

/// Flat parameter vector in canonical order: layer-major, row-major weights, then biases.
struct ParamVector {
    std::vector<double> values;
    std::vector<std::size_t> layer_sizes;

    std::size_t size() const { return values.size(); }
};

class Surrogate {
public:
    /// Throws ShapeError when `params.size() != config.param_count()`.
    Surrogate(MlpConfig config, Scaling scaling, std::vector<double> params);

    const MlpConfig& config() const { return config_; }
    const Scaling& scaling() const { return scaling_; }
    std::span<const double> params() const { return params_; }
    std::span<double> mutable_params() { return params_; }
    std::size_t param_count() const { return params_.size(); }

private:
    MlpConfig config_;
    Scaling scaling_;
    std::vector<double> params_;
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
Surrogate init_surrogate(const MlpConfig& config, const Scaling& scaling, std::uint64_t seed);

ParamVector flatten(const Surrogate& net);
/// Throws ShapeError on a length or layer-shape mismatch.
Surrogate unflatten(const MlpConfig& config, const Scaling& scaling, const ParamVector& params);

/// Input features and their derivatives: x1 carries (value, d/dS, d2/dS2, 0), x2 carries (value, 0, 0, 1/T).
/// Throws DomainError for S <= 0 under the log-S transform.
std::array<JetD, 2> input_features(const MlpConfig& config, const Scaling& scaling, double spot, double time);

/// Map the raw network output jet to a price jet.
template <class T>
Jet<T> map_output(const MlpConfig& config, const Scaling& scaling, const Jet<T>& y, double spot,
                  double time);

/// Raw network output jet y(S, t) before the output transform.
template <class T>
Jet<T> raw_output_jet(const MlpConfig& config, const Scaling& scaling, std::span<const T> theta, double spot,
                      double time);

/// Generic scalar evaluation of V and its input derivatives with parameters of type T
/// (double for plain forward mode, ad::Var for forward-over-reverse on a tape).
template <class T>
Jet<T> evaluate_jet(const MlpConfig& config, const Scaling& scaling, std::span<const T> theta, double spot,
                    double time);

/// V(S, t).
double forward(const Surrogate& net, double spot, double time);

struct InputDerivatives {
    double value = 0.0;
    double d_spot = 0.0;
    double d2_spot = 0.0;
    double d_time = 0.0;
};
InputDerivatives input_derivatives(const Surrogate& net, double spot, double time);

/// Layer-level batched evaluator of the raw output jet y(S, t) and its reverse pass.
///
/// Points [0, n_jet) carry the full jet (y, dy/dS, d2y/dS2, dy/dt); points
/// [n_jet, N) carry the value only. Columns of every activation matrix are laid
/// out as [values (N) | d/dS (n_jet) | d2/dS2 (n_jet) | d/dt (n_jet)].
/// Holds workspace; one instance per worker.
class BatchEvaluator {
public:
    void forward(const Surrogate& net, std::span<const double> spots, std::span<const double> times,
                 std::size_t n_jet);

    std::size_t size() const { return n_; }
    std::size_t jet_count() const { return n_jet_; }

    double y(std::size_t i) const { return output_(i); }
    double y_s(std::size_t j) const { return output_(n_ + j); }
    double y_ss(std::size_t j) const { return output_(n_ + n_jet_ + j); }
    double y_t(std::size_t j) const { return output_(n_ + 2 * n_jet_ + j); }
    JetD y_jet(std::size_t j) const { return {y(j), y_s(j), y_ss(j), y_t(j)}; }

    /// Accumulate d(loss)/d(theta) into `grad` given the adjoint of every output
    /// column (same layout as the output; length N + 3 n_jet). Uses the
    /// parameters captured by the last forward().
    void backward(const Surrogate& net, const Eigen::RowVectorXd& output_adjoint, std::span<double> grad);

private:
    std::size_t n_ = 0;
    std::size_t n_jet_ = 0;
    std::vector<Eigen::MatrixXd> inputs_;   // A_l: in x C, input of layer l
    std::vector<Eigen::MatrixXd> preacts_;  // Z_l: out x C, hidden layers only
    Eigen::RowVectorXd output_;
    Eigen::MatrixXd adj_a_;
    Eigen::MatrixXd adj_z_;
    std::vector<Eigen::MatrixXd> weights_;  // copies of the parameters seen by forward()
    std::vector<Eigen::VectorXd> biases_;
    Eigen::MatrixXd grad_w_;
    Eigen::MatrixXd grad_b_;
};

inline constexpr char kCheckpointMagic[4] = {'B', 'S', 'P', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const Surrogate& net);
Surrogate surrogate_from_bytes(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Surrogate& net, const std::filesystem::path& path);
Surrogate load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// template definitions

template <class T>
Jet<T> map_output(const MlpConfig& config, const Scaling& scaling, const Jet<T>& y, double spot,
                  double time) {
    if (config.output_transform == OutputTransform::BoundedLogit) {
        const BoundJets b = bound_jets(scaling.market, spot, time);
        const JetD width = b.upper - b.lower;
        if (width.v >= kDegenerateBoundsWidth * scaling.market.strike)
            return lift<T>(b.lower) + lift<T>(width) * sigmoid(y);
    }
    return y * T(scaling.output_scale);
}

template <class T>
Jet<T> raw_output_jet(const MlpConfig& config, const Scaling& scaling, std::span<const T> theta, double spot,
                      double time) {
    if (theta.size() != config.param_count())
        throw ShapeError("raw_output_jet: parameter vector has wrong length");
    const auto features = input_features(config, scaling, spot, time);
    std::vector<Jet<T>> a{lift<T>(features[0]), lift<T>(features[1])};
    std::vector<Jet<T>> next;
    const auto layers = layer_layout(config);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerLayout& L = layers[l];
        next.assign(L.out, Jet<T>{});
        for (std::size_t j = 0; j < L.out; ++j) {
            Jet<T> z = Jet<T>::constant(theta[L.bias_offset + j]);
            for (std::size_t k = 0; k < L.in; ++k) z = z + a[k] * theta[L.weight_offset + j * L.in + k];
            next[j] = l + 1 < layers.size() ? tanh(z) : z;
        }
        a.swap(next);
    }
    return a[0];
}

template <class T>
Jet<T> evaluate_jet(const MlpConfig& config, const Scaling& scaling, std::span<const T> theta, double spot,
                    double time) {
    return map_output(config, scaling, raw_output_jet(config, scaling, theta, spot, time), spot, time);
}

}  // namespace bspinn
