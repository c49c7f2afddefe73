// SPDX-License-Identifier: Apache-2.0
#include "bspinn/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace bspinn {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

InputTransform parse_input_transform(std::string_view name) {
    if (name == "identity") return InputTransform::Identity;
    if (name == "log_s") return InputTransform::LogS;
    throw ConfigError("unknown input_transform '" + std::string(name) + "' (expected identity or log_s)");
}

OutputTransform parse_output_transform(std::string_view name) {
    if (name == "identity") return OutputTransform::Identity;
    if (name == "bounded_logit") return OutputTransform::BoundedLogit;
    throw ConfigError("unknown output_transform '" + std::string(name) +
                      "' (expected identity or bounded_logit)");
}

std::string_view to_string(InputTransform t) { return t == InputTransform::LogS ? "log_s" : "identity"; }
std::string_view to_string(OutputTransform t) {
    return t == OutputTransform::BoundedLogit ? "bounded_logit" : "identity";
}

void MlpConfig::validate() const {
    if (hidden_layers < 1) throw ConfigError("network.hidden_layers must be >= 1");
    if (hidden_width < 1) throw ConfigError("network.hidden_width must be >= 1");
}

std::vector<std::size_t> MlpConfig::layer_sizes() const {
    std::vector<std::size_t> sizes{2};
    sizes.insert(sizes.end(), static_cast<std::size_t>(hidden_layers), static_cast<std::size_t>(hidden_width));
    sizes.push_back(1);
    return sizes;
}

std::size_t MlpConfig::param_count() const {
    const auto sizes = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

std::vector<LayerLayout> layer_layout(const MlpConfig& config) {
    const auto sizes = config.layer_sizes();
    std::vector<LayerLayout> layers;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        LayerLayout L;
        L.in = sizes[l];
        L.out = sizes[l + 1];
        L.weight_offset = offset;
        L.bias_offset = offset + L.in * L.out;
        offset = L.bias_offset + L.out;
        layers.push_back(L);
    }
    return layers;
}

Scaling Scaling::make(const MarketParams& market, double s_min, double s_max) {
    Scaling s;
    s.market = market;
    s.s_min = s_min;
    s.s_max = s_max;
    s.output_scale = market.strike;
    return s;
}

void Scaling::validate(const MlpConfig& config) const {
    market.validate();
    if (!(s_max > s_min)) throw ConfigError("domain.s_max must exceed domain.s_min");
    if (!(s_min >= 0.0)) throw ConfigError("domain.s_min must be >= 0");
    if (config.input_transform == InputTransform::LogS && !(s_min > 0.0))
        throw ConfigError("network.input_transform=log_s requires domain.s_min > 0");
    if (!(output_scale > 0.0) || !std::isfinite(output_scale))
        throw ConfigError("output scale must be positive");
}

Surrogate::Surrogate(MlpConfig config, Scaling scaling, std::vector<double> params)
    : config_(config), scaling_(std::move(scaling)), params_(std::move(params)) {
    config_.validate();
    if (params_.size() != config_.param_count())
        throw ShapeError("surrogate: expected " + std::to_string(config_.param_count()) + " parameters, got " +
                         std::to_string(params_.size()));
}

Surrogate init_surrogate(const MlpConfig& config, const Scaling& scaling, std::uint64_t seed) {
    config.validate();
    std::vector<double> theta(config.param_count(), 0.0);
    std::mt19937_64 rng(seed);
    for (const LayerLayout& L : layer_layout(config)) {
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < L.in * L.out; ++i) theta[L.weight_offset + i] = dist(rng);
    }
    return Surrogate(config, scaling, std::move(theta));
}

ParamVector flatten(const Surrogate& net) {
    return ParamVector{std::vector<double>(net.params().begin(), net.params().end()),
                       net.config().layer_sizes()};
}

Surrogate unflatten(const MlpConfig& config, const Scaling& scaling, const ParamVector& params) {
    if (!params.layer_sizes.empty() && params.layer_sizes != config.layer_sizes())
        throw ShapeError("unflatten: layer shapes do not match the configuration");
    if (params.values.size() != config.param_count())
        throw ShapeError("unflatten: expected " + std::to_string(config.param_count()) + " values, got " +
                         std::to_string(params.values.size()));
    return Surrogate(config, scaling, params.values);
}

std::array<JetD, 2> input_features(const MlpConfig& config, const Scaling& scaling, double spot, double time) {
    const MarketParams& m = scaling.market;
    std::array<JetD, 2> x;
    if (config.input_transform == InputTransform::LogS) {
        if (!(spot > 0.0)) throw DomainError("log-S input transform requires S > 0, got " + std::to_string(spot));
        const double scale = m.volatility * std::sqrt(m.maturity);
        x[0] = JetD{std::log(spot / m.strike) / scale, 1.0 / (spot * scale), -1.0 / (spot * spot * scale), 0.0};
    } else {
        const double slope = 2.0 / (scaling.s_max - scaling.s_min);
        x[0] = JetD{slope * (spot - scaling.s_min) - 1.0, slope, 0.0, 0.0};
    }
    x[1] = JetD{time / m.maturity, 0.0, 0.0, 1.0 / m.maturity};
    return x;
}

double forward(const Surrogate& net, double spot, double time) {
    return evaluate_jet<double>(net.config(), net.scaling(), net.params(), spot, time).v;
}

InputDerivatives input_derivatives(const Surrogate& net, double spot, double time) {
    const JetD j = evaluate_jet<double>(net.config(), net.scaling(), net.params(), spot, time);
    return {j.v, j.s, j.ss, j.t};
}

void BatchEvaluator::forward(const Surrogate& net, std::span<const double> spots, std::span<const double> times,
                             std::size_t n_jet) {
    if (spots.size() != times.size()) throw ShapeError("BatchEvaluator: spot/time length mismatch");
    if (n_jet > spots.size()) throw ShapeError("BatchEvaluator: n_jet exceeds point count");
    const MlpConfig& cfg = net.config();
    const auto layers = layer_layout(cfg);
    const std::size_t N = spots.size();
    const std::size_t J = n_jet;
    const std::size_t C = N + 3 * J;
    n_ = N;
    n_jet_ = J;
    inputs_.resize(layers.size());
    preacts_.resize(layers.size() - 1);

    Eigen::MatrixXd& a0 = inputs_[0];
    a0.setZero(2, static_cast<Eigen::Index>(C));
    for (std::size_t i = 0; i < N; ++i) {
        const auto x = input_features(cfg, net.scaling(), spots[i], times[i]);
        const auto col = static_cast<Eigen::Index>(i);
        a0(0, col) = x[0].v;
        a0(1, col) = x[1].v;
        if (i < J) {
            a0(0, static_cast<Eigen::Index>(N + i)) = x[0].s;
            a0(0, static_cast<Eigen::Index>(N + J + i)) = x[0].ss;
            a0(1, static_cast<Eigen::Index>(N + 2 * J + i)) = x[1].t;
        }
    }

    const auto n = static_cast<Eigen::Index>(N);
    const auto j = static_cast<Eigen::Index>(J);
    const std::span<const double> theta = net.params();
    // Owned copies: Eigen kernels over maps of arbitrary alignment may sum in a
    // different order from call to call, which breaks bitwise reproducibility.
    weights_.resize(layers.size());
    biases_.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerLayout& L = layers[l];
        weights_[l] = RowMajorMap(theta.data() + L.weight_offset, static_cast<Eigen::Index>(L.out),
                                  static_cast<Eigen::Index>(L.in));
        biases_[l] = Eigen::Map<const Eigen::VectorXd>(theta.data() + L.bias_offset, static_cast<Eigen::Index>(L.out));
    }
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        Eigen::MatrixXd& Z = preacts_[l];
        Z.noalias() = weights_[l] * inputs_[l];
        Z.leftCols(n).colwise() += biases_[l];

        Eigen::MatrixXd& A = inputs_[l + 1];
        A.resize(Z.rows(), Z.cols());
        A.leftCols(n) = Z.leftCols(n).array().tanh();
        if (J > 0) {
            const auto h = A.leftCols(j).array();
            const Eigen::ArrayXXd d1 = 1.0 - h.square();
            const Eigen::ArrayXXd d2 = -2.0 * h * d1;
            const auto zs = Z.middleCols(n, j).array();
            A.middleCols(n, j) = d1 * zs;
            A.middleCols(n + j, j) = d1 * Z.middleCols(n + j, j).array() + d2 * zs.square();
            A.middleCols(n + 2 * j, j) = d1 * Z.middleCols(n + 2 * j, j).array();
        }
    }

    output_.noalias() = weights_.back() * inputs_.back();
    output_.leftCols(n).array() += biases_.back()(0);
}

void BatchEvaluator::backward(const Surrogate& net, const Eigen::RowVectorXd& output_adjoint,
                              std::span<double> grad) {
    const auto layers = layer_layout(net.config());
    if (grad.size() != net.param_count()) throw ShapeError("BatchEvaluator::backward: gradient length mismatch");
    if (output_adjoint.size() != output_.size())
        throw ShapeError("BatchEvaluator::backward: adjoint length mismatch");
    const auto n = static_cast<Eigen::Index>(n_);
    const auto j = static_cast<Eigen::Index>(n_jet_);
    if (weights_.size() != layers.size()) throw ShapeError("BatchEvaluator::backward: call forward first");
    auto accumulate = [&](std::size_t offset, const Eigen::MatrixXd& g) {
        // Row-major layout in theta.
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                grad[offset + static_cast<std::size_t>(r * g.cols() + c)] += g(r, c);
    };

    const LayerLayout& out = layers.back();
    grad_w_.noalias() = output_adjoint * inputs_.back().transpose();
    accumulate(out.weight_offset, grad_w_);
    grad[out.bias_offset] += output_adjoint.leftCols(n).sum();
    adj_a_.noalias() = weights_.back().transpose() * output_adjoint;

    for (std::size_t l = layers.size() - 1; l-- > 0;) {
        const LayerLayout& L = layers[l];
        const Eigen::MatrixXd& Z = preacts_[l];
        const Eigen::MatrixXd& H = inputs_[l + 1];
        adj_z_.resize(adj_a_.rows(), adj_a_.cols());

        const Eigen::ArrayXXd d1_all = 1.0 - H.leftCols(n).array().square();
        adj_z_.leftCols(n) = adj_a_.leftCols(n).array() * d1_all;
        if (j > 0) {
            const auto h = H.leftCols(j).array();
            const auto d1 = d1_all.leftCols(j);
            const Eigen::ArrayXXd d2 = -2.0 * h * d1;
            const Eigen::ArrayXXd d3 = -2.0 * (d1.square() + h * d2);
            const auto zs = Z.middleCols(n, j).array();
            const auto zss = Z.middleCols(n + j, j).array();
            const auto zt = Z.middleCols(n + 2 * j, j).array();
            const auto hs_bar = adj_a_.middleCols(n, j).array();
            const auto hss_bar = adj_a_.middleCols(n + j, j).array();
            const auto ht_bar = adj_a_.middleCols(n + 2 * j, j).array();

            const Eigen::ArrayXXd d1_bar = hs_bar * zs + ht_bar * zt + hss_bar * zss;
            const Eigen::ArrayXXd d2_bar = hss_bar * zs.square();
            adj_z_.leftCols(j).array() += d1_bar * d2 + d2_bar * d3;
            adj_z_.middleCols(n, j) = hs_bar * d1 + 2.0 * hss_bar * d2 * zs;
            adj_z_.middleCols(n + j, j) = hss_bar * d1;
            adj_z_.middleCols(n + 2 * j, j) = ht_bar * d1;
        }

        grad_w_.noalias() = adj_z_ * inputs_[l].transpose();
        accumulate(L.weight_offset, grad_w_);
        grad_b_ = adj_z_.leftCols(n).rowwise().sum();
        accumulate(L.bias_offset, grad_b_);
        if (l > 0) adj_a_.noalias() = weights_[l].transpose() * adj_z_;
    }
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * k);
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * k);
        return std::bit_cast<double>(v);
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw ShapeError("checkpoint truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 4;
};

}  // namespace

// Layout after the magic, all little-endian:
//   u32 version
//   u32 n_layer_sizes, u32 layer_sizes[n]
//   u32 input_transform, u32 output_transform, u32 instrument
//   f64 rate, volatility, strike, maturity, s_min, s_max, output_scale
//   u32 param_count, f64 params[param_count]
std::vector<std::uint8_t> checkpoint_bytes(const Surrogate& net) {
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    const auto sizes = net.config().layer_sizes();
    put_u32(out, static_cast<std::uint32_t>(sizes.size()));
    for (std::size_t s : sizes) put_u32(out, static_cast<std::uint32_t>(s));
    put_u32(out, static_cast<std::uint32_t>(net.config().input_transform));
    put_u32(out, static_cast<std::uint32_t>(net.config().output_transform));
    const Scaling& sc = net.scaling();
    put_u32(out, static_cast<std::uint32_t>(sc.market.kind));
    for (double v : {sc.market.rate, sc.market.volatility, sc.market.strike, sc.market.maturity, sc.s_min, sc.s_max,
                     sc.output_scale})
        put_f64(out, v);
    put_u32(out, static_cast<std::uint32_t>(net.param_count()));
    for (double v : net.params()) put_f64(out, v);
    return out;
}

Surrogate surrogate_from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || !std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin()))
        throw ShapeError("not a BSPN checkpoint");
    Reader in(bytes);
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw ShapeError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t n_sizes = in.u32();
    if (n_sizes < 3) throw ShapeError("checkpoint: too few layers");
    std::vector<std::size_t> sizes(n_sizes);
    for (auto& s : sizes) s = in.u32();
    MlpConfig cfg;
    cfg.hidden_layers = static_cast<int>(n_sizes) - 2;
    cfg.hidden_width = static_cast<int>(sizes[1]);
    const std::uint32_t in_t = in.u32();
    const std::uint32_t out_t = in.u32();
    const std::uint32_t kind = in.u32();
    if (in_t > 1 || out_t > 1 || kind > 2) throw ShapeError("checkpoint: invalid enum value");
    cfg.input_transform = static_cast<InputTransform>(in_t);
    cfg.output_transform = static_cast<OutputTransform>(out_t);
    if (cfg.layer_sizes() != sizes) throw ShapeError("checkpoint: unsupported layer sizes");
    Scaling sc;
    sc.market.kind = static_cast<InstrumentKind>(kind);
    sc.market.rate = in.f64();
    sc.market.volatility = in.f64();
    sc.market.strike = in.f64();
    sc.market.maturity = in.f64();
    sc.s_min = in.f64();
    sc.s_max = in.f64();
    sc.output_scale = in.f64();
    const std::uint32_t count = in.u32();
    if (count != cfg.param_count()) throw ShapeError("checkpoint: parameter count does not match layer sizes");
    std::vector<double> theta(count);
    for (auto& v : theta) v = in.f64();
    if (!in.done()) throw ShapeError("checkpoint: trailing bytes");
    return Surrogate(cfg, sc, std::move(theta));
}

void save_checkpoint(const Surrogate& net, const std::filesystem::path& path) {
    const auto bytes = checkpoint_bytes(net);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Surrogate load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return surrogate_from_bytes(bytes);
}

}  // namespace bspinn
