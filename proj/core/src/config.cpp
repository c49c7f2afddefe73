// SPDX-License-Identifier: Apache-2.0
#include "bspinn/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bspinn/errors.hpp"

namespace bspinn {

using Json = nlohmann::ordered_json;

void EvalGridSpec::validate(double maturity) const {
    if (points < 2) throw ConfigError("evaluation.points must be >= 2");
    if (!(s_min >= 0.0)) throw ConfigError("evaluation.s_min must be >= 0");
    if (!(s_max > s_min)) throw ConfigError("evaluation.s_max must exceed evaluation.s_min");
    if (slices.empty()) throw ConfigError("evaluation.slices must not be empty");
    for (std::size_t i = 0; i < slices.size(); ++i)
        if (!(slices[i] >= 0.0 && slices[i] <= maturity))
            throw ConfigError("evaluation.slices[" + std::to_string(i) + "] must lie in [0, T]");
    if (!(band_k > 0.0)) throw ConfigError("evaluation.band_k must be > 0");
}

namespace {

template <class F>
void prefixed(const char* path, F&& check) {
    try {
        check();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        const std::string root = std::string(path).substr(0, std::string(path).find('.'));
        if (what.rfind(root + ".", 0) == 0) throw;
        throw ConfigError(std::string(path) + ": " + what);
    }
}

/// Typed access to one JSON object, remembering where it sits in the document.
class Section {
public:
    Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& item : node_.items()) {
            bool known = false;
            for (const char* k : keys) known = known || item.key() == k;
            if (!known) throw ConfigError(field(item.key()) + ": unknown key");
        }
    }

    bool has(const char* key) const { return node_.contains(key); }

    Section child(const char* key) const {
        static const Json empty = Json::object();
        return has(key) ? Section(node_.at(key), field(key)) : Section(empty, field(key));
    }

    void read(const char* key, double& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw ConfigError(field(key) + ": must be finite");
    }

    void read(const char* key, int& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
        const auto x = v.get<std::int64_t>();
        if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(field(key) + ": out of range");
        out = static_cast<int>(x);
    }

    void read(const char* key, std::size_t& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw ConfigError(field(key) + ": expected a nonnegative integer");
        out = v.get<std::size_t>();
    }

    void read_seed(const char* key, std::uint64_t& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(field(key) + ": expected a nonnegative integer");
        out = v.get<std::uint64_t>();
    }

    void read(const char* key, std::vector<double>& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a number");
            out.push_back(v[i].get<double>());
        }
    }

    /// Reads a string and maps it with `parse`, which throws ConfigError on unknown names.
    template <class T, class Parse>
    void read_enum(const char* key, T& out, Parse parse) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
        try {
            out = parse(v.get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(field(key) + ": " + e.what());
        }
    }

    void read(const char* key, std::filesystem::path& out) const {
        if (!has(key)) return;
        const Json& v = node_.at(key);
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
        out = v.get<std::string>();
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_; }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json& node_;
    std::string path_;
};

void read_adam(const Section& s, AdamOptions& adam) {
    s.allow({"learning_rate", "beta1", "beta2", "epsilon", "decay_rate", "decay_steps"});
    s.read("learning_rate", adam.learning_rate);
    s.read("beta1", adam.beta1);
    s.read("beta2", adam.beta2);
    s.read("epsilon", adam.epsilon);
    s.read("decay_rate", adam.decay_rate);
    s.read("decay_steps", adam.decay_steps);
}

Json adam_json(const AdamOptions& a) {
    return Json{{"learning_rate", a.learning_rate}, {"beta1", a.beta1},           {"beta2", a.beta2},
                {"epsilon", a.epsilon},             {"decay_rate", a.decay_rate}, {"decay_steps", a.decay_steps}};
}

}  // namespace

void RunConfig::validate() const {
    prefixed("market", [&] { plan.market.validate(); });
    prefixed("domain", [&] { plan.domain.validate(); });
    if (plan.domain.maturity != plan.market.maturity) throw ConfigError("domain: maturity must equal market.maturity");
    prefixed("network", [&] {
        plan.network.validate();
        plan.scaling().validate(plan.network);
    });
    prefixed("collocation", [&] { plan.collocation.validate(); });
    prefixed("weights", [&] { plan.weights.validate(); });
    prefixed("train.stage1_adam", [&] { plan.stage1_adam.validate(); });
    prefixed("train.stage2_adam", [&] { plan.stage2_adam.validate(); });
    prefixed("train", [&] { plan.validate(); });
    if (plan.ensemble_size < 2) throw ConfigError("train.ensemble_size must be >= 2 (bands need a sample spread)");
    evaluation.validate(plan.market.maturity);
    prefixed("fd", [&] {
        fd.validate();
        psor.validate();
    });
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig default_config() {
    RunConfig c;
    const double k = c.plan.market.strike;
    const double t = c.plan.market.maturity;
    c.plan.domain = Domain{0.0, 3.0 * k, t};
    c.evaluation.s_min = 0.0;
    c.evaluation.s_max = 3.0 * k;
    c.evaluation.slices = {0.0, 0.5 * t, t};
    c.fd.s_max = 3.0 * k;
    return c;
}

RunConfig parse_config(std::string_view json_text) {
    Json doc;
    try {
        doc = Json::parse(json_text.begin(), json_text.end());
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const Section root(doc, "");
    root.allow({"market", "domain", "collocation", "network", "weights", "loss", "train", "evaluation", "fd",
                "output_dir"});

    RunConfig c;
    TrainPlan& p = c.plan;

    const Section market = root.child("market");
    market.allow({"rate", "volatility", "strike", "maturity", "instrument"});
    market.read("rate", p.market.rate);
    market.read("volatility", p.market.volatility);
    market.read("strike", p.market.strike);
    market.read("maturity", p.market.maturity);
    market.read_enum("instrument", p.market.kind, parse_instrument);
    const double k = p.market.strike;
    const double t = p.market.maturity;

    const Section domain = root.child("domain");
    domain.allow({"s_min", "s_max"});
    p.domain = Domain{0.0, 3.0 * k, t};
    domain.read("s_min", p.domain.s_min);
    domain.read("s_max", p.domain.s_max);

    const Section col = root.child("collocation");
    col.allow({"interior", "terminal", "boundary", "kink_fraction", "interior_sampling"});
    col.read("interior", p.collocation.interior);
    col.read("terminal", p.collocation.terminal);
    col.read("boundary", p.collocation.boundary);
    col.read("kink_fraction", p.collocation.kink_fraction);
    col.read_enum("interior_sampling", p.collocation.interior_sampling, parse_interior_sampling);

    const Section net = root.child("network");
    net.allow({"hidden_layers", "hidden_width", "input_transform", "output_transform"});
    net.read("hidden_layers", p.network.hidden_layers);
    net.read("hidden_width", p.network.hidden_width);
    net.read_enum("input_transform", p.network.input_transform, parse_input_transform);
    net.read_enum("output_transform", p.network.output_transform, parse_output_transform);

    const Section w = root.child("weights");
    w.allow({"residual", "terminal", "boundary", "obstacle", "anchor"});
    w.read("residual", p.weights.residual);
    w.read("terminal", p.weights.terminal);
    w.read("boundary", p.weights.boundary);
    w.read("obstacle", p.weights.obstacle);
    w.read("anchor", p.weights.anchor);

    const Section loss = root.child("loss");
    loss.allow({"obstacle_mode"});
    loss.read_enum("obstacle_mode", p.loss.obstacle_mode, parse_obstacle_mode);

    const Section train = root.child("train");
    train.allow({"stage1_epochs", "stage2_epochs", "ensemble_size", "seed", "anchor_mode", "anchor_perturbation",
                 "threads", "stage1_adam", "stage2_adam", "stage2_schedule"});
    train.read("stage1_epochs", p.stage1_epochs);
    train.read("stage2_epochs", p.stage2_epochs);
    train.read("ensemble_size", p.ensemble_size);
    train.read_seed("seed", p.seed);
    train.read_enum("anchor_mode", p.anchor_mode, parse_anchor_mode);
    train.read_enum("stage2_schedule", p.stage2_schedule, parse_stage2_schedule);
    train.read("anchor_perturbation", p.anchor_perturbation);
    train.read("threads", p.threads);
    read_adam(train.child("stage1_adam"), p.stage1_adam);
    read_adam(train.child("stage2_adam"), p.stage2_adam);

    const Section ev = root.child("evaluation");
    ev.allow({"points", "s_min", "s_max", "slices", "band_k"});
    c.evaluation.s_min = 0.0;
    c.evaluation.s_max = 3.0 * k;
    c.evaluation.slices = {0.0, 0.5 * t, t};
    ev.read("points", c.evaluation.points);
    ev.read("s_min", c.evaluation.s_min);
    ev.read("s_max", c.evaluation.s_max);
    ev.read("slices", c.evaluation.slices);
    ev.read("band_k", c.evaluation.band_k);

    const Section fd = root.child("fd");
    fd.allow({"n_s", "n_t", "s_max", "omega", "tol", "max_iter"});
    c.fd.s_max = 3.0 * k;
    fd.read("n_s", c.fd.n_s);
    fd.read("n_t", c.fd.n_t);
    fd.read("s_max", c.fd.s_max);
    fd.read("omega", c.psor.omega);
    fd.read("tol", c.psor.tol);
    fd.read("max_iter", c.psor.max_iter);

    root.read("output_dir", c.output_dir);

    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_to_json(const RunConfig& c) {
    const TrainPlan& p = c.plan;
    Json doc;
    doc["market"] = {{"rate", p.market.rate},
                     {"volatility", p.market.volatility},
                     {"strike", p.market.strike},
                     {"maturity", p.market.maturity},
                     {"instrument", std::string(to_string(p.market.kind))}};
    doc["domain"] = {{"s_min", p.domain.s_min}, {"s_max", p.domain.s_max}};
    doc["collocation"] = {{"interior", p.collocation.interior},
                          {"terminal", p.collocation.terminal},
                          {"boundary", p.collocation.boundary},
                          {"kink_fraction", p.collocation.kink_fraction},
                          {"interior_sampling", std::string(to_string(p.collocation.interior_sampling))}};
    doc["network"] = {{"hidden_layers", p.network.hidden_layers},
                      {"hidden_width", p.network.hidden_width},
                      {"input_transform", std::string(to_string(p.network.input_transform))},
                      {"output_transform", std::string(to_string(p.network.output_transform))}};
    doc["weights"] = {{"residual", p.weights.residual}, {"terminal", p.weights.terminal},
                      {"boundary", p.weights.boundary}, {"obstacle", p.weights.obstacle},
                      {"anchor", p.weights.anchor}};
    doc["loss"] = {{"obstacle_mode", std::string(to_string(p.loss.obstacle_mode))}};
    doc["train"] = {{"stage1_epochs", p.stage1_epochs},
                    {"stage2_epochs", p.stage2_epochs},
                    {"ensemble_size", p.ensemble_size},
                    {"seed", p.seed},
                    {"anchor_mode", std::string(to_string(p.anchor_mode))},
                    {"anchor_perturbation", p.anchor_perturbation},
                    {"threads", p.threads},
                    {"stage1_adam", adam_json(p.stage1_adam)},
                    {"stage2_adam", adam_json(p.stage2_adam)},
                    {"stage2_schedule", std::string(to_string(p.stage2_schedule))}};
    doc["evaluation"] = {{"points", c.evaluation.points},
                         {"s_min", c.evaluation.s_min},
                         {"s_max", c.evaluation.s_max},
                         {"slices", c.evaluation.slices},
                         {"band_k", c.evaluation.band_k}};
    doc["fd"] = {{"n_s", c.fd.n_s},         {"n_t", c.fd.n_t}, {"s_max", c.fd.s_max},
                 {"omega", c.psor.omega},   {"tol", c.psor.tol}, {"max_iter", c.psor.max_iter}};
    doc["output_dir"] = c.output_dir.string();
    return doc.dump(2);
}

std::string config_hash(const RunConfig& config) {
    const std::string body = config_to_json(config);
    const std::string blob = "blob " + std::to_string(body.size()) + '\0' + body;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1)
        throw NumericalError("config_hash: SHA-1 digest failed");
    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < length; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
    const char* env = std::getenv(kOutputDirEnv);
    if (env != nullptr && *env != '\0') return env;
    return config.output_dir;
}

}  // namespace bspinn
