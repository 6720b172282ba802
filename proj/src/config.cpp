#include "sthsep/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sthsep/errors.hpp"

namespace sthsep {

using nlohmann::json;

namespace {

struct Field {
    std::function<json(const ModelConfig&)> get;
    std::function<void(ModelConfig&, const json&)> put;
};

template <typename T>
T as(const json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                throw ConfigError(key + ": expected a non-negative integer");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError(key + ": expected a number");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(key + ": expected a string");
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

template <typename E>
E choose(const json& v, const std::string& key, const std::vector<std::pair<std::string, E>>& options) {
    const std::string s = as<std::string>(v, key);
    std::string allowed;
    for (const auto& [name, value] : options) {
        if (name == s) return value;
        allowed += (allowed.empty() ? "" : "|") + name;
    }
    throw ConfigError(key + ": '" + s + "' is not one of " + allowed);
}

template <typename E>
std::string name_of(E value, const std::vector<std::pair<std::string, E>>& options) {
    for (const auto& [name, v] : options)
        if (v == value) return name;
    return "?";
}

const std::vector<std::pair<std::string, LossKind>> loss_names{{"mae", LossKind::mae}, {"mse", LossKind::mse}};
const std::vector<std::pair<std::string, HyperMode>> mode_names{{"knn", HyperMode::knn}, {"hop", HyperMode::hop}};
const std::vector<std::pair<std::string, RebuildPolicy>> rebuild_names{{"epoch", RebuildPolicy::epoch},
                                                                       {"batch", RebuildPolicy::batch}};
const std::vector<std::pair<std::string, SBlockSupport>> sblock_names{{"union", SBlockSupport::union_},
                                                                      {"adaptive", SBlockSupport::adaptive},
                                                                      {"incident", SBlockSupport::incident},
                                                                      {"none", SBlockSupport::none}};

#define STHSEP_FIELD(key, member, type)                                                              \
    {                                                                                                \
        key, {                                                                                       \
            [](const ModelConfig& c) { return json(c.member); },                                     \
                [](ModelConfig& c, const json& v) { c.member = as<type>(v, key); }                   \
        }                                                                                            \
    }
#define STHSEP_ENUM(key, member, table)                                                              \
    {                                                                                                \
        key, {                                                                                       \
            [](const ModelConfig& c) { return json(name_of(c.member, table)); },                     \
                [](ModelConfig& c, const json& v) { c.member = choose(v, key, table); }              \
        }                                                                                            \
    }

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table{
        STHSEP_FIELD("data.dir", data_dir, std::string),
        STHSEP_FIELD("window.lookback", window.lookback, std::size_t),
        STHSEP_FIELD("window.horizon", window.horizon, std::size_t),
        STHSEP_FIELD("window.stride", window.stride, std::size_t),
        STHSEP_FIELD("eval.stride", eval_stride, std::size_t),
        STHSEP_FIELD("patch.length", patch.length, std::size_t),
        STHSEP_FIELD("patch.stride", patch.stride, std::size_t),
        STHSEP_FIELD("transformer.layers", transformer.layers, std::size_t),
        STHSEP_FIELD("transformer.heads", transformer.heads, std::size_t),
        STHSEP_FIELD("transformer.d_model", transformer.d_model, std::size_t),
        STHSEP_FIELD("transformer.ffn_width", transformer.ffn_width, std::size_t),
        STHSEP_FIELD("transformer.adapter_rank", transformer.adapter_rank, std::size_t),
        STHSEP_FIELD("temporal.enabled", temporal_enabled, bool),
        STHSEP_FIELD("mixprop.depth", mixprop.depth, std::size_t),
        STHSEP_FIELD("mixprop.alpha", mixprop.alpha, double),
        STHSEP_FIELD("mixprop.gated", mixprop.gated, bool),
        STHSEP_FIELD("fusion.gamma", fusion.gamma, double),
        STHSEP_FIELD("fusion.st_blocks", fusion.st_blocks, std::size_t),
        STHSEP_FIELD("fusion.epsilon_init", fusion.epsilon_init, double),
        STHSEP_FIELD("fusion.tblock_channels", fusion.tblock_channels, std::size_t),
        STHSEP_FIELD("fusion.tblock_kernel", fusion.tblock_kernel, std::size_t),
        {"fusion.tblock_dilations",
         {[](const ModelConfig& c) { return json(c.fusion.tblock_dilations); },
          [](ModelConfig& c, const json& v) {
              if (!v.is_array()) throw ConfigError("fusion.tblock_dilations: expected an array of integers");
              std::vector<std::size_t> d;
              for (const auto& x : v) d.push_back(as<std::size_t>(x, "fusion.tblock_dilations"));
              c.fusion.tblock_dilations = d;
          }}},
        STHSEP_FIELD("hgcn.normalize", fusion.hgcn_normalize, bool),
        STHSEP_FIELD("graph.embed_dim", graph.embed_dim, std::size_t),
        STHSEP_FIELD("graph.alpha", graph.alpha, double),
        STHSEP_FIELD("graph.use_incident", graph.use_incident, bool),
        STHSEP_FIELD("graph.sigma", graph.sigma, double),
        STHSEP_FIELD("graph.threshold", graph.threshold, double),
        STHSEP_FIELD("hypergraph.order", hypergraph.order, std::size_t),
        STHSEP_ENUM("hypergraph.mode", hypergraph.mode, mode_names),
        STHSEP_ENUM("hypergraph.rebuild", hypergraph.rebuild, rebuild_names),
        STHSEP_ENUM("sblock.support", sblock_support, sblock_names),
        {"gate.force",
         {[](const ModelConfig& c) { return c.gate_force ? json(*c.gate_force) : json(nullptr); },
          [](ModelConfig& c, const json& v) {
              if (v.is_null())
                  c.gate_force.reset();
              else
                  c.gate_force = as<double>(v, "gate.force");
          }}},
        STHSEP_ENUM("train.loss", train.loss, loss_names),
        STHSEP_FIELD("train.lr", train.lr, double),
        STHSEP_FIELD("train.epochs", train.epochs, std::size_t),
        STHSEP_FIELD("train.batch_size", train.batch_size, std::size_t),
        STHSEP_FIELD("train.grad_clip", train.grad_clip, double),
        STHSEP_FIELD("train.patience", train.patience, std::size_t),
        STHSEP_FIELD("seed", seed, std::uint64_t),
    };
    return table;
}

#undef STHSEP_FIELD
#undef STHSEP_ENUM

}  // namespace

void ModelConfig::validate() const {
    if (window.lookback < 1 || window.horizon < 1 || window.stride < 1)
        throw ConfigError("window.lookback, window.horizon and window.stride must be >= 1");
    if (eval_stride < 1) throw ConfigError("eval.stride must be >= 1");
    if (temporal_enabled) {
        patch.validate(window.lookback);
        transformer.validate();
        if (window.lookback < 8) throw ConfigError("window.lookback must be >= 8 when the temporal branch is enabled");
    }
    mixprop.validate();
    fusion.validate();
    if (graph.embed_dim < 1) throw ConfigError("graph.embed_dim must be >= 1");
    if (!(graph.alpha > 0)) throw ConfigError("graph.alpha must be > 0");
    if (graph.sigma < 0) throw ConfigError("graph.sigma must be >= 0 (0 selects the default)");
    if (!(graph.threshold >= 0 && graph.threshold < 1)) throw ConfigError("graph.threshold must be in [0, 1)");
    if (hypergraph.order < 2) throw ConfigError("hypergraph.order must be >= 2");
    if (gate_force && !(*gate_force >= 0 && *gate_force <= 1)) throw ConfigError("gate.force must be in [0, 1]");
    if (!(train.lr > 0)) throw ConfigError("train.lr must be > 0");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(train.grad_clip > 0)) throw ConfigError("train.grad_clip must be > 0");
    for (std::size_t d : fusion.tblock_dilations)
        if ((fusion.tblock_kernel - 1) * d >= window.lookback)
            throw ConfigError("fusion.tblock_dilations: dilation " + std::to_string(d) + " with kernel " +
                              std::to_string(fusion.tblock_kernel) + " spans beyond window.lookback");
}

json ModelConfig::to_json() const {
    json j = json::object();
    for (const auto& [key, f] : fields()) j[key] = f.get(*this);
    return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object of dotted keys");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) c.set_json(key, value);
    return c;
}

ModelConfig ModelConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
    }
    return from_json(j);
}

void ModelConfig::set_json(const std::string& key, const json& value) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.put(*this, value);
}

void ModelConfig::set(const std::string& key, const std::string& text) {
    json v;
    try {
        v = json::parse(text);
    } catch (const json::parse_error&) {
        v = text;  // bare words such as knn or mae
    }
    set_json(key, v);
}

std::vector<std::string> ModelConfig::keys() {
    std::vector<std::string> out;
    for (const auto& [key, f] : fields()) out.push_back(key);
    return out;
}

}  // namespace sthsep
