#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sthsep/dataset.hpp"
#include "sthsep/spatial.hpp"
#include "sthsep/temporal.hpp"

namespace sthsep {

enum class LossKind { mae, mse };
enum class HyperMode { knn, hop };
enum class RebuildPolicy { epoch, batch };
enum class SBlockSupport { union_, adaptive, incident, none };

struct GraphConfig {
    std::size_t embed_dim = 8;
    double alpha = 3.0;
    bool use_incident = true;
    double sigma = 0.0;  // 0 selects the std of pairwise distances
    double threshold = 0.1;
};

struct HypergraphConfig {
    std::size_t order = 3;
    HyperMode mode = HyperMode::knn;
    RebuildPolicy rebuild = RebuildPolicy::epoch;
};

struct TrainConfig {
    LossKind loss = LossKind::mae;
    double lr = 1e-3;
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double grad_clip = 5.0;
    std::size_t patience = 0;  // 0 keeps training for every epoch
};

// Flat, dotted-key configuration. Every key has a default; unknown keys
// are rejected.
struct ModelConfig {
    std::string data_dir;
    WindowSpec window;
    std::size_t eval_stride = 1;
    PatchSpec patch;
    TransformerConfig transformer;
    bool temporal_enabled = true;
    MixPropConfig mixprop;
    SpatialFusionConfig fusion;
    GraphConfig graph;
    HypergraphConfig hypergraph;
    SBlockSupport sblock_support = SBlockSupport::union_;
    std::optional<double> gate_force;
    TrainConfig train;
    std::uint64_t seed = 7;

    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    static ModelConfig load(const std::string& path);

    // Applies one override given as text, e.g. ("fusion.gamma", "0.25").
    void set(const std::string& key, const std::string& value);
    void set_json(const std::string& key, const nlohmann::json& value);

    static std::vector<std::string> keys();
};

}  // namespace sthsep
