#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sthsep/autodiff.hpp"
#include "sthsep/config.hpp"
#include "sthsep/graphs.hpp"
#include "sthsep/params.hpp"
#include "sthsep/spatial.hpp"

namespace sthsep {

struct FusionTensors {
    Var o1;  // temporal branch [H, N]; invalid when the branch is off
    Var o2;  // spatial branch [H, N]; invalid when gate.force == 1
    Var gate;
    Var fused;
};

// Gate = sigmoid(FFN([O1; O2])) per node, fused = O1 * Gate + O2 * (1 - Gate).
// w [2H, H], b [H].
FusionTensors gated_fusion(Var o1, Var o2, Var w, Var b);

// Scalar loss on matching shapes.
Var loss(Var pred, Var target, LossKind kind);

class Model {
public:
    // `distances` feeds the incident support when graph.use_incident is set.
    Model(const ModelConfig& cfg, std::size_t nodes, std::optional<Tensor> distances);

    const ModelConfig& config() const { return cfg_; }
    std::size_t nodes() const { return nodes_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Recomputes the hypergraph from the current parameters.
    void rebuild_graphs();
    const Hypergraph& hypergraph() const { return hypergraph_; }
    const Tensor& incident() const { return incident_hat_; }

    // Supports on `tape`; the adaptive adjacency stays differentiable.
    SpatialSupports supports(Tape& tape);

    // x [L, N] normalized window -> fused prediction [H, N].
    FusionTensors forward(Tape& tape, const SpatialSupports& s, Var x);

    // Convenience: fresh tape, fresh supports, value only.
    Tensor predict(const Tensor& x);
    std::vector<Tensor> predict_all(const std::vector<Tensor>& xs);

    Tensor adaptive_adjacency() const;

private:
    ModelConfig cfg_;
    std::size_t nodes_;
    ParamStore store_;
    Tensor incident_raw_;  // thresholded kernel, empty when unused
    Tensor incident_hat_;  // normalized
    Hypergraph hypergraph_;
    Tensor incidence_;
};

}  // namespace sthsep
