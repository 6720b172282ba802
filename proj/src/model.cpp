#include "sthsep/model.hpp"

#include "sthsep/errors.hpp"
#include "sthsep/rng.hpp"
#include "sthsep/temporal.hpp"

namespace sthsep {

FusionTensors gated_fusion(Var o1, Var o2, Var w, Var b) {
    if (o1.shape() != o2.shape())
        throw ShapeError("gated_fusion: O1 " + shape_str(o1.shape()) + " vs O2 " + shape_str(o2.shape()));
    Var cat = ops::transpose(ops::concat({o1, o2}, 0));  // [N, 2H]
    Var gate = ops::sigmoid(ops::transpose(ops::add_bias(ops::matmul(cat, w), b)));
    Var fused = ops::add(ops::mul(o1, gate), ops::mul(o2, ops::shift(ops::scale(gate, -1.0), 1.0)));
    return {o1, o2, gate, fused};
}

Var loss(Var pred, Var target, LossKind kind) {
    if (pred.shape() != target.shape())
        throw ShapeError("loss: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
    Var diff = ops::sub(pred, target);
    return ops::mean_all(kind == LossKind::mae ? ops::abs(diff) : ops::square(diff));
}

Model::Model(const ModelConfig& cfg, std::size_t nodes, std::optional<Tensor> distances)
    : cfg_(cfg), nodes_(nodes) {
    cfg_.validate();
    if (nodes_ < 1) throw ConfigError("model: dataset has no nodes");
    if (!cfg_.temporal_enabled && cfg_.gate_force && *cfg_.gate_force > 0.0)
        throw ConfigError("gate.force > 0 needs temporal.enabled");
    if (cfg_.fusion.gamma < 1.0 && cfg_.hypergraph.mode == HyperMode::knn && cfg_.hypergraph.order > nodes_)
        throw ConfigError("hypergraph.order " + std::to_string(cfg_.hypergraph.order) + " exceeds node count " +
                          std::to_string(nodes_));

    const std::size_t N = nodes_, d = cfg_.graph.embed_dim, L = cfg_.window.lookback, H = cfg_.window.horizon;
    Rng rng(cfg_.seed);
    store_.add_uniform("graph.e1", {N, d}, 1, rng);
    store_.add_uniform("graph.e2", {N, d}, 1, rng);
    store_.add_uniform("graph.ffn_w", {d, N}, d, rng);
    store_.add_uniform("graph.ffn_b", {N}, d, rng);
    store_.add_uniform("graph.e3", {N, d}, 1, rng);
    store_.add_uniform("graph.ffn3_w", {d, d}, d, rng);
    store_.add_uniform("graph.ffn3_b", {d}, d, rng);
    init_spatial_params(store_, {N, L, H}, cfg_.mixprop, cfg_.fusion, rng);
    if (cfg_.temporal_enabled) {
        init_temporal_params(store_, {L, H}, cfg_.patch, cfg_.transformer, rng);
        store_.add_uniform("fusion.gate_w", {2 * H, H}, 2 * H, rng);
        store_.add_uniform("fusion.gate_b", {H}, 2 * H, rng);
    }

    if (cfg_.graph.use_incident) {
        if (distances && distances->shape() != Shape{N, N})
            throw ShapeError("model: distances " + shape_str(distances->shape()) + " vs " + std::to_string(N) + " nodes");
        const double sigma = cfg_.graph.sigma > 0 ? cfg_.graph.sigma : (distances ? default_sigma(*distances) : 1.0);
        incident_raw_ = gaussian_incident(distances, sigma, cfg_.graph.threshold).matrix;
        incident_hat_ = normalize_adjacency(Adjacency{AdjacencyKind::incident, incident_raw_}).matrix;
    }
    rebuild_graphs();
}

Tensor Model::adaptive_adjacency() const {
    return sthsep::adaptive_adjacency(store_.value("graph.e1"), store_.value("graph.e2"), store_.value("graph.ffn_w"),
                                      store_.value("graph.ffn_b"), cfg_.graph.alpha)
        .matrix;
}

void Model::rebuild_graphs() {
    if (cfg_.fusion.gamma >= 1.0) return;
    const std::size_t k = cfg_.hypergraph.order;
    if (cfg_.hypergraph.mode == HyperMode::knn) {
        Tensor f3 = hyperedge_features(store_.value("graph.e3"), store_.value("graph.ffn3_w"),
                                       store_.value("graph.ffn3_b"), cfg_.graph.alpha);
        hypergraph_ = knn_hyperedges(f3, k);
    } else {
        Tensor a = adaptive_adjacency();
        Tensor sym({nodes_, nodes_});
        for (std::size_t i = 0; i < nodes_; ++i)
            for (std::size_t j = 0; j < nodes_; ++j) {
                const bool inc = !incident_raw_.empty() && incident_raw_.at(i, j) > 0;
                sym.at(i, j) = (a.at(i, j) > 0 || a.at(j, i) > 0 || inc) ? 1.0 : 0.0;
            }
        hypergraph_ = hop_hyperedges(binarize(sym), k);
    }
    incidence_ = incidence(hypergraph_).matrix;
}

SpatialSupports Model::supports(Tape& tape) {
    SpatialSupports s;
    Var a = sthsep::adaptive_adjacency(tape.param(store_, "graph.e1"), tape.param(store_, "graph.e2"),
                                       tape.param(store_, "graph.ffn_w"), tape.param(store_, "graph.ffn_b"),
                                       cfg_.graph.alpha);
    s.adaptive = normalize_adjacency(a);
    s.adaptive_t = normalize_adjacency(ops::transpose(a));
    if (!incident_hat_.empty()) s.incident = tape.constant(incident_hat_);
    if (!incidence_.empty()) s.incidence = tape.constant(incidence_);

    const Tensor& av = a.value();
    Tensor u({nodes_, nodes_});
    const SBlockSupport mode = cfg_.sblock_support;
    for (std::size_t i = 0; i < nodes_ * nodes_; ++i) {
        const bool adp = (mode == SBlockSupport::union_ || mode == SBlockSupport::adaptive) && av[i] > 0;
        const bool inc = (mode == SBlockSupport::union_ || mode == SBlockSupport::incident) && !incident_raw_.empty() &&
                         incident_raw_[i] > 0;
        u[i] = adp || inc ? 1.0 : 0.0;
    }
    s.sblock = tape.constant(binarize(u));
    return s;
}

FusionTensors Model::forward(Tape& tape, const SpatialSupports& s, Var x) {
    const std::size_t L = cfg_.window.lookback, H = cfg_.window.horizon;
    if (x.shape() != Shape{L, nodes_})
        throw ShapeError("forward: window " + shape_str(x.shape()) + " vs expected " + shape_str({L, nodes_}));
    FusionTensors out;
    const bool need_spatial = !(cfg_.gate_force && *cfg_.gate_force == 1.0);
    const bool need_temporal = cfg_.temporal_enabled && !(cfg_.gate_force && *cfg_.gate_force == 0.0);
    if (need_spatial)
        out.o2 = spatial_branch(tape, x, s, store_, {nodes_, L, H}, cfg_.mixprop, cfg_.fusion);
    if (need_temporal) out.o1 = temporal_branch(tape, x, store_, {L, H}, cfg_.patch, cfg_.transformer);

    if (!need_temporal) {
        out.fused = out.o2;
    } else if (!need_spatial) {
        out.fused = out.o1;
    } else if (cfg_.gate_force) {
        const double c = *cfg_.gate_force;
        out.gate = tape.constant(Tensor({H, nodes_}, c));
        out.fused = ops::add(ops::scale(out.o1, c), ops::scale(out.o2, 1.0 - c));
    } else {
        out = gated_fusion(out.o1, out.o2, tape.param(store_, "fusion.gate_w"), tape.param(store_, "fusion.gate_b"));
    }
    return out;
}

Tensor Model::predict(const Tensor& x) {
    Tape tape;
    SpatialSupports s = supports(tape);
    return forward(tape, s, tape.constant(x)).fused.value();
}

std::vector<Tensor> Model::predict_all(const std::vector<Tensor>& xs) {
    Tape tape;
    SpatialSupports s = supports(tape);
    std::vector<Tensor> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        Tape local;
        SpatialSupports ls{local.constant(s.adaptive.value()), local.constant(s.adaptive_t.value()),
                           s.incident.valid() ? local.constant(s.incident.value()) : Var{},
                           s.incidence.valid() ? local.constant(s.incidence.value()) : Var{},
                           local.constant(s.sblock.value())};
        out.push_back(forward(local, ls, local.constant(x)).fused.value());
    }
    return out;
}

}  // namespace sthsep
