#include "sthsep/spatial.hpp"

#include <cmath>

#include "sthsep/errors.hpp"

namespace sthsep {

void MixPropConfig::validate() const {
    if (depth < 1) throw ConfigError("mixprop.depth must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mixprop.alpha must be in [0, 1]");
}

void SpatialFusionConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("fusion.gamma must be in [0, 1]");
    if (st_blocks < 1) throw ConfigError("fusion.st_blocks must be >= 1");
    if (tblock_channels < 1) throw ConfigError("fusion.tblock_channels must be >= 1");
    if (tblock_kernel < 1) throw ConfigError("fusion.tblock_kernel must be >= 1");
    if (tblock_dilations.empty()) throw ConfigError("fusion.tblock_dilations must not be empty");
    for (std::size_t d : tblock_dilations)
        if (d < 1) throw ConfigError("fusion.tblock_dilations entries must be >= 1");
}

namespace {

void check_support(const char* op, Var x, Var a) {
    const Shape& as = a.shape();
    if (as.size() != 2 || as[0] != as[1] || x.shape().size() != 2 || x.shape()[0] != as[0])
        throw ShapeError(std::string(op) + ": support " + shape_str(as) + " vs features " + shape_str(x.shape()));
}

}  // namespace

Var mixprop(Var x, Var a_hat, const MixPropConfig& cfg, std::span<const Var> gate_weights) {
    cfg.validate();
    check_support("mixprop", x, a_hat);
    if (cfg.gated && gate_weights.size() != cfg.depth)
        throw ConfigError("mixprop: gated propagation needs " + std::to_string(cfg.depth) + " gate weights, got " +
                          std::to_string(gate_weights.size()));
    if (!cfg.gated && cfg.alpha == 1.0) return x;
    Var h = x;
    for (std::size_t k = 0; k < cfg.depth; ++k) {
        Var prop = ops::matmul(a_hat, h);
        if (cfg.gated) {
            Var g = ops::sigmoid(ops::matmul(h, gate_weights[k]));
            // g * h + (1 - g) * prop = prop + g * (h - prop)
            h = ops::add(prop, ops::mul(g, ops::sub(h, prop)));
        } else {
            h = ops::add(ops::scale(h, cfg.alpha), ops::scale(prop, 1.0 - cfg.alpha));
        }
    }
    return h;
}

Var adaptive_gcn(Var x, const SpatialSupports& s, const MixPropConfig& cfg, std::span<const Var> gates) {
    const std::size_t per = cfg.gated ? cfg.depth : 0;
    const std::size_t supports = s.incident.valid() ? 3 : 2;
    if (cfg.gated && gates.size() != per * supports)
        throw ConfigError("adaptive_gcn: expected " + std::to_string(per * supports) + " gate weights");
    auto gate_slice = [&](std::size_t j) { return cfg.gated ? gates.subspan(j * per, per) : std::span<const Var>{}; };
    Var out = ops::add(mixprop(x, s.adaptive, cfg, gate_slice(0)), mixprop(x, s.adaptive_t, cfg, gate_slice(1)));
    if (s.incident.valid()) out = ops::add(out, mixprop(x, s.incident, cfg, gate_slice(2)));
    return out;
}

Var hypergraph_conv(Var x, Var incidence, Var ffn_w, Var ffn_b, Var w, bool normalize) {
    const Shape& hs = incidence.shape();
    if (hs.size() != 2 || x.shape().size() != 2 || hs[0] != x.shape()[0])
        throw ShapeError("hypergraph_conv: incidence " + shape_str(hs) + " vs features " + shape_str(x.shape()));
    Tape& t = x.tape();
    Var enc = ops::add_bias(ops::matmul(x, ffn_w), ffn_b);
    Var ht = ops::transpose(incidence);
    Var gathered = ops::matmul(ops::matmul(ht, enc), w);
    if (normalize) {
        const Tensor& h = incidence.value();
        Tensor inv_size({hs[1]}), inv_deg({hs[0]});
        for (std::size_t j = 0; j < hs[1]; ++j) {
            double c = 0;
            for (std::size_t i = 0; i < hs[0]; ++i) c += h.at(i, j);
            inv_size[j] = c > 0 ? 1.0 / c : 1.0;
        }
        for (std::size_t i = 0; i < hs[0]; ++i) {
            double c = 0;
            for (std::size_t j = 0; j < hs[1]; ++j) c += h.at(i, j);
            inv_deg[i] = c > 0 ? 1.0 / c : 1.0;
        }
        gathered = ops::scale_rows(gathered, t.constant(std::move(inv_size)));
        return ops::scale_rows(ops::matmul(incidence, ops::relu(gathered)), t.constant(std::move(inv_deg)));
    }
    return ops::matmul(incidence, ops::relu(gathered));
}

Var spatial_fuse(Var gcn, Var hgcn, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("spatial_fuse: gamma must be in [0, 1]");
    if (gamma == 1.0) return gcn;
    if (gamma == 0.0) return hgcn;
    if (gcn.shape() != hgcn.shape())
        throw ShapeError("spatial_fuse: shape mismatch " + shape_str(gcn.shape()) + " vs " + shape_str(hgcn.shape()));
    return ops::add(ops::scale(gcn, gamma), ops::scale(hgcn, 1.0 - gamma));
}

Var s_block(Var h, Var support, Var eps) {
    check_support("s_block", h, support);
    Var self = ops::scale_by(ops::shift(eps, 1.0), h);
    return ops::relu(ops::add(self, ops::matmul(support, h)));
}

Var gated_activation(Var q) { return ops::mul(ops::tanh(q), ops::sigmoid(q)); }

Var t_block(Var x, std::span<const Var> conv_w, std::span<const Var> conv_b, std::span<const std::size_t> dilations) {
    if (x.shape().size() != 3) throw ShapeError("t_block: expected [N, T, C], got " + shape_str(x.shape()));
    if (conv_w.size() != dilations.size() || conv_b.size() != dilations.size())
        throw ConfigError("t_block: one weight and bias per dilation required");
    const std::size_t steps = x.shape()[1];
    Var q = x;
    for (std::size_t j = 0; j < dilations.size(); ++j) {
        const std::size_t reach = (conv_w[j].shape()[0] - 1) * dilations[j];
        if (reach >= steps)
            throw ConfigError("t_block: kernel " + std::to_string(conv_w[j].shape()[0]) + " with dilation " +
                              std::to_string(dilations[j]) + " spans beyond " + std::to_string(steps) + " steps");
        q = ops::add_bias(ops::causal_conv1d(q, conv_w[j], dilations[j]), conv_b[j]);
    }
    return gated_activation(q);
}

namespace {

const char* support_names[] = {"adp", "adpT", "inc"};

std::string block_name(std::size_t b) { return "spatial.block" + std::to_string(b); }

}  // namespace

void init_spatial_params(ParamStore& store, const SpatialDims& dims, const MixPropConfig& mp,
                         const SpatialFusionConfig& cfg, Rng& rng) {
    mp.validate();
    cfg.validate();
    const std::size_t L = dims.lookback, C = cfg.tblock_channels, K = cfg.tblock_kernel;
    if (mp.gated)
        for (const char* s : support_names)
            for (std::size_t k = 0; k < mp.depth; ++k)
                store.add_uniform("spatial.gcn." + std::string(s) + ".gate" + std::to_string(k), {L, L}, L, rng);
    store.add_uniform("spatial.hgcn.ffn_w", {L, L}, L, rng);
    store.add_uniform("spatial.hgcn.ffn_b", {L}, L, rng);
    store.add_uniform("spatial.hgcn.w", {L, L}, L, rng);
    store.add_uniform("spatial.start.w", {1, C}, 1, rng);
    store.add_uniform("spatial.start.b", {C}, 1, rng);
    for (std::size_t b = 0; b < cfg.st_blocks; ++b) {
        store.add(block_name(b) + ".eps", Tensor({1}, cfg.epsilon_init));
        for (std::size_t j = 0; j < cfg.tblock_dilations.size(); ++j) {
            const std::string p = block_name(b) + ".conv" + std::to_string(j);
            store.add_uniform(p + ".w", {K, C, C}, K * C, rng);
            store.add_uniform(p + ".b", {C}, K * C, rng);
        }
    }
    store.add_uniform("spatial.head.w", {L * C, dims.horizon}, L * C, rng);
    store.add_uniform("spatial.head.b", {dims.horizon}, L * C, rng);
}

Var spatial_branch(Tape& tape, Var x, const SpatialSupports& s, ParamStore& store, const SpatialDims& dims,
                   const MixPropConfig& mp, const SpatialFusionConfig& cfg) {
    const std::size_t L = dims.lookback, N = dims.nodes, C = cfg.tblock_channels;
    if (x.shape() != Shape{L, N})
        throw ShapeError("spatial_branch: window " + shape_str(x.shape()) + " vs expected " + shape_str({L, N}));
    auto p = [&](const std::string& name) { return tape.param(store, name); };

    Var feats = ops::transpose(x);  // [N, L]
    Var gcn, hgcn;
    if (cfg.gamma > 0.0) {
        std::vector<Var> gates;
        if (mp.gated) {
            const std::size_t supports = s.incident.valid() ? 3 : 2;
            for (std::size_t j = 0; j < supports; ++j)
                for (std::size_t k = 0; k < mp.depth; ++k)
                    gates.push_back(p("spatial.gcn." + std::string(support_names[j]) + ".gate" + std::to_string(k)));
        }
        gcn = adaptive_gcn(feats, s, mp, gates);
    }
    if (cfg.gamma < 1.0) {
        if (!s.incidence.valid()) throw ConfigError("spatial_branch: gamma < 1 requires a hypergraph incidence");
        hgcn = hypergraph_conv(feats, s.incidence, p("spatial.hgcn.ffn_w"), p("spatial.hgcn.ffn_b"),
                               p("spatial.hgcn.w"), cfg.hgcn_normalize);
    }
    Var fused = spatial_fuse(gcn, hgcn, cfg.gamma);  // [N, L]

    Var h = ops::add_bias(ops::matmul(ops::reshape(fused, {N * L, 1}), p("spatial.start.w")), p("spatial.start.b"));
    for (std::size_t b = 0; b < cfg.st_blocks; ++b) {
        Var sb = s_block(ops::reshape(h, {N, L * C}), s.sblock, p(block_name(b) + ".eps"));
        std::vector<Var> ws, bs;
        for (std::size_t j = 0; j < cfg.tblock_dilations.size(); ++j) {
            ws.push_back(p(block_name(b) + ".conv" + std::to_string(j) + ".w"));
            bs.push_back(p(block_name(b) + ".conv" + std::to_string(j) + ".b"));
        }
        Var tb = t_block(ops::reshape(sb, {N, L, C}), ws, bs, cfg.tblock_dilations);
        h = ops::add(ops::reshape(h, {N, L, C}), tb);
    }
    Var out = ops::add_bias(ops::matmul(ops::reshape(h, {N, L * C}), p("spatial.head.w")), p("spatial.head.b"));
    return ops::transpose(out);  // [H, N]
}

}  // namespace sthsep
