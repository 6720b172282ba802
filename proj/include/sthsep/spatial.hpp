#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sthsep/autodiff.hpp"
#include "sthsep/params.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

struct MixPropConfig {
    std::size_t depth = 2;
    double alpha = 0.05;
    bool gated = false;

    void validate() const;
};

struct SpatialFusionConfig {
    double gamma = 0.5;
    std::size_t st_blocks = 1;
    double epsilon_init = 0.0;
    std::size_t tblock_channels = 8;
    std::size_t tblock_kernel = 2;
    std::vector<std::size_t> tblock_dilations{1, 2, 4};
    bool hgcn_normalize = false;

    void validate() const;
};

// Ungated: X <- alpha X + (1 - alpha) A_hat X, repeated depth times.
// Gated: G = sigmoid(X W_g), X <- G * X + (1 - G) * A_hat X, one [C, C]
// gate weight per step.
Var mixprop(Var x, Var a_hat, const MixPropConfig& cfg, std::span<const Var> gate_weights = {});

// Normalized supports consumed by the spatial branch. `incident` and
// `incidence` may be left invalid (default-constructed) when unused.
struct SpatialSupports {
    Var adaptive;    // normalized A_adp
    Var adaptive_t;  // normalized A_adp^T
    Var incident;    // normalized distance kernel
    Var incidence;   // hypergraph incidence H [N, M]
    Var sblock;      // binary neighbour support [N, N]
};

// mixprop over the adaptive support, its transpose and (if present) the
// incident support, summed. gates holds depth weights per support, in that
// order, when cfg.gated.
Var adaptive_gcn(Var x, const SpatialSupports& s, const MixPropConfig& cfg, std::span<const Var> gates = {});

// X_enc = X W_ffn + b; X_e = ReLU(H^T X_enc W); returns H X_e. With
// normalize, hyperedge sums become means and node sums are divided by
// hyperdegree.
Var hypergraph_conv(Var x, Var incidence, Var ffn_w, Var ffn_b, Var w, bool normalize = false);

// gamma * gcn + (1 - gamma) * hgcn; the endpoints return one input untouched.
Var spatial_fuse(Var gcn, Var hgcn, double gamma);

// h [N, F]: ReLU((1 + eps) h + S h), S binary [N, N]. eps has one element.
Var s_block(Var h, Var support, Var eps);

// tanh(q) * sigmoid(q)
Var gated_activation(Var q);

// x [N, T, C]; conv_w[j] [K, C, C], conv_b[j] [C]. The convolutions are
// chained with dilations[j], then passed through gated_activation.
Var t_block(Var x, std::span<const Var> conv_w, std::span<const Var> conv_b,
            std::span<const std::size_t> dilations);

struct SpatialDims {
    std::size_t nodes = 0;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
};

// Registers every spatial-branch parameter under "spatial.".
void init_spatial_params(ParamStore& store, const SpatialDims& dims, const MixPropConfig& mp,
                         const SpatialFusionConfig& cfg, Rng& rng);

// x [L, N] -> O2 [H, N].
Var spatial_branch(Tape& tape, Var x, const SpatialSupports& s, ParamStore& store, const SpatialDims& dims,
                   const MixPropConfig& mp, const SpatialFusionConfig& cfg);

}  // namespace sthsep
