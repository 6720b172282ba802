#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sthsep/autodiff.hpp"
#include "sthsep/params.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

struct PatchSpec {
    std::size_t length = 16;
    std::size_t stride = 8;

    void validate(std::size_t steps) const;
};

struct TransformerConfig {
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t d_model = 64;
    std::size_t ffn_width = 128;
    std::size_t adapter_rank = 0;  // 0 disables adapters

    void validate() const;
};

struct PromptStats {
    static constexpr std::size_t feature_count = 9;

    double min = 0, max = 0, median = 0;
    int slope_sign = 0;
    std::array<std::size_t, 5> top_lags{};

    // min, max, median, slope_sign, then lags divided by (window - 1).
    std::array<double, feature_count> features(std::size_t window) const;
};

// [B, N, T, 1] -> [B, T, 1]
Tensor avg_pool_nodes(const Tensor& x);

// floor((T + S - P) / S) + 1
std::size_t patch_count(std::size_t steps, const PatchSpec& spec);

// series [T] -> [N_P, P]; the end is padded with `stride` copies of the last value.
Var patchify(Var series, const PatchSpec& spec);

// Requires at least 8 values. Candidate lags are 1 .. max(5, L / 2), ranked
// by |autocorrelation| with each lag's covariance averaged over its own pair
// count; values equal to 1e-9 precision tie and go to the smaller lag.
PromptStats prompt_stats(std::span<const double> window);

// Parameter layout of the temporal branch, all under "temporal.".
struct TemporalDims {
    std::size_t lookback = 0;
    std::size_t horizon = 0;
};

void init_temporal_params(ParamStore& store, const TemporalDims& dims, const PatchSpec& patch,
                          const TransformerConfig& cfg, Rng& rng);

// One prefix token from the statistics followed by one token per patch,
// plus learned positions: [(1 + N_P), d_model].
Var embed_inputs(Tape& tape, ParamStore& store, Var patches, const PromptStats& stats, std::size_t window);

// Optional per-layer, per-head attention weights captured during forward.
struct AttentionTrace {
    std::vector<Tensor> weights;  // layer-major, [S, S] each
};

// Tokens in, representations out. The default implementation is the
// causal transformer stack below.
class TemporalBackbone {
public:
    virtual ~TemporalBackbone() = default;
    virtual Var encode(Tape& tape, ParamStore& store, Var tokens) = 0;
};

// Per layer: z = LN(z + MHSA(z)), z = LN(z + FFN(z)) with a causal mask.
Var transformer_forward(Tape& tape, ParamStore& store, Var tokens, const TransformerConfig& cfg,
                        AttentionTrace* trace = nullptr);

class TransformerBackbone : public TemporalBackbone {
public:
    explicit TransformerBackbone(TransformerConfig cfg) : cfg_(cfg) {}
    Var encode(Tape& tape, ParamStore& store, Var tokens) override {
        return transformer_forward(tape, store, tokens, cfg_);
    }

private:
    TransformerConfig cfg_;
};

// Flattened tokens -> H values, repeated for every node: [H, N].
Var project_trend(Tape& tape, ParamStore& store, Var encoded, std::size_t horizon, std::size_t nodes);

// x [L, N] -> O1 [H, N]. Uses a TransformerBackbone when none is given.
Var temporal_branch(Tape& tape, Var x, ParamStore& store, const TemporalDims& dims, const PatchSpec& patch,
                    const TransformerConfig& cfg, TemporalBackbone* backbone = nullptr);

}  // namespace sthsep
