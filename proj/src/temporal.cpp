#include "sthsep/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sthsep/errors.hpp"

namespace sthsep {

void PatchSpec::validate(std::size_t steps) const {
    if (length < 1) throw ConfigError("patch.length must be >= 1");
    if (stride < 1 || stride > length) throw ConfigError("patch.stride must be in [1, patch.length]");
    if (length > steps)
        throw ConfigError("patch.length " + std::to_string(length) + " exceeds series length " + std::to_string(steps));
}

void TransformerConfig::validate() const {
    if (layers < 1) throw ConfigError("transformer.layers must be >= 1");
    if (heads < 1) throw ConfigError("transformer.heads must be >= 1");
    if (d_model < 1 || d_model % heads != 0)
        throw ConfigError("transformer.d_model " + std::to_string(d_model) + " is not divisible by " +
                          std::to_string(heads) + " heads");
    if (ffn_width < 1) throw ConfigError("transformer.ffn_width must be >= 1");
    if (adapter_rank > std::min(d_model, ffn_width))
        throw ConfigError("transformer.adapter_rank " + std::to_string(adapter_rank) + " exceeds min(d_model, ffn_width)");
}

std::array<double, PromptStats::feature_count> PromptStats::features(std::size_t window) const {
    const double denom = window > 1 ? static_cast<double>(window - 1) : 1.0;
    std::array<double, feature_count> f{min, max, median, static_cast<double>(slope_sign)};
    for (std::size_t i = 0; i < top_lags.size(); ++i) f[4 + i] = static_cast<double>(top_lags[i]) / denom;
    return f;
}

Tensor avg_pool_nodes(const Tensor& x) {
    if (x.rank() != 4 || x.dim(3) != 1) throw ShapeError("avg_pool_nodes: expected [B, N, T, 1], got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), N = x.dim(1), T = x.dim(2);
    if (N < 1) throw ShapeError("avg_pool_nodes: no nodes");
    Tensor out({B, T, 1});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
            // Deviations from the first node keep identical series exact.
            const double first = x[b * N * T + t];
            double s = 0;
            for (std::size_t n = 1; n < N; ++n) s += x[(b * N + n) * T + t] - first;
            out[b * T + t] = first + s / static_cast<double>(N);
        }
    return out;
}

std::size_t patch_count(std::size_t steps, const PatchSpec& spec) {
    spec.validate(steps);
    return (steps + spec.stride - spec.length) / spec.stride + 1;
}

Var patchify(Var series, const PatchSpec& spec) {
    if (series.shape().size() != 1) throw ShapeError("patchify: expected [T], got " + shape_str(series.shape()));
    const std::size_t T = series.shape()[0], P = spec.length, S = spec.stride;
    const std::size_t count = patch_count(T, spec);
    std::vector<std::size_t> src(count * P);
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t j = 0; j < P; ++j) src[p * P + j] = std::min(p * S + j, T - 1);
    Tensor out({count, P});
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = series.value()[src[i]];
    return series.tape().record(std::move(out), {series}, [series, src = std::move(src)](Tape& t, const Tensor& g) {
        if (Tensor* gs = t.grad_buffer(series))
            for (std::size_t i = 0; i < src.size(); ++i) (*gs)[src[i]] += g[i];
    });
}

PromptStats prompt_stats(std::span<const double> w) {
    const std::size_t L = w.size();
    if (L < 8) throw ConfigError("prompt_stats: window needs at least 8 values, got " + std::to_string(L));
    PromptStats st;
    std::vector<double> sorted(w.begin(), w.end());
    std::sort(sorted.begin(), sorted.end());
    st.min = sorted.front();
    st.max = sorted.back();
    st.median = L % 2 ? sorted[L / 2] : 0.5 * (sorted[L / 2 - 1] + sorted[L / 2]);

    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(L);
    const double tbar = 0.5 * static_cast<double>(L - 1);
    double sxy = 0, sxx = 0;
    for (std::size_t t = 0; t < L; ++t) {
        sxy += (static_cast<double>(t) - tbar) * (w[t] - mean);
        sxx += (static_cast<double>(t) - tbar) * (static_cast<double>(t) - tbar);
    }
    const double slope = sxy / sxx;
    st.slope_sign = std::abs(slope) < 1e-9 ? 0 : (slope > 0 ? 1 : -1);

    // Per-lag normalized autocorrelation, quantized so rounding noise cannot
    // reorder values that are equal in exact arithmetic.
    double var = 0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= static_cast<double>(L);
    std::vector<std::pair<long long, std::size_t>> acf;
    const std::size_t max_lag = std::max<std::size_t>(5, L / 2);
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double c = 0;
        for (std::size_t t = 0; t + k < L; ++t) c += (w[t] - mean) * (w[t + k] - mean);
        c /= static_cast<double>(L - k);
        acf.emplace_back(var > 0 ? std::llround(std::abs(c / var) * 1e9) : 0, k);
    }
    std::stable_sort(acf.begin(), acf.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < st.top_lags.size(); ++i) st.top_lags[i] = acf[i].second;
    return st;
}

namespace {

std::string layer_name(std::size_t l) { return "temporal.layer" + std::to_string(l); }

}  // namespace

void init_temporal_params(ParamStore& store, const TemporalDims& dims, const PatchSpec& patch,
                          const TransformerConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.d_model, f = cfg.ffn_width, P = patch.length;
    const std::size_t tokens = 1 + patch_count(dims.lookback, patch);
    store.add_uniform("temporal.embed.patch_w", {P, d}, P, rng);
    store.add_uniform("temporal.embed.stats_w", {PromptStats::feature_count, d}, PromptStats::feature_count, rng);
    store.add_uniform("temporal.embed.bias", {d}, P, rng);
    store.add_uniform("temporal.embed.pos", {tokens, d}, d, rng);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string n = layer_name(l);
        for (const char* w : {".wq", ".wk", ".wv", ".wo"}) store.add_uniform(n + w, {d, d}, d, rng);
        store.add_uniform(n + ".ffn.w1", {d, f}, d, rng);
        store.add_uniform(n + ".ffn.b1", {f}, d, rng);
        store.add_uniform(n + ".ffn.w2", {f, d}, f, rng);
        store.add_uniform(n + ".ffn.b2", {d}, f, rng);
        if (cfg.adapter_rank > 0) {
            const std::size_t r = cfg.adapter_rank;
            store.add(n + ".ffn.w1.lora_b", Tensor({d, r}));
            store.add_uniform(n + ".ffn.w1.lora_a", {r, f}, r, rng);
            store.add(n + ".ffn.w2.lora_b", Tensor({f, r}));
            store.add_uniform(n + ".ffn.w2.lora_a", {r, d}, r, rng);
            for (const char* base : {".ffn.w1", ".ffn.b1", ".ffn.w2", ".ffn.b2"}) store.set_frozen(n + base, true);
        }
    }
    store.add_uniform("temporal.head.w", {tokens * d, dims.horizon}, tokens * d, rng);
    store.add_uniform("temporal.head.b", {dims.horizon}, tokens * d, rng);
}

Var embed_inputs(Tape& tape, ParamStore& store, Var patches, const PromptStats& stats, std::size_t window) {
    const auto f = stats.features(window);
    Var s = tape.constant(Tensor({1, PromptStats::feature_count}, std::vector<double>(f.begin(), f.end())));
    Var prefix = ops::matmul(s, tape.param(store, "temporal.embed.stats_w"));
    Var body = ops::matmul(patches, tape.param(store, "temporal.embed.patch_w"));
    Var tokens = ops::add_bias(ops::concat({prefix, body}, 0), tape.param(store, "temporal.embed.bias"));
    Var pos = tape.param(store, "temporal.embed.pos");
    if (pos.shape()[0] != tokens.shape()[0])
        throw ShapeError("embed_inputs: " + std::to_string(tokens.shape()[0]) + " tokens vs positional table " +
                         shape_str(pos.shape()));
    return ops::add(tokens, pos);
}

namespace {

Var adapted(Tape& tape, ParamStore& store, const std::string& name, std::size_t rank) {
    Var w = tape.param(store, name);
    if (rank == 0) return w;
    return ops::add(w, ops::matmul(tape.param(store, name + ".lora_b"), tape.param(store, name + ".lora_a")));
}

}  // namespace

Var transformer_forward(Tape& tape, ParamStore& store, Var z, const TransformerConfig& cfg, AttentionTrace* trace) {
    cfg.validate();
    const Shape& zs = z.shape();
    if (zs.size() != 2 || zs[1] != cfg.d_model)
        throw ShapeError("transformer_forward: tokens " + shape_str(zs) + " vs d_model " + std::to_string(cfg.d_model));
    const std::size_t S = zs[0], dh = cfg.d_model / cfg.heads;
    Tensor mask({S, S});
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = i + 1; j < S; ++j) mask.at(i, j) = -1e300;
    Var mask_v = tape.constant(std::move(mask));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string n = layer_name(l);
        Var q = ops::matmul(z, tape.param(store, n + ".wq"));
        Var k = ops::matmul(z, tape.param(store, n + ".wk"));
        Var v = ops::matmul(z, tape.param(store, n + ".wv"));
        std::vector<Var> heads;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            Var qh = ops::slice(q, 1, h * dh, dh), kh = ops::slice(k, 1, h * dh, dh), vh = ops::slice(v, 1, h * dh, dh);
            Var scores = ops::add(ops::scale(ops::matmul(qh, ops::transpose(kh)), scale), mask_v);
            Var attn = ops::softmax(scores, 1);
            if (trace) trace->weights.push_back(attn.value());
            heads.push_back(ops::matmul(attn, vh));
        }
        Var mhsa = ops::matmul(cfg.heads == 1 ? heads[0] : ops::concat(heads, 1), tape.param(store, n + ".wo"));
        z = ops::layer_norm(ops::add(z, mhsa));

        Var hidden = ops::relu(
            ops::add_bias(ops::matmul(z, adapted(tape, store, n + ".ffn.w1", cfg.adapter_rank)),
                          tape.param(store, n + ".ffn.b1")));
        Var ffn = ops::add_bias(ops::matmul(hidden, adapted(tape, store, n + ".ffn.w2", cfg.adapter_rank)),
                                tape.param(store, n + ".ffn.b2"));
        z = ops::layer_norm(ops::add(z, ffn));
    }
    return z;
}

Var project_trend(Tape& tape, ParamStore& store, Var encoded, std::size_t horizon, std::size_t nodes) {
    Var flat = ops::reshape(encoded, {1, encoded.value().size()});
    Var w = tape.param(store, "temporal.head.w");
    if (w.shape()[1] != horizon) throw ShapeError("project_trend: head width " + shape_str(w.shape()) + " vs horizon");
    Var trend = ops::add_bias(ops::matmul(flat, w), tape.param(store, "temporal.head.b"));  // [1, H]
    return ops::matmul(ops::transpose(trend), tape.constant(Tensor({1, nodes}, 1.0)));
}

Var temporal_branch(Tape& tape, Var x, ParamStore& store, const TemporalDims& dims, const PatchSpec& patch,
                    const TransformerConfig& cfg, TemporalBackbone* backbone) {
    if (x.shape().size() != 2 || x.shape()[0] != dims.lookback)
        throw ShapeError("temporal_branch: window " + shape_str(x.shape()) + " vs lookback " +
                         std::to_string(dims.lookback));
    const std::size_t N = x.shape()[1];
    Var pooled = ops::mean(x, 1);  // [L]
    const PromptStats stats = prompt_stats(pooled.value().data());
    Var tokens = embed_inputs(tape, store, patchify(pooled, patch), stats, dims.lookback);
    Var encoded = backbone ? backbone->encode(tape, store, tokens) : transformer_forward(tape, store, tokens, cfg);
    return project_trend(tape, store, encoded, dims.horizon, N);
}

}  // namespace sthsep
