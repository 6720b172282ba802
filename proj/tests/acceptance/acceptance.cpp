#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sthsep/checkpoint.hpp"
#include "sthsep/errors.hpp"
#include "sthsep/gradcheck.hpp"
#include "sthsep/graphs.hpp"
#include "sthsep/harness.hpp"
#include "sthsep/model.hpp"
#include "sthsep/rng.hpp"
#include "sthsep/spatial.hpp"
#include "sthsep/synth.hpp"
#include "sthsep/temporal.hpp"
#include "sthsep/train.hpp"

using namespace sthsep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

fs::path source_dir() { return fs::path(STHSEP_SOURCE_DIR); }

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sthsep_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Tensor dense_matmul(const Tensor& a, const Tensor& b) {
    Tensor c({a.dim(0), b.dim(1)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t k = 0; k < a.dim(1); ++k)
            for (std::size_t j = 0; j < b.dim(1); ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
    return c;
}

Tensor normalized(const Tensor& a) { return normalize_adjacency(Adjacency{AdjacencyKind::incident, a}).matrix; }

Tensor random_symmetric(Rng& rng, std::size_t n, double p) {
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (rng.uniform() < p) a.at(i, j) = a.at(j, i) = 1.0;
    return a;
}

// Random spanning tree plus extra edges.
Tensor random_connected(Rng& rng, std::size_t n, double p) {
    Tensor a = random_symmetric(rng, n, p);
    for (std::size_t v = 1; v < n; ++v) {
        const std::size_t u = rng.below(v);
        a.at(u, v) = a.at(v, u) = 1.0;
    }
    return a;
}

bool connected(const Tensor& a) {
    const std::size_t n = a.dim(0);
    std::vector<int> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n; ++v)
            if (a.at(u, v) > 0 && !seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
    }
    for (int s : seen)
        if (!s) return false;
    return true;
}

Tensor random_distances(Rng& rng, std::size_t n) { return euclidean_distances(rng.uniform_tensor({n, 2}, 0, 10)); }

// 1. Every connected graph up to six nodes, then 200 seeded connected
// graphs up to eight nodes, for k in {2, 3, 4}.
Outcome local_coverage() {
    const auto t0 = Clock::now();
    std::size_t graphs = 0, failures = 0;
    std::string first;
    auto check = [&](const Tensor& a, const std::string& label) {
        ++graphs;
        for (std::size_t k : {2u, 3u, 4u}) {
            CoverageResult r = coverage_check(hop_hyperedges(a, k), a, k);
            if (!r.passed) {
                ++failures;
                if (first.empty()) first = label + " k=" + std::to_string(k) + ": " + r.detail;
            }
        }
    };
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        for (std::size_t mask = 0; mask < (std::size_t{1} << pairs.size()); ++mask) {
            Tensor a({n, n});
            for (std::size_t p = 0; p < pairs.size(); ++p)
                if (mask >> p & 1) a.at(pairs[p].first, pairs[p].second) = a.at(pairs[p].second, pairs[p].first) = 1;
            if (connected(a)) check(a, "n=" + std::to_string(n) + " mask=" + std::to_string(mask));
        }
    }
    std::size_t random_connected_count = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(7);
        Tensor a = random_connected(rng, n, rng.uniform(0.0, 0.6));
        if (connected(a)) ++random_connected_count;
        check(a, "seed=" + std::to_string(seed));
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.passed = failures == 0 && secs < 10.0 && random_connected_count == 200;
    o.detail = std::to_string(graphs) + " connected graphs x 3 orders, " + std::to_string(failures) +
               " counterexamples, " + fmt(secs) + " s" + (first.empty() ? "" : "; first: " + first);
    return o;
}

// 2. Chained propagation against (alpha I + (1 - alpha) A)^K X.
Outcome mixprop_equivalence() {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 100);
        const std::size_t n = 2 + rng.below(9), c = 1 + rng.below(4), depth = 1 + rng.below(4);
        const double alpha = rng.uniform();
        Tensor a;
        if (seed % 2 == 0) {
            a = normalized(random_symmetric(rng, n, 0.4));
        } else {
            a = normalized(adaptive_adjacency(rng.uniform_tensor({n, 3}, -1, 1), rng.uniform_tensor({n, 3}, -1, 1),
                                              rng.uniform_tensor({3, n}, -1, 1), rng.uniform_tensor({n}, -1, 1), 2.0)
                               .matrix);
        }
        Tensor x = rng.uniform_tensor({n, c}, -2, 2);
        Tensor m({n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m.at(i, j) = (1 - alpha) * a.at(i, j) + (i == j ? alpha : 0.0);
        Tensor want = x;
        for (std::size_t k = 0; k < depth; ++k) want = dense_matmul(m, want);
        Tape t;
        Var y = mixprop(t.constant(x), t.constant(a), {depth, alpha, false});
        worst = std::max(worst, max_abs_diff(y.value(), want));
    }
    return {worst <= 1e-12, "50 instances, max |diff| " + fmt(worst) + " (tol 1e-12)"};
}

// 3. Order-2 hyperedges against explicit pairwise messages.
Outcome order_two_degeneration() {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed + 300);
        const std::size_t n = 2 + rng.below(9), c = 1 + rng.below(4);
        Tensor a = random_symmetric(rng, n, 0.35);
        Hypergraph hg = hop_hyperedges(a, 2);
        Tensor x = rng.uniform_tensor({n, c}, -1, 1), fw = rng.uniform_tensor({c, c}, -1, 1);
        Tensor fb = rng.uniform_tensor({c}, -1, 1), w = rng.uniform_tensor({c, c}, -1, 1);
        Tape t;
        Var y = hypergraph_conv(t.constant(x), t.constant(incidence(hg).matrix), t.constant(fw), t.constant(fb),
                                t.constant(w));
        Tensor enc = dense_matmul(x, fw);
        for (std::size_t i = 0; i < enc.size(); ++i) enc[i] += fb[i % c];
        Tensor want({n, c});
        auto send = [&](std::vector<std::size_t> members) {
            for (std::size_t o = 0; o < c; ++o) {
                double s = 0;
                for (std::size_t m : members)
                    for (std::size_t q = 0; q < c; ++q) s += enc.at(m, q) * w.at(q, o);
                for (std::size_t m : members) want.at(m, o) += std::max(0.0, s);
            }
        };
        for (std::size_t u = 0; u < n; ++u) {
            bool isolated = true;
            for (std::size_t v = 0; v < n; ++v) {
                if (a.at(u, v) == 0.0) continue;
                isolated = false;
                if (u < v) send({u, v});
            }
            if (isolated) send({u});
        }
        worst = std::max(worst, max_abs_diff(y.value(), want));
    }
    return {worst <= 1e-12, "50 graphs, max |diff| " + fmt(worst) + " (tol 1e-12)"};
}

// 4. Structure of the learned adjacency.
Outcome adaptive_structure() {
    std::size_t bad = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed + 400);
        const std::size_t n = 2 + rng.below(12), d = 1 + rng.below(6);
        Tensor e1 = rng.uniform_tensor({n, d}, -2, 2), e2 = rng.uniform_tensor({n, d}, -2, 2);
        Tensor w = rng.uniform_tensor({d, n}, -1, 1), b = rng.uniform_tensor({n}, -1, 1);
        const double alpha = rng.uniform(0.5, 5.0);
        Tensor a = adaptive_adjacency(e1, e2, w, b, alpha).matrix;
        for (std::size_t i = 0; i < n; ++i) {
            if (a.at(i, i) != 0.0) ++bad;
            for (std::size_t j = 0; j < n; ++j) {
                if (!(a.at(i, j) >= 0.0)) ++bad;
                if (a.at(i, j) * a.at(j, i) != 0.0) ++bad;
            }
        }
        Tensor same = adaptive_adjacency(e1, e1, w, b, alpha).matrix;
        for (double v : same.data())
            if (v != 0.0) ++bad;
    }
    return {bad == 0, "100 draws, " + std::to_string(bad) + " violations"};
}

// 5. Central differences for every differentiable module and the full model.
Outcome gradient_suite() {
    GradCheckConfig gc;
    double worst = 0;
    std::string worst_name;
    std::size_t checks = 0, failed = 0;
    auto record = [&](const std::string& name, const GradCheckReport& r) {
        ++checks;
        if (!r.passed || !(r.max_rel_error < 1e-4)) ++failed;
        if (r.max_rel_error > worst || !std::isfinite(r.max_rel_error)) {
            worst = r.max_rel_error;
            worst_name = name;
        }
    };
    auto away = [](Rng& rng, Shape s) {
        Tensor t(std::move(s));
        for (auto& x : t.data()) {
            double v = rng.uniform(-2, 2);
            while (std::abs(v) < 1e-2) v = rng.uniform(-2, 2);
            x = v;
        }
        return t;
    };

    struct Fn {
        const char* name;
        std::vector<Shape> shapes;
        DiffFn fn;
    };
    using namespace ops;
    const std::vector<Fn> prims{
        {"matmul", {{3, 4}, {4, 2}}, [](Tape&, auto v) { return matmul(v[0], v[1]); }},
        {"mul", {{2, 3}, {2, 3}}, [](Tape&, auto v) { return mul(v[0], v[1]); }},
        {"add_bias", {{2, 3, 4}, {4}}, [](Tape&, auto v) { return add_bias(v[0], v[1]); }},
        {"tanh", {{4, 3}}, [](Tape&, auto v) { return ops::tanh(v[0]); }},
        {"sigmoid", {{4, 3}}, [](Tape&, auto v) { return sigmoid(v[0]); }},
        {"relu", {{4, 3}}, [](Tape&, auto v) { return relu(v[0]); }},
        {"abs", {{4, 3}}, [](Tape&, auto v) { return ops::abs(v[0]); }},
        {"softmax", {{3, 5}}, [](Tape&, auto v) { return softmax(v[0], 1); }},
        {"layer_norm", {{3, 6}}, [](Tape&, auto v) { return layer_norm(v[0]); }},
        {"mean_axis", {{2, 3, 4}}, [](Tape&, auto v) { return ops::mean(v[0], 2); }},
        {"concat", {{2, 3}, {2, 1}}, [](Tape&, auto v) { return concat({v[0], v[1]}, 1); }},
        {"slice", {{4, 3}}, [](Tape&, auto v) { return slice(v[0], 0, 1, 2); }},
        {"causal_conv1d", {{2, 7, 3}, {2, 3, 4}}, [](Tape&, auto v) { return causal_conv1d(v[0], v[1], 2); }},
        {"scale_rows", {{3, 4}, {3}}, [](Tape&, auto v) { return scale_rows(v[0], v[1]); }},
        {"patchify", {{13}}, [](Tape&, auto v) { return patchify(v[0], {5, 3}); }},
    };
    for (const auto& p : prims)
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(seed + 500);
            std::vector<Tensor> in;
            for (const auto& s : p.shapes) in.push_back(away(rng, s));
            record(p.name, grad_check(p.fn, in, gc, seed));
        }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 600);
        const std::size_t n = 5, c = 3, d = 3;
        Tensor adj = normalized(random_symmetric(rng, n, 0.5));
        Tensor h = incidence(knn_hyperedges(rng.uniform_tensor({n, d}, -1, 1), 3)).matrix;
        Tensor sup = binarize(random_symmetric(rng, n, 0.5));
        record("adaptive adjacency",
               grad_check([](Tape&, auto v) { return normalize_adjacency(adaptive_adjacency(v[0], v[1], v[2], v[3], 2.0)); },
                          std::vector<Tensor>{rng.uniform_tensor({n, d}, -1, 1), rng.uniform_tensor({n, d}, -1, 1),
                                              rng.uniform_tensor({d, n}, -1, 1), rng.uniform_tensor({n}, -1, 1)},
                          gc, seed));
        record("mixprop",
               grad_check([&](Tape& t, auto v) { return mixprop(v[0], t.constant(adj), {3, 0.2, false}); },
                          std::vector<Tensor>{rng.uniform_tensor({n, c}, -1, 1)}, gc, seed));
        record("gated mixprop",
               grad_check([&](Tape& t, auto v) { return mixprop(v[0], t.constant(adj), {2, 0.2, true}, v.subspan(1, 2)); },
                          std::vector<Tensor>{rng.uniform_tensor({n, c}, -1, 1), rng.uniform_tensor({c, c}, -1, 1),
                                              rng.uniform_tensor({c, c}, -1, 1)},
                          gc, seed));
        record("hypergraph conv",
               grad_check([&](Tape& t, auto v) { return hypergraph_conv(v[0], t.constant(h), v[1], v[2], v[3], seed % 2); },
                          std::vector<Tensor>{rng.uniform_tensor({n, c}, -1, 1), rng.uniform_tensor({c, c}, -1, 1),
                                              rng.uniform_tensor({c}, -1, 1), rng.uniform_tensor({c, c}, -1, 1)},
                          gc, seed));
        record("s-block",
               grad_check([&](Tape& t, auto v) { return s_block(v[0], t.constant(sup), v[1]); },
                          std::vector<Tensor>{rng.uniform_tensor({n, c}, 0.1, 1), Tensor({1}, rng.uniform(-0.5, 0.5))},
                          gc, seed));
        record("t-block",
               grad_check(
                   [](Tape&, auto v) {
                       std::vector<std::size_t> dil{1, 2};
                       return t_block(v[0], v.subspan(1, 2), v.subspan(3, 2), dil);
                   },
                   std::vector<Tensor>{rng.uniform_tensor({n, 6, c}, -1, 1), rng.uniform_tensor({2, c, c}, -1, 1),
                                       rng.uniform_tensor({2, c, c}, -1, 1), rng.uniform_tensor({c}, -1, 1),
                                       rng.uniform_tensor({c}, -1, 1)},
                   gc, seed));
        record("gated fusion",
               grad_check([](Tape&, auto v) { return gated_fusion(v[0], v[1], v[2], v[3]).fused; },
                          std::vector<Tensor>{rng.uniform_tensor({3, n}, -1, 1), rng.uniform_tensor({3, n}, -1, 1),
                                              rng.uniform_tensor({6, 3}, -1, 1), rng.uniform_tensor({3}, -1, 1)},
                          gc, seed));
    }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 700);
        ParamStore store;
        TransformerConfig tc{2, 2, 8, 12, seed % 2 ? std::size_t{2} : std::size_t{0}};
        init_temporal_params(store, {24, 6}, {8, 4}, tc, rng);
        for (auto& [name, e] : store.entries())
            if (name.find("lora_b") != std::string::npos) e.value = rng.uniform_tensor(e.value.shape(), -0.3, 0.3);
        Tensor x = rng.uniform_tensor({24, 3}, -1, 1), target = rng.uniform_tensor({6, 3}, -1, 1);
        auto loss_fn = [&](Tape& t) {
            Var out = temporal_branch(t, t.constant(x), store, {24, 6}, {8, 4}, tc);
            return ops::mean_all(ops::square(ops::sub(out, t.constant(target))));
        };
        auto coords = sample_param_coords(store, 40, seed);
        record("temporal branch", grad_check_params(store, loss_fn, coords, gc));
    }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 800);
        ParamStore store;
        MixPropConfig mp{2, 0.1, seed % 3 == 0};
        SpatialFusionConfig fc;
        fc.tblock_channels = 3;
        fc.epsilon_init = 0.1;
        const std::size_t n = 5;
        init_spatial_params(store, {n, 12, 4}, mp, fc, rng);
        Tensor a = adaptive_adjacency(rng.uniform_tensor({n, 3}, -1, 1), rng.uniform_tensor({n, 3}, -1, 1),
                                      rng.uniform_tensor({3, n}, -1, 1), rng.uniform_tensor({n}, -1, 1), 3.0)
                       .matrix;
        Tensor inc = normalized(random_symmetric(rng, n, 0.5));
        Tensor h = incidence(knn_hyperedges(rng.uniform_tensor({n, 3}, -1, 1), 3)).matrix;
        Tensor x = rng.uniform_tensor({12, n}, -1, 1), target = rng.uniform_tensor({4, n}, -1, 1);
        auto loss_fn = [&](Tape& t) {
            SpatialSupports s{t.constant(normalized(a)), t.constant(normalized(a.transposed())), t.constant(inc),
                              t.constant(h), t.constant(binarize(a))};
            Var out = spatial_branch(t, t.constant(x), s, store, {n, 12, 4}, mp, fc);
            return ops::mean_all(ops::square(ops::sub(out, t.constant(target))));
        };
        auto coords = sample_param_coords(store, 40, seed);
        record("spatial branch", grad_check_params(store, loss_fn, coords, gc));
    }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 900);
        ModelConfig c;
        c.window = {12, 4, 1};
        c.patch = {8, 4};
        c.transformer = {1, 2, 8, 12, seed % 4 == 3 ? std::size_t{2} : std::size_t{0}};
        c.fusion.tblock_channels = 3;
        c.graph.embed_dim = 3;
        c.mixprop.gated = seed % 2 == 1;
        c.hypergraph.mode = seed % 3 == 2 ? HyperMode::hop : HyperMode::knn;
        c.seed = seed;
        Model m(c, 4, random_distances(rng, 4));
        for (auto& [name, e] : m.params().entries())
            if (name.find("lora_b") != std::string::npos) e.value = rng.uniform_tensor(e.value.shape(), -0.3, 0.3);
        Tensor x = rng.uniform_tensor({12, 4}, -1, 1), y = rng.uniform_tensor({4, 4}, -1, 1);
        auto loss_fn = [&](Tape& t) {
            SpatialSupports s = m.supports(t);
            return loss(m.forward(t, s, t.constant(x)).fused, t.constant(y), LossKind::mse);
        };
        auto coords = sample_param_coords(m.params(), 20, seed);
        record("full model", grad_check_params(m.params(), loss_fn, coords, gc));
    }

    return {failed == 0, std::to_string(checks) + " checks, " + std::to_string(failed) + " failed, max rel err " +
                             fmt(worst) + " (" + worst_name + ", tol 1e-4)"};
}

// 6. Degeneration chain.
Outcome degeneration_chain() {
    std::vector<std::string> broken;
    Rng rng(61);
    const std::size_t n = 5;
    Tensor dist = random_distances(rng, n);
    Tensor x = rng.uniform_tensor({12, n}, -1, 1);
    ModelConfig base;
    base.window = {12, 4, 1};
    base.patch = {8, 4};
    base.transformer = {1, 2, 8, 12, 0};
    base.fusion.tblock_channels = 3;
    base.graph.embed_dim = 3;

    {
        Tape t;
        Var g = t.constant(rng.uniform_tensor({n, 12}, -1, 1)), h = t.constant(rng.uniform_tensor({n, 12}, -1, 1));
        if (spatial_fuse(g, h, 1.0).id() != g.id()) broken.push_back("fuse(1) is not the GCN output");
        if (spatial_fuse(g, h, 0.0).id() != h.id()) broken.push_back("fuse(0) is not the HGCN output");
    }

    auto spatial_out = [&](Model& m) {
        Tape t;
        SpatialSupports s = m.supports(t);
        const ModelConfig& c = m.config();
        return spatial_branch(t, t.constant(x), s, m.params(), {n, 12, 4}, c.mixprop, c.fusion).value();
    };

    // gamma = 1: the hypergraph path must not influence anything.
    {
        ModelConfig c = base;
        c.fusion.gamma = 1.0;
        Model m(c, n, dist);
        Tensor before = spatial_out(m);
        for (const char* name : {"spatial.hgcn.ffn_w", "spatial.hgcn.ffn_b", "spatial.hgcn.w", "graph.e3"})
            m.params().value(name) = rng.uniform_tensor(m.params().value(name).shape(), -1, 1);
        m.rebuild_graphs();
        if (!bitwise_equal(before, spatial_out(m))) broken.push_back("gamma=1 depends on the hypergraph path");
    }
    // gamma = 0: the adaptive GCN path must not influence anything.
    {
        ModelConfig c = base;
        c.fusion.gamma = 0.0;
        c.sblock_support = SBlockSupport::incident;
        Model m(c, n, dist);
        Tensor before = spatial_out(m);
        for (const char* name : {"graph.e1", "graph.e2", "graph.ffn_w", "graph.ffn_b"})
            m.params().value(name) = rng.uniform_tensor(m.params().value(name).shape(), -1, 1);
        if (!bitwise_equal(before, spatial_out(m))) broken.push_back("gamma=0 depends on the GCN path");
    }
    // Forced gate 1 equals the temporal branch alone.
    {
        ModelConfig c = base;
        c.gate_force = 1.0;
        Model m(c, n, dist);
        Tensor temporal;
        {
            Tape t;
            temporal = temporal_branch(t, t.constant(x), m.params(), {12, 4}, c.patch, c.transformer).value();
        }
        if (!bitwise_equal(m.predict(x), temporal)) broken.push_back("gate=1 differs from temporal-only");
        ModelConfig c0 = base;
        c0.gate_force = 0.0;
        Model m0(c0, n, dist);
        if (!bitwise_equal(m0.predict(x), spatial_out(m0))) broken.push_back("gate=0 differs from spatial-only");
    }
    // Adapters at init change no bit of the full model output.
    {
        ModelConfig c = base;
        Model plain(c, n, dist);
        c.transformer.adapter_rank = 2;
        Model adapted(c, n, dist);
        for (const auto& [name, e] : plain.params().entries()) adapted.params().value(name) = e.value;
        adapted.rebuild_graphs();
        if (!bitwise_equal(plain.predict(x), adapted.predict(x))) broken.push_back("adapter at init changes output");
    }
    std::string detail = "gamma=1, gamma=0, gate=1, gate=0, adapter B=0";
    for (const auto& b : broken) detail += "; " + b;
    return {broken.empty(), detail + (broken.empty() ? ": all bitwise" : "")};
}

// 7. Patch count and coverage.
Outcome patch_coverage() {
    std::size_t bad = 0;
    const std::size_t count48 = patch_count(48, {16, 8});
    {
        Tape t;
        Tensor s({48});
        if (patchify(t.constant(s), {16, 8}).shape() != Shape{6, 16}) ++bad;
    }
    Rng rng(77);
    for (int c = 0; c < 200; ++c) {
        const std::size_t T = 1 + rng.below(96);
        const std::size_t P = 1 + rng.below(T);
        const std::size_t S = 1 + rng.below(P);
        const std::size_t np = patch_count(T, {P, S});
        if (np != (T - P) / S + 2) ++bad;
        Tensor series({T});
        for (std::size_t i = 0; i < T; ++i) series[i] = static_cast<double>(i);
        Tape t;
        Tensor p = patchify(t.constant(series), {P, S}).value();
        std::vector<int> covered(T, 0);
        for (std::size_t k = 0; k < np; ++k)
            for (std::size_t j = 0; j < P; ++j) {
                const std::size_t src = std::min(k * S + j, T - 1);
                if (p.at(k, j) != static_cast<double>(src)) ++bad;
                covered[src] = 1;
            }
        for (int v : covered)
            if (!v) ++bad;
    }
    return {count48 == 6 && bad == 0,
            "T=48 P=16 S=8 -> " + std::to_string(count48) + " patches; 200-case sweep, " + std::to_string(bad) +
                " violations"};
}

// 8. Overfit a small noise-free dataset.
Outcome overfit() {
    const auto t0 = Clock::now();
    SynthConfig sc;
    sc.nodes = 4;
    sc.steps = 256;
    sc.drift_at = 128;
    sc.noise_std = 0.0;
    SpatioTemporalDataset ds = synthesize(sc).dataset;
    double mu = 0, var = 0;
    for (double v : ds.values.data()) mu += v;
    mu /= ds.values.size();
    for (double v : ds.values.data()) var += (v - mu) * (v - mu);
    const double data_std = std::sqrt(var / ds.values.size());

    ModelConfig cfg = ModelConfig::load((source_dir() / "configs" / "overfit.json").string());
    PreparedData data = prepare_data(ds, cfg);
    Model model(cfg, ds.nodes(), ds.distances);
    // Selecting on the train windows keeps the epoch with the lowest train MAE.
    TrainResult tr = train(model, data.train, data.train, data.norm);
    const double train_mae = evaluate(model, data.train, data.norm).mae;
    const double secs = seconds_since(t0);
    return {train_mae < 0.1 * data_std && tr.history.size() <= 500 && secs < 120.0,
            "train MAE " + fmt(train_mae) + " vs 0.1*std " + fmt(0.1 * data_std) + " (best epoch " +
                std::to_string(tr.best_epoch) + " of " + std::to_string(tr.history.size()) + "), " + fmt(secs) + " s"};
}

// 9. Drift benchmark against baselines and single-branch variants.
Outcome drift_benchmark() {
    const auto t0 = Clock::now();
    SynthConfig sc;  // N=8, T=2048, rho=0.5, drift at 1024, seed 7
    SpatioTemporalDataset ds = synthesize(sc).dataset;
    ModelConfig cfg = ModelConfig::load((source_dir() / "configs" / "drift.json").string());
    PreparedData data = prepare_data(ds, cfg);

    ForecastReport full = run_experiment(cfg, data);
    double best_baseline = INFINITY;
    std::string best_name;
    for (const auto& [name, m] : full.baselines)
        if (m.mae < best_baseline) {
            best_baseline = m.mae;
            best_name = name;
        }
    double worst_single = 0;
    std::string singles;
    bool fused_ok = true;
    for (double gamma : {0.0, 1.0}) {
        ModelConfig c = cfg;
        c.fusion.gamma = gamma;
        c.gate_force = 0.0;
        ForecastReport r = run_experiment(c, data);
        singles += " gamma=" + fmt(gamma) + " " + fmt(r.test.mae);
        worst_single = std::max(worst_single, r.test.mae);
        if (!(full.test.mae <= r.test.mae)) fused_ok = false;
    }
    const double secs = seconds_since(t0);
    return {full.test.mae < best_baseline && fused_ok && secs < 600.0,
            "fused test MAE " + fmt(full.test.mae) + ", best baseline " + best_name + " " + fmt(best_baseline) +
                ", single-branch" + singles + ", " + fmt(secs) + " s"};
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        rows.push_back(fields);
    }
    return rows;
}

// 10. Ablation grids over k and temporal on/off.
Outcome ablation_grids() {
    const fs::path dir = scratch("ablation");
    SynthConfig sc;
    sc.nodes = 8;
    sc.steps = 400;
    sc.drift_at = 200;
    SpatioTemporalDataset ds = synthesize(sc).dataset;
    ModelConfig cfg = ModelConfig::load((source_dir() / "configs" / "smoke.json").string());
    cfg.train.epochs = 2;
    PreparedData data = prepare_data(ds, cfg);

    std::vector<std::string> problems;
    std::set<std::string> hashes;
    auto run = [&](const std::string& sweep, const std::vector<std::string>& want) {
        auto rows = ablate(cfg, data, sweep, default_sweep(sweep));
        const fs::path csv = dir / ("ablation_" + sweep + ".csv");
        write_ablation_csv(csv.string(), rows);
        auto table = read_csv_rows(csv);
        if (table.size() != want.size() + 1) {
            problems.push_back(sweep + ": " + std::to_string(table.size()) + " lines");
            return;
        }
        const std::size_t cols = table[0].size();
        for (std::size_t r = 1; r < table.size(); ++r) {
            if (table[r].size() != cols) problems.push_back(sweep + ": ragged row");
            for (const auto& f : table[r])
                if (f.empty()) problems.push_back(sweep + ": empty field");
            if (table[r][1] != want[r - 1]) problems.push_back(sweep + ": setting " + table[r][1]);
            hashes.insert(table[r][3]);
            for (std::size_t c = 4; c < 8; ++c)
                if (!std::isfinite(std::stod(table[r][c]))) problems.push_back(sweep + ": non-finite metric");
        }
    };
    run("k", {"2", "3", "4", "5"});
    run("temporal", {"on", "off"});
    if (hashes.size() != 1) problems.push_back(std::to_string(hashes.size()) + " distinct data hashes");
    std::string detail = "k {2,3,4,5} -> 4 rows, temporal {on,off} -> 2 rows, data hashes " +
                         std::to_string(hashes.size());
    for (const auto& p : problems) detail += "; " + p;
    fs::remove_all(dir);
    return {problems.empty(), detail};
}

// 11. Determinism and checkpoint round trip.
Outcome determinism_and_persistence() {
    const fs::path dir = scratch("persist");
    SynthConfig sc;
    sc.nodes = 4;
    sc.steps = 256;
    sc.drift_at = 128;
    sc.seed = 3;
    SpatioTemporalDataset ds = synthesize(sc).dataset;
    ModelConfig cfg = ModelConfig::load((source_dir() / "configs" / "smoke.json").string());
    PreparedData data = prepare_data(ds, cfg);

    Model a(cfg, ds.nodes(), ds.distances), b(cfg, ds.nodes(), ds.distances);
    TrainResult ra = train(a, data.train, data.val, data.norm);
    TrainResult rb = train(b, data.train, data.val, data.norm);
    bool identical = ra.history_hash == rb.history_hash;
    for (const auto& [name, e] : a.params().entries()) identical = identical && bitwise_equal(e.value, b.params().value(name));
    for (const auto& w : data.test) identical = identical && bitwise_equal(a.predict(w.x), b.predict(w.x));

    const fs::path path = dir / "checkpoint.json";
    save_checkpoint(a, path.string());
    Checkpoint ck = load_checkpoint(path.string());
    Model restored(ck.config, ds.nodes(), ds.distances);
    apply_checkpoint(ck, restored);
    double worst = 0;
    for (const auto& w : data.test) worst = std::max(worst, max_abs_diff(a.predict(w.x), restored.predict(w.x)));
    fs::remove_all(dir);
    return {identical && worst < 1e-12, std::string("same-seed runs ") + (identical ? "bit-identical" : "DIFFER") +
                                            " (hash " + hex64(ra.history_hash) + "), round-trip max |diff| " +
                                            fmt(worst) + " over " + std::to_string(data.test.size()) + " windows"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, "local connectivity oracle", local_coverage},
        {2, "mixprop equivalence", mixprop_equivalence},
        {3, "order-2 hypergraph degeneration", order_two_degeneration},
        {4, "adaptive adjacency structure", adaptive_structure},
        {5, "gradient suite", gradient_suite},
        {6, "degeneration chain", degeneration_chain},
        {7, "patch count and coverage", patch_coverage},
        {8, "overfit check", overfit},
        {9, "drift benchmark", drift_benchmark},
        {10, "ablation grids", ablation_grids},
        {11, "determinism and persistence", determinism_and_persistence},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.passed) ++failures;
        std::cout << (o.passed ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
