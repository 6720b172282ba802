#include "sthsep/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

#include "sthsep/errors.hpp"

namespace sthsep {

void Hypergraph::validate() const {
    std::map<std::vector<std::size_t>, std::size_t> seen;
    for (std::size_t j = 0; j < hyperedges.size(); ++j) {
        const auto& e = hyperedges[j];
        if (e.empty()) throw ConfigError("hypergraph: hyperedge " + std::to_string(j) + " is empty");
        if (!std::is_sorted(e.begin(), e.end()) || std::adjacent_find(e.begin(), e.end()) != e.end())
            throw ConfigError("hypergraph: hyperedge " + std::to_string(j) + " not sorted/unique");
        if (e.back() >= n) throw ConfigError("hypergraph: node index out of range in hyperedge " + std::to_string(j));
        if (!seen.emplace(e, j).second) throw ConfigError("hypergraph: duplicate hyperedge " + std::to_string(j));
    }
    if (!generated.empty()) {
        if (generated.size() != n) throw ConfigError("hypergraph: generator table size differs from n");
        for (const auto& list : generated)
            for (std::size_t j : list)
                if (j >= hyperedges.size()) throw ConfigError("hypergraph: generator index out of range");
    }
}

Var embed_features(Var e, Var w, Var b, double alpha) {
    return ops::tanh(ops::scale(ops::add_bias(ops::matmul(e, w), b), alpha));
}

Var adaptive_adjacency(Var e1, Var e2, Var w, Var b, double alpha) {
    if (e1.shape() != e2.shape())
        throw ShapeError("adaptive_adjacency: E1 " + shape_str(e1.shape()) + " vs E2 " + shape_str(e2.shape()));
    Var f1 = embed_features(e1, w, b, alpha);
    Var f2 = embed_features(e2, w, b, alpha);
    if (f1.shape()[0] != f1.shape()[1])
        throw ShapeError("adaptive_adjacency: feature map must be N x N, got " + shape_str(f1.shape()));
    Var p = ops::matmul(ops::transpose(f1), f2);
    Var m = ops::sub(p, ops::transpose(p));
    return ops::relu(ops::tanh(ops::scale(m, alpha)));
}

Var normalize_adjacency(Var a) {
    const Shape& s = a.shape();
    if (s.size() != 2 || s[0] != s[1]) throw ShapeError("normalize_adjacency: expected square, got " + shape_str(s));
    Tape& t = a.tape();
    Var a_hat = ops::add(a, t.constant(Tensor::identity(s[0])));
    Var dinv = ops::power(ops::sum(a_hat, 1), -0.5);
    return ops::scale_cols(ops::scale_rows(a_hat, dinv), dinv);
}

Adjacency adaptive_adjacency(const Tensor& e1, const Tensor& e2, const Tensor& w, const Tensor& b, double alpha) {
    Tape t;
    Var a = adaptive_adjacency(t.constant(e1), t.constant(e2), t.constant(w), t.constant(b), alpha);
    return {AdjacencyKind::adaptive, a.value()};
}

Adjacency normalize_adjacency(const Adjacency& a) {
    for (double v : a.matrix.data())
        if (v < 0.0) throw ConfigError("normalize_adjacency: entries must be nonnegative");
    Tape t;
    return {AdjacencyKind::normalized, normalize_adjacency(t.constant(a.matrix)).value()};
}

double default_sigma(const Tensor& distances) {
    std::vector<double> d;
    const std::size_t n = distances.dim(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::isfinite(distances.at(i, j))) d.push_back(distances.at(i, j));
    if (d.size() < 2) return 1.0;
    const double mu = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0.0;
    for (double x : d) var += (x - mu) * (x - mu);
    const double sd = std::sqrt(var / static_cast<double>(d.size()));
    return sd > 0.0 ? sd : 1.0;
}

Adjacency gaussian_incident(const std::optional<Tensor>& distances, double sigma, double threshold) {
    if (!distances)
        throw ConfigError("gaussian_incident: no distances available; supply a coords or edges file");
    if (!(sigma > 0.0)) throw ConfigError("gaussian_incident: sigma must be > 0");
    if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("gaussian_incident: threshold must be in [0, 1)");
    const std::size_t n = distances->dim(0);
    Adjacency a{AdjacencyKind::incident, Tensor({n, n})};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                a.matrix.at(i, j) = 1.0;
                continue;
            }
            const double d = distances->at(i, j);
            const double k = std::exp(-(d * d) / (sigma * sigma));
            a.matrix.at(i, j) = k >= threshold ? k : 0.0;
        }
    return a;
}

Tensor hyperedge_features(const Tensor& e3, const Tensor& w, const Tensor& b, double alpha) {
    Tape t;
    return embed_features(t.constant(e3), t.constant(w), t.constant(b), alpha).value();
}

namespace {

// per_node[v] holds the candidate hyperedges generated from v.
Hypergraph dedup(std::size_t n, std::size_t order_k, std::vector<std::vector<std::vector<std::size_t>>> per_node) {
    Hypergraph hg;
    hg.n = n;
    hg.order_k = order_k;
    hg.generated.resize(n);
    std::map<std::vector<std::size_t>, std::size_t> index;
    for (std::size_t v = 0; v < n; ++v) {
        for (auto& e : per_node[v]) {
            std::sort(e.begin(), e.end());
            e.erase(std::unique(e.begin(), e.end()), e.end());
            auto [it, fresh] = index.emplace(e, hg.hyperedges.size());
            if (fresh) hg.hyperedges.push_back(e);
            auto& list = hg.generated[v];
            if (std::find(list.begin(), list.end(), it->second) == list.end()) list.push_back(it->second);
        }
    }
    return hg;
}

}  // namespace

Hypergraph knn_hyperedges(const Tensor& features, std::size_t order_k) {
    if (features.rank() != 2) throw ShapeError("knn_hyperedges: features must be [N, d]");
    const std::size_t n = features.dim(0), d = features.dim(1);
    if (order_k < 2) throw ConfigError("knn_hyperedges: order_k must be >= 2");
    if (order_k > n)
        throw ConfigError("knn_hyperedges: order_k " + std::to_string(order_k) + " exceeds node count " +
                          std::to_string(n));
    std::vector<std::vector<std::vector<std::size_t>>> per_node(n);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t v = 0; v < n; ++v) {
        cand.clear();
        for (std::size_t u = 0; u < n; ++u) {
            if (u == v) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = features.at(v, c) - features.at(u, c);
                s += diff * diff;
            }
            cand.emplace_back(s, u);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(order_k - 1), cand.end());
        std::vector<std::size_t> e{v};
        for (std::size_t r = 0; r + 1 < order_k; ++r) e.push_back(cand[r].second);
        per_node[v].push_back(std::move(e));
    }
    return dedup(n, order_k, std::move(per_node));
}

Hypergraph hop_hyperedges(const Tensor& support, std::size_t order_k) {
    if (support.rank() != 2 || support.dim(0) != support.dim(1))
        throw ShapeError("hop_hyperedges: support must be square, got " + shape_str(support.shape()));
    if (order_k < 2) throw ConfigError("hop_hyperedges: order_k must be >= 2");
    const std::size_t n = support.dim(0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if ((support.at(i, j) != 0.0) != (support.at(j, i) != 0.0))
                throw ConfigError("hop_hyperedges: support must be symmetric");
    const std::size_t depth = order_k - 1;
    constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<std::vector<std::size_t>>> per_node(n);
    std::vector<std::size_t> level(n), parent(n);
    for (std::size_t v = 0; v < n; ++v) {
        std::fill(level.begin(), level.end(), unseen);
        std::deque<std::size_t> queue{v};
        level[v] = 0;
        parent[v] = v;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            if (u != v) {
                std::vector<std::size_t> path;
                for (std::size_t x = u; x != v; x = parent[x]) path.push_back(x);
                path.push_back(v);
                per_node[v].push_back(std::move(path));
            }
            if (level[u] == depth) continue;
            for (std::size_t w = 0; w < n; ++w)
                if (w != u && support.at(u, w) != 0.0 && level[w] == unseen) {
                    level[w] = level[u] + 1;
                    parent[w] = u;
                    queue.push_back(w);
                }
        }
        if (per_node[v].empty()) per_node[v].push_back({v});
    }
    return dedup(n, order_k, std::move(per_node));
}

IncidenceMatrix incidence(const Hypergraph& hg) {
    hg.validate();
    IncidenceMatrix h{hg.n, hg.hyperedges.size(), Tensor({hg.n, hg.hyperedges.size()})};
    for (std::size_t j = 0; j < h.m; ++j)
        for (std::size_t v : hg.hyperedges[j]) h.matrix.at(v, j) = 1.0;
    return h;
}

std::vector<std::vector<std::size_t>> hyperedges_from_incidence(const IncidenceMatrix& h) {
    std::vector<std::vector<std::size_t>> out(h.m);
    for (std::size_t j = 0; j < h.m; ++j)
        for (std::size_t v = 0; v < h.n; ++v)
            if (h.matrix.at(v, j) != 0.0) out[j].push_back(v);
    return out;
}

CoverageResult coverage_check(const Hypergraph& hg, const Tensor& support, std::size_t order_k) {
    const std::size_t n = hg.n;
    if (support.rank() != 2 || support.dim(0) != n || support.dim(1) != n)
        throw ShapeError("coverage_check: support " + shape_str(support.shape()) + " vs n=" + std::to_string(n));
    if (hg.generated.size() != n) throw ConfigError("coverage_check: hypergraph lacks per-node generator lists");

    // Floyd-Warshall hop distances.
    const std::size_t inf = std::numeric_limits<std::size_t>::max() / 4;
    std::vector<std::size_t> dist(n * n, inf);
    for (std::size_t i = 0; i < n; ++i) {
        dist[i * n + i] = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && support.at(i, j) != 0.0) dist[i * n + j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dist[i * n + j] = std::min(dist[i * n + j], dist[i * n + k] + dist[k * n + j]);

    auto contains = [](const std::vector<std::size_t>& e, std::size_t x) {
        return std::find(e.begin(), e.end(), x) != e.end();
    };
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j : hg.generated[v]) {
            const auto& e = hg.hyperedges.at(j);
            if (e.size() > order_k) {
                CoverageResult r;
                r.passed = false;
                r.counterexample = std::make_pair(v, v);
                r.detail = "hyperedge " + std::to_string(j) + " of v exceeds order k";
                return r;
            }
        }
        for (std::size_t w = 0; w < n; ++w) {
            if (w == v) continue;
            const bool within = dist[v * n + w] <= order_k - 1;
            bool covered = false;
            for (std::size_t j : hg.generated[v]) {
                const auto& e = hg.hyperedges.at(j);
                if (contains(e, v) && contains(e, w)) {
                    covered = true;
                    break;
                }
            }
            if (within != covered) {
                CoverageResult r;
                r.passed = false;
                r.counterexample = std::make_pair(v, w);
                r.detail = within ? "w is within k-1 hops of v but no hyperedge of v contains both"
                                  : "a hyperedge of v contains w although w is farther than k-1 hops";
                return r;
            }
        }
    }
    return {};
}

Tensor binarize(const Tensor& m, bool clear_diagonal) {
    Tensor out(m.shape());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] != 0.0 ? 1.0 : 0.0;
    if (clear_diagonal && m.rank() == 2 && m.dim(0) == m.dim(1))
        for (std::size_t i = 0; i < m.dim(0); ++i) out.at(i, i) = 0.0;
    return out;
}

}  // namespace sthsep
