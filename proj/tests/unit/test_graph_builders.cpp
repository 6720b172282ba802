#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "sthsep/errors.hpp"
#include "sthsep/graphs.hpp"
#include "sthsep/rng.hpp"

using namespace sthsep;

namespace {

using Edge = std::vector<std::size_t>;

std::set<Edge> edge_set(const Hypergraph& hg) { return {hg.hyperedges.begin(), hg.hyperedges.end()}; }

Tensor support_from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    Tensor a({n, n});
    for (auto [i, j] : edges) a.at(i, j) = a.at(j, i) = 1.0;
    return a;
}

Tensor random_graph(Rng& rng, std::size_t n, double p) {
    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (rng.uniform() < p) a.at(i, j) = a.at(j, i) = 1.0;
    return a;
}

// Full sort of every candidate, written independently of the partial sort
// inside knn_hyperedges.
std::set<Edge> knn_oracle(const Tensor& f, std::size_t k) {
    const std::size_t n = f.dim(0);
    std::set<Edge> out;
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<std::size_t> order;
        for (std::size_t u = 0; u < n; ++u)
            if (u != v) order.push_back(u);
        auto dist = [&](std::size_t u) {
            double s = 0;
            for (std::size_t c = 0; c < f.dim(1); ++c) s += std::pow(f.at(v, c) - f.at(u, c), 2);
            return s;
        };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
        Edge e{v};
        e.insert(e.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1));
        std::sort(e.begin(), e.end());
        out.insert(e);
    }
    return out;
}

double power_iteration(const Tensor& m, int iters) {
    const std::size_t n = m.dim(0);
    std::vector<double> x(n, 1.0), y(n);
    x[0] = 1.3;
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        double norm = 0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 0;
            for (std::size_t j = 0; j < n; ++j) y[i] += m.at(i, j) * x[j];
            norm += y[i] * y[i];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        double xn = 0;
        for (double v : x) xn += v * v;
        lambda = norm / std::sqrt(xn);
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
    }
    return lambda;
}

}  // namespace

TEST_CASE("adaptive adjacency vanishes for identical embeddings") {
    Rng rng(1);
    const std::size_t n = 6, d = 3;
    Tensor e = rng.uniform_tensor({n, d}, -1, 1);
    Tensor w = rng.uniform_tensor({d, n}, -1, 1);
    Tensor b = rng.uniform_tensor({n}, -1, 1);
    auto a = adaptive_adjacency(e, e, w, b, 3.0);
    CHECK(a.kind == AdjacencyKind::adaptive);
    for (double v : a.matrix.data()) CHECK(v == 0.0);
}

TEST_CASE("adaptive adjacency: zero diagonal, one-sided, bounded over 100 draws") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(7), d = 1 + rng.below(4);
        const double alpha = rng.uniform(0.5, 4.0);
        Tensor e1 = rng.uniform_tensor({n, d}, -1, 1), e2 = rng.uniform_tensor({n, d}, -1, 1);
        Tensor w = rng.uniform_tensor({d, n}, -1, 1), b = rng.uniform_tensor({n}, -0.5, 0.5);
        const Tensor m = adaptive_adjacency(e1, e2, w, b, alpha).matrix;

        // Dense recomputation.
        auto feat = [&](const Tensor& e) {
            Tensor f({n, n});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = b[j];
                    for (std::size_t c = 0; c < d; ++c) s += e.at(i, c) * w.at(c, j);
                    f.at(i, j) = std::tanh(alpha * s);
                }
            return f;
        };
        const Tensor f1 = feat(e1), f2 = feat(e2);
        double max_m = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double p = 0, q = 0;
                for (std::size_t r = 0; r < n; ++r) {
                    p += f1.at(r, i) * f2.at(r, j);
                    q += f2.at(r, i) * f1.at(r, j);
                }
                max_m = std::max(max_m, std::abs(p - q));
                CHECK(std::abs(m.at(i, j) - std::max(0.0, std::tanh(alpha * (p - q)))) < 1e-12);
            }
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(m.at(i, i) == 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(m.at(i, j) * m.at(j, i) == 0.0);
                CHECK(m.at(i, j) >= 0.0);
                CHECK(m.at(i, j) <= std::tanh(alpha * max_m) + 1e-15);
                // Double-precision tanh rounds to exactly 1 beyond ~19.
                if (alpha * max_m < 18.0) CHECK(m.at(i, j) < 1.0);
            }
        }
    }
}

TEST_CASE("adaptive adjacency rejects mismatched embeddings") {
    Rng rng(2);
    CHECK_THROWS_AS(adaptive_adjacency(rng.uniform_tensor({4, 2}, -1, 1), rng.uniform_tensor({5, 2}, -1, 1),
                                       rng.uniform_tensor({2, 4}, -1, 1), Tensor({4}), 1.0),
                    ShapeError);
}

TEST_CASE("gaussian incident kernel values and threshold") {
    const double sigma = 2.0;
    Tensor d({3, 3}, std::vector<double>{0, 0, 2, 0, 0, 1, 2, 1, 0});
    auto a = gaussian_incident(d, sigma, 0.0);
    CHECK(a.matrix.at(0, 1) == 1.0);
    CHECK(std::abs(a.matrix.at(0, 2) - 0.36787944117144233) < 1e-15);
    CHECK(a.matrix.at(1, 1) == 1.0);
    auto cut = gaussian_incident(d, sigma, 0.5);
    CHECK(cut.matrix.at(0, 2) == 0.0);
    CHECK(cut.matrix.at(1, 2) == doctest::Approx(std::exp(-0.25)).epsilon(1e-15));

    try {
        gaussian_incident(std::nullopt, 1.0, 0.1);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("coords") != std::string::npos);
    }
    CHECK_THROWS_AS(gaussian_incident(d, 0.0, 0.1), ConfigError);
    CHECK_THROWS_AS(gaussian_incident(d, 1.0, 1.0), ConfigError);
}

TEST_CASE("gaussian incident is monotone in distance") {
    Rng rng(3);
    const std::size_t n = 9;
    Tensor coords = rng.uniform_tensor({n, 2}, 0, 10);
    Tensor d({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d.at(i, j) = std::hypot(coords.at(i, 0) - coords.at(j, 0), coords.at(i, 1) - coords.at(j, 1));
    auto a = gaussian_incident(d, default_sigma(d), 0.0);
    for (std::size_t p = 0; p < n * n; ++p)
        for (std::size_t q = 0; q < n * n; ++q)
            if (d[p] < d[q]) CHECK(a.matrix[p] >= a.matrix[q]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(a.matrix.at(i, j) == a.matrix.at(j, i));
}

TEST_CASE("normalize adjacency small cases") {
    auto two = normalize_adjacency(Adjacency{AdjacencyKind::incident, Tensor({2, 2}, std::vector<double>{0, 1, 1, 0})});
    CHECK(two.kind == AdjacencyKind::normalized);
    for (double v : two.matrix.data()) CHECK(std::abs(v - 0.5) < 1e-15);
    auto zero = normalize_adjacency(Adjacency{AdjacencyKind::incident, Tensor({4, 4})});
    CHECK(zero.matrix == Tensor::identity(4));
    auto one = normalize_adjacency(Adjacency{AdjacencyKind::incident, Tensor({1, 1})});
    CHECK(one.matrix[0] == 1.0);
    CHECK_THROWS_AS(normalize_adjacency(Adjacency{AdjacencyKind::incident, Tensor({1, 1}, -1.0)}), ConfigError);
}

TEST_CASE("normalized symmetric adjacency is symmetric with spectral radius at most one") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(100 + seed);
        const std::size_t n = 1 + rng.below(10);
        Tensor a({n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (rng.uniform() < 0.5) a.at(i, j) = a.at(j, i) = rng.uniform(0, 3);
        auto hat = normalize_adjacency(Adjacency{AdjacencyKind::incident, a}).matrix;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(hat.at(i, j) - hat.at(j, i)) < 1e-15);
        CHECK(power_iteration(hat, 2000) <= 1.0 + 1e-8);
    }
}

TEST_CASE("hyperedge features are bounded and saturate with alpha") {
    Rng rng(5);
    const std::size_t n = 5, d = 3;
    CHECK(hyperedge_features(Tensor({n, d}), rng.uniform_tensor({d, d}, -1, 1), Tensor({d}), 2.0) == Tensor({n, d}));

    Tensor e = rng.uniform_tensor({n, d}, -2, 2), w = rng.uniform_tensor({d, d}, -1, 1), b = rng.uniform_tensor({d}, -1, 1);
    Tensor f1 = hyperedge_features(e, w, b, 1.0), f10 = hyperedge_features(e, w, b, 10.0);
    for (std::size_t i = 0; i < f1.size(); ++i) {
        CHECK(std::abs(f1[i]) < 1.0);
        CHECK(std::abs(f10[i]) <= 1.0);
        CHECK(std::abs(f10[i]) >= std::abs(f1[i]));
    }
}

TEST_CASE("knn hyperedges on a line") {
    Tensor f({3, 1}, std::vector<double>{0, 1, 10});
    auto hg = knn_hyperedges(f, 2);
    CHECK(edge_set(hg) == std::set<Edge>{{0, 1}, {1, 2}});
    CHECK(hg.hyperedges.size() == 2);
    CHECK(hg.generated[0] == hg.generated[1]);
    hg.validate();

    auto all = knn_hyperedges(f, 3);
    REQUIRE(all.hyperedges.size() == 1);
    CHECK(all.hyperedges[0] == Edge{0, 1, 2});

    CHECK_THROWS_AS(knn_hyperedges(f, 4), ConfigError);
    CHECK_THROWS_AS(knn_hyperedges(f, 1), ConfigError);
}

TEST_CASE("knn ties go to the lowest index") {
    auto hg = knn_hyperedges(Tensor({5, 2}, 0.7), 3);
    // Every node picks the two lowest-index others.
    CHECK(edge_set(hg) == std::set<Edge>{{0, 1, 2}, {0, 1, 3}, {0, 1, 4}});
}

TEST_CASE("knn hyperedges match an exhaustive sort oracle") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Rng rng(seed);
        const std::size_t n = 2 + rng.below(9), d = 1 + rng.below(3);
        Tensor f = rng.uniform_tensor({n, d}, -1, 1);
        // Coarse grid forces frequent ties.
        if (seed % 2 == 0)
            for (double& v : f.data()) v = std::round(v * 2.0) / 2.0;
        const std::size_t k = 2 + rng.below(n - 1);
        auto hg = knn_hyperedges(f, k);
        hg.validate();
        CHECK(edge_set(hg) == knn_oracle(f, k));
        for (const auto& e : hg.hyperedges) CHECK(e.size() == k);
    }
}

TEST_CASE("hop hyperedges on small graphs") {
    SUBCASE("path") {
        auto a = support_from_edges(3, {{0, 1}, {1, 2}});
        auto hg = hop_hyperedges(a, 3);
        bool found = false;
        for (std::size_t j : hg.generated[0]) found = found || hg.hyperedges[j] == Edge{0, 1, 2};
        CHECK(found);
        CHECK(edge_set(hg) == std::set<Edge>{{0, 1}, {1, 2}, {0, 1, 2}});
    }
    SUBCASE("isolated node") {
        auto a = support_from_edges(3, {{0, 1}});
        auto hg = hop_hyperedges(a, 3);
        REQUIRE(hg.generated[2].size() == 1);
        CHECK(hg.hyperedges[hg.generated[2][0]] == Edge{2});
    }
    SUBCASE("triangle at order two is the edge set") {
        auto a = support_from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
        CHECK(edge_set(hop_hyperedges(a, 2)) == std::set<Edge>{{0, 1}, {0, 2}, {1, 2}});
    }
    SUBCASE("asymmetric support is rejected") {
        Tensor a({2, 2});
        a.at(0, 1) = 1.0;
        CHECK_THROWS_AS(hop_hyperedges(a, 2), ConfigError);
    }
}

TEST_CASE("incidence matrix sums and round trip") {
    Hypergraph single{3, {{0, 1, 2}}, 3, {}};
    auto h1 = incidence(single);
    CHECK(h1.matrix == Tensor({3, 1}, 1.0));

    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        auto hg = hop_hyperedges(random_graph(rng, 2 + rng.below(7), 0.4), 2 + rng.below(3));
        auto h = incidence(hg);
        REQUIRE(h.m == hg.hyperedges.size());
        for (std::size_t j = 0; j < h.m; ++j) {
            double col = 0;
            for (std::size_t v = 0; v < h.n; ++v) col += h.matrix.at(v, j);
            CHECK(col == static_cast<double>(hg.hyperedges[j].size()));
        }
        for (std::size_t v = 0; v < h.n; ++v) {
            double row = 0;
            std::size_t degree = 0;
            for (std::size_t j = 0; j < h.m; ++j) row += h.matrix.at(v, j);
            for (const auto& e : hg.hyperedges) degree += std::count(e.begin(), e.end(), v);
            CHECK(row == static_cast<double>(degree));
        }
        CHECK(hyperedges_from_incidence(h) == hg.hyperedges);
    }
}

TEST_CASE("local connectivity check holds on every graph up to six nodes") {
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        for (std::size_t mask = 0; mask < (std::size_t{1} << pairs.size()); ++mask) {
            Tensor a({n, n});
            for (std::size_t p = 0; p < pairs.size(); ++p)
                if (mask >> p & 1) a.at(pairs[p].first, pairs[p].second) = a.at(pairs[p].second, pairs[p].first) = 1.0;
            for (std::size_t k : {2u, 3u, 4u}) {
                auto r = coverage_check(hop_hyperedges(a, k), a, k);
                if (!r.passed) {
                    FAIL_CHECK("n=" << n << " mask=" << mask << " k=" << k << ": " << r.detail);
                    return;
                }
            }
        }
    }
}

TEST_CASE("local connectivity check on seeded random graphs up to eight nodes") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(8);
        Tensor a = random_graph(rng, n, rng.uniform(0.1, 0.7));
        for (std::size_t k : {2u, 3u, 4u}) CHECK(coverage_check(hop_hyperedges(a, k), a, k).passed);
    }
}

TEST_CASE("local connectivity check reports an injected fault") {
    auto a = support_from_edges(3, {{0, 1}, {1, 2}});
    auto hg = hop_hyperedges(a, 2);
    for (auto& e : hg.hyperedges)
        if (e == Edge{1, 2}) e = {1};
    auto r = coverage_check(hg, a, 2);
    CHECK_FALSE(r.passed);
    REQUIRE(r.counterexample);
    CHECK(*r.counterexample == std::make_pair(std::size_t{1}, std::size_t{2}));

    auto empty = Tensor({5, 5});
    auto hg0 = hop_hyperedges(empty, 3);
    CHECK(hg0.hyperedges.size() == 5);
    CHECK(coverage_check(hg0, empty, 3).passed);
}

TEST_CASE("binarize clears the diagonal") {
    Tensor m({2, 2}, std::vector<double>{0.3, 0.0, 2.0, 1.0});
    CHECK(binarize(m) == Tensor({2, 2}, std::vector<double>{0, 0, 1, 0}));
    CHECK(binarize(m, false) == Tensor({2, 2}, std::vector<double>{1, 0, 1, 1}));
}
