#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sthsep/autodiff.hpp"
#include "sthsep/tensor.hpp"

namespace sthsep {

enum class AdjacencyKind { adaptive, incident, normalized };

struct Adjacency {
    AdjacencyKind kind = AdjacencyKind::incident;
    Tensor matrix;  // [n, n], nonnegative

    std::size_t size() const { return matrix.empty() ? 0 : matrix.dim(0); }
};

// Hyperedges are sorted, duplicate-free node index sets. generated[v]
// lists the hyperedges built from node v (after deduplication a hyperedge
// may be listed under several nodes).
struct Hypergraph {
    std::size_t n = 0;
    std::vector<std::vector<std::size_t>> hyperedges;
    std::size_t order_k = 0;
    std::vector<std::vector<std::size_t>> generated;

    std::size_t edge_count() const { return hyperedges.size(); }
    void validate() const;
};

struct IncidenceMatrix {
    std::size_t n = 0, m = 0;
    Tensor matrix;  // [n, m] in {0, 1}
};

// ---- differentiable builders ------------------------------------------

// tanh(alpha * (e @ w + b)); the same (w, b) is shared by every embedding it maps.
Var embed_features(Var e, Var w, Var b, double alpha);

// ReLU(tanh(alpha * (F1^T F2 - F2^T F1))) with F_i = embed_features(E_i).
// Computed as P - P^T so the argument is exactly antisymmetric.
Var adaptive_adjacency(Var e1, Var e2, Var w, Var b, double alpha);

// D^{-1/2} (A + I) D^{-1/2}, D from row sums of A + I.
Var normalize_adjacency(Var a);

// ---- value-level builders ----------------------------------------------

Adjacency adaptive_adjacency(const Tensor& e1, const Tensor& e2, const Tensor& w, const Tensor& b, double alpha);
Adjacency normalize_adjacency(const Adjacency& a);

// exp(-d^2 / sigma^2), zeroed below threshold; unit diagonal.
Adjacency gaussian_incident(const std::optional<Tensor>& distances, double sigma, double threshold);
// Population std of finite off-diagonal distances (1 when undefined).
double default_sigma(const Tensor& distances);

Tensor hyperedge_features(const Tensor& e3, const Tensor& w, const Tensor& b, double alpha);

// Hyperedge per node: itself plus its order_k - 1 nearest neighbours by
// Euclidean distance over rows of `features`; ties go to the lower index.
Hypergraph knn_hyperedges(const Tensor& features, std::size_t order_k);

// For each node v and each w within order_k - 1 hops of a symmetric binary
// support, one hyperedge holding the BFS shortest path v .. w (v, w and at
// most order_k - 2 intermediates; lower indices win ties). Isolated nodes
// get the singleton {v}. With order_k = 2 this is exactly the edge set.
Hypergraph hop_hyperedges(const Tensor& support, std::size_t order_k);

IncidenceMatrix incidence(const Hypergraph& hg);
// Inverse of incidence(): recovers the hyperedge list column by column.
std::vector<std::vector<std::size_t>> hyperedges_from_incidence(const IncidenceMatrix& h);

struct CoverageResult {
    bool passed = true;
    std::optional<std::pair<std::size_t, std::size_t>> counterexample;  // (v, w)
    std::string detail;
};

// For every ordered pair (v, w), w != v: w lies within order_k - 1 hops of v
// (all-pairs shortest paths, independent of the BFS in hop_hyperedges) iff
// some hyperedge generated from v contains both v and w. Generated
// hyperedges larger than order_k also fail the check.
CoverageResult coverage_check(const Hypergraph& hg, const Tensor& support, std::size_t order_k);

// 1 where |x| > 0 (optionally clearing the diagonal), else 0.
Tensor binarize(const Tensor& m, bool clear_diagonal = true);

}  // namespace sthsep
