#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sthsep/tensor.hpp"

namespace sthsep {

// T x N observations plus optional geometry. Distances share the length
// units of the coordinates; absent edges are +inf.
struct SpatioTemporalDataset {
    Tensor values;  // [T, N]
    std::vector<std::string> timestamps;
    std::vector<std::string> node_ids;
    std::optional<Tensor> coords;     // [N, 2]
    std::optional<Tensor> distances;  // [N, N]

    std::size_t steps() const { return values.empty() ? 0 : values.dim(0); }
    std::size_t nodes() const { return values.empty() ? 0 : values.dim(1); }

    // Throws ConfigError describing the first violated invariant.
    void validate() const;
};

struct WindowSpec {
    std::size_t lookback = 48;
    std::size_t horizon = 48;
    std::size_t stride = 1;

    void validate(std::size_t steps) const;
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<std::string> warnings;

    Tensor normalize(const Tensor& values) const;    // [*, N]
    Tensor denormalize(const Tensor& values) const;  // [*, N]
};

struct Splits {
    SpatioTemporalDataset train, val, test;
};

struct Window {
    Tensor x;  // [L, N]
    Tensor y;  // [H, N]
    std::size_t start = 0;
};

SpatioTemporalDataset load_dataset(const std::string& values_path, const std::optional<std::string>& coords_path = {},
                                   const std::optional<std::string>& edges_path = {});

// Contiguous chronological split: floor(r0*T), floor(r1*T), remainder.
// Throws ConfigError naming the split when one is shorter than min_length.
Splits split_dataset(const SpatioTemporalDataset& ds, std::array<double, 3> ratios = {0.7, 0.1, 0.2},
                     std::size_t min_length = 0);

// Per-node z-score with population std from the train split only; a node
// whose std falls below 1e-12 keeps std = 1 and records a warning.
NormStats zscore_normalize(Splits& splits);

std::vector<Window> make_windows(const Tensor& values, const WindowSpec& spec);
std::size_t window_count(std::size_t steps, const WindowSpec& spec);

Tensor euclidean_distances(const Tensor& coords);

void write_values_csv(const SpatioTemporalDataset& ds, const std::string& path);
void write_coords_csv(const SpatioTemporalDataset& ds, const std::string& path);

// FNV-1a over the value matrix shape and bytes.
std::uint64_t content_hash(const Tensor& values);
std::string hex64(std::uint64_t v);

// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

}  // namespace sthsep
