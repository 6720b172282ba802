#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sthsep/dataset.hpp"

namespace sthsep {

// Low-rank seasonal factors plus a lagged sparse coupling whose pattern
// switches to a fresh draw at drift_at.
struct SynthConfig {
    std::size_t nodes = 8;
    std::size_t steps = 2048;
    std::uint64_t seed = 7;
    std::size_t rank = 2;
    std::vector<double> periods{24.0, 168.0};  // factor r uses periods[r]; beyond the list it repeats
    double rho = 0.5;
    std::size_t drift_at = 1024;
    double noise_std = 0.1;
    std::size_t neighbours = 2;  // nonzero couplings per row

    void validate() const;
};

struct SynthResult {
    SpatioTemporalDataset dataset;
    Tensor coupling_before;  // [N, N]
    Tensor coupling_after;
};

SynthResult synthesize(const SynthConfig& cfg);

// values.csv and coords.csv under `dir` (created if needed).
void write_dataset(const SpatioTemporalDataset& ds, const std::string& dir);

// Loads values.csv plus coords.csv / edges.csv when present.
SpatioTemporalDataset load_dataset_dir(const std::string& dir);

}  // namespace sthsep
