#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sthsep/autodiff.hpp"

namespace sthsep {

struct GradCheckConfig {
    double epsilon = 1e-5;
    double rel_tol = 1e-4;
    // Callers keep sampled inputs at least this far from kinks (e.g. ReLU at 0).
    double exclusion_band = 1e-3;

    void validate() const;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_coord = 0;
    std::size_t checked = 0;
    bool passed = true;
};

using DiffFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares reverse-mode gradients against central differences. Non-scalar
// outputs are reduced with a fixed random weighting so every output
// coordinate contributes. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const DiffFn& fn, std::span<const Tensor> inputs, const GradCheckConfig& cfg,
                           std::uint64_t seed = 0);

struct ParamCoord {
    std::string name;
    std::size_t index;
};

// Same comparison for a scalar loss built from parameters in `store`.
GradCheckReport grad_check_params(ParamStore& store, const std::function<Var(Tape&)>& loss,
                                  std::span<const ParamCoord> coords, const GradCheckConfig& cfg);

// `count` coordinates drawn uniformly over all trainable entries.
std::vector<ParamCoord> sample_param_coords(const ParamStore& store, std::size_t count, std::uint64_t seed);

}  // namespace sthsep
