#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "sthsep/tensor.hpp"

namespace sthsep {

// Seeded generator with portable double conversions. std::*_distribution
// output is implementation-defined, so draws are derived from raw 64-bit
// words here to keep synthetic data and initializations byte-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }

    Tensor uniform_tensor(Shape shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (auto& x : t.data()) x = uniform(lo, hi);
        return t;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sthsep
