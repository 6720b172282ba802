#pragma once

#include <string>
#include <vector>

#include "sthsep/config.hpp"
#include "sthsep/model.hpp"

namespace sthsep {

struct Checkpoint {
    struct Param {
        std::string name;
        Shape shape;
        std::vector<double> data;
    };

    ModelConfig config;
    std::vector<Param> params;
};

inline constexpr const char* checkpoint_magic = "STHSEP1";

void save_checkpoint(const Model& model, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Copies the stored values into `model` and rebuilds its graphs. Every
// parameter must be present with the same shape; CheckpointError names
// the first offender.
void apply_checkpoint(const Checkpoint& ckpt, Model& model);

}  // namespace sthsep
