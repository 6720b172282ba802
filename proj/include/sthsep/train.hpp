#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sthsep/dataset.hpp"
#include "sthsep/metrics.hpp"
#include "sthsep/model.hpp"

namespace sthsep {

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Frozen entries are left untouched.
    void step(ParamStore& store);
    std::size_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

// Global L2 clip. Returns the norm before clipping.
double clip_gradients(ParamStore& store, double max_norm);

// Mean loss over the windows, accumulating gradients into the store.
double accumulate_batch(Model& model, const std::vector<const Window*>& batch, LossKind kind);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0;
    double val_mae = 0;
    double grad_norm = 0;  // last batch, before clipping
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_mae = 0;
    std::uint64_t history_hash = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam with global clipping, per-epoch shuffle and graph rebuild. The
// parameters with the best de-normalized validation MAE are restored at
// the end (the last epoch when `val` is empty).
TrainResult train(Model& model, const std::vector<Window>& train_windows, const std::vector<Window>& val,
                  const NormStats& norm, const EpochCallback& on_epoch = {});

// De-normalized metrics of the model over `windows`.
Metrics evaluate(Model& model, const std::vector<Window>& windows, const NormStats& norm,
                 std::vector<Tensor>* predictions = nullptr);

std::uint64_t params_hash(const ParamStore& store);

}  // namespace sthsep
