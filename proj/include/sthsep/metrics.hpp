#pragma once

#include <string>
#include <vector>

#include "sthsep/tensor.hpp"

namespace sthsep {

struct Metrics {
    double mae = 0;
    double rmse = 0;
};

// Elementwise over matching shapes.
Metrics metrics(const Tensor& pred, const Tensor& target);

// Pooled over a list of prediction/target pairs.
Metrics metrics(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets);

enum class Baseline { last_value, historical_average, seasonal_naive };

std::string baseline_name(Baseline b);

// x [L, N] -> [H, N]. Seasonal-naive needs L >= period; otherwise it
// falls back to last-value and appends a note to `warnings` if given.
Tensor baseline_forecast(Baseline b, const Tensor& x, std::size_t horizon, std::size_t period = 24,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace sthsep
