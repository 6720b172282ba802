#include "sthsep/metrics.hpp"

#include <cmath>

#include "sthsep/errors.hpp"

namespace sthsep {

namespace {

struct Accum {
    double abs_sum = 0;
    double sq_sum = 0;
    std::size_t count = 0;

    void add(const Tensor& pred, const Tensor& target) {
        if (pred.shape() != target.shape())
            throw ShapeError("metrics: prediction " + shape_str(pred.shape()) + " vs target " +
                             shape_str(target.shape()));
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - target[i];
            abs_sum += std::abs(d);
            sq_sum += d * d;
        }
        count += pred.size();
    }

    Metrics result() const {
        if (count == 0) return {};
        return {abs_sum / count, std::sqrt(sq_sum / count)};
    }
};

}  // namespace

Metrics metrics(const Tensor& pred, const Tensor& target) {
    Accum a;
    a.add(pred, target);
    return a.result();
}

Metrics metrics(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets) {
    if (preds.size() != targets.size())
        throw ShapeError("metrics: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
    Accum a;
    for (std::size_t i = 0; i < preds.size(); ++i) a.add(preds[i], targets[i]);
    return a.result();
}

std::string baseline_name(Baseline b) {
    switch (b) {
        case Baseline::last_value: return "last_value";
        case Baseline::historical_average: return "historical_average";
        case Baseline::seasonal_naive: return "seasonal_naive";
    }
    return "?";
}

Tensor baseline_forecast(Baseline b, const Tensor& x, std::size_t horizon, std::size_t period,
                         std::vector<std::string>* warnings) {
    if (x.rank() != 2 || x.dim(0) == 0) throw ShapeError("baseline: expected a non-empty [L, N] window");
    const std::size_t L = x.dim(0), N = x.dim(1);
    Tensor out({horizon, N});
    if (b == Baseline::seasonal_naive && (period == 0 || L < period)) {
        if (warnings)
            warnings->push_back("seasonal_naive: lookback " + std::to_string(L) + " < period " +
                                std::to_string(period) + ", using last_value");
        b = Baseline::last_value;
    }
    for (std::size_t n = 0; n < N; ++n) {
        double mean = 0;
        if (b == Baseline::historical_average) {
            for (std::size_t t = 0; t < L; ++t) mean += x.at(t, n);
            mean /= static_cast<double>(L);
        }
        for (std::size_t h = 0; h < horizon; ++h) {
            switch (b) {
                case Baseline::last_value: out.at(h, n) = x.at(L - 1, n); break;
                case Baseline::historical_average: out.at(h, n) = mean; break;
                case Baseline::seasonal_naive: out.at(h, n) = x.at(L - period + h % period, n); break;
            }
        }
    }
    return out;
}

}  // namespace sthsep
