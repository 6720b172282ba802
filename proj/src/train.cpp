#include "sthsep/train.hpp"

#include <cmath>
#include <numeric>

#include "sthsep/errors.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

void Adam::step(ParamStore& store) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, e] : store.entries()) {
        if (e.frozen) continue;
        auto [it, fresh] = moments_.try_emplace(name);
        if (fresh) it->second = {Tensor(e.value.shape()), Tensor(e.value.shape())};
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            m[i] = beta1_ * m[i] + (1 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1 - beta2_) * g * g;
            e.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

double clip_gradients(ParamStore& store, double max_norm) {
    const double norm = store.grad_norm();
    if (norm > max_norm) store.scale_grad(max_norm / norm);
    return norm;
}

double accumulate_batch(Model& model, const std::vector<const Window*>& batch, LossKind kind) {
    if (batch.empty()) return 0;
    Tape tape;
    SpatialSupports s = model.supports(tape);
    std::vector<Var> losses;
    losses.reserve(batch.size());
    for (const Window* w : batch) {
        Var pred = model.forward(tape, s, tape.constant(w->x)).fused;
        losses.push_back(loss(pred, tape.constant(w->y), kind));
    }
    Var total = losses.size() == 1 ? losses[0] : ops::mean_all(ops::concat(losses, 0));
    const double value = total.value()[0];
    if (!std::isfinite(value)) return value;
    tape.backward(total);
    return value;
}

Metrics evaluate(Model& model, const std::vector<Window>& windows, const NormStats& norm,
                 std::vector<Tensor>* predictions) {
    std::vector<Tensor> xs;
    xs.reserve(windows.size());
    for (const auto& w : windows) xs.push_back(w.x);
    std::vector<Tensor> preds = model.predict_all(xs);
    std::vector<Tensor> targets;
    targets.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        preds[i] = norm.denormalize(preds[i]);
        targets.push_back(norm.denormalize(windows[i].y));
    }
    Metrics m = metrics(preds, targets);
    if (predictions) *predictions = std::move(preds);
    return m;
}

std::uint64_t params_hash(const ParamStore& store) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, e] : store.entries()) {
        for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        h = (h ^ content_hash(e.value)) * 0x100000001b3ULL;
    }
    return h;
}

TrainResult train(Model& model, const std::vector<Window>& train_windows, const std::vector<Window>& val,
                  const NormStats& norm, const EpochCallback& on_epoch) {
    const ModelConfig& cfg = model.config();
    if (train_windows.empty()) throw ConfigError("train: the train split yields no windows");
    ParamStore& store = model.params();
    Adam opt(cfg.train.lr);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult result;
    std::map<std::string, Tensor> best;
    double best_score = INFINITY;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        if (epoch > 1) model.rebuild_graphs();
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size, ++batch_index) {
            if (cfg.hypergraph.rebuild == RebuildPolicy::batch && start > 0) model.rebuild_graphs();
            std::vector<const Window*> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + cfg.train.batch_size); ++i)
                batch.push_back(&train_windows[order[i]]);
            store.zero_grad();
            const double l = accumulate_batch(model, batch, cfg.train.loss);
            if (!std::isfinite(l))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            rec.grad_norm = clip_gradients(store, cfg.train.grad_clip);
            opt.step(store);
            loss_sum += l * static_cast<double>(batch.size());
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());

        model.rebuild_graphs();
        rec.val_mae = val.empty() ? rec.train_loss : evaluate(model, val, norm).mae;
        if (!std::isfinite(rec.val_mae))
            throw NumericError("train: non-finite validation MAE at epoch " + std::to_string(epoch));
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (val.empty() || rec.val_mae < best_score) {
            best_score = rec.val_mae;
            result.best_epoch = epoch;
            result.best_val_mae = rec.val_mae;
            for (const auto& [name, e] : store.entries()) best[name] = e.value;
            since_best = 0;
        } else if (cfg.train.patience > 0 && ++since_best >= cfg.train.patience) {
            break;
        }
    }

    for (auto& [name, value] : best) store.value(name) = value;
    model.rebuild_graphs();

    Tensor h({result.history.size(), 3});
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        h.at(i, 0) = result.history[i].train_loss;
        h.at(i, 1) = result.history[i].val_mae;
        h.at(i, 2) = result.history[i].grad_norm;
    }
    result.history_hash = content_hash(h) ^ params_hash(store);
    return result;
}

}  // namespace sthsep
