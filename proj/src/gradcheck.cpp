#include "sthsep/gradcheck.hpp"

#include <cmath>

#include "sthsep/errors.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

void GradCheckConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("grad_check: epsilon must be > 0");
    if (!(rel_tol > 0.0)) throw ConfigError("grad_check: rel_tol must be > 0");
}

namespace {

Tensor projection_for(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return rng.uniform_tensor(shape, -1.0, 1.0);
}

Var reduce(Tape& tape, Var out, const Tensor& weights) {
    if (out.value().size() == 1) return out;
    return ops::sum_all(ops::mul(out, tape.constant(weights)));
}

double evaluate(const DiffFn& fn, std::span<const Tensor> inputs, const Tensor* weights) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    Var out = fn(tape, vars);
    if (out.value().size() == 1) return out.value()[0];
    double s = 0.0;
    for (std::size_t i = 0; i < out.value().size(); ++i) s += out.value()[i] * (*weights)[i];
    return s;
}

void record(GradCheckReport& r, double analytic, double numeric, std::size_t input, std::size_t coord,
            const GradCheckConfig& cfg) {
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
    ++r.checked;
    if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_input = input;
        r.worst_coord = coord;
    }
    if (!(err < cfg.rel_tol)) r.passed = false;
}

}  // namespace

GradCheckReport grad_check(const DiffFn& fn, std::span<const Tensor> inputs, const GradCheckConfig& cfg,
                           std::uint64_t seed) {
    cfg.validate();
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var out = fn(tape, vars);
    const Tensor weights = projection_for(out.shape(), seed);
    tape.backward(reduce(tape, out, weights));

    GradCheckReport report;
    std::vector<Tensor> probe(inputs.begin(), inputs.end());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor analytic = tape.grad(vars[k]);
        for (std::size_t i = 0; i < probe[k].size(); ++i) {
            if (!std::isfinite(analytic[i]))
                throw NumericError("grad_check: non-finite gradient at input " + std::to_string(k) + " coordinate " +
                                   std::to_string(i));
            const double x0 = probe[k][i];
            probe[k][i] = x0 + cfg.epsilon;
            const double fp = evaluate(fn, probe, &weights);
            probe[k][i] = x0 - cfg.epsilon;
            const double fm = evaluate(fn, probe, &weights);
            probe[k][i] = x0;
            record(report, analytic[i], (fp - fm) / (2.0 * cfg.epsilon), k, i, cfg);
        }
    }
    return report;
}

GradCheckReport grad_check_params(ParamStore& store, const std::function<Var(Tape&)>& loss,
                                  std::span<const ParamCoord> coords, const GradCheckConfig& cfg) {
    cfg.validate();
    store.zero_grad();
    {
        Tape tape;
        Var l = loss(tape);
        tape.backward(l);
    }
    auto eval = [&] {
        Tape tape;
        return loss(tape).value()[0];
    };
    GradCheckReport report;
    for (std::size_t c = 0; c < coords.size(); ++c) {
        auto& entry = store.at(coords[c].name);
        const double analytic = entry.grad[coords[c].index];
        if (!std::isfinite(analytic))
            throw NumericError("grad_check: non-finite gradient at " + coords[c].name + "[" +
                               std::to_string(coords[c].index) + "]");
        double& x = entry.value[coords[c].index];
        const double x0 = x;
        x = x0 + cfg.epsilon;
        const double fp = eval();
        x = x0 - cfg.epsilon;
        const double fm = eval();
        x = x0;
        record(report, analytic, (fp - fm) / (2.0 * cfg.epsilon), c, coords[c].index, cfg);
    }
    store.zero_grad();
    return report;
}

std::vector<ParamCoord> sample_param_coords(const ParamStore& store, std::size_t count, std::uint64_t seed) {
    std::vector<ParamCoord> all;
    for (const auto& [name, e] : store.entries()) {
        if (e.frozen) continue;
        for (std::size_t i = 0; i < e.value.size(); ++i) all.push_back({name, i});
    }
    Rng rng(seed);
    std::vector<ParamCoord> out;
    for (std::size_t i = 0; i < count && i < all.size(); ++i) {
        const auto j = i + rng.below(all.size() - i);
        std::swap(all[i], all[j]);
        out.push_back(all[i]);
    }
    return out;
}

}  // namespace sthsep
