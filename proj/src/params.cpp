#include "sthsep/params.hpp"

#include <cmath>

#include "sthsep/errors.hpp"
#include "sthsep/rng.hpp"

namespace sthsep {

ParamStore::Entry& ParamStore::add(const std::string& name, Tensor value, bool frozen) {
    if (entries_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
    Tensor grad(value.shape());
    auto& e = entries_[name];
    e.value = std::move(value);
    e.grad = std::move(grad);
    e.frozen = frozen;
    return e;
}

ParamStore::Entry& ParamStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    return add(name, rng.uniform_tensor(std::move(shape), -bound, bound));
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto& [_, e] : entries_)
        for (double g : e.grad.data()) s += g * g;
    return std::sqrt(s);
}

void ParamStore::scale_grad(double factor) {
    for (auto& [_, e] : entries_)
        for (auto& g : e.grad.data()) g *= factor;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
}

}  // namespace sthsep
