#pragma once

#include <map>
#include <string>
#include <vector>

#include "sthsep/tensor.hpp"

namespace sthsep {

class Rng;

// Named trainable arrays. Every entry carries a gradient buffer of the same
// shape; frozen entries never receive gradient.
class ParamStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        bool frozen = false;
    };

    Entry& add(const std::string& name, Tensor value, bool frozen = false);
    // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
    Entry& add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    Tensor& value(const std::string& name) { return at(name).value; }
    const Tensor& value(const std::string& name) const { return at(name).value; }

    void set_frozen(const std::string& name, bool frozen) { at(name).frozen = frozen; }
    void zero_grad();
    double grad_norm() const;
    void scale_grad(double factor);

    std::vector<std::string> names() const;
    std::size_t parameter_count() const;
    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

private:
    std::map<std::string, Entry> entries_;
};

}  // namespace sthsep
