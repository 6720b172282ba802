#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sthsep/params.hpp"
#include "sthsep/tensor.hpp"

namespace sthsep {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid for the
// lifetime of its tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode recording. Each node holds its forward value and a closure
// that scatters its output gradient into its inputs. Gradients add across
// multiple uses of a node; parameter leaves flush into their ParamStore
// entry when backward() finishes.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);
    // Repeated requests for the same entry return the same node.
    Var param(ParamStore& store, const std::string& name);

    Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
    Var record(Tensor value, std::span<const Var> inputs, Backward backward);

    // Seeds d(root)/d(root) = 1; root must hold a single value.
    void backward(Var root);
    void backward(Var root, const Tensor& seed);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    // Zero tensor of the right shape when nothing flowed into the node.
    Tensor grad(Var v) const;

    // Adds g into the gradient of v; no-op for constants.
    void accumulate(Var v, const Tensor& g);
    // Mutable gradient buffer for in-place scatter, allocated on demand.
    Tensor* grad_buffer(Var v);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
        ParamStore::Entry* sink = nullptr;
        bool requires_grad = false;
        bool has_grad = false;
    };

    Var push(Node node);

    std::deque<Node> nodes_;
    std::map<const ParamStore::Entry*, std::size_t> param_nodes_;
};

namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// x + b with b broadcast over the last axis of x.
Var add_bias(Var x, Var b);
Var scale(Var x, double c);
Var shift(Var x, double c);
// s * x for a single-element s.
Var scale_by(Var s, Var x);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var tanh(Var x);
Var sigmoid(Var x);
// Subgradient at 0 is 0.
Var relu(Var x);
Var abs(Var x);
Var square(Var x);
// x^p, x must be positive for non-integer p.
Var power(Var x, double p);

Var softmax(Var x, std::size_t axis);
// Normalizes over the last axis without affine parameters.
Var layer_norm(Var x, double eps = 1e-12);

// Reductions drop the reduced axis (rank-1 inputs reduce to shape [1]).
Var sum(Var x, std::size_t axis);
Var mean(Var x, std::size_t axis);
Var sum_all(Var x);
Var mean_all(Var x);

Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Var x, Shape shape);

// x [B,T,Cin], w [K,Cin,Cout] -> [B,T,Cout]. Left zero padding of
// (K-1)*dilation keeps the time axis length and makes t depend on <= t only.
Var causal_conv1d(Var x, Var w, std::size_t dilation);

// x [M,N] scaled by v[i] along rows or v[j] along columns.
Var scale_rows(Var x, Var v);
Var scale_cols(Var x, Var v);

}  // namespace ops
}  // namespace sthsep
