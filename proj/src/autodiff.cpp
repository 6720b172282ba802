#include "sthsep/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "sthsep/errors.hpp"

namespace sthsep {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::variable(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::param(ParamStore& store, const std::string& name) {
    auto& entry = store.at(name);
    if (auto it = param_nodes_.find(&entry); it != param_nodes_.end()) return Var(this, it->second);
    Node n;
    n.value = entry.value;
    n.requires_grad = !entry.frozen;
    n.sink = n.requires_grad ? &entry : nullptr;
    Var v = push(std::move(n));
    param_nodes_[&entry] = v.id();
    return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : inputs) n.requires_grad = n.requires_grad || v.requires_grad();
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

void Tape::backward(Var root) {
    if (root.value().size() != 1)
        throw ShapeError("backward: root must be a single value, got " + shape_str(root.shape()));
    backward(root, Tensor(root.shape(), 1.0));
}

void Tape::backward(Var root, const Tensor& seed) {
    if (seed.shape() != root.shape())
        throw ShapeError("backward: seed " + shape_str(seed.shape()) + " vs root " + shape_str(root.shape()));
    accumulate(root, seed);
    for (std::size_t id = root.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.has_grad) continue;
        if (n.backward) n.backward(*this, n.grad);
        if (n.sink) {
            auto g = n.sink->grad.data();
            auto src = n.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
        }
    }
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_[v.id()];
    return n.has_grad ? n.grad : Tensor(n.value.shape());
}

Tensor* Tape::grad_buffer(Var v) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
    }
    return &n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
    Tensor* buf = grad_buffer(v);
    if (!buf) return;
    if (buf->shape() != g.shape())
        throw ShapeError("accumulate: gradient " + shape_str(g.shape()) + " vs value " + shape_str(buf->shape()));
    auto d = buf->data();
    auto s = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

namespace ops {
namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_same(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands recorded on different tapes");
    if (a.shape() != b.shape()) mismatch(op, a.shape(), b.shape());
}

void require_rank(const char* op, Var x, std::size_t rank) {
    if (x.shape().size() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
}

struct AxisSplit {
    std::size_t outer, len, inner;
};

AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
    if (axis >= s.size())
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != axis) out.push_back(s[i]);
    if (out.empty()) out.push_back(1);
    return out;
}

template <class F, class D>
Var unary(Var x, F f, D df) {
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
    Tape& t = x.tape();
    return t.record(std::move(y), {x}, [x, df](Tape& tp, const Tensor& g) {
        Tensor* gx = tp.grad_buffer(x);
        if (!gx) return;
        const Tensor& xv = x.value();
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * df(xv[i]);
    });
}

}  // namespace

Var add(Var a, Var b) {
    require_same("add", a, b);
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
    return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    require_same("sub", a, b);
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
    return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        if (Tensor* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
}

Var mul(Var a, Var b) {
    require_same("mul", a, b);
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
    return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (Tensor* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
        if (Tensor* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
    });
}

Var add_bias(Var x, Var b) {
    const Shape& xs = x.shape();
    if (xs.empty() || b.value().size() != xs.back()) mismatch("add_bias", xs, b.shape());
    const std::size_t n = xs.back();
    Tensor y = x.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i % n];
    return x.tape().record(std::move(y), {x, b}, [x, b, n](Tape& t, const Tensor& g) {
        t.accumulate(x, g);
        if (Tensor* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % n] += g[i];
    });
}

Var scale(Var x, double c) {
    return unary(x, [c](double v) { return c * v; }, [c](double) { return c; });
}

Var shift(Var x, double c) {
    return unary(x, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

Var scale_by(Var s, Var x) {
    if (s.value().size() != 1) mismatch("scale_by", s.shape(), x.shape());
    const double c = s.value()[0];
    Tensor y = x.value();
    for (auto& v : y.data()) v *= c;
    return x.tape().record(std::move(y), {s, x}, [s, x](Tape& t, const Tensor& g) {
        const double c = s.value()[0];
        if (Tensor* gx = t.grad_buffer(x))
            for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += c * g[i];
        if (Tensor* gs = t.grad_buffer(s)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
            (*gs)[0] += acc;
        }
    });
}

Var matmul(Var a, Var b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) mismatch("matmul", a.shape(), b.shape());
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor y({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = &bv.data()[p * n];
            double* yrow = &y.data()[i * n];
            for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
        }
    return a.tape().record(std::move(y), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        if (Tensor* ga = t.grad_buffer(a)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                    (*ga)[i * k + p] += acc;
                }
        }
        if (Tensor* gb = t.grad_buffer(b)) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = av[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * g[i * n + j];
                }
        }
    });
}

Var transpose(Var a) {
    require_rank("transpose", a, 2);
    return a.tape().record(a.value().transposed(), {a}, [a](Tape& t, const Tensor& g) {
        t.accumulate(a, g.transposed());
    });
}

Var tanh(Var x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double v) {
                     const double th = std::tanh(v);
                     return 1.0 - th * th;
                 });
}

namespace {
double sigmoid_scalar(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var x) {
    return unary(x, sigmoid_scalar, [](double v) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 - s);
    });
}

Var relu(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var abs(Var x) {
    return unary(x, [](double v) { return std::abs(v); },
                 [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var square(Var x) {
    return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var power(Var x, double p) {
    return unary(x, [p](double v) { return std::pow(v, p); }, [p](double v) { return p * std::pow(v, p - 1.0); });
}

Var softmax(Var x, std::size_t axis) {
    const auto [outer, len, inner] = split_axis("softmax", x.shape(), axis);
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            double mx = xv[base];
            for (std::size_t a = 1; a < len; ++a) mx = std::max(mx, xv[base + a * inner]);
            double s = 0.0;
            for (std::size_t a = 0; a < len; ++a) {
                const double e = std::exp(xv[base + a * inner] - mx);
                y[base + a * inner] = e;
                s += e;
            }
            for (std::size_t a = 0; a < len; ++a) y[base + a * inner] /= s;
        }
    Tensor yv = y;
    return x.tape().record(std::move(y), {x},
                           [x, yv = std::move(yv), outer = outer, len = len, inner = inner](Tape& t, const Tensor& g) {
                               Tensor* gx = t.grad_buffer(x);
                               if (!gx) return;
                               for (std::size_t o = 0; o < outer; ++o)
                                   for (std::size_t i = 0; i < inner; ++i) {
                                       const std::size_t base = o * len * inner + i;
                                       double dot = 0.0;
                                       for (std::size_t a = 0; a < len; ++a)
                                           dot += yv[base + a * inner] * g[base + a * inner];
                                       for (std::size_t a = 0; a < len; ++a)
                                           (*gx)[base + a * inner] += yv[base + a * inner] * (g[base + a * inner] - dot);
                                   }
                           });
}

Var layer_norm(Var x, double eps) {
    const Shape& s = x.shape();
    if (s.empty()) throw ShapeError("layer_norm: empty shape");
    const std::size_t n = s.back();
    const std::size_t rows = x.value().size() / n;
    const Tensor& xv = x.value();
    Tensor y(s);
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = &xv.data()[r * n];
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xr[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) y[r * n + j] = (xr[j] - mu) * inv_std[r];
    }
    Tensor yv = y;
    return x.tape().record(std::move(y), {x},
                           [x, n, rows, inv_std = std::move(inv_std), yv = std::move(yv)](Tape& t, const Tensor& g) {
                               Tensor* gx = t.grad_buffer(x);
                               if (!gx) return;
                               for (std::size_t r = 0; r < rows; ++r) {
                                   double mg = 0.0, mgy = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       mg += g[r * n + j];
                                       mgy += g[r * n + j] * yv[r * n + j];
                                   }
                                   mg /= static_cast<double>(n);
                                   mgy /= static_cast<double>(n);
                                   for (std::size_t j = 0; j < n; ++j)
                                       (*gx)[r * n + j] += inv_std[r] * (g[r * n + j] - mg - yv[r * n + j] * mgy);
                               }
                           });
}

Var sum(Var x, std::size_t axis) {
    const auto [outer, len, inner] = split_axis("sum", x.shape(), axis);
    const Tensor& xv = x.value();
    Tensor y(drop_axis(x.shape(), axis));
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < len; ++a)
            for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += xv[(o * len + a) * inner + i];
    return x.tape().record(std::move(y), {x}, [x, outer = outer, len = len, inner = inner](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_buffer(x);
        if (!gx) return;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < len; ++a)
                for (std::size_t i = 0; i < inner; ++i) (*gx)[(o * len + a) * inner + i] += g[o * inner + i];
    });
}

Var mean(Var x, std::size_t axis) {
    const std::size_t len = split_axis("mean", x.shape(), axis).len;
    return scale(sum(x, axis), 1.0 / static_cast<double>(len));
}

Var sum_all(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_buffer(x);
        if (!gx) return;
        for (auto& v : gx->data()) v += g[0];
    });
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size())); }

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape out_shape = parts[0].shape();
    split_axis("concat", out_shape, axis);
    std::size_t total = 0;
    for (const Var& p : parts) {
        Shape s = p.shape();
        if (s.size() != out_shape.size()) mismatch("concat", out_shape, s);
        total += s[axis];
        s[axis] = out_shape[axis];
        if (s != out_shape) mismatch("concat", out_shape, p.shape());
    }
    out_shape[axis] = total;
    const auto [outer, len_total, inner] = split_axis("concat", out_shape, axis);
    Tensor y(out_shape);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Var& p : parts) {
        offsets.push_back(off);
        const std::size_t len = p.shape()[axis];
        const Tensor& pv = p.value();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < len; ++a)
                for (std::size_t i = 0; i < inner; ++i)
                    y[(o * len_total + off + a) * inner + i] = pv[(o * len + a) * inner + i];
        off += len;
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].tape().record(
        std::move(y), parts,
        [inputs, offsets, axis, outer = outer, len_total = len_total, inner = inner](Tape& t, const Tensor& g) {
            for (std::size_t p = 0; p < inputs.size(); ++p) {
                Tensor* gp = t.grad_buffer(inputs[p]);
                if (!gp) continue;
                const std::size_t len = inputs[p].shape()[axis];
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t a = 0; a < len; ++a)
                        for (std::size_t i = 0; i < inner; ++i)
                            (*gp)[(o * len + a) * inner + i] += g[(o * len_total + offsets[p] + a) * inner + i];
            }
        });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
    const auto [outer, len, inner] = split_axis("slice", x.shape(), axis);
    if (start + length > len || length == 0)
        throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                         ") invalid for " + shape_str(x.shape()) + " axis " + std::to_string(axis));
    Shape s = x.shape();
    s[axis] = length;
    Tensor y(s);
    const Tensor& xv = x.value();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t a = 0; a < length; ++a)
            for (std::size_t i = 0; i < inner; ++i)
                y[(o * length + a) * inner + i] = xv[(o * len + start + a) * inner + i];
    return x.tape().record(std::move(y), {x},
                           [x, start, length, outer = outer, len = len, inner = inner](Tape& t, const Tensor& g) {
                               Tensor* gx = t.grad_buffer(x);
                               if (!gx) return;
                               for (std::size_t o = 0; o < outer; ++o)
                                   for (std::size_t a = 0; a < length; ++a)
                                       for (std::size_t i = 0; i < inner; ++i)
                                           (*gx)[(o * len + start + a) * inner + i] += g[(o * length + a) * inner + i];
                           });
}

Var reshape(Var x, Shape shape) {
    Tensor y = x.value().reshaped(shape);
    return x.tape().record(std::move(y), {x}, [x](Tape& t, const Tensor& g) {
        t.accumulate(x, g.reshaped(x.shape()));
    });
}

Var causal_conv1d(Var x, Var w, std::size_t dilation) {
    require_rank("causal_conv1d", x, 3);
    require_rank("causal_conv1d", w, 3);
    const std::size_t B = x.shape()[0], T = x.shape()[1], Ci = x.shape()[2];
    const std::size_t K = w.shape()[0], Co = w.shape()[2];
    if (w.shape()[1] != Ci) mismatch("causal_conv1d", x.shape(), w.shape());
    if (dilation == 0) throw ConfigError("causal_conv1d: dilation must be >= 1");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    Tensor y({B, T, Co});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const std::size_t back = (K - 1 - k) * dilation;
                if (back > t) continue;
                const double* xr = &xv.data()[(b * T + t - back) * Ci];
                double* yr = &y.data()[(b * T + t) * Co];
                for (std::size_t ci = 0; ci < Ci; ++ci) {
                    const double xval = xr[ci];
                    const double* wr = &wv.data()[(k * Ci + ci) * Co];
                    for (std::size_t co = 0; co < Co; ++co) yr[co] += xval * wr[co];
                }
            }
    return x.tape().record(std::move(y), {x, w}, [x, w, B, T, Ci, K, Co, dilation](Tape& tp, const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& wv = w.value();
        Tensor* gx = tp.grad_buffer(x);
        Tensor* gw = tp.grad_buffer(w);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < K; ++k) {
                    const std::size_t back = (K - 1 - k) * dilation;
                    if (back > t) continue;
                    const std::size_t xrow = (b * T + t - back) * Ci;
                    const double* gr = &g.data()[(b * T + t) * Co];
                    for (std::size_t ci = 0; ci < Ci; ++ci) {
                        const std::size_t wrow = (k * Ci + ci) * Co;
                        if (gx) {
                            double acc = 0.0;
                            for (std::size_t co = 0; co < Co; ++co) acc += gr[co] * wv[wrow + co];
                            (*gx)[xrow + ci] += acc;
                        }
                        if (gw) {
                            const double xval = xv[xrow + ci];
                            for (std::size_t co = 0; co < Co; ++co) (*gw)[wrow + co] += xval * gr[co];
                        }
                    }
                }
    });
}

Var scale_rows(Var x, Var v) {
    require_rank("scale_rows", x, 2);
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    if (v.value().size() != m) mismatch("scale_rows", x.shape(), v.shape());
    Tensor y = x.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= v.value()[i];
    return x.tape().record(std::move(y), {x, v}, [x, v, m, n](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_buffer(x))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += g[i * n + j] * v.value()[i];
        if (Tensor* gv = t.grad_buffer(v))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gv)[i] += g[i * n + j] * x.value()[i * n + j];
    });
}

Var scale_cols(Var x, Var v) {
    require_rank("scale_cols", x, 2);
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    if (v.value().size() != n) mismatch("scale_cols", x.shape(), v.shape());
    Tensor y = x.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= v.value()[j];
    return x.tape().record(std::move(y), {x, v}, [x, v, m, n](Tape& t, const Tensor& g) {
        if (Tensor* gx = t.grad_buffer(x))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += g[i * n + j] * v.value()[j];
        if (Tensor* gv = t.grad_buffer(v))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*gv)[j] += g[i * n + j] * x.value()[i * n + j];
    });
}

}  // namespace ops
}  // namespace sthsep
