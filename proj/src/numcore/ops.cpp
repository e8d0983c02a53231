#include "ftbsc/numcore/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace ftbsc::num {

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void same_graph(Var a, Var b, const char* op) {
    if (a.graph != b.graph) throw std::invalid_argument(std::string(op) + ": operands live on different graphs");
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

// Unary elementwise op with derivative expressed through input x and output y.
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    Tensor xs = x;
    Tensor ys = y;
    return a.graph->record(std::move(y), {a.id},
                           [xs = std::move(xs), ys = std::move(ys), dfdx](const Tensor& g, std::span<Tensor* const> in) {
                               Tensor& gx = *in[0];
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xs[i], ys[i]);
                           });
}

}  // namespace

Var add(Var a, Var b) {
    same_graph(a, b, "add");
    same_shape(a.value(), b.value(), "add");
    Tensor y = a.value();
    y.accumulate(b.value());
    return a.graph->record(std::move(y), {a.id, b.id}, [](const Tensor& g, std::span<Tensor* const> in) {
        if (in[0]) in[0]->accumulate(g);
        if (in[1]) in[1]->accumulate(g);
    });
}

Var sub(Var a, Var b) {
    same_graph(a, b, "sub");
    same_shape(a.value(), b.value(), "sub");
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
    return a.graph->record(std::move(y), {a.id, b.id}, [](const Tensor& g, std::span<Tensor* const> in) {
        if (in[0]) in[0]->accumulate(g);
        if (in[1]) {
            for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    same_graph(a, b, "mul");
    same_shape(a.value(), b.value(), "mul");
    Tensor xa = a.value();
    Tensor xb = b.value();
    Tensor y(xa.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
    return a.graph->record(std::move(y), {a.id, b.id},
                           [xa = std::move(xa), xb = std::move(xb)](const Tensor& g, std::span<Tensor* const> in) {
                               if (in[0]) {
                                   for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * xb[i];
                               }
                               if (in[1]) {
                                   for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * xa[i];
                               }
                           });
}

Var scale(Var a, double k) {
    Tensor y = a.value();
    for (auto& v : y.data()) v *= k;
    return a.graph->record(std::move(y), {a.id}, [k](const Tensor& g, std::span<Tensor* const> in) {
        for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += k * g[i];
    });
}

Var add_scalar(Var a, double c) {
    Tensor y = a.value();
    for (auto& v : y.data()) v += c;
    return a.graph->record(std::move(y), {a.id},
                           [](const Tensor& g, std::span<Tensor* const> in) { in[0]->accumulate(g); });
}

Var add_const(Var a, const Tensor& c) {
    same_shape(a.value(), c, "add_const");
    Tensor y = a.value();
    y.accumulate(c);
    return a.graph->record(std::move(y), {a.id},
                           [](const Tensor& g, std::span<Tensor* const> in) { in[0]->accumulate(g); });
}

Var mul_const(Var a, const Tensor& c) {
    same_shape(a.value(), c, "mul_const");
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c[i];
    return a.graph->record(std::move(y), {a.id}, [c](const Tensor& g, std::span<Tensor* const> in) {
        for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * c[i];
    });
}

Var square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var log(Var a) {
    for (double v : a.value().data()) {
        if (!(v > 0.0)) throw std::domain_error("log of non-positive value");
    }
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a) {
    return unary(a, [](double x) { return sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return a.graph->record(Tensor::scalar(total), {a.id}, [](const Tensor& g, std::span<Tensor* const> in) {
        const double gv = g[0];
        for (auto& v : in[0]->data()) v += gv;
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return a.graph->record(Tensor::scalar(total / n), {a.id}, [n](const Tensor& g, std::span<Tensor* const> in) {
        const double gv = g[0] / n;
        for (auto& v : in[0]->data()) v += gv;
    });
}

Var squared_distance(Var a, const Tensor& target) {
    same_shape(a.value(), target, "squared_distance");
    const Tensor& x = a.value();
    Tensor diff(x.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        diff[i] = x[i] - target[i];
        total += diff[i] * diff[i];
    }
    return a.graph->record(Tensor::scalar(total), {a.id}, [diff = std::move(diff)](const Tensor& g, std::span<Tensor* const> in) {
        const double gv = 2.0 * g[0];
        for (std::size_t i = 0; i < diff.size(); ++i) (*in[0])[i] += gv * diff[i];
    });
}

Var reshape(Var a, Shape shape) {
    Tensor y = a.value().reshaped(std::move(shape));
    return a.graph->record(std::move(y), {a.id}, [](const Tensor& g, std::span<Tensor* const> in) {
        auto& dst = in[0]->storage();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
}

Var stack_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("stack_rows: no inputs");
    Graph* graph = parts[0].graph;
    const std::size_t cols = parts[0].value().rank() == 2 ? parts[0].value().dim(1) : 0;
    std::size_t rows = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    ids.reserve(parts.size());
    for (const Var& p : parts) {
        if (p.graph != graph) throw std::invalid_argument("stack_rows: operands live on different graphs");
        const Tensor& v = p.value();
        if (v.rank() != 2 || v.dim(1) != cols) {
            throw ShapeError("stack_rows: expected [n x " + std::to_string(cols) + "], got " + to_string(v.shape()));
        }
        offsets.push_back(rows * cols);
        rows += v.dim(0);
        ids.push_back(p.id);
    }
    Tensor y({rows, cols});
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto src = parts[k].value().data();
        std::copy(src.begin(), src.end(), y.storage().begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
    return graph->record(std::move(y), std::move(ids), [offsets](const Tensor& g, std::span<Tensor* const> in) {
        for (std::size_t k = 0; k < in.size(); ++k) {
            if (!in[k]) continue;
            auto& dst = in[k]->storage();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[offsets[k] + i];
        }
    });
}

Var affine(Var a, Var s, Var o) {
    same_graph(a, s, "affine");
    same_graph(a, o, "affine");
    require_shape(s.value(), {1}, "affine scale");
    require_shape(o.value(), {1}, "affine offset");
    const double sv = s.value()[0];
    const double ov = o.value()[0];
    Tensor x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sv * x[i] + ov;
    return a.graph->record(std::move(y), {a.id, s.id, o.id}, [x = std::move(x), sv](const Tensor& g, std::span<Tensor* const> in) {
        if (in[0]) {
            for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += sv * g[i];
        }
        double gs = 0.0;
        double go = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gs += g[i] * x[i];
            go += g[i];
        }
        if (in[1]) (*in[1])[0] += gs;
        if (in[2]) (*in[2])[0] += go;
    });
}

}  // namespace ftbsc::num
