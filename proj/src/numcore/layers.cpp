#include "ftbsc/numcore/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ftbsc/numcore/ops.hpp"

namespace ftbsc::num {

GruCellParams GruCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GruCellParams p;
    p.w_z = p.w_r = p.w_h = Tensor({hidden_dim, input_dim});
    p.u_z = p.u_r = p.u_h = Tensor({hidden_dim, hidden_dim});
    p.b_z = p.b_r = p.b_h = Tensor({hidden_dim});
    return p;
}

void GruCellParams::validate() const {
    if (w_z.rank() != 2) throw ShapeError("gru: W_z must be rank 2, got " + to_string(w_z.shape()));
    const std::size_t hid = w_z.dim(0);
    const std::size_t in = w_z.dim(1);
    for (const Tensor* w : {&w_z, &w_r, &w_h}) require_shape(*w, {hid, in}, "gru input weights");
    for (const Tensor* u : {&u_z, &u_r, &u_h}) require_shape(*u, {hid, hid}, "gru recurrent weights");
    for (const Tensor* b : {&b_z, &b_r, &b_h}) require_shape(*b, {hid}, "gru bias");
}

GruCellVars bind_parameters(Graph& graph, const std::string& prefix, const GruCellParams& p) {
    p.validate();
    return GruCellVars{graph.parameter(prefix + ".w_z", p.w_z), graph.parameter(prefix + ".w_r", p.w_r),
                       graph.parameter(prefix + ".w_h", p.w_h), graph.parameter(prefix + ".u_z", p.u_z),
                       graph.parameter(prefix + ".u_r", p.u_r), graph.parameter(prefix + ".u_h", p.u_h),
                       graph.parameter(prefix + ".b_z", p.b_z), graph.parameter(prefix + ".b_r", p.b_r),
                       graph.parameter(prefix + ".b_h", p.b_h)};
}

GruCellVars bind_constants(Graph& graph, const GruCellParams& p) {
    p.validate();
    return GruCellVars{graph.constant(p.w_z), graph.constant(p.w_r), graph.constant(p.w_h),
                       graph.constant(p.u_z), graph.constant(p.u_r), graph.constant(p.u_h),
                       graph.constant(p.b_z), graph.constant(p.b_r), graph.constant(p.b_h)};
}

namespace {

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// out[j] += sum_k a[k] * m[k, j] for row-major m [rows x cols]
inline void add_vec_mat(const double* a, const double* m, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t k = 0; k < rows; ++k) {
        const double ak = a[k];
        if (ak == 0.0) continue;
        const double* row = m + k * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += ak * row[j];
    }
}

// m[k, j] += a[k] * b[j]
inline void add_outer(const double* a, const double* b, std::size_t rows, std::size_t cols, double* m) {
    for (std::size_t k = 0; k < rows; ++k) {
        const double ak = a[k];
        if (ak == 0.0) continue;
        double* row = m + k * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += ak * b[j];
    }
}

}  // namespace

Var dense(Var x, Var w, Var b) {
    Graph* graph = x.graph;
    if (w.graph != graph || b.graph != graph) throw std::invalid_argument("dense: operands live on different graphs");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || wv.dim(1) != xv.dim(1) || bv.dim(0) != wv.dim(0)) {
        throw ShapeError("dense: x " + to_string(xv.shape()) + ", W " + to_string(wv.shape()) + ", b " +
                         to_string(bv.shape()) + " are inconsistent (want [batch x in], [out x in], [out])");
    }
    const std::size_t batch = xv.dim(0);
    const std::size_t in = xv.dim(1);
    const std::size_t out = wv.dim(0);
    Tensor y({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
        const double* xr = &xv.data()[r * in];
        for (std::size_t j = 0; j < out; ++j) y(r, j) = bv[j] + dot(&wv.data()[j * in], xr, in);
    }
    const std::size_t xi = x.id, wi = w.id;
    return graph->record(std::move(y), {x.id, w.id, b.id},
                         [graph, xi, wi, batch, in, out](const Tensor& g, std::span<Tensor* const> grads) {
                             const Tensor& xv = graph->value(xi);
                             const Tensor& wv = graph->value(wi);
                             for (std::size_t r = 0; r < batch; ++r) {
                                 const double* gr = &g.data()[r * out];
                                 if (grads[0]) add_vec_mat(gr, wv.data().data(), out, in, &grads[0]->data()[r * in]);
                                 if (grads[1]) add_outer(gr, &xv.data()[r * in], out, in, grads[1]->data().data());
                                 if (grads[2]) {
                                     for (std::size_t j = 0; j < out; ++j) (*grads[2])[j] += gr[j];
                                 }
                             }
                         });
}

Var gru_cell(Var x, Var h, const GruCellVars& p) {
    Graph* graph = x.graph;
    for (Var v : {h, p.w_z, p.w_r, p.w_h, p.u_z, p.u_r, p.u_h, p.b_z, p.b_r, p.b_h}) {
        if (v.graph != graph) throw std::invalid_argument("gru_cell: operands live on different graphs");
    }
    const Tensor& xv = x.value();
    const Tensor& hv = h.value();
    const Tensor& wz = p.w_z.value();
    if (wz.rank() != 2) throw ShapeError("gru_cell: W_z must be rank 2");
    const std::size_t hid = wz.dim(0);
    const std::size_t in = wz.dim(1);
    for (Var w : {p.w_r, p.w_h}) require_shape(w.value(), {hid, in}, "gru_cell input weights");
    for (Var u : {p.u_z, p.u_r, p.u_h}) require_shape(u.value(), {hid, hid}, "gru_cell recurrent weights");
    for (Var b : {p.b_z, p.b_r, p.b_h}) require_shape(b.value(), {hid}, "gru_cell bias");
    if (xv.rank() != 2 || xv.dim(1) != in) {
        throw ShapeError("gru_cell: x must be [batch x " + std::to_string(in) + "], got " + to_string(xv.shape()));
    }
    const std::size_t batch = xv.dim(0);
    require_shape(hv, {batch, hid}, "gru_cell hidden state");

    const double* Wz = wz.data().data();
    const double* Wr = p.w_r.value().data().data();
    const double* Wh = p.w_h.value().data().data();
    const double* Uz = p.u_z.value().data().data();
    const double* Ur = p.u_r.value().data().data();
    const double* Uh = p.u_h.value().data().data();
    const double* bz = p.b_z.value().data().data();
    const double* br = p.b_r.value().data().data();
    const double* bh = p.b_h.value().data().data();

    Tensor z({batch, hid}), r({batch, hid}), c({batch, hid}), rh({batch, hid}), out({batch, hid});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = &xv.data()[b * in];
        const double* hb = &hv.data()[b * hid];
        for (std::size_t j = 0; j < hid; ++j) {
            z(b, j) = sigmoid(bz[j] + dot(Wz + j * in, xb, in) + dot(Uz + j * hid, hb, hid));
            r(b, j) = sigmoid(br[j] + dot(Wr + j * in, xb, in) + dot(Ur + j * hid, hb, hid));
            rh(b, j) = r(b, j) * hb[j];
        }
        const double* rhb = &rh.data()[b * hid];
        for (std::size_t j = 0; j < hid; ++j) {
            c(b, j) = std::tanh(bh[j] + dot(Wh + j * in, xb, in) + dot(Uh + j * hid, rhb, hid));
            out(b, j) = (1.0 - z(b, j)) * hb[j] + z(b, j) * c(b, j);
        }
    }

    std::vector<std::size_t> inputs{x.id,     h.id,     p.w_z.id, p.w_r.id, p.w_h.id, p.u_z.id,
                                    p.u_r.id, p.u_h.id, p.b_z.id, p.b_r.id, p.b_h.id};
    auto ids = inputs;
    return graph->record(
        std::move(out), std::move(inputs),
        [graph, ids, batch, in, hid, z = std::move(z), r = std::move(r), c = std::move(c), rh = std::move(rh)](
            const Tensor& g, std::span<Tensor* const> grads) {
            const double* xv = graph->value(ids[0]).data().data();
            const double* hv = graph->value(ids[1]).data().data();
            const double* Wz = graph->value(ids[2]).data().data();
            const double* Wr = graph->value(ids[3]).data().data();
            const double* Wh = graph->value(ids[4]).data().data();
            const double* Uz = graph->value(ids[5]).data().data();
            const double* Ur = graph->value(ids[6]).data().data();
            const double* Uh = graph->value(ids[7]).data().data();
            auto ptr = [&](std::size_t k) { return grads[k] ? grads[k]->data().data() : nullptr; };

            std::vector<double> dz(hid), dr(hid), dc(hid), drh(hid);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = xv + b * in;
                const double* hb = hv + b * hid;
                const double* gb = &g.data()[b * hid];
                const double* zb = &z.data()[b * hid];
                const double* rb = &r.data()[b * hid];
                const double* cb = &c.data()[b * hid];
                const double* rhb = &rh.data()[b * hid];
                for (std::size_t j = 0; j < hid; ++j) {
                    dz[j] = gb[j] * (cb[j] - hb[j]) * zb[j] * (1.0 - zb[j]);
                    dc[j] = gb[j] * zb[j] * (1.0 - cb[j] * cb[j]);
                }
                std::fill(drh.begin(), drh.end(), 0.0);
                add_vec_mat(dc.data(), Uh, hid, hid, drh.data());
                for (std::size_t k = 0; k < hid; ++k) dr[k] = drh[k] * hb[k] * rb[k] * (1.0 - rb[k]);

                if (double* dh = ptr(1)) {
                    dh += b * hid;
                    for (std::size_t j = 0; j < hid; ++j) dh[j] += gb[j] * (1.0 - zb[j]) + drh[j] * rb[j];
                    add_vec_mat(dz.data(), Uz, hid, hid, dh);
                    add_vec_mat(dr.data(), Ur, hid, hid, dh);
                }
                if (double* dx = ptr(0)) {
                    dx += b * in;
                    add_vec_mat(dz.data(), Wz, hid, in, dx);
                    add_vec_mat(dr.data(), Wr, hid, in, dx);
                    add_vec_mat(dc.data(), Wh, hid, in, dx);
                }
                if (double* d = ptr(2)) add_outer(dz.data(), xb, hid, in, d);
                if (double* d = ptr(3)) add_outer(dr.data(), xb, hid, in, d);
                if (double* d = ptr(4)) add_outer(dc.data(), xb, hid, in, d);
                if (double* d = ptr(5)) add_outer(dz.data(), hb, hid, hid, d);
                if (double* d = ptr(6)) add_outer(dr.data(), hb, hid, hid, d);
                if (double* d = ptr(7)) add_outer(dc.data(), rhb, hid, hid, d);
                if (double* d = ptr(8)) {
                    for (std::size_t j = 0; j < hid; ++j) d[j] += dz[j];
                }
                if (double* d = ptr(9)) {
                    for (std::size_t j = 0; j < hid; ++j) d[j] += dr[j];
                }
                if (double* d = ptr(10)) {
                    for (std::size_t j = 0; j < hid; ++j) d[j] += dc[j];
                }
            }
        });
}

std::vector<Var> gru_sequence(std::span<const Var> xs, Var h0, const GruCellVars& p) {
    if (xs.empty()) throw std::invalid_argument("gru_sequence: sequence length must be at least 1");
    std::vector<Var> hs;
    hs.reserve(xs.size());
    Var h = h0;
    for (const Var& x : xs) {
        h = gru_cell(x, h, p);
        hs.push_back(h);
    }
    return hs;
}

std::vector<Var> gru_sequence(Graph& graph, const Tensor& xs, Var h0, const GruCellVars& p) {
    if (xs.rank() != 3) throw ShapeError("gru_sequence: expected [T x batch x in], got " + to_string(xs.shape()));
    const std::size_t steps = xs.dim(0);
    const std::size_t batch = xs.dim(1);
    const std::size_t in = xs.dim(2);
    std::vector<Var> inputs;
    inputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        auto first = xs.storage().begin() + static_cast<std::ptrdiff_t>(t * batch * in);
        inputs.push_back(graph.constant(Tensor({batch, in}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(batch * in)))));
    }
    return gru_sequence(inputs, h0, p);
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("softmax of empty vector");
    const double peak = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - peak);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

namespace {

// alpha [T x batch] for hs_t [batch x hid]
Tensor attention_alpha(std::span<const Tensor* const> hs, const Tensor& w, double b) {
    const std::size_t steps = hs.size();
    const std::size_t batch = hs[0]->dim(0);
    const std::size_t hid = hs[0]->dim(1);
    Tensor alpha({steps, batch});
    std::vector<double> scores(steps);
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t t = 0; t < steps; ++t) scores[t] = dot(&hs[t]->data()[r * hid], w.data().data(), hid) + b;
        auto a = softmax(scores);
        for (std::size_t t = 0; t < steps; ++t) alpha(t, r) = a[t];
    }
    return alpha;
}

void check_attention_shapes(std::span<const Tensor* const> hs, const Tensor& w) {
    if (hs.empty()) throw std::invalid_argument("attention_pool: sequence length must be at least 1");
    const Tensor& first = *hs[0];
    if (first.rank() != 2) throw ShapeError("attention_pool: hs_t must be [batch x hid], got " + to_string(first.shape()));
    for (const Tensor* h : hs) require_shape(*h, first.shape(), "attention_pool hs_t");
    require_shape(w, {first.dim(1)}, "attention_pool weight");
}

}  // namespace

Tensor attention_weights(std::span<const Tensor> hs, const Tensor& w, double b) {
    std::vector<const Tensor*> ptrs;
    for (const auto& h : hs) ptrs.push_back(&h);
    check_attention_shapes(ptrs, w);
    return attention_alpha(ptrs, w, b);
}

Var attention_pool(std::span<const Var> hs, Var w, Var b) {
    if (hs.empty()) throw std::invalid_argument("attention_pool: sequence length must be at least 1");
    Graph* graph = w.graph;
    std::vector<const Tensor*> values;
    std::vector<std::size_t> inputs;
    for (const Var& h : hs) {
        if (h.graph != graph) throw std::invalid_argument("attention_pool: operands live on different graphs");
        values.push_back(&h.value());
        inputs.push_back(h.id);
    }
    if (b.graph != graph) throw std::invalid_argument("attention_pool: operands live on different graphs");
    check_attention_shapes(values, w.value());
    require_shape(b.value(), {1}, "attention_pool bias");

    const std::size_t steps = hs.size();
    const std::size_t batch = values[0]->dim(0);
    const std::size_t hid = values[0]->dim(1);
    Tensor alpha = attention_alpha(values, w.value(), b.value()[0]);
    Tensor pooled({batch, hid});
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < batch; ++r) {
            const double a = alpha(t, r);
            const double* src = &values[t]->data()[r * hid];
            for (std::size_t j = 0; j < hid; ++j) pooled(r, j) += a * src[j];
        }
    }
    inputs.push_back(w.id);
    inputs.push_back(b.id);
    auto ids = inputs;
    return graph->record(
        std::move(pooled), std::move(inputs),
        [graph, ids, steps, batch, hid, alpha = std::move(alpha)](const Tensor& g, std::span<Tensor* const> grads) {
            const double* wv = graph->value(ids[steps]).data().data();
            Tensor* dw = grads[steps];
            Tensor* db = grads[steps + 1];
            std::vector<double> dscore(steps);
            for (std::size_t r = 0; r < batch; ++r) {
                const double* gr = &g.data()[r * hid];
                // d out / d alpha_t = hs_t . g ; softmax backward
                double weighted = 0.0;
                for (std::size_t t = 0; t < steps; ++t) {
                    const double* ht = &graph->value(ids[t]).data()[r * hid];
                    dscore[t] = dot(ht, gr, hid);
                    weighted += alpha(t, r) * dscore[t];
                }
                for (std::size_t t = 0; t < steps; ++t) {
                    const double a = alpha(t, r);
                    const double ds = a * (dscore[t] - weighted);
                    const double* ht = &graph->value(ids[t]).data()[r * hid];
                    if (Tensor* dh = grads[t]) {
                        double* d = &dh->data()[r * hid];
                        for (std::size_t j = 0; j < hid; ++j) d[j] += a * gr[j] + ds * wv[j];
                    }
                    if (dw) {
                        for (std::size_t j = 0; j < hid; ++j) (*dw)[j] += ds * ht[j];
                    }
                    if (db) (*db)[0] += ds;
                }
            }
        });
}

}  // namespace ftbsc::num
