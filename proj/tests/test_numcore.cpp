#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ftbsc/numcore/gradcheck.hpp"
#include "ftbsc/numcore/graph.hpp"
#include "ftbsc/numcore/layers.hpp"
#include "ftbsc/numcore/ops.hpp"
#include "ftbsc/numcore/parameters.hpp"

using namespace ftbsc::num;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

GruCellParams random_gru(std::size_t in, std::size_t hid, std::mt19937_64& rng) {
    GruCellParams p;
    p.w_z = random_tensor({hid, in}, rng);
    p.w_r = random_tensor({hid, in}, rng);
    p.w_h = random_tensor({hid, in}, rng);
    p.u_z = random_tensor({hid, hid}, rng);
    p.u_r = random_tensor({hid, hid}, rng);
    p.u_h = random_tensor({hid, hid}, rng);
    p.b_z = random_tensor({hid}, rng);
    p.b_r = random_tensor({hid}, rng);
    p.b_h = random_tensor({hid}, rng);
    return p;
}

ParameterSet gru_param_set(const GruCellParams& p) {
    ParameterSet s;
    s.insert("g.w_z", p.w_z);
    s.insert("g.w_r", p.w_r);
    s.insert("g.w_h", p.w_h);
    s.insert("g.u_z", p.u_z);
    s.insert("g.u_r", p.u_r);
    s.insert("g.u_h", p.u_h);
    s.insert("g.b_z", p.b_z);
    s.insert("g.b_r", p.b_r);
    s.insert("g.b_h", p.b_h);
    return s;
}

GruCellParams from_set(const ParameterSet& s) {
    return {s.at("g.w_z"), s.at("g.w_r"), s.at("g.w_h"), s.at("g.u_z"), s.at("g.u_r"),
            s.at("g.u_h"), s.at("g.b_z"), s.at("g.b_r"), s.at("g.b_h")};
}

// Straight-line scalar GRU for a single batch row.
std::vector<double> scalar_gru(const std::vector<double>& x, const std::vector<double>& h, const GruCellParams& p) {
    const std::size_t hid = h.size();
    const std::size_t in = x.size();
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> z(hid), r(hid), out(hid);
    for (std::size_t i = 0; i < hid; ++i) {
        double az = p.b_z[i], ar = p.b_r[i];
        for (std::size_t j = 0; j < in; ++j) {
            az += p.w_z(i, j) * x[j];
            ar += p.w_r(i, j) * x[j];
        }
        for (std::size_t j = 0; j < hid; ++j) {
            az += p.u_z(i, j) * h[j];
            ar += p.u_r(i, j) * h[j];
        }
        z[i] = sig(az);
        r[i] = sig(ar);
    }
    for (std::size_t i = 0; i < hid; ++i) {
        double ah = p.b_h[i];
        for (std::size_t j = 0; j < in; ++j) ah += p.w_h(i, j) * x[j];
        for (std::size_t j = 0; j < hid; ++j) ah += p.u_h(i, j) * (r[j] * h[j]);
        out[i] = (1.0 - z[i]) * h[i] + z[i] * std::tanh(ah);
    }
    return out;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
    EXPECT_THROW(Tensor(Shape{}), ShapeError);
    EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_NO_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
}

TEST(Graph, RejectsNonFiniteValues) {
    Graph g;
    EXPECT_THROW(g.constant(Tensor::scalar(std::nan(""))), std::domain_error);
    const Var a = g.parameter("a", Tensor::scalar(-1.0));
    EXPECT_THROW(log(a), std::domain_error);
}

TEST(Dense, Examples) {
    Graph g;
    auto run = [&](Tensor x, Tensor w, Tensor b) {
        return dense(g.constant(std::move(x)), g.constant(std::move(w)), g.constant(std::move(b))).value();
    };
    EXPECT_EQ(run(Tensor({1, 2}, {1, 2}), Tensor({2, 2}), Tensor({2}, {3, 4})), Tensor({1, 2}, {3, 4}));
    EXPECT_EQ(run(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2})),
              Tensor({2, 2}, {1, 0, 0, 1}));
    EXPECT_EQ(run(Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {1, 1, 2, 0}), Tensor({2}, {0.5, -0.5})),
              Tensor({1, 2}, {3.5, 1.5}));
}

TEST(Dense, ShapeMismatchIsDiagnosed) {
    Graph g;
    const Var x = g.constant(Tensor({1, 3}));
    const Var w = g.constant(Tensor({2, 2}));
    const Var b = g.constant(Tensor({2}));
    try {
        dense(x, w, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("[1x3]"), std::string::npos) << e.what();
    }
}

TEST(Gru, ZeroParamsClosedForm) {
    Graph g;
    const auto p = bind_constants(g, GruCellParams::zeros(2, 1));
    const Var x = g.constant(Tensor({1, 2}, {0.7, -3.0}));
    EXPECT_DOUBLE_EQ(gru_cell(x, g.constant(Tensor({1, 1}, 1.0)), p).value()[0], 0.5);
    EXPECT_DOUBLE_EQ(gru_cell(x, g.constant(Tensor({1, 1}, 0.0)), p).value()[0], 0.0);

    const auto hs = gru_sequence(g, Tensor({3, 1, 2}, 0.3), g.constant(Tensor({1, 1}, 1.0)), p);
    ASSERT_EQ(hs.size(), 3u);
    EXPECT_DOUBLE_EQ(hs[0].value()[0], 0.5);
    EXPECT_DOUBLE_EQ(hs[1].value()[0], 0.25);
    EXPECT_DOUBLE_EQ(hs[2].value()[0], 0.125);
}

TEST(Gru, MatchesScalarOracleSeed7) {
    std::mt19937_64 rng(7);
    const auto params = random_gru(2, 3, rng);
    const Tensor x = random_tensor({2, 2}, rng);
    const Tensor h = random_tensor({2, 3}, rng);
    Graph g;
    const Var out = gru_cell(g.constant(x), g.constant(h), bind_constants(g, params));
    for (std::size_t b = 0; b < 2; ++b) {
        const auto expect = scalar_gru({x(b, 0), x(b, 1)}, {h(b, 0), h(b, 1), h(b, 2)}, params);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out.value()(b, i), expect[i], 1e-12);
    }
}

TEST(Gru, SequenceEqualsChainedCells) {
    std::mt19937_64 rng(11);
    const auto params = random_gru(3, 4, rng);
    const Tensor xs = random_tensor({5, 2, 3}, rng);
    const Tensor h0 = random_tensor({2, 4}, rng);
    Graph g;
    const auto p = bind_constants(g, params);
    const auto seq = gru_sequence(g, xs, g.constant(h0), p);

    Graph g2;
    const auto p2 = bind_constants(g2, params);
    Var h = g2.constant(h0);
    for (std::size_t t = 0; t < 5; ++t) {
        Tensor xt({2, 3});
        for (std::size_t i = 0; i < 6; ++i) xt[i] = xs[t * 6 + i];
        h = gru_cell(g2.constant(xt), h, p2);
        EXPECT_EQ(h.value(), seq[t].value()) << "step " << t;
    }
    EXPECT_THROW(gru_sequence(std::span<const Var>{}, g.constant(h0), p), std::invalid_argument);
}

TEST(Gru, HiddenStaysBounded) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        auto params = random_gru(2, 5, rng);
        for (auto* t : {&params.w_z, &params.w_h, &params.u_h}) {
            for (auto& v : t->data()) v *= 4.0;
        }
        Graph g;
        const auto hs = gru_sequence(g, random_tensor({40, 3, 2}, rng, -5, 5), g.constant(random_tensor({3, 5}, rng)),
                                     bind_constants(g, params));
        for (const auto& h : hs) {
            for (double v : h.value().data()) {
                EXPECT_LE(std::abs(v), 1.0);
            }
        }
    }
}

TEST(Attention, HandSoftmax) {
    Graph g;
    const Var h1 = g.constant(Tensor({1, 2}, {1.0, 0.0}));
    const Var h2 = g.constant(Tensor({1, 2}, {0.0, 1.0}));
    // scores: h1.w = 0, h2.w = ln 3
    const Var w = g.constant(Tensor({2}, {0.0, std::log(3.0)}));
    const Var b = g.constant(Tensor::scalar(0.0));
    const std::vector<Var> hs{h1, h2};
    const Var out = attention_pool(hs, w, b);
    EXPECT_NEAR(out.value()[0], 0.25, 1e-15);
    EXPECT_NEAR(out.value()[1], 0.75, 1e-15);

    const std::vector<Tensor> raw{h1.value(), h2.value()};
    const Tensor alpha = attention_weights(raw, w.value(), 0.0);
    EXPECT_NEAR(alpha[0], 0.25, 1e-15);
    EXPECT_NEAR(alpha[1], 0.75, 1e-15);
}

TEST(Attention, EqualStatesAndSingleStep) {
    std::mt19937_64 rng(5);
    Graph g;
    const Tensor v = random_tensor({2, 3}, rng);
    const Var w = g.constant(random_tensor({3}, rng, -10, 10));
    const Var b = g.constant(Tensor::scalar(0.3));
    const std::vector<Var> same{g.constant(v), g.constant(v), g.constant(v)};
    const Tensor out = attention_pool(same, w, b).value();
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(out[i], v[i], 1e-15);

    const std::vector<Var> one{g.constant(v)};
    EXPECT_EQ(attention_pool(one, w, b).value(), v);
    const std::vector<Tensor> raw{v};
    const Tensor alpha = attention_weights(raw, w.value(), 0.3);
    EXPECT_EQ(alpha[0], 1.0);
}

TEST(Attention, WeightsFormDistribution) {
    std::mt19937_64 rng(9);
    std::vector<Tensor> hs;
    for (int t = 0; t < 30; ++t) hs.push_back(random_tensor({4, 3}, rng, -50, 50));
    const Tensor alpha = attention_weights(hs, random_tensor({3}, rng), 0.1);
    for (std::size_t b = 0; b < 4; ++b) {
        double total = 0.0;
        for (std::size_t t = 0; t < 30; ++t) {
            const double a = alpha(t, b);
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
            total += a;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Backward, ConstantLossGivesZeroGradients) {
    Graph g;
    g.parameter("a", Tensor({3}, 2.0));
    const Var c = g.constant(Tensor::scalar(4.0));
    const auto grads = g.backward(c);
    EXPECT_EQ(grads.at("a"), Tensor({3}, 0.0));
}

TEST(Backward, QuadraticClosedForm) {
    Graph g;
    const Tensor theta({4}, {0.5, -1.0, 2.0, 3.0});
    const Var a = g.parameter("theta", theta);
    const auto grads = g.backward(sum(square(a)));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(grads.at("theta")[i], 2.0 * theta[i]);
}

TEST(Backward, RejectsNonScalarLoss) {
    Graph g;
    const Var a = g.parameter("a", Tensor({3}, 1.0));
    EXPECT_THROW(g.backward(a), ShapeError);
}

TEST(Gradcheck, SumOfSquares) {
    ParameterSet p;
    p.insert("x", Tensor({5}, {0.1, -2, 3, 0.5, 7}));
    const ScalarObjective f = [](const ParameterSet& s, Gradients* grad) {
        Graph g;
        const Var x = g.parameter("x", s.at("x"));
        const Var loss = sum(square(x));
        if (grad) *grad = g.backward(loss);
        return loss.value().item();
    };
    EXPECT_LT(gradcheck(f, p).max_relative_error, 1e-9);
    EXPECT_THROW(gradcheck(f, p, 0.0), std::invalid_argument);
}

TEST(Gradcheck, RejectsNonFiniteObjective) {
    ParameterSet p;
    p.insert("x", Tensor({1}, 1.0));
    const ScalarObjective f = [](const ParameterSet&, Gradients* grad) {
        if (grad) (*grad)["x"] = Tensor({1});
        return std::numeric_limits<double>::infinity();
    };
    EXPECT_THROW(gradcheck(f, p), std::domain_error);
}

namespace {

// MSE of dense(gru_sequence(xs)) against fixed targets, on every timestep.
ScalarObjective gru_dense_objective(const Tensor& xs, const Tensor& h0, const Tensor& y, double corrupt = 0.0) {
    return [=](const ParameterSet& s, Gradients* grad) {
        Graph g;
        const auto p = bind_parameters(g, "g", from_set(s));
        const Var w = g.parameter("out.w", s.at("out.w"));
        const Var b = g.parameter("out.b", s.at("out.b"));
        const Var a = g.parameter("attn.w", s.at("attn.w"));
        const Var ab = g.parameter("attn.b", s.at("attn.b"));
        const auto hs = gru_sequence(g, xs, g.constant(h0), p);
        const Var pooled = attention_pool(hs, a, ab);
        const Var pred = dense(stack_rows(hs), w, b);
        const Var err = add_const(pred, y);
        const Var loss = add(mean(square(err)), mean(square(pooled)));
        if (grad) {
            *grad = g.backward(loss);
            grad->at("g.u_h")[0] += corrupt;
        }
        return loss.value().item();
    };
}

}  // namespace

TEST(Gradcheck, GruDenseAttentionSeeds) {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        std::mt19937_64 rng(seed);
        auto s = gru_param_set(random_gru(2, 3, rng));
        s.insert("out.w", random_tensor({1, 3}, rng));
        s.insert("out.b", random_tensor({1}, rng));
        s.insert("attn.w", random_tensor({3}, rng));
        s.insert("attn.b", random_tensor({1}, rng));
        const Tensor xs = random_tensor({4, 2, 2}, rng);
        const Tensor h0 = random_tensor({2, 3}, rng, -0.5, 0.5);
        const Tensor y = random_tensor({8, 1}, rng);
        const auto result = gradcheck(gru_dense_objective(xs, h0, y), s);
        EXPECT_LT(result.max_relative_error, 1e-4) << "seed " << seed << " worst " << result.worst_parameter;
        EXPECT_EQ(result.coordinates, s.coordinate_count());
    }
}

TEST(Gradcheck, DetectsCorruptedGradient) {
    std::mt19937_64 rng(3);
    auto s = gru_param_set(random_gru(2, 3, rng));
    s.insert("out.w", random_tensor({1, 3}, rng));
    s.insert("out.b", random_tensor({1}, rng));
    s.insert("attn.w", random_tensor({3}, rng));
    s.insert("attn.b", random_tensor({1}, rng));
    const auto result =
        gradcheck(gru_dense_objective(random_tensor({4, 2, 2}, rng), Tensor({2, 3}), random_tensor({8, 1}, rng), 0.1), s);
    EXPECT_GT(result.max_relative_error, 1e-2);
    EXPECT_EQ(result.worst_parameter, "g.u_h");
}

TEST(Ops, ElementwiseGradients) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        ParameterSet s;
        s.insert("a", random_tensor({2, 3}, rng));
        s.insert("b", random_tensor({2, 3}, rng, 0.5, 2.0));
        s.insert("s", random_tensor({1}, rng, 0.5, 2.0));
        s.insert("o", random_tensor({1}, rng));
        const Tensor c = random_tensor({2, 3}, rng);
        const ScalarObjective f = [&](const ParameterSet& p, Gradients* grad) {
            Graph g;
            const Var a = g.parameter("a", p.at("a"));
            const Var b = g.parameter("b", p.at("b"));
            const Var sc = g.parameter("s", p.at("s"));
            const Var o = g.parameter("o", p.at("o"));
            Var y = add(mul(sigmoid(a), log(b)), tanh(sub(a, b)));
            y = add(y, square(relu(add_scalar(a, 0.1234))));
            y = affine(mul_const(add_const(y, c), c), sc, o);
            const Var loss = add(mean(y), scale(squared_distance(reshape(b, {6}), Tensor({6}, 1.0)), 0.3));
            if (grad) *grad = g.backward(loss);
            return loss.value().item();
        };
        EXPECT_LT(gradcheck(f, s).max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(Ops, StableSigmoid) {
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
}

TEST(Determinism, ForwardAndGradientsBitwise) {
    auto run = [] {
        std::mt19937_64 rng(21);
        auto s = gru_param_set(random_gru(2, 3, rng));
        s.insert("out.w", random_tensor({1, 3}, rng));
        s.insert("out.b", random_tensor({1}, rng));
        s.insert("attn.w", random_tensor({3}, rng));
        s.insert("attn.b", random_tensor({1}, rng));
        Gradients grad;
        const double v = gru_dense_objective(random_tensor({6, 2, 2}, rng), Tensor({2, 3}), random_tensor({12, 1}, rng))(
            s, &grad);
        return std::make_pair(v, grad);
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(ParameterSet, FlattenRoundTrip) {
    std::mt19937_64 rng(2);
    ParameterSet s;
    s.insert("b", random_tensor({2, 2}, rng));
    s.insert("a", random_tensor({3}, rng));
    const auto flat = s.flatten();
    EXPECT_EQ(flat.size(), 7u);
    ParameterSet copy = s;
    copy.unflatten(std::vector<double>(7, 0.0));
    EXPECT_NE(copy, s);
    copy.unflatten(flat);
    EXPECT_EQ(copy, s);
    EXPECT_THROW(copy.unflatten(std::vector<double>(6)), ShapeError);
    EXPECT_THROW(s.insert("a", Tensor({1})), std::invalid_argument);
}
