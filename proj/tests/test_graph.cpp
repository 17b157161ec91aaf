#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "duet/gradcheck.hpp"
#include "duet/graph.hpp"
#include "duet/random.hpp"
#include "duet/tensor.hpp"

using duet::nn::Graph;
using duet::nn::Node;
using duet::nn::Param;
using duet::nn::RandomSource;
using duet::nn::Tensor;

namespace {

// Runs central-difference verification for a scalar loss built from params.
double max_rel_err(const std::function<Node*(Graph&, std::vector<Param>&)>& build,
                   std::vector<Param>& params) {
    auto eval = [&](bool with_grad) {
        Graph g;
        Node* loss = build(g, params);
        double v = loss->value[0];
        if (with_grad) g.backward(loss);
        return v;
    };
    std::vector<Param*> ptrs;
    for (auto& p : params) ptrs.push_back(&p);
    return duet::nn::check_gradients(eval, ptrs).max_rel_err;
}

Param make_param(RandomSource& rng, const std::string& name,
                 std::vector<std::size_t> shape) {
    return Param(name, rng.uniform_tensor(std::move(shape), -0.5, 0.5));
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences", "[graph][grad]") {
    RandomSource rng(11);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "a", {3, 4}));
    ps.push_back(make_param(rng, "b", {3, 4}));

    SECTION("add/sub/mul chain") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* a = g.param(p[0]);
            Node* b = g.param(p[1]);
            return g.sum_all(g.mul(g.add(a, b), g.sub(a, b)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("scale and add_scalar") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* a = g.param(p[0]);
            return g.sum_all(g.mul(g.scale(a, 3.5), g.add_scalar(a, -0.25)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("sigmoid tanh relu exp") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* a = g.param(p[0]);
            Node* b = g.param(p[1]);
            Node* s = g.add(g.sigmoid(a), g.tanh_fn(b));
            return g.sum_all(g.mul(g.exp_fn(g.scale(a, 0.3)), g.relu(s)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("sqrt away from zero") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* a = g.param(p[0]);
            return g.sum_all(g.sqrt_fn(g.add_scalar(g.mul(a, a), 1.0)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
}

TEST_CASE("matmul and transpose gradients", "[graph][grad]") {
    RandomSource rng(12);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "a", {3, 5}));
    ps.push_back(make_param(rng, "b", {5, 2}));
    auto build = [](Graph& g, std::vector<Param>& p) {
        Node* prod = g.matmul(g.param(p[0]), g.param(p[1]));
        return g.sum_all(g.mul(prod, g.transpose(g.transpose(prod))));
    };
    REQUIRE(max_rel_err(build, ps) < 1e-4);
}

TEST_CASE("reductions and broadcast gradients", "[graph][grad]") {
    RandomSource rng(13);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "x", {4, 3}));
    ps.push_back(make_param(rng, "b", {3}));
    auto build = [](Graph& g, std::vector<Param>& p) {
        Node* y = g.add_rowvec(g.param(p[0]), g.param(p[1]));
        Node* m = g.mean_all(g.mul(y, y));
        Node* rows = g.sum_rows(y);
        return g.add(m, g.mean_all(g.mul(rows, rows)));
    };
    REQUIRE(max_rel_err(build, ps) < 1e-4);
}

TEST_CASE("shape op gradients", "[graph][grad]") {
    RandomSource rng(14);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "x", {4, 6}));
    SECTION("reshape + slice_cols + slice_rows") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* x = g.param(p[0]);
            Node* r = g.reshape(x, {6, 4});
            Node* c = g.slice_cols(r, 1, 3);
            Node* rr = g.slice_rows(c, 2, 5);
            return g.sum_all(g.mul(rr, rr));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("concat_rows and concat_cols") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* x = g.param(p[0]);
            Node* top = g.slice_rows(x, 0, 2);
            Node* bot = g.slice_rows(x, 2, 4);
            Node* v = g.concat_rows({top, bot});
            Node* l = g.slice_cols(v, 0, 3);
            Node* r = g.slice_cols(v, 3, 6);
            return g.sum_all(g.mul(g.concat_cols({r, l}), v));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("repeat_rows") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* row = g.slice_rows(g.param(p[0]), 1, 2);
            Node* rep = g.repeat_rows(row, 5);
            return g.sum_all(g.mul(rep, rep));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
}

TEST_CASE("softmax gradients", "[graph][grad]") {
    RandomSource rng(15);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "s", {5, 5}));
    SECTION("full") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* sm = g.masked_softmax_rows(g.param(p[0]), false);
            return g.sum_all(g.mul(sm, g.exp_fn(sm)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
    SECTION("causal") {
        auto build = [](Graph& g, std::vector<Param>& p) {
            Node* sm = g.masked_softmax_rows(g.param(p[0]), true);
            return g.sum_all(g.mul(sm, g.exp_fn(sm)));
        };
        REQUIRE(max_rel_err(build, ps) < 1e-4);
    }
}

TEST_CASE("causal softmax rows are bitwise independent of later scores", "[graph]") {
    RandomSource rng(16);
    Tensor base = rng.uniform_tensor({6, 6}, -2.0, 2.0);
    Graph g1;
    Node* out1 = g1.masked_softmax_rows(g1.constant(base), true);

    Tensor poked = base;
    // Change every strictly-upper-triangle score.
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) poked.at2(i, j) += 123.456;
    Graph g2;
    Node* out2 = g2.masked_softmax_rows(g2.constant(poked), true);

    REQUIRE(duet::nn::bit_equal(out1->value, out2->value));
    // Masked entries are exact zeros.
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) REQUIRE(out1->value.at2(i, j) == 0.0);
}

TEST_CASE("softmax rows sum to one", "[graph]") {
    RandomSource rng(17);
    Tensor s = rng.uniform_tensor({4, 7}, -3.0, 3.0);
    Graph g;
    Node* sm = g.masked_softmax_rows(g.constant(s), false);
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 7; ++j) sum += sm->value.at2(i, j);
        REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("conv1d_same gradients and edge replication", "[graph][grad]") {
    RandomSource rng(18);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "x", {6, 3}));
    ps.push_back(make_param(rng, "k", {5}));
    auto build = [](Graph& g, std::vector<Param>& p) {
        Node* y = g.conv1d_same(g.param(p[0]), g.param(p[1]));
        return g.sum_all(g.mul(y, y));
    };
    REQUIRE(max_rel_err(build, ps) < 1e-4);

    // A constant-in-time signal convolved with any kernel stays constant in
    // time and equals signal * sum(kernel): replication padding adds nothing.
    Tensor x({4, 2});
    for (std::size_t t = 0; t < 4; ++t) {
        x.at2(t, 0) = 2.0;
        x.at2(t, 1) = -1.0;
    }
    Tensor k({3}, {0.25, 0.5, 0.25});
    Graph g;
    Node* y = g.conv1d_same(g.constant(x), g.constant(k));
    for (std::size_t t = 0; t < 4; ++t) {
        REQUIRE(y->value.at2(t, 0) == Catch::Approx(2.0).epsilon(1e-12));
        REQUIRE(y->value.at2(t, 1) == Catch::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer_norm gradients", "[graph][grad]") {
    RandomSource rng(19);
    std::vector<Param> ps;
    ps.push_back(make_param(rng, "x", {4, 6}));
    ps.push_back(make_param(rng, "gain", {6}));
    ps.push_back(make_param(rng, "bias", {6}));
    auto build = [](Graph& g, std::vector<Param>& p) {
        Node* y = g.layer_norm(g.param(p[0]), g.param(p[1]), g.param(p[2]));
        return g.sum_all(g.mul(y, y));
    };
    REQUIRE(max_rel_err(build, ps) < 1e-4);
}

TEST_CASE("layer_norm output has zero mean unit variance before affine", "[graph]") {
    RandomSource rng(20);
    Tensor x = rng.uniform_tensor({3, 8}, -4.0, 4.0);
    Param gain("g", Tensor::full({8}, 1.0));
    Param bias("b", Tensor({8}));
    Graph g;
    Node* y = g.layer_norm(g.constant(x), g.param(gain), g.param(bias));
    for (std::size_t r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += y->value.at2(r, j);
        mean /= 8.0;
        for (std::size_t j = 0; j < 8; ++j) {
            double d = y->value.at2(r, j) - mean;
            var += d * d;
        }
        var /= 8.0;
        REQUIRE(mean == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(var == Catch::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("backward accumulates into shared leaves", "[graph]") {
    Param p("p", Tensor({2}, {3.0, -2.0}));
    Graph g;
    Node* x = g.param(p);
    Node* loss = g.sum_all(g.add(g.mul(x, x), x));  // d/dx = 2x + 1
    p.zero_grad();
    g.backward(loss);
    REQUIRE(p.grad[0] == Catch::Approx(7.0));
    REQUIRE(p.grad[1] == Catch::Approx(-3.0));
}

TEST_CASE("no_grad graphs skip tape bookkeeping", "[graph]") {
    Param p("p", Tensor({2, 2}, {1, 2, 3, 4}));
    Graph g(true);
    Node* x = g.param(p);
    Node* y = g.mul(x, x);
    REQUIRE_FALSE(y->needs_grad);
    p.zero_grad();
    g.backward(g.sum_all(y));
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(p.grad[i] == 0.0);
}

TEST_CASE("rng uniform stays in bounds and is deterministic", "[random]") {
    RandomSource a(99), b(99);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(u == b.uniform());
    }
}

TEST_CASE("rng normal moments are sane", "[random]") {
    RandomSource rng(7);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    REQUIRE(std::fabs(mean) < 0.03);
    REQUIRE(std::fabs(var - 1.0) < 0.05);
}
