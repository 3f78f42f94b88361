#include <doctest.h>

#include <cstring>

#include "most/rng.hpp"
#include "most/tensor.hpp"
#include "oracle_utils.hpp"

using namespace most;

namespace {

Tensor rand_t(std::vector<size_t> shape, uint64_t seed, double stdev = 1.0) {
    Rng rng(seed);
    return random_normal(std::move(shape), rng, stdev);
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Tape t;
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m = rand_t({2, 5}, 11);
    Var out = matmul(t.input(eye), t.input(m));
    for (size_t k = 0; k < m.data.size(); ++k) CHECK(t.value(out).data[k] == m.data[k]);

    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Var out2 = matmul(t.input(a), t.input(b));
    CHECK(t.value(out2).data[0] == 3.0);
    CHECK(t.value(out2).data[1] == 7.0);
}

TEST_CASE("matmul shape error names both shapes") {
    Tape t;
    Var a = t.input(Tensor({2, 3}));
    Var b = t.input(Tensor({2, 3}));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2,3)"), std::invalid_argument);
}

TEST_CASE("matmul gradient vs central finite differences") {
    Param pa("a", rand_t({3, 4}, 21));
    Param pb("b", rand_t({4, 2}, 22));
    Tensor weights = rand_t({3, 2}, 23);  // projection making the loss a general scalar

    auto loss_value = [&]() {
        Tape t;
        Var out = matmul(t.param(pa), t.param(pb));
        Var w = t.input(weights);
        return t.value(sum_all(mul(out, w))).data[0];
    };
    Tape t;
    Var loss = sum_all(mul(matmul(t.param(pa), t.param(pb)), t.input(weights)));
    pa.zero_grad();
    pb.zero_grad();
    t.backward(loss);

    Tensor fa = oracle::fd_grad(pa, loss_value, 1e-5);
    Tensor fb = oracle::fd_grad(pb, loss_value, 1e-5);
    CHECK(oracle::max_rel_error(pa.grad, fa) < 1e-6);
    CHECK(oracle::max_rel_error(pb.grad, fb) < 1e-6);
}

TEST_CASE("causal conv: pointwise identity") {
    Tape t;
    Tensor x = rand_t({3, 6}, 31);
    Tensor k({3, 3, 1});
    for (size_t o = 0; o < 3; ++o) k.data[(o * 3 + o) * 1] = 1.0;
    Var out = causal_conv1d(t.input(x), t.input(k), t.input(Tensor({3})));
    for (size_t i = 0; i < x.data.size(); ++i) CHECK(t.value(out).data[i] == x.data[i]);
}

TEST_CASE("causal conv: impulse response reproduces kernel taps") {
    Tape t;
    Tensor x({1, 10});
    x(0, 3) = 1.0;
    Tensor k = rand_t({2, 1, 4}, 41);
    Var out = causal_conv1d(t.input(x), t.input(k), t.input(Tensor({2})));
    const Tensor& y = t.value(out);
    for (size_t o = 0; o < 2; ++o) {
        for (size_t tt = 0; tt < 10; ++tt) {
            if (tt >= 3 && tt < 7) {
                CHECK(y(o, tt) == k.data[o * 4 + (tt - 3)]);
            } else {
                CHECK(y(o, tt) == 0.0);
            }
        }
    }
}

TEST_CASE("causal conv matches the naive double-loop oracle") {
    Tensor x = rand_t({2, 8}, 51);
    Tensor k = rand_t({3, 2, 4}, 52);
    Tensor b = rand_t({3}, 53);
    Tape t;
    Var out = causal_conv1d(t.input(x), t.input(k), t.input(b));
    Tensor expect = oracle::naive_causal_conv(x, k, b);
    for (size_t i = 0; i < expect.data.size(); ++i) {
        CHECK(std::abs(t.value(out).data[i] - expect.data[i]) < 1e-12);
    }
}

TEST_CASE("causal conv: output at t ignores the future (bit-identical)") {
    Tensor k = rand_t({3, 2, 4}, 61);
    Tensor b = rand_t({3}, 62);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rand_t({2, 12}, 100 + static_cast<uint64_t>(trial));
        Rng pick(200 + static_cast<uint64_t>(trial));
        size_t t0 = static_cast<size_t>(pick.uniform(0, 10));
        Tensor x2 = x;
        for (size_t i = 0; i < 2; ++i)
            for (size_t tt = t0 + 1; tt < 12; ++tt) x2(i, tt) = 0.0;
        Tape tp;
        const Tensor& y1 = tp.value(causal_conv1d(tp.input(x), tp.input(k), tp.input(b)));
        const Tensor& y2 = tp.value(causal_conv1d(tp.input(x2), tp.input(k), tp.input(b)));
        for (size_t o = 0; o < 3; ++o)
            for (size_t tt = 0; tt <= t0; ++tt) {
                CHECK(std::memcmp(&y1.data[o * 12 + tt], &y2.data[o * 12 + tt],
                                  sizeof(double)) == 0);
            }
    }
}

TEST_CASE("causal conv is linear with zero bias") {
    Tensor ka = rand_t({3, 2, 4}, 71);
    Tensor zero_b({3});
    Tensor x = rand_t({2, 9}, 72), y = rand_t({2, 9}, 73);
    double alpha = 0.7, beta = -1.3;
    Tensor mix({2, 9});
    for (size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = alpha * x.data[i] + beta * y.data[i];
    Tape t;
    const Tensor& lhs = t.value(causal_conv1d(t.input(mix), t.input(ka), t.input(zero_b)));
    const Tensor& fx = t.value(causal_conv1d(t.input(x), t.input(ka), t.input(zero_b)));
    const Tensor& fy = t.value(causal_conv1d(t.input(y), t.input(ka), t.input(zero_b)));
    for (size_t i = 0; i < lhs.data.size(); ++i) {
        CHECK(std::abs(lhs.data[i] - (alpha * fx.data[i] + beta * fy.data[i])) < 1e-12);
    }
}

TEST_CASE("causal conv gradients vs finite differences") {
    Param px("x", rand_t({2, 7}, 81));
    Param pk("k", rand_t({3, 2, 2}, 82));
    Param pb("b", rand_t({3}, 83));
    Tensor weights = rand_t({3, 7}, 84);
    auto loss_value = [&]() {
        Tape t;
        Var out = causal_conv1d(t.param(px), t.param(pk), t.param(pb));
        return t.value(sum_all(mul(out, t.input(weights)))).data[0];
    };
    Tape t;
    Var loss = sum_all(mul(causal_conv1d(t.param(px), t.param(pk), t.param(pb)), t.input(weights)));
    px.zero_grad();
    pk.zero_grad();
    pb.zero_grad();
    t.backward(loss);
    CHECK(oracle::max_rel_error(px.grad, oracle::fd_grad(px, loss_value, 1e-5)) < 1e-6);
    CHECK(oracle::max_rel_error(pk.grad, oracle::fd_grad(pk, loss_value, 1e-5)) < 1e-6);
    CHECK(oracle::max_rel_error(pb.grad, oracle::fd_grad(pb, loss_value, 1e-5)) < 1e-6);
}

TEST_CASE("mean_over basics and gradient") {
    Tape t;
    Tensor a = rand_t({2, 3}, 91);
    Var single = mean_over({t.input(a)});
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(t.value(single).data[i] == a.data[i]);

    Tensor na = a;
    for (double& v : na.data) v = -v;
    Var sym = mean_over({t.input(a), t.input(na)});
    for (double v : t.value(sym).data) CHECK(v == 0.0);

    CHECK_THROWS_AS(mean_over({}), std::invalid_argument);

    Param p1("p1", rand_t({2, 2}, 92));
    Param p2("p2", rand_t({2, 2}, 93));
    Param p3("p3", rand_t({2, 2}, 94));
    Tensor w = rand_t({2, 2}, 95);
    auto loss_value = [&]() {
        Tape tp;
        Var m = mean_over({tp.param(p1), tp.param(p2), tp.param(p3)});
        return tp.value(sum_all(mul(m, tp.input(w)))).data[0];
    };
    Tape tp;
    Var loss = sum_all(mul(mean_over({tp.param(p1), tp.param(p2), tp.param(p3)}), tp.input(w)));
    p1.zero_grad();
    p2.zero_grad();
    p3.zero_grad();
    tp.backward(loss);
    CHECK(oracle::max_rel_error(p1.grad, oracle::fd_grad(p1, loss_value, 1e-5)) < 1e-6);
    CHECK(oracle::max_rel_error(p2.grad, oracle::fd_grad(p2, loss_value, 1e-5)) < 1e-6);
    CHECK(oracle::max_rel_error(p3.grad, oracle::fd_grad(p3, loss_value, 1e-5)) < 1e-6);
}

TEST_CASE("max_over basics and tie rule") {
    Tape t;
    Tensor a = rand_t({2, 2}, 96);
    Var single = max_over({t.input(a)});
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(t.value(single).data[i] == a.data[i]);

    Tensor zeros({2, 2});
    Tensor ones = Tensor::full({2, 2}, 1.0);
    Var mx = max_over({t.input(zeros), t.input(ones)});
    for (double v : t.value(mx).data) CHECK(v == 1.0);

    CHECK_THROWS_AS(max_over({}), std::invalid_argument);

    // ties route the gradient to the lowest list index
    Param pa("a", Tensor::full({2, 2}, 3.0));
    Param pb("b", Tensor::full({2, 2}, 3.0));
    Tape tp;
    Var loss = sum_all(max_over({tp.param(pa), tp.param(pb)}));
    pa.zero_grad();
    pb.zero_grad();
    tp.backward(loss);
    for (double g : pa.grad.data) CHECK(g == 1.0);
    for (double g : pb.grad.data) CHECK(g == 0.0);
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives all-ones gradient") {
        Param p("x", rand_t({3, 4}, 101));
        Tape t;
        Var loss = sum_all(t.param(p));
        p.zero_grad();
        t.backward(loss);
        for (double g : p.grad.data) CHECK(g == 1.0);
    }
    SUBCASE("<x,x> gives 2x") {
        Param p("x", rand_t({3, 4}, 102));
        Tape t;
        Var xv = t.param(p);
        Var loss = sum_all(mul(xv, xv));
        p.zero_grad();
        t.backward(loss);
        for (size_t k = 0; k < p.grad.data.size(); ++k) {
            CHECK(p.grad.data[k] == doctest::Approx(2.0 * p.value.data[k]).epsilon(1e-12));
        }
    }
    SUBCASE("non-scalar loss is rejected") {
        Param p("x", rand_t({3, 4}, 103));
        Tape t;
        Var v = t.param(p);
        CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
    }
    SUBCASE("repeated backward accumulates") {
        Param p("x", rand_t({2, 2}, 104));
        p.zero_grad();
        {
            Tape t;
            t.backward(sum_all(t.param(p)));
        }
        {
            Tape t;
            t.backward(sum_all(t.param(p)));
        }
        for (double g : p.grad.data) CHECK(g == 2.0);
    }
}

TEST_CASE("elementwise op gradients vs finite differences") {
    Param p("x", rand_t({2, 5}, 111, 0.5));
    Tensor w = rand_t({2, 5}, 112);
    auto check_op = [&](auto&& op, double floor_shift) {
        Param local("x", p.value);
        for (double& v : local.value.data) v += floor_shift;  // keep log() in range
        auto loss_value = [&]() {
            Tape t;
            return t.value(sum_all(mul(op(t.param(local)), t.input(w)))).data[0];
        };
        Tape t;
        Var loss = sum_all(mul(op(t.param(local)), t.input(w)));
        local.zero_grad();
        t.backward(loss);
        CHECK(oracle::max_rel_error(local.grad, oracle::fd_grad(local, loss_value, 1e-5)) < 1e-6);
    };
    check_op([](Var v) { return exp_elem(v); }, 0.0);
    check_op([](Var v) { return log_elem(v); }, 3.0);
    check_op([](Var v) { return gelu(v); }, 0.0);
    check_op([](Var v) { return scale(v, -2.5); }, 0.0);
}

TEST_CASE("structural op gradients vs finite differences") {
    Param pa("a", rand_t({3, 4}, 121));
    Param pb("b", rand_t({3, 4}, 122));
    Param prow("r", rand_t({1, 4}, 124));
    Tensor w4 = rand_t({1, 4}, 123);
    auto fd_check = [&](auto&& graph, std::vector<Param*> ps) {
        auto loss_value = [&]() {
            Tape t;
            return t.value(graph(t)).data[0];
        };
        Tape t;
        Var loss = graph(t);
        for (Param* pp : ps) pp->zero_grad();
        t.backward(loss);
        for (Param* pp : ps) {
            CHECK(oracle::max_rel_error(pp->grad, oracle::fd_grad(*pp, loss_value, 1e-5)) < 1e-6);
        }
    };
    fd_check(
        [&](Tape& t) {
            return sum_all(mul(dot_cols(t.param(pa), t.param(pb)), t.input(w4)));
        },
        {&pa, &pb});
    fd_check(
        [&](Tape& t) {
            Var c = concat_rows({t.param(pa), t.param(pb)});
            return mean_all(mul(slice_rows(c, 1, 5), slice_rows(c, 0, 4)));
        },
        {&pa, &pb});
    fd_check([&](Tape& t) { return sum_all(slice_cols(t.param(pa), 1, 3)); }, {&pa});
    fd_check(
        [&](Tape& t) { return mean_all(mul_cols(t.param(pa), t.param(prow))); },
        {&pa, &prow});
}

TEST_CASE("identical seeds give bit-identical outputs and gradients") {
    auto run = [](uint64_t seed) {
        Param p("x", rand_t({4, 6}, seed));
        Tape t;
        Var v = gelu(causal_conv1d(t.param(p), t.input(rand_t({2, 4, 2}, seed + 1)),
                                   t.input(rand_t({2}, seed + 2))));
        Var loss = mean_all(mul(v, v));
        p.zero_grad();
        t.backward(loss);
        return std::make_pair(t.value(loss).data[0], p.grad);
    };
    auto [l1, g1] = run(7);
    auto [l2, g2] = run(7);
    CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
    CHECK(std::memcmp(g1.data.data(), g2.data.data(), g1.data.size() * sizeof(double)) == 0);
}
