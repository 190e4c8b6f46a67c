#include <doctest.h>

#include <cmath>

#include "scop/gradcheck.hpp"
#include "scop/optim.hpp"
#include "scop/tensor.hpp"

using namespace scop;

TEST_CASE("adam leaves parameters in place on a zero gradient and decays moments") {
    ParameterSet<float> params;
    auto w = params.add("w", Tensor::from({3}, {1, 2, 3}));
    AdamState<float> state(params);
    w.mutable_grad();
    adam_step(params, state, 0.1);
    CHECK(w[0] == 1);
    CHECK(w[2] == 3);
    CHECK(state.step == 1);

    // stale moments keep moving the parameter while they decay
    state.first_moment[0] = {1, 1, 1};
    state.second_moment[0] = {1, 1, 1};
    adam_step(params, state, 0.1);
    CHECK(state.first_moment[0][0] == doctest::Approx(0.9));
    CHECK(state.second_moment[0][0] == doctest::Approx(0.999));
    CHECK(w[0] < 1);
}

TEST_CASE("first adam step with unit gradient moves by about the rate") {
    ParameterSet<double> params;
    auto w = params.add("w", BasicTensor<double>::from({4}, {0, 0, 0, 0}));
    AdamState<double> state(params);
    auto g = w.mutable_grad();
    std::fill(g.begin(), g.end(), 1.0);
    adam_step(params, state, 0.01);
    // mhat = 1, vhat = 1, so the step is rate / (1 + eps)
    for (auto v : w.values()) CHECK(v == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam minimizes a scalar quadratic") {
    ParameterSet<double> params;
    auto w = params.add("w", BasicTensor<double>::from({1}, {0.0}));
    AdamState<double> state(params);
    auto three = BasicTensor<double>::from({1}, {3.0});
    for (int i = 0; i < 200; ++i) {
        params.zero_grad();
        auto diff = sub(w, three);
        backprop(sum(mul(diff, diff)));
        adam_step(params, state, 0.1);
    }
    CHECK(std::abs(w[0] - 3.0) < 0.1);
}

TEST_CASE("adam rejects state built for another parameter set") {
    ParameterSet<float> a, b;
    a.add("x", Tensor::zeros({2}));
    b.add("x", Tensor::zeros({2}));
    b.add("y", Tensor::zeros({2}));
    AdamState<float> state(a);
    CHECK_THROWS_AS(adam_step(b, state, 0.1), ShapeError);
    AdamState<float> wrong(a);
    wrong.first_moment[0].resize(3);
    CHECK_THROWS_AS(adam_step(a, wrong, 0.1), ShapeError);
}

TEST_CASE("zero rate leaves parameters bit-identical") {
    ParameterSet<float> params;
    auto w = params.add("w", Tensor::from({2}, {0.25f, -1.5f}));
    AdamState<float> state(params);
    auto g = w.mutable_grad();
    g[0] = 3;
    g[1] = -2;
    adam_step(params, state, 0.0);
    CHECK(w[0] == 0.25f);
    CHECK(w[1] == -1.5f);
}

TEST_CASE("warmup schedule") {
    Schedule s{2e-5, 1000};
    CHECK(lr_at(1000, s) == doctest::Approx(2e-5));
    CHECK(lr_at(500, s) == doctest::Approx(1e-5));
    CHECK(lr_at(5000, s) == doctest::Approx(2e-5));
    CHECK(lr_at(10, {0.5, 0}) == 0.5);
    CHECK_THROWS(Schedule{0.0, 10}.validate());
}

TEST_CASE("parameter names are unique and the checksum tracks values") {
    ParameterSet<float> params;
    params.add("b", Tensor::from({2}, {1, 2}));
    params.add("a", Tensor::from({1}, {3}));
    CHECK_THROWS(params.add("a", Tensor::zeros({1})));
    CHECK(params.sorted_names() == std::vector<std::string>{"a", "b"});
    CHECK(params.scalar_count() == 3);
    auto before = params.checksum();
    params.get("a").mutable_values()[0] = 4;
    CHECK(params.checksum() != before);
}

TEST_CASE("grad check on a linear model is exact") {
    ParameterSet<double> params;
    auto w = params.add("w", BasicTensor<double>::from({2, 3}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6}));
    auto x = BasicTensor<double>::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto report = grad_check<double>([&] { return sum(matmul(x, w)); }, params, 1e-6);
    CHECK(report.passed());
    CHECK(report.max_error < 1e-6);
}

TEST_CASE("grad check catches a sign-flipped backward and names the parameter") {
    ParameterSet<double> params;
    auto good = params.add("good", BasicTensor<double>::from({3}, {0.5, -1, 2}));
    auto bad = params.add("bad", BasicTensor<double>::from({3}, {1, 2, 3}));
    auto flipped_square = [](const BasicTensor<double>& a) {
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * a[i];
        return make_result<double>(a.shape(), std::move(out), {a.node()}, [a](TensorNode<double>& self) {
            auto& g = a.node()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 2.0 * a[i] * self.grad[i];
        });
    };
    auto report = grad_check<double>([&] { return add(sum(mul(good, good)), sum(flipped_square(bad))); }, params, 1e-3);
    CHECK_FALSE(report.passed());
    CHECK(report.max_error > 0.5);
    CHECK(report.worst_parameter == "bad");
}

TEST_CASE("grad check refuses a nondeterministic forward") {
    ParameterSet<double> params;
    auto w = params.add("w", BasicTensor<double>::from({1}, {1.0}));
    int calls = 0;
    auto forward = [&] { return sum(scale(w, static_cast<double>(++calls))); };
    CHECK_THROWS_AS(grad_check<double>(forward, params, 1e-3), NondeterministicForward);
}

