#include <doctest.h>

#include "panorad/gradcheck.hpp"
#include "panorad/nn.hpp"
#include "panorad/tensor.hpp"

#include <cmath>

using namespace panorad;
using namespace panorad::nn;

namespace {

template <typename Scalar>
TensorT<Scalar> random_tensor(Shape shape, CounterRng rng, bool grad = false) {
    typename Node<Scalar>::Array v(numel(shape));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
    }
    return grad ? TensorT<Scalar>::parameter(std::move(shape), std::move(v))
                : TensorT<Scalar>::constant(std::move(shape), std::move(v));
}

// He-initialised layer with small nonzero biases.
template <typename Scalar>
Conv2d<Scalar> random_conv(int in, int out, int k, int stride, CounterRng rng) {
    Conv2d<Scalar> c(in, out, k, stride, rng.split(0));
    CounterRng brng = rng.split(1);
    for (Eigen::Index i = 0; i < c.bias.numel(); ++i) {
        c.bias.mutable_value()[i] = static_cast<Scalar>(brng.uniform(-0.1, 0.1));
    }
    return c;
}

}  // namespace

TEST_CASE("conv2d: identity 1x1 kernel and constant input") {
    CounterRng rng(Seed{3});
    const Tensord x = random_tensor<double>({2, 3, 4, 8}, rng.split(0));
    Node<double>::Array w = Node<double>::Array::Zero(9);
    w[0] = w[4] = w[8] = 1.0;
    const Tensord id = Tensord::constant({3, 3, 1, 1}, w);
    const Tensord y = conv2d(x, id, Tensord{}, 1, 0);
    CHECK(y.shape() == x.shape());
    CHECK((y.value() == x.value()).all());

    const Conv2d<double> c = random_conv<double>(3, 5, 3, 1, rng.split(1));
    const Tensord k = Tensord::full({1, 3, 6, 12}, 0.7);
    // Constant rows away from the zero-padded top and bottom borders.
    const Tensord yc = conv2d(k, c.weight, c.bias, 1, 0);
    CHECK(yc.shape() == Shape{1, 5, 4, 12});
    for (int co = 0; co < 5; ++co) {
        const double ref = yc.value()[Eigen::Index(co) * 48];
        for (int i = 0; i < 48; ++i) {
            CHECK(yc.value()[Eigen::Index(co) * 48 + i] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
}

TEST_CASE("conv2d: shape contract and errors") {
    CounterRng rng(Seed{4});
    const Conv2d<float> down = random_conv<float>(4, 8, 3, 2, rng);
    const Tensor x = random_tensor<float>({2, 4, 16, 32}, rng.split(2));
    CHECK(down(x).shape() == Shape{2, 8, 8, 16});
    CHECK(down.up(x).shape() == Shape{2, 8, 32, 64});
    CHECK_THROWS_AS(down(random_tensor<float>({1, 4, 16, 33}, rng.split(3))), ShapeError);
    CHECK_THROWS_AS(down(random_tensor<float>({1, 3, 16, 32}, rng.split(3))), ShapeError);
    const Tensor even = Tensor::zeros({2, 4, 2, 2});
    CHECK_THROWS_AS(conv2d(x, even, Tensor{}, 1, 1), ShapeError);
    CHECK_THROWS_AS(conv2d(x, down.weight, down.bias, 3, 1), ShapeError);
}

TEST_CASE("upsample_conv: constant input gives constant output at twice the size") {
    CounterRng rng(Seed{5});
    const Conv2d<double> c = random_conv<double>(2, 3, 3, 1, rng);
    const Tensord x = Tensord::full({1, 2, 4, 8}, -0.3);
    const Tensord y = conv2d(upsample2x(x), c.weight, c.bias, 1, 0);
    CHECK(y.shape() == Shape{1, 3, 6, 16});
    for (int co = 0; co < 3; ++co) {
        const double ref = y.value()[Eigen::Index(co) * 96];
        for (int i = 0; i < 96; ++i) {
            CHECK(y.value()[Eigen::Index(co) * 96 + i] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
}

TEST_CASE("conv layers are exactly equivariant to cyclic width shifts") {
    CounterRng rng(Seed{6});
    for (int trial = 0; trial < 8; ++trial) {
        CounterRng t = rng.split(static_cast<std::uint64_t>(trial));
        const int k = 1 + 2 * static_cast<int>(t.below(4));
        const int stride = 1 + static_cast<int>(t.below(2));
        const int s = static_cast<int>(t.below(9)) - 4;
        const Conv2d<float> cf = random_conv<float>(3, 7, k, stride, t.split(1));
        const Conv2d<double> cd = random_conv<double>(3, 7, k, stride, t.split(1));
        const Tensor xf = random_tensor<float>({2, 3, 12, 24}, t.split(2));
        const Tensord xd = random_tensor<double>({2, 3, 12, 24}, t.split(2));
        CHECK((roll_width(cf(xf), s).value() == cf(roll_width(xf, s * stride)).value()).all());
        CHECK((roll_width(cd(xd), s).value() == cd(roll_width(xd, s * stride)).value()).all());
        if (stride == 1) {
            CHECK((roll_width(cf.up(xf), 2 * s).value() == cf.up(roll_width(xf, s)).value()).all());
        }
    }
}

TEST_CASE("backward: elementary gradients") {
    CounterRng rng(Seed{7});
    Tensord x = random_tensor<double>({3, 5}, rng, true);
    backward(sum(x));
    CHECK((x.grad() == 1.0).all());

    x.zero_grad();
    const double n = static_cast<double>(x.numel());
    backward((n / 2) * mse_to(x, 0.0));
    CHECK((x.grad() - x.value()).abs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(backward(x), UsageError);
}

TEST_CASE("backward: shared subexpressions accumulate") {
    Tensord x = Tensord::parameter({2}, Node<double>::Array::Constant(2, 1.5));
    const Tensord y = x + x;
    backward(sum(y + y));
    CHECK((x.grad() == 4.0).all());
}

TEST_CASE("gradcheck: two-layer conv net in double precision") {
    CounterRng rng(Seed{8});
    const Conv2d<double> c1 = random_conv<double>(2, 4, 3, 2, rng.split(0));
    const Conv2d<double> c2 = random_conv<double>(4, 3, 3, 1, rng.split(1));
    const Tensord x = random_tensor<double>({2, 2, 8, 16}, rng.split(2));
    ParameterList<double> params;
    c1.collect(params, "c1");
    c2.collect(params, "c2");
    const Node<double>::Array proj = random_tensor<double>({2, 3, 4, 8}, rng.split(3)).value();
    const std::function<Tensord()> loss = [&] {
        return weighted_sum(c2(leaky_relu(c1(x))), proj);
    };
    GradcheckOptions opts;
    opts.step = 1e-4;
    opts.tolerance = 1e-6;
    const GradcheckReport report = gradcheck(loss, params, opts);
    INFO(report.worst_entry << " " << report.max_relative_error);
    CHECK(report.passed);
    CHECK(report.checked + report.skipped_kinks == parameter_count(params));
    CHECK(report.checked > 150);

    GradcheckOptions corrupted = opts;
    corrupted.analytic_scale = 1.01;
    corrupted.tolerance = 1e-4;
    CHECK_FALSE(gradcheck(loss, params, corrupted).passed);
}

TEST_CASE("gradcheck: leaky-ReLU away from zero and pointwise ops") {
    CounterRng rng(Seed{9});
    Node<double>::Array v(40);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double mag = rng.uniform(0.1, 1.0);
        v[i] = rng.below(2) ? mag : -mag;
    }
    const Tensord x = Tensord::parameter({1, 2, 4, 5}, v);
    ParameterList<double> params{{"x", x}};
    const Node<double>::Array proj = random_tensor<double>({1, 2, 4, 5}, rng.split(1)).value();
    GradcheckOptions opts;
    const std::function<Tensord()> lrelu = [&] { return weighted_sum(leaky_relu(x), proj); };
    CHECK(gradcheck(lrelu, params, opts).passed);
    const std::function<Tensord()> sig = [&] { return weighted_sum(sigmoid(x), proj); };
    CHECK(gradcheck(sig, params, opts).passed);
    const Tensord target = random_tensor<double>({1, 2, 4, 5}, rng.split(2));
    const std::function<Tensord()> l1 = [&] { return l1_loss(x, target); };
    CHECK(gradcheck(l1, params, opts).passed);
}

TEST_CASE("gradcheck: spatial and channel ops") {
    CounterRng rng(Seed{10});
    const Tensord a = random_tensor<double>({2, 2, 4, 8}, rng.split(0), true);
    const Tensord b = random_tensor<double>({2, 3, 4, 8}, rng.split(1), true);
    ParameterList<double> params{{"a", a}, {"b", b}};
    const Node<double>::Array proj = random_tensor<double>({2, 3, 4, 8}, rng.split(2)).value();
    const std::function<Tensord()> loss = [&] {
        const Tensord cat = concat_channels<double>({a, b});
        const Tensord sl = slice_channels(cat, 1, 3);
        return weighted_sum(upsample2x(avg_pool2x(sl)) - 0.5 * sl, proj) + mse_to(b, 0.25);
    };
    const GradcheckReport report = gradcheck(loss, params, GradcheckOptions{});
    INFO(report.worst_entry << " " << report.max_relative_error);
    CHECK(report.passed);
}

TEST_CASE("gradcheck: single-precision backward against a double reference") {
    CounterRng rng(Seed{11});
    const Conv2d<float> f1 = random_conv<float>(2, 4, 3, 2, rng.split(0));
    const Conv2d<float> f2 = random_conv<float>(4, 2, 3, 1, rng.split(1));
    const Conv2d<double> d1 = random_conv<double>(2, 4, 3, 2, rng.split(0));
    const Conv2d<double> d2 = random_conv<double>(4, 2, 3, 1, rng.split(1));
    ParameterList<float> pf;
    ParameterList<double> pd;
    f1.collect(pf, "c1");
    f2.collect(pf, "c2");
    d1.collect(pd, "c1");
    d2.collect(pd, "c2");
    copy_parameters(pd, pf);
    const Tensord xd = random_tensor<double>({1, 2, 8, 16}, rng.split(2));
    const Tensor xf = Tensor::constant(xd.shape(), xd.value().cast<float>());
    const Tensord xr = Tensord::constant(xd.shape(), xf.value().cast<double>());
    const std::function<Tensor()> lf = [&] { return mean(f2.up(relu(f1(xf)))); };
    const std::function<Tensord()> ld = [&] { return mean(d2.up(relu(d1(xr)))); };
    GradcheckOptions opts;
    opts.tolerance = 1e-4;
    opts.relative_floor = 1e-3;
    const GradcheckReport report = gradcheck<float, double>(lf, pf, ld, pd, opts);
    INFO(report.worst_entry << " " << report.max_relative_error);
    CHECK(report.passed);
}

TEST_CASE("adam: zero gradient, descent and first step") {
    AdamConfig cfg;
    Node<double>::Array p = Node<double>::Array::Constant(3, 1.0);
    AdamMoments<double> state;
    state.m = Node<double>::Array::Constant(3, 0.4);
    state.v = Node<double>::Array::Constant(3, 0.2);
    state.step = 1;
    adam_step<double>(p, Node<double>::Array::Zero(3), state, cfg);
    CHECK((state.m == 0.2).all());
    CHECK(std::abs(state.v[0] - 0.1998) < 1e-15);
    CHECK(state.step == 2);

    Node<double>::Array w = Node<double>::Array::Constant(1, 1.0);
    AdamMoments<double> ws;
    cfg.lr = 0.05;
    for (int i = 0; i < 50; ++i) {
        const double before = w[0];
        adam_step<double>(w, Node<double>::Array::Constant(1, 2.0 * w[0]), ws, cfg);
        CHECK(std::abs(w[0]) < std::abs(before));
    }

    // Closed form: m1 = (1-b1) g, v1 = (1-b2) g^2, so the corrected step is
    // lr * g / (|g| + eps).
    for (const double g : {3.0, -0.02, 1e-3}) {
        AdamConfig first;
        Node<double>::Array q = Node<double>::Array::Zero(1);
        AdamMoments<double> s;
        adam_step<double>(q, Node<double>::Array::Constant(1, g), s, first);
        const double expected = -first.lr * g / (std::abs(g) + first.eps);
        CHECK(q[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(q[0] + first.lr * (g > 0 ? 1 : -1)) < first.lr * first.eps / std::abs(g) + 1e-15);
    }

    Node<double>::Array bad = Node<double>::Array::Zero(2);
    AdamMoments<double> bs;
    CHECK_THROWS_AS(adam_step<double>(bad, Node<double>::Array::Zero(3), bs, cfg), ShapeError);
}

TEST_CASE("forward passes are deterministic") {
    const auto run = [] {
        CounterRng rng(Seed{12});
        const Conv2d<float> c = random_conv<float>(3, 6, 5, 2, rng);
        const Tensor x = random_tensor<float>({2, 3, 8, 16}, rng.split(9), true);
        const Tensor y = c(x);
        backward(mean(y));
        return std::pair{y.value(), x.grad()};
    };
    const auto a = run();
    const auto b = run();
    CHECK((a.first == b.first).all());
    CHECK((a.second == b.second).all());
}
