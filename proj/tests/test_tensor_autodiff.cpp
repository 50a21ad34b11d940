#include <doctest.h>

#include <cmath>

#include "fdnet/autodiff.hpp"
#include "fdnet/conv.hpp"
#include "fdnet/stencil.hpp"
#include "test_support.hpp"

using namespace fdnet;
using namespace fdnet::test;

TEST_CASE("conv2d: five-point stencil of a constant field vanishes") {
    Tensor<double> ones(1, 3, 3, 1.0);
    const Tensor<double> out = conv2d(ones, laplacian_kernel<double>(1.0));
    REQUIRE(out.rows == 1);
    REQUIRE(out.cols == 1);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("conv2d: stencil applied to bubble samples equals -laplacian exactly") {
    const int n = 9;
    const double h = 1.0 / (n - 1);
    Tensor<double> u(1, n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = i * h, y = j * h;
            u.at(0, i, j) = x * (x - 1.0) * y * (y - 1.0);
        }
    const Tensor<double> out = conv2d(u, laplacian_kernel<double>(h));
    for (int i = 0; i < n - 2; ++i)
        for (int j = 0; j < n - 2; ++j) {
            const double x = (i + 1) * h, y = (j + 1) * h;
            const double lap = 2.0 * y * (y - 1.0) + 2.0 * x * (x - 1.0);
            CHECK(out.at(0, i, j) == doctest::Approx(-lap).epsilon(1e-12));
        }
}

TEST_CASE("conv2d matches the direct double-loop reference") {
    Rng rng(7);
    SUBCASE("single channel valid") {
        const Tensor<double> in = random_tensor(rng, 1, 5, 5);
        const Kernel<double> k = random_kernel(rng, 1, 1, 3, 3);
        const Tensor<double> got = conv2d(in, k);
        const Tensor<double> want = conv_reference(in, k);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-13));
    }
    SUBCASE("multi-channel, same padding, bias") {
        const Tensor<double> in = random_tensor(rng, 3, 6, 7);
        const Kernel<double> k = random_kernel(rng, 4, 3, 5, 5, 1, Padding::same_zero);
        std::vector<double> bias{0.3, -0.7, 1.1, 0.0};
        const Tensor<double> got = conv2d(in, k, &bias);
        const Tensor<double> want = conv_reference(in, k, &bias);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-13));
    }
    SUBCASE("stride 2 on the dual grid") {
        for (int n : {4, 9, 16}) {
            const Tensor<double> in = random_tensor(rng, 1, 2 * n - 1, 2 * n - 1);
            const Kernel<double> k = random_kernel(rng, 1, 1, 5, 5, 2);
            const Tensor<double> got = conv2d(in, k);
            REQUIRE(got.rows == n - 2);  // (2n-1) with 5x5 stride-2 valid
            REQUIRE(got.cols == n - 2);
            const Tensor<double> want = conv_reference(in, k);
            for (std::size_t i = 0; i < got.data.size(); ++i)
                CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("conv2d: one-hot center kernel is the identity on the valid interior") {
    Rng rng(11);
    const Tensor<double> in = random_tensor(rng, 1, 6, 6);
    Kernel<double> k(1, 1, 3, 3);
    k.at(0, 0, 1, 1) = 1.0;
    const Tensor<double> out = conv2d(in, k);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(out.at(0, i, j) == in.at(0, i + 1, j + 1));
}

TEST_CASE("kernel construction validates extents and stride") {
    CHECK_THROWS_AS(Kernel<double>(1, 1, 4, 3), ConfigError);
    CHECK_THROWS_AS(Kernel<double>(1, 1, 3, 3, 0), ConfigError);
    CHECK_NOTHROW(Kernel<double>(2, 3, 5, 5, 2, Padding::same_zero));
}

TEST_CASE("conv2d rejects mismatched shapes with both shapes reported") {
    Tensor<double> in(2, 5, 5);
    Kernel<double> k(1, 3, 3, 3);
    CHECK_THROWS_WITH_AS(conv2d(in, k),
                         doctest::Contains("(2,5,5)"), DimensionError);
    Tensor<double> tiny(1, 2, 2);
    Kernel<double> k2(1, 1, 3, 3);
    CHECK_THROWS_AS(conv2d(tiny, k2), DimensionError);
}

TEST_CASE("conv2d backward: zero upstream gives zero gradients") {
    Rng rng(3);
    Tape<double> tape;
    auto x = tape.input(random_tensor(rng, 1, 4, 4));
    Kernel<double> k = random_kernel(rng, 1, 1, 3, 3);
    Kernel<double> kg(1, 1, 3, 3);
    ConvRef<double> ref;
    ref.kernel = &k;
    ref.kernel_grad = &kg;
    auto y = tape.conv2d(x, ref);
    tape.backward_from(y, Tensor<double>(1, 2, 2));
    for (double v : tape.grad(x).data) CHECK(v == 0.0);
    for (double v : kg.data) CHECK(v == 0.0);
}

TEST_CASE("conv2d backward matches finite differences for input and kernel") {
    Rng rng(5);
    const Tensor<double> in0 = random_tensor(rng, 1, 4, 4);
    Kernel<double> k0 = random_kernel(rng, 1, 1, 3, 3);
    // weighted sum keeps the probe scalar sensitive to every output entry
    const Tensor<double> w = random_tensor(rng, 1, 2, 2);

    auto loss_of = [&](const Tensor<double>& in, const Kernel<double>& k) {
        const Tensor<double> out = conv2d(in, k);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) acc += w.data[i] * out.data[i];
        return acc;
    };

    Tape<double> tape;
    auto x = tape.input(in0);
    Kernel<double> kg(1, 1, 3, 3);
    ConvRef<double> ref;
    ref.kernel = &k0;
    ref.kernel_grad = &kg;
    auto y = tape.conv2d(x, ref);
    tape.backward_from(y, w);

    const double rel_in = max_grad_rel_error(
        in0, [&](const Tensor<double>& t) { return loss_of(t, k0); }, tape.grad(x));
    CHECK(rel_in < 1e-6);

    double worst_k = 0.0;
    Kernel<double> probe = k0;
    for (std::size_t i = 0; i < probe.data.size(); ++i) {
        const double keep = probe.data[i];
        auto eval = [&](double v) {
            probe.data[i] = v;
            return loss_of(in0, probe);
        };
        const double fd = central_diff(eval, keep);
        probe.data[i] = keep;
        const double denom = std::max({std::abs(fd), std::abs(kg.data[i]), 1e-8});
        worst_k = std::max(worst_k, std::abs(fd - kg.data[i]) / denom);
    }
    CHECK(worst_k < 1e-6);
}

TEST_CASE("conv2d backward is additive in the upstream gradient") {
    Rng rng(13);
    const Tensor<double> in0 = random_tensor(rng, 2, 5, 5);
    Kernel<double> k = random_kernel(rng, 3, 2, 3, 3, 1, Padding::same_zero);
    const Tensor<double> ua = random_tensor(rng, 3, 5, 5);
    const Tensor<double> ub = random_tensor(rng, 3, 5, 5);
    Tensor<double> uab = ua;
    for (std::size_t i = 0; i < uab.data.size(); ++i) uab.data[i] += ub.data[i];

    auto grad_for = [&](const Tensor<double>& up) {
        Tape<double> tape;
        auto x = tape.input(in0);
        ConvRef<double> ref;
        ref.kernel = &k;
        auto y = tape.conv2d(x, ref);
        tape.backward_from(y, up);
        return tape.grad(x);
    };
    const Tensor<double> ga = grad_for(ua);
    const Tensor<double> gb = grad_for(ub);
    const Tensor<double> gab = grad_for(uab);
    for (std::size_t i = 0; i < gab.data.size(); ++i)
        CHECK(gab.data[i] == doctest::Approx(ga.data[i] + gb.data[i]).epsilon(1e-12));
}

TEST_CASE("avg_pool2 window means") {
    Tape<double> tape;
    SUBCASE("constant stays constant") {
        auto x = tape.input(Tensor<double>(2, 4, 4, 3.5));
        auto y = tape.avg_pool2(x);
        for (double v : tape.value(y).data) CHECK(v == 3.5);
    }
    SUBCASE("2x2 example") {
        Tensor<double> t(1, 2, 2);
        t.data = {1, 2, 3, 4};
        auto y = tape.avg_pool2(tape.input(t));
        CHECK(tape.value(y).at(0, 0, 0) == 2.5);
    }
    SUBCASE("random 6x6 against direct window means, odd trailing column dropped") {
        Rng rng(23);
        const Tensor<double> t = random_tensor(rng, 1, 6, 7);
        auto y = tape.avg_pool2(tape.input(t));
        const Tensor<double>& v = tape.value(y);
        REQUIRE(v.rows == 3);
        REQUIRE(v.cols == 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double mean = (t.at(0, 2 * r, 2 * c) + t.at(0, 2 * r, 2 * c + 1) +
                                     t.at(0, 2 * r + 1, 2 * c) +
                                     t.at(0, 2 * r + 1, 2 * c + 1)) /
                                    4.0;
                CHECK(v.at(0, r, c) == doctest::Approx(mean).epsilon(1e-15));
            }
    }
    SUBCASE("input smaller than the window fails") {
        auto x = tape.input(Tensor<double>(1, 1, 4));
        CHECK_THROWS_AS(tape.avg_pool2(x), DimensionError);
    }
}

TEST_CASE("bilinear upsample: align-corners examples") {
    Tape<double> tape;
    SUBCASE("constant input") {
        auto y = tape.upsample_bilinear2(tape.input(Tensor<double>(1, 2, 2, 4.0)), 5, 5);
        for (double v : tape.value(y).data) CHECK(v == 4.0);
    }
    SUBCASE("2x2 -> 3x3 hand-applied formula") {
        Tensor<double> t(1, 2, 2);
        t.data = {0, 1, 2, 3};
        auto y = tape.upsample_bilinear2(tape.input(t), 3, 3);
        const std::vector<double> want{0, 0.5, 1, 1, 1.5, 2, 2, 2.5, 3};
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(tape.value(y).data[i] == doctest::Approx(want[i]).epsilon(1e-15));
    }
    SUBCASE("linear ramps are reproduced exactly, odd target") {
        Tensor<double> t(1, 3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t.at(0, r, c) = 2.0 * r - 0.5 * c;
        auto y = tape.upsample_bilinear2(tape.input(t), 7, 5);
        const Tensor<double>& v = tape.value(y);
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 5; ++c) {
                const double rr = r * 2.0 / 6.0, cc = c * 2.0 / 4.0;
                CHECK(v.at(0, r, c) == doctest::Approx(2.0 * rr - 0.5 * cc).epsilon(1e-13));
            }
    }
    SUBCASE("shrinking target fails") {
        auto x = tape.input(Tensor<double>(1, 4, 4));
        CHECK_THROWS_AS(tape.upsample_bilinear2(x, 3, 4), DimensionError);
    }
}

TEST_CASE("concat/slice recover the originals and split gradients") {
    Rng rng(31);
    const Tensor<double> a = random_tensor(rng, 2, 3, 3);
    const Tensor<double> b = random_tensor(rng, 3, 3, 3);
    Tape<double> tape;
    auto va = tape.input(a);
    auto vb = tape.input(b);
    auto cat = tape.concat_channels(va, vb);
    REQUIRE(tape.value(cat).channels == 5);
    auto sa = tape.slice_channels(cat, 0, 2);
    auto sb = tape.slice_channels(cat, 2, 3);
    CHECK(tape.value(sa).data == a.data);
    CHECK(tape.value(sb).data == b.data);

    auto loss = tape.sum_squares(cat);
    tape.backward(loss);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(tape.grad(va).data[i] == doctest::Approx(2.0 * a.data[i]));
    for (std::size_t i = 0; i < b.data.size(); ++i)
        CHECK(tape.grad(vb).data[i] == doctest::Approx(2.0 * b.data[i]));

    Tensor<double> mismatched(1, 4, 3);
    CHECK_THROWS_AS(tape.concat_channels(va, tape.leaf(mismatched)), DimensionError);
}

TEST_CASE("activations: values and finite-difference gradients") {
    Tensor<double> t(1, 1, 3);
    t.data = {-1.0, 0.0, 2.0};
    Tape<double> tape;
    SUBCASE("identity returns the same tensor") {
        auto y = tape.activation(tape.input(t), Activation::identity);
        CHECK(tape.value(y).data == t.data);
    }
    SUBCASE("relu clamps negatives") {
        auto y = tape.activation(tape.input(t), Activation::relu);
        CHECK(tape.value(y).data == std::vector<double>{0.0, 0.0, 2.0});
    }
    SUBCASE("tanh and swish gradients match finite differences") {
        Rng rng(41);
        for (Activation act : {Activation::tanh, Activation::swish}) {
            const Tensor<double> x0 = random_tensor(rng, 1, 4, 4, 2.0);
            Tape<double> tp;
            auto x = tp.input(x0);
            auto loss = tp.sum_squares(tp.activation(x, act));
            tp.backward(loss);
            const double rel = max_grad_rel_error(
                x0,
                [&](const Tensor<double>& probe) {
                    Tape<double> t2;
                    return t2.scalar(t2.sum_squares(t2.activation(t2.input(probe), act)));
                },
                tp.grad(x));
            CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("hadamard, scale_add, sum_squares: values and gradients") {
    Rng rng(43);
    const Tensor<double> a = random_tensor(rng, 1, 3, 3);
    const Tensor<double> b = random_tensor(rng, 1, 3, 3);
    Tape<double> tape;
    auto va = tape.input(a);
    auto vb = tape.leaf(b);

    SUBCASE("hadamard with all-ones is the identity") {
        auto y = tape.hadamard(va, tape.leaf(Tensor<double>(1, 3, 3, 1.0)));
        CHECK(tape.value(y).data == a.data);
    }
    SUBCASE("sum_squares full mask") {
        Tensor<double> t(1, 2, 2);
        t.data = {1, 2, 3, 4};
        CHECK(tape.scalar(tape.sum_squares(tape.leaf(t))) == 30.0);
    }
    SUBCASE("sum_squares gradient is 2a on the mask, 0 off it") {
        Tensor<double> mask(1, 3, 3);
        mask.at(0, 1, 1) = 1.0;
        mask.at(0, 0, 2) = 1.0;
        auto loss = tape.sum_squares(va, tape.leaf(mask));
        tape.backward(loss);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double want = mask.at(0, r, c) != 0.0 ? 2.0 * a.at(0, r, c) : 0.0;
                CHECK(tape.grad(va).at(0, r, c) == doctest::Approx(want));
            }
    }
    SUBCASE("scale_add value and gradient scaling") {
        auto y = tape.scale_add(va, vb, 2.5, -1.5);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            CHECK(tape.value(y).data[i] ==
                  doctest::Approx(2.5 * a.data[i] - 1.5 * b.data[i]));
        auto loss = tape.sum_squares(y);
        tape.backward(loss);
        const Tensor<double>& yv = tape.value(y);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            CHECK(tape.grad(va).data[i] == doctest::Approx(2.0 * yv.data[i] * 2.5));
    }
    SUBCASE("shape mismatches throw") {
        auto bad = tape.leaf(Tensor<double>(1, 2, 3));
        CHECK_THROWS_AS(tape.hadamard(va, bad), DimensionError);
        CHECK_THROWS_AS(tape.scale_add(va, bad, 1.0, 1.0), DimensionError);
    }
}

TEST_CASE("dilate embeds into the dual grid") {
    Tensor<double> t(1, 2, 2);
    t.data = {1, 2, 3, 4};  // [[a,b],[c,d]]
    Tape<double> tape;
    auto x = tape.input(t);
    auto y = tape.dilate(x);
    const std::vector<double> want{1, 0, 2, 0, 0, 0, 3, 0, 4};
    CHECK(tape.value(y).data == want);

    SUBCASE("zeros map to zeros and sums are preserved") {
        Rng rng(47);
        const Tensor<double> r = random_tensor(rng, 1, 4, 5);
        Tape<double> tp;
        auto d = tp.dilate(tp.leaf(r));
        double sum_in = 0.0, sum_out = 0.0;
        for (double v : r.data) sum_in += v;
        for (double v : tp.value(d).data) sum_out += v;
        CHECK(sum_in == doctest::Approx(sum_out).epsilon(1e-14));
        auto z = tp.dilate(tp.leaf(Tensor<double>(1, 3, 3)));
        for (double v : tp.value(z).data) CHECK(v == 0.0);
    }
    SUBCASE("gradient gathers the even positions") {
        auto loss = tape.sum_squares(y);
        tape.backward(loss);
        for (std::size_t i = 0; i < t.data.size(); ++i)
            CHECK(tape.grad(x).data[i] == doctest::Approx(2.0 * t.data[i]));
    }
}

TEST_CASE("gradient correctness across composed ops (property)") {
    // crop -> conv -> pool -> upsample -> concat -> hadamard -> sum_squares,
    // gradient vs central finite differences on randomized inputs
    Rng rng(53);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor<double> x0 = random_tensor(rng, 1, 8, 8);
        Kernel<double> k = random_kernel(rng, 2, 1, 3, 3, 1, Padding::same_zero, 0.7);
        const Tensor<double> w = random_tensor(rng, 4, 4, 4);

        auto scalar_of = [&](const Tensor<double>& probe) {
            Tape<double> tp;
            auto x = tp.input(probe);
            auto c = tp.crop(x, 0, 0, 8, 8);
            ConvRef<double> ref;
            ref.kernel = &k;
            auto y = tp.conv2d(c, ref);
            auto p = tp.avg_pool2(y);            // 2x4x4
            auto u = tp.upsample_bilinear2(p, 4, 4);
            auto cat = tp.concat_channels(p, u);  // 4x4x4
            auto hw = tp.hadamard(cat, tp.leaf(w));
            return tp.scalar(tp.sum_squares(hw));
        };

        Tape<double> tape;
        auto x = tape.input(x0);
        auto c = tape.crop(x, 0, 0, 8, 8);
        ConvRef<double> ref;
        ref.kernel = &k;
        auto y = tape.conv2d(c, ref);
        auto p = tape.avg_pool2(y);
        auto u = tape.upsample_bilinear2(p, 4, 4);
        auto cat = tape.concat_channels(p, u);
        auto hw = tape.hadamard(cat, tape.leaf(w));
        auto loss = tape.sum_squares(hw);
        tape.backward(loss);

        CHECK(max_grad_rel_error(x0, scalar_of, tape.grad(x)) < 1e-5);
    }
}

TEST_CASE("backward pass is linear in the upstream gradient through a composition") {
    Rng rng(59);
    const Tensor<double> x0 = random_tensor(rng, 1, 6, 6);
    Kernel<double> k = random_kernel(rng, 1, 1, 3, 3);
    const Tensor<double> up = random_tensor(rng, 1, 2, 2);
    auto run = [&](double scale) {
        Tape<double> tape;
        auto x = tape.input(x0);
        ConvRef<double> ref;
        ref.kernel = &k;
        auto y = tape.conv2d(x, ref);
        auto p = tape.avg_pool2(y);
        Tensor<double> u = up;
        for (double& v : u.data) v *= scale;
        tape.backward_from(p, u);
        return tape.grad(x);
    };
    const Tensor<double> g1 = run(1.0);
    const Tensor<double> g3 = run(3.0);
    for (std::size_t i = 0; i < g1.data.size(); ++i)
        CHECK(g3.data[i] == doctest::Approx(3.0 * g1.data[i]).epsilon(1e-13));
}
