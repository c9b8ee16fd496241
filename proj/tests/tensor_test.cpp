#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "rrdncnn/gradcheck.hpp"
#include "rrdncnn/tensor.hpp"

using namespace rrdncnn;

namespace {

// Independent direct-convolution oracle: plain quadruple loop over output
// elements, explicit zero padding, double accumulation. Shares no code with
// the production kernel.
Tensor4T<double> conv2d_oracle(const Tensor4T<double>& in, const ConvWeightsT<double>& w,
                               int stride, int pad) {
    const int oh = (in.h + 2 * pad - w.kh) / stride + 1;
    const int ow = (in.w + 2 * pad - w.kw) / stride + 1;
    Tensor4T<double> out(in.n, w.out_ch, oh, ow);
    for (int b = 0; b < in.n; ++b)
        for (int o = 0; o < w.out_ch; ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = w.has_bias ? w.bias[o] : 0.0;
                    for (int i = 0; i < w.in_ch; ++i)
                        for (int ky = 0; ky < w.kh; ++ky)
                            for (int kx = 0; kx < w.kw; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                const double v =
                                    (iy >= 0 && iy < in.h && ix >= 0 && ix < in.w)
                                        ? in.at(b, i, iy, ix)
                                        : 0.0;
                                acc += v * w.wt(o, i, ky, kx);
                            }
                    out.at(b, o, oy, ox) = acc;
                }
    return out;
}

// Independent transposed-convolution oracle: scatter every input element
// into the output canvas at oy = iy*s - p + ky, ox = ix*s - p + kx.
Tensor4T<double> deconv2d_oracle(const Tensor4T<double>& in, const ConvWeightsT<double>& w,
                                 int stride, int pad, int out_pad) {
    const int oh = (in.h - 1) * stride - 2 * pad + w.kh + out_pad;
    const int ow = (in.w - 1) * stride - 2 * pad + w.kw + out_pad;
    Tensor4T<double> out(in.n, w.out_ch, oh, ow);
    for (int b = 0; b < in.n; ++b)
        for (int o = 0; o < w.out_ch; ++o) {
            if (w.has_bias)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) out.at(b, o, oy, ox) = w.bias[o];
            for (int i = 0; i < w.in_ch; ++i)
                for (int iy = 0; iy < in.h; ++iy)
                    for (int ix = 0; ix < in.w; ++ix)
                        for (int ky = 0; ky < w.kh; ++ky)
                            for (int kx = 0; kx < w.kw; ++kx) {
                                const int oy = iy * stride - pad + ky;
                                const int ox = ix * stride - pad + kx;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                out.at(b, o, oy, ox) += in.at(b, i, iy, ix) * w.wt(o, i, ky, kx);
                            }
        }
    return out;
}

Tensor4T<double> random_tensor(int n, int c, int h, int w, Rng& rng) {
    Tensor4T<double> t(n, c, h, w);
    fill_random_uniform(t, rng, -1.0, 1.0);
    return t;
}

ConvWeightsT<double> random_weights(int oc, int ic, int kh, int kw, Rng& rng,
                                    bool with_bias = true) {
    ConvWeightsT<double> w(oc, ic, kh, kw, with_bias);
    for (double& v : w.weights) v = rng.unit() * 2.0 - 1.0;
    if (with_bias)
        for (double& v : w.bias) v = rng.unit() * 2.0 - 1.0;
    return w;
}

double max_abs_diff(const Tensor4T<double>& a, const Tensor4T<double>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a.data[k] - b.data[k]));
    return m;
}

double dot(const Tensor4T<double>& a, const Tensor4T<double>& b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a.data[k] * b.data[k];
    return acc;
}

}  // namespace

TEST_CASE("conv2d: 3x3 all-ones input and kernel, pad 1") {
    Tensor4 x(1, 1, 3, 3);
    for (float& v : x.data) v = 1.0f;
    ConvWeights w(1, 1, 3, 3, false);
    for (float& v : w.weights) v = 1.0f;
    const Tensor4 y = conv2d(x, w, 1, 1);
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(9.0f));
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4.0f));
    CHECK(y.at(0, 0, 0, 2) == doctest::Approx(4.0f));
    CHECK(y.at(0, 0, 2, 0) == doctest::Approx(4.0f));
    CHECK(y.at(0, 0, 2, 2) == doctest::Approx(4.0f));
    CHECK(y.at(0, 0, 0, 1) == doctest::Approx(6.0f));
}

TEST_CASE("conv2d: zero weights and bias give zero output") {
    Rng rng(7);
    Tensor4 x(2, 3, 5, 4);
    fill_random_uniform(x, rng, -1.0f, 1.0f);
    ConvWeights w(4, 3, 3, 3, true);
    const Tensor4 y = conv2d(x, w, 1, 1);
    for (const float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d: random case matches the loop oracle") {
    Rng rng(42);
    const Tensor4T<double> x = random_tensor(2, 3, 7, 5, rng);
    const ConvWeightsT<double> w = random_weights(4, 3, 3, 3, rng);
    const Tensor4T<double> got = conv2d(x, w, 1, 1);
    const Tensor4T<double> want = conv2d_oracle(x, w, 1, 1);
    CHECK(max_abs_diff(got, want) < 1e-5);
}

TEST_CASE("conv2d: strided and asymmetric geometries match the oracle") {
    Rng rng(43);
    struct Geo { int h, w, kh, kw, stride, pad; };
    const Geo cases[] = {{7, 7, 3, 3, 2, 1}, {9, 5, 5, 3, 2, 2},
                         {6, 6, 2, 2, 2, 0}, {5, 5, 1, 1, 1, 0},
                         {8, 8, 5, 5, 1, 2}};
    for (const auto& g : cases) {
        CAPTURE(g.h);
        CAPTURE(g.kh);
        CAPTURE(g.stride);
        const Tensor4T<double> x = random_tensor(1, 2, g.h, g.w, rng);
        const ConvWeightsT<double> w = random_weights(3, 2, g.kh, g.kw, rng);
        const Tensor4T<double> got = conv2d(x, w, g.stride, g.pad);
        const Tensor4T<double> want = conv2d_oracle(x, w, g.stride, g.pad);
        CHECK(max_abs_diff(got, want) < 1e-9);
    }
}

TEST_CASE("conv2d: shape and geometry errors") {
    Tensor4 x(1, 2, 5, 5);
    ConvWeights w(1, 3, 3, 3);
    CHECK_THROWS_AS(conv2d(x, w, 1, 1), DimensionError);
    ConvWeights w2(1, 2, 2, 2);
    CHECK_THROWS_AS(conv2d(x, w2, 2, 0), GeometryError);  // (5-2)/2+1 not integral
    ConvWeights w3(1, 2, 3, 3);
    CHECK_THROWS_AS(conv2d(x, w3, 3, 0), GeometryError);
}

TEST_CASE("conv2d: linearity with zero bias") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor4T<double> x = random_tensor(1, 2, 6, 6, rng);
        const Tensor4T<double> y = random_tensor(1, 2, 6, 6, rng);
        const ConvWeightsT<double> w = random_weights(3, 2, 3, 3, rng, false);
        const double a = rng.unit() * 4.0 - 2.0;
        const double b = rng.unit() * 4.0 - 2.0;
        Tensor4T<double> mix(1, 2, 6, 6);
        for (std::size_t k = 0; k < mix.size(); ++k)
            mix.data[k] = a * x.data[k] + b * y.data[k];
        const Tensor4T<double> lhs = conv2d(mix, w, 1, 1);
        const Tensor4T<double> fx = conv2d(x, w, 1, 1);
        const Tensor4T<double> fy = conv2d(y, w, 1, 1);
        Tensor4T<double> rhs(lhs.n, lhs.c, lhs.h, lhs.w);
        for (std::size_t k = 0; k < rhs.size(); ++k)
            rhs.data[k] = a * fx.data[k] + b * fy.data[k];
        CHECK(max_abs_diff(lhs, rhs) < 1e-5);
    }
}

TEST_CASE("conv2d: forward is bitwise deterministic") {
    Rng rng(99);
    Tensor4 x(2, 3, 9, 9);
    fill_random_uniform(x, rng, -1.0f, 1.0f);
    ConvWeights w(4, 3, 3, 3);
    for (float& v : w.weights) v = static_cast<float>(rng.unit() - 0.5);
    for (float& v : w.bias) v = static_cast<float>(rng.unit() - 0.5);
    const Tensor4 y1 = conv2d(x, w, 1, 1);
    const Tensor4 y2 = conv2d(x, w, 1, 1);
    CHECK(std::memcmp(y1.data.data(), y2.data.data(), y1.size() * sizeof(float)) == 0);
}

TEST_CASE("conv2d_backward: zero upstream gradient zeroes every buffer") {
    Rng rng(5);
    const Tensor4T<double> x = random_tensor(1, 2, 5, 5, rng);
    const ConvWeightsT<double> w = random_weights(3, 2, 3, 3, rng);
    Tensor4T<double> g(1, 3, 5, 5);
    const GradBundleT<double> gb = conv2d_backward(x, w, 1, 1, g);
    for (const double v : gb.d_input.data) CHECK(v == 0.0);
    for (const double v : gb.d_weights) CHECK(v == 0.0);
    for (const double v : gb.d_bias) CHECK(v == 0.0);
}

TEST_CASE("conv2d_backward: 1x1 scalar case reduces to the product rule") {
    Tensor4 x(1, 1, 1, 1);
    x.at(0, 0, 0, 0) = 3.5f;
    ConvWeights w(1, 1, 1, 1);
    w.weights[0] = -2.0f;
    w.bias[0] = 0.25f;
    Tensor4 g(1, 1, 1, 1);
    g.at(0, 0, 0, 0) = 1.0f;
    const GradBundle gb = conv2d_backward(x, w, 1, 0, g);
    CHECK(gb.d_input.at(0, 0, 0, 0) == doctest::Approx(-2.0f));
    CHECK(gb.d_weights[0] == doctest::Approx(3.5f));
    CHECK(gb.d_bias[0] == doctest::Approx(1.0f));
}

TEST_CASE("conv2d_backward: rejects mismatched d_output") {
    Rng rng(6);
    const Tensor4T<double> x = random_tensor(1, 2, 5, 5, rng);
    const ConvWeightsT<double> w = random_weights(3, 2, 3, 3, rng);
    Tensor4T<double> bad(1, 3, 4, 5);
    CHECK_THROWS_AS(conv2d_backward(x, w, 1, 1, bad), DimensionError);
}

TEST_CASE("deconv2d: k3 s2 p1 op1 exactly doubles spatial extents") {
    Rng rng(8);
    for (int h = 1; h <= 9; ++h) {
        for (int w_ext : {1, 3, 6}) {
            const Tensor4T<double> x = random_tensor(1, 2, h, w_ext, rng);
            const ConvWeightsT<double> w = random_weights(2, 2, 3, 3, rng);
            const Tensor4T<double> y = deconv2d(x, w, 2, 1, 1);
            CHECK(y.h == 2 * h);
            CHECK(y.w == 2 * w_ext);
        }
    }
    // the stated formula: (5-1)*2 - 2 + 3 + 1 = 10
    const Tensor4T<double> x = random_tensor(1, 1, 5, 5, rng);
    const ConvWeightsT<double> w = random_weights(1, 1, 3, 3, rng);
    CHECK(deconv2d(x, w, 2, 1, 1).h == 10);
}

TEST_CASE("deconv2d: zero weights give zero output") {
    Rng rng(9);
    Tensor4 x(1, 2, 4, 4);
    fill_random_uniform(x, rng, -1.0f, 1.0f);
    ConvWeights w(3, 2, 3, 3, true);
    const Tensor4 y = deconv2d(x, w, 2, 1, 1);
    for (const float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("deconv2d: matches the scatter oracle across geometries") {
    Rng rng(44);
    struct Geo { int h, w, kh, kw, stride, pad, out_pad; };
    const Geo cases[] = {{5, 5, 3, 3, 2, 1, 1}, {4, 6, 3, 3, 2, 1, 0},
                         {3, 3, 4, 4, 2, 1, 0}, {6, 5, 3, 3, 1, 1, 0},
                         {2, 2, 5, 5, 3, 2, 2}};
    for (const auto& g : cases) {
        CAPTURE(g.stride);
        CAPTURE(g.out_pad);
        const Tensor4T<double> x = random_tensor(2, 2, g.h, g.w, rng);
        const ConvWeightsT<double> w = random_weights(3, 2, g.kh, g.kw, rng);
        const Tensor4T<double> got = deconv2d(x, w, g.stride, g.pad, g.out_pad);
        const Tensor4T<double> want = deconv2d_oracle(x, w, g.stride, g.pad, g.out_pad);
        CHECK(max_abs_diff(got, want) < 1e-9);
    }
}

TEST_CASE("deconv2d: adjoint identity against conv2d") {
    // <deconv_w(x), y> == <x, conv_{w~}(y)> where w~ swaps channel roles.
    Rng rng(45);
    struct Geo { int h, w, k, stride, pad; };
    const Geo cases[] = {{5, 5, 3, 2, 1}, {4, 4, 3, 1, 1}, {3, 5, 4, 2, 1}};
    for (const auto& g : cases) {
        const Tensor4T<double> x = random_tensor(1, 2, g.h, g.w, rng);
        const ConvWeightsT<double> w = random_weights(3, 2, g.k, g.k, rng, false);
        const Tensor4T<double> dx = deconv2d(x, w, g.stride, g.pad, 0);
        Tensor4T<double> y = random_tensor(1, 3, dx.h, dx.w, rng);

        ConvWeightsT<double> wt(w.in_ch, w.out_ch, g.k, g.k, false);
        for (int o = 0; o < w.out_ch; ++o)
            for (int i = 0; i < w.in_ch; ++i)
                for (int ky = 0; ky < g.k; ++ky)
                    for (int kx = 0; kx < g.k; ++kx)
                        wt.wt(i, o, ky, kx) = w.wt(o, i, ky, kx);
        const Tensor4T<double> cy = conv2d(y, wt, g.stride, g.pad);
        CHECK(dot(dx, y) == doctest::Approx(dot(x, cy)).epsilon(1e-4));
    }
}

TEST_CASE("deconv2d: out_pad >= stride is a geometry error") {
    Tensor4 x(1, 1, 4, 4);
    ConvWeights w(1, 1, 3, 3);
    CHECK_THROWS_AS(deconv2d(x, w, 2, 1, 2), GeometryError);
    CHECK_THROWS_AS(deconv2d(x, w, 1, 1, 1), GeometryError);
}

TEST_CASE("deconv2d_backward: zero upstream gradient, scalar product rule") {
    Rng rng(10);
    const Tensor4T<double> x = random_tensor(1, 2, 4, 4, rng);
    const ConvWeightsT<double> w = random_weights(2, 2, 3, 3, rng);
    Tensor4T<double> g(1, 2, 8, 8);
    const GradBundleT<double> gb = deconv2d_backward(x, w, 2, 1, 1, g);
    for (const double v : gb.d_input.data) CHECK(v == 0.0);
    for (const double v : gb.d_weights) CHECK(v == 0.0);

    Tensor4 xs(1, 1, 1, 1);
    xs.at(0, 0, 0, 0) = 1.5f;
    ConvWeights ws(1, 1, 1, 1);
    ws.weights[0] = 4.0f;
    Tensor4 gs(1, 1, 1, 1);
    gs.at(0, 0, 0, 0) = 1.0f;
    const GradBundle gbs = deconv2d_backward(xs, ws, 1, 0, 0, gs);
    CHECK(gbs.d_input.at(0, 0, 0, 0) == doctest::Approx(4.0f));
    CHECK(gbs.d_weights[0] == doctest::Approx(1.5f));
    CHECK(gbs.d_bias[0] == doctest::Approx(1.0f));
}

TEST_CASE("leaky_relu: values and gradient routing") {
    Tensor4 x(1, 1, 1, 4);
    x.data = {2.0f, -2.0f, 0.0f, -3.0f};
    const Tensor4 y = leaky_relu(x, 0.01f);
    CHECK(y.data[0] == 2.0f);
    CHECK(y.data[1] == doctest::Approx(-0.02f));
    CHECK(y.data[2] == 0.0f);

    Tensor4 g(1, 1, 1, 4);
    g.data = {1.0f, 1.0f, 1.0f, 2.0f};
    const Tensor4 d = leaky_relu_backward(x, 0.01f, g);
    CHECK(d.data[0] == 1.0f);
    CHECK(d.data[1] == doctest::Approx(0.01f));
    CHECK(d.data[2] == 1.0f);  // subgradient convention at exactly 0
    CHECK(d.data[3] == doctest::Approx(0.02f));
}

TEST_CASE("add: identity, commutativity, backward routing") {
    Rng rng(12);
    Tensor4 a(1, 2, 3, 3), b(1, 2, 3, 3), zero(1, 2, 3, 3);
    fill_random_uniform(a, rng, -1.0f, 1.0f);
    fill_random_uniform(b, rng, -1.0f, 1.0f);

    const Tensor4 a0 = add(a, zero);
    CHECK(std::memcmp(a0.data.data(), a.data.data(), a.size() * sizeof(float)) == 0);

    const Tensor4 ab = add(a, b);
    const Tensor4 ba = add(b, a);
    for (std::size_t k = 0; k < ab.size(); ++k) CHECK(ab.data[k] == ba.data[k]);

    Tensor4 bad(1, 2, 3, 4);
    CHECK_THROWS_AS(add(a, bad), DimensionError);
    // backward is the upstream gradient itself for both operands: nothing to
    // compute, asserted by the api contract (see finite_diff_check "add").
}

TEST_CASE("mse: values and backward") {
    Tensor4 p(1, 1, 1, 2), t(1, 1, 1, 2);
    p.data = {0.0f, 0.0f};
    t.data = {1.0f, -1.0f};
    CHECK(mse(p, t) == doctest::Approx(1.0));
    CHECK(mse(t, t) == 0.0);

    const Tensor4 g = mse_backward(p, t);
    CHECK(g.data[0] == doctest::Approx(-1.0f));  // (2/2)(0-1)
    CHECK(g.data[1] == doctest::Approx(1.0f));

    Tensor4 bad(1, 1, 2, 1);
    CHECK_THROWS_AS(mse(p, bad), DimensionError);
}

TEST_CASE("finite_diff_check: stated cases") {
    FdCase conv{"conv2d", 1, 2, 5, 5, 2, 3, 3, 1, 1, 0, 0.01};
    CHECK(finite_diff_check(conv, 1234) <= 1e-4);

    FdCase adds{"add", 1, 2, 4, 4};
    CHECK(finite_diff_check(adds, 77) <= 1e-12);

    FdCase lrelu{"leaky_relu", 1, 2, 4, 4};
    CHECK(finite_diff_check(lrelu, 31) <= 1e-6);

    FdCase unknown{"softmax", 1, 1, 2, 2};
    CHECK_THROWS_AS(finite_diff_check(unknown, 1), ConfigError);

    FdCase toobig{"add", 1, 1, 65, 64};
    CHECK_THROWS_AS(finite_diff_check(toobig, 1), DimensionError);
}

TEST_CASE("fast float kernels agree with the reference templates") {
    // conv geometries used by the network plus block tails
    struct Geo { int n, cin, h, w, cout, k, stride, pad, out_pad; bool deconv; };
    const Geo cases[] = {
        {2, 64, 9, 11, 64, 3, 1, 1, 0, false},  // body conv
        {1, 1, 12, 12, 64, 5, 1, 2, 0, false},  // stem
        {2, 64, 7, 7, 1, 3, 1, 1, 0, false},    // residual head
        {1, 5, 9, 13, 3, 3, 1, 1, 0, false},    // channel tails, odd width
        {1, 3, 8, 8, 6, 3, 1, 0, 0, false},     // valid conv
        {2, 64, 5, 6, 64, 3, 2, 1, 1, true},    // skip deconv
        {1, 1, 7, 9, 1, 3, 2, 1, 1, true},      // image upsampler
        {1, 5, 6, 5, 3, 3, 2, 1, 0, true},      // out_pad 0
    };
    Rng rng(2024);
    for (const auto& g : cases) {
        CAPTURE(g.cin);
        CAPTURE(g.cout);
        CAPTURE(g.deconv);
        Tensor4 x(g.n, g.cin, g.h, g.w);
        fill_random_uniform(x, rng, -1.0f, 1.0f);
        ConvWeights w(g.cout, g.cin, g.k, g.k);
        for (float& v : w.weights) v = static_cast<float>(rng.unit() - 0.5);
        for (float& v : w.bias) v = static_cast<float>(rng.unit() - 0.5);

        // the reference path via the templates, explicitly
        const Tensor4 want = g.deconv
                                 ? deconv2d<float>(x, w, g.stride, g.pad, g.out_pad)
                                 : conv2d<float>(x, w, g.stride, g.pad);
        const Tensor4 got = g.deconv ? deconv2d(x, w, g.stride, g.pad, g.out_pad)
                                     : conv2d(x, w, g.stride, g.pad);
        REQUIRE(got.same_shape(want));
        float worst = 0.0f;
        for (std::size_t k = 0; k < got.size(); ++k)
            worst = std::max(worst, std::abs(got.data[k] - want.data[k]));
        CHECK(worst <= 1e-5f);

        Tensor4 dout(want.n, want.c, want.h, want.w);
        fill_random_uniform(dout, rng, -1.0f, 1.0f);
        const GradBundle gw = g.deconv
                                  ? deconv2d_backward<float>(x, w, g.stride, g.pad, g.out_pad, dout)
                                  : conv2d_backward<float>(x, w, g.stride, g.pad, dout);
        const GradBundle gg = g.deconv
                                  ? deconv2d_backward(x, w, g.stride, g.pad, g.out_pad, dout)
                                  : conv2d_backward(x, w, g.stride, g.pad, dout);
        float wi = 0.0f, ww = 0.0f, wb = 0.0f;
        for (std::size_t k = 0; k < gw.d_input.size(); ++k)
            wi = std::max(wi, std::abs(gw.d_input.data[k] - gg.d_input.data[k]));
        for (std::size_t k = 0; k < gw.d_weights.size(); ++k)
            ww = std::max(ww, std::abs(gw.d_weights[k] - gg.d_weights[k]));
        for (std::size_t k = 0; k < gw.d_bias.size(); ++k)
            wb = std::max(wb, std::abs(gw.d_bias[k] - gg.d_bias[k]));
        CHECK(wi <= 1e-4f);
        CHECK(ww <= 1e-3f);  // long reductions, different partial-sum patterns
        CHECK(wb <= 1e-3f);
    }
}

TEST_CASE("finite_diff_check: every primitive over 20 seeds") {
    const FdCase cases[] = {
        {"conv2d", 1, 2, 5, 5, 3, 3, 3, 1, 1, 0, 0.01},
        {"conv2d", 1, 1, 7, 7, 2, 3, 3, 2, 1, 0, 0.01},
        {"deconv2d", 1, 2, 4, 4, 3, 3, 3, 2, 1, 1, 0.01},
        {"deconv2d", 1, 2, 4, 4, 2, 3, 3, 1, 1, 0, 0.01},
        {"leaky_relu", 1, 3, 5, 5, 0, 3, 3, 1, 1, 0, 0.01},
        {"add", 2, 2, 4, 4, 0, 3, 3, 1, 1, 0, 0.01},
        {"mse", 1, 2, 5, 5, 0, 3, 3, 1, 1, 0, 0.01},
    };
    for (const auto& fd : cases) {
        CAPTURE(fd.op);
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
            worst = std::max(worst, finite_diff_check(fd, seed));
        CHECK(worst <= 1e-4);
        if (fd.op == "mse") CHECK(worst <= 1e-6);
    }
}
