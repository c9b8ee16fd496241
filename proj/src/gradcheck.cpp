#include "rrdncnn/gradcheck.hpp"

#include <cmath>
#include <cstddef>
#include <functional>

namespace rrdncnn {

namespace {

constexpr double kStep = 1e-3;

double rel_err(double analytic, double numeric, double scale) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= 1e-12 * scale) return 0.0;
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    return denom > 0.0 ? diff / denom : diff;
}

// Worst relative error between an analytic gradient buffer and central
// differences of the scalar objective over the same parameter buffer.
double check_buffer(std::vector<double>& params, const std::vector<double>& analytic,
                    const std::function<double()>& objective) {
    double grad_scale = 1.0;
    for (const double a : analytic) grad_scale = std::max(grad_scale, std::abs(a));
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + kStep;
        const double jp = objective();
        params[k] = saved - kStep;
        const double jm = objective();
        params[k] = saved;
        const double numeric = (jp - jm) / (2.0 * kStep);
        worst = std::max(worst, rel_err(analytic[k], numeric, grad_scale));
    }
    return worst;
}

double weighted_sum(const Tensor4T<double>& y, const Tensor4T<double>& g) {
    double acc = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) acc += y.data[k] * g.data[k];
    return acc;
}

}  // namespace

double finite_diff_check(const FdCase& fd, std::uint64_t seed) {
    const std::size_t total =
        static_cast<std::size_t>(fd.n) * fd.c * fd.h * fd.w;
    if (total > 4096)
        throw DimensionError("finite_diff_check: case too large (> 4096 elements)");

    Rng rng(seed);
    Tensor4T<double> x(fd.n, fd.c, fd.h, fd.w);
    fill_random_uniform(x, rng, -1.0, 1.0);

    if (fd.op == "conv2d" || fd.op == "deconv2d") {
        const bool transposed = (fd.op == "deconv2d");
        ConvWeightsT<double> w(fd.out_ch, fd.c, fd.kh, fd.kw, true);
        for (double& v : w.weights) v = rng.unit() * 2.0 - 1.0;
        for (double& v : w.bias) v = rng.unit() * 2.0 - 1.0;

        auto run = [&]() {
            return transposed ? deconv2d(x, w, fd.stride, fd.pad, fd.out_pad)
                              : conv2d(x, w, fd.stride, fd.pad);
        };
        const Tensor4T<double> y0 = run();
        Tensor4T<double> g(y0.n, y0.c, y0.h, y0.w);
        fill_random_uniform(g, rng, -1.0, 1.0);

        const GradBundleT<double> gb =
            transposed ? deconv2d_backward(x, w, fd.stride, fd.pad, fd.out_pad, g)
                       : conv2d_backward(x, w, fd.stride, fd.pad, g);

        auto objective = [&]() { return weighted_sum(run(), g); };
        double worst = check_buffer(x.data, gb.d_input.data, objective);
        worst = std::max(worst, check_buffer(w.weights, gb.d_weights, objective));
        worst = std::max(worst, check_buffer(w.bias, gb.d_bias, objective));
        return worst;
    }

    if (fd.op == "leaky_relu") {
        // keep every element away from the kink by more than the FD step
        for (double& v : x.data) {
            const double mag = 0.05 + 0.95 * rng.unit();
            v = rng.coin() ? mag : -mag;
        }
        Tensor4T<double> g(fd.n, fd.c, fd.h, fd.w);
        fill_random_uniform(g, rng, -1.0, 1.0);
        const Tensor4T<double> d = leaky_relu_backward(x, fd.slope, g);
        auto objective = [&]() { return weighted_sum(leaky_relu(x, fd.slope), g); };
        return check_buffer(x.data, d.data, objective);
    }

    if (fd.op == "add") {
        Tensor4T<double> b(fd.n, fd.c, fd.h, fd.w);
        fill_random_uniform(b, rng, -1.0, 1.0);
        Tensor4T<double> g(fd.n, fd.c, fd.h, fd.w);
        fill_random_uniform(g, rng, -1.0, 1.0);
        // backward routes g to both operands unchanged
        auto objective = [&]() { return weighted_sum(add(x, b), g); };
        double worst = check_buffer(x.data, g.data, objective);
        worst = std::max(worst, check_buffer(b.data, g.data, objective));
        return worst;
    }

    if (fd.op == "mse") {
        Tensor4T<double> target(fd.n, fd.c, fd.h, fd.w);
        fill_random_uniform(target, rng, -1.0, 1.0);
        const Tensor4T<double> d = mse_backward(x, target);
        auto objective = [&]() { return mse(x, target); };
        return check_buffer(x.data, d.data, objective);
    }

    throw ConfigError("finite_diff_check: unknown op id '" + fd.op + "'");
}

}  // namespace rrdncnn
