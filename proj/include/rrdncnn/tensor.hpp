#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rrdncnn/common.hpp"

namespace rrdncnn {

// Dense rank-4 array in n-major, then c, then h, then w order. Templated on
// the scalar so the gradient checker can run the exact same kernels in double
// precision; production code uses the float alias below.
template <typename T>
struct Tensor4T {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4T() = default;
    Tensor4T(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw DimensionError("Tensor4: all extents must be >= 1");
    }

    std::size_t size() const { return data.size(); }

    T& at(int b, int ch, int y, int x) {
        return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
    }
    const T& at(int b, int ch, int y, int x) const {
        return data[((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x];
    }

    bool same_shape(const Tensor4T& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

using Tensor4 = Tensor4T<float>;

// Convolution / transposed-convolution kernel bank. Weights are stored
// out_ch-major: weights[((o*in_ch + i)*kh + ky)*kw + kx]. For a transposed
// convolution out_ch/in_ch refer to the layer's own output/input channels.
template <typename T>
struct ConvWeightsT {
    int out_ch = 0, in_ch = 0, kh = 0, kw = 0;
    std::vector<T> weights;
    std::vector<T> bias;
    bool has_bias = true;

    ConvWeightsT() = default;
    ConvWeightsT(int oc, int ic, int kh_, int kw_, bool with_bias = true)
        : out_ch(oc), in_ch(ic), kh(kh_), kw(kw_),
          weights(static_cast<std::size_t>(oc) * ic * kh_ * kw_, T(0)),
          bias(static_cast<std::size_t>(oc), T(0)), has_bias(with_bias) {}

    std::size_t weight_count() const { return weights.size(); }
    std::size_t param_count() const {
        return weights.size() + (has_bias ? bias.size() : 0);
    }

    T& wt(int o, int i, int ky, int kx) {
        return weights[((static_cast<std::size_t>(o) * in_ch + i) * kh + ky) * kw + kx];
    }
    const T& wt(int o, int i, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(o) * in_ch + i) * kh + ky) * kw + kx];
    }
};

using ConvWeights = ConvWeightsT<float>;

// Gradients of one conv/deconv application; layouts mirror the operands.
template <typename T>
struct GradBundleT {
    Tensor4T<T> d_input;
    std::vector<T> d_weights;
    std::vector<T> d_bias;
};

using GradBundle = GradBundleT<float>;

namespace detail {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    const int num = in + 2 * pad - k;
    if (num < 0 || num % stride != 0)
        throw GeometryError("conv2d: output extent (" + std::to_string(in) +
                            "+2*" + std::to_string(pad) + "-" + std::to_string(k) +
                            ")/" + std::to_string(stride) + "+1 is not a positive integer");
    return num / stride + 1;
}

inline int deconv_out_extent(int in, int k, int stride, int pad, int out_pad) {
    return (in - 1) * stride - 2 * pad + k + out_pad;
}

}  // namespace detail

// 2-D convolution with zero padding. Accumulation order inside one output
// element is fixed: bias seed, then in_ch-major, then kh, then kw; results
// are bit-reproducible run to run. The inner loop runs over output columns
// so it vectorizes without reassociating any per-element sum.
template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& input, const ConvWeightsT<T>& w,
                   int stride, int pad) {
    if (input.c != w.in_ch)
        throw DimensionError("conv2d: input channels " + std::to_string(input.c) +
                             " != kernel in_ch " + std::to_string(w.in_ch));
    if (stride < 1) throw GeometryError("conv2d: stride must be positive");
    if (pad < 0) throw GeometryError("conv2d: padding must be non-negative");

    const int oh = detail::conv_out_extent(input.h, w.kh, stride, pad);
    const int ow = detail::conv_out_extent(input.w, w.kw, stride, pad);
    Tensor4T<T> out(input.n, w.out_ch, oh, ow);

    const int H = input.h, W = input.w;
    for (int b = 0; b < input.n; ++b) {
        for (int o = 0; o < w.out_ch; ++o) {
            const T bias_v = w.has_bias ? w.bias[o] : T(0);
            for (int oy = 0; oy < oh; ++oy) {
                T* orow = &out.at(b, o, oy, 0);
                for (int ox = 0; ox < ow; ++ox) orow[ox] = bias_v;
                for (int i = 0; i < w.in_ch; ++i) {
                    for (int ky = 0; ky < w.kh; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        const T* irow = &input.at(b, i, iy, 0);
                        const T* wrow = &w.wt(o, i, ky, 0);
                        for (int kx = 0; kx < w.kw; ++kx) {
                            const T wv = wrow[kx];
                            // valid ox range: 0 <= ox*stride + kx - pad < W
                            int lo = 0;
                            if (pad > kx) lo = (pad - kx + stride - 1) / stride;
                            const int num = W - 1 + pad - kx;
                            if (num < 0) continue;
                            const int hi = std::min(ow - 1, num / stride);
                            const T* ish = irow + (kx - pad);
                            if (stride == 1) {
                                for (int ox = lo; ox <= hi; ++ox)
                                    orow[ox] += wv * ish[ox];
                            } else {
                                for (int ox = lo; ox <= hi; ++ox)
                                    orow[ox] += wv * ish[ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Gradients of sum(d_output .* conv2d(input, w)) w.r.t. input, weights, bias.
// Summation patterns are fixed, so results are bitwise deterministic.
template <typename T>
GradBundleT<T> conv2d_backward(const Tensor4T<T>& input, const ConvWeightsT<T>& w,
                               int stride, int pad, const Tensor4T<T>& d_output) {
    const int oh = detail::conv_out_extent(input.h, w.kh, stride, pad);
    const int ow = detail::conv_out_extent(input.w, w.kw, stride, pad);
    if (input.c != w.in_ch)
        throw DimensionError("conv2d_backward: input/kernel channel mismatch");
    if (d_output.n != input.n || d_output.c != w.out_ch || d_output.h != oh ||
        d_output.w != ow)
        throw DimensionError("conv2d_backward: d_output shape " + d_output.shape_str() +
                             " does not match forward output");

    GradBundleT<T> g;
    g.d_input = Tensor4T<T>(input.n, input.c, input.h, input.w);
    g.d_weights.assign(w.weights.size(), T(0));
    g.d_bias.assign(w.bias.size(), T(0));

    const int H = input.h, W = input.w;

    // d_input: gather form. For stride 1 each (o,ky,kx) contributes a shifted
    // row of d_output, which vectorizes; general strides fall back to the
    // per-element divisibility test.
    for (int b = 0; b < input.n; ++b) {
        for (int i = 0; i < input.c; ++i) {
            for (int iy = 0; iy < H; ++iy) {
                T* drow = &g.d_input.at(b, i, iy, 0);
                for (int o = 0; o < w.out_ch; ++o) {
                    for (int ky = 0; ky < w.kh; ++ky) {
                        const int oy_num = iy - ky + pad;
                        if (oy_num < 0 || oy_num % stride != 0) continue;
                        const int oy = oy_num / stride;
                        if (oy >= oh) continue;
                        const T* grow = &d_output.at(b, o, oy, 0);
                        const T* wrow = &w.wt(o, i, ky, 0);
                        for (int kx = 0; kx < w.kw; ++kx) {
                            const T wv = wrow[kx];
                            if (stride == 1) {
                                const int lo = std::max(0, kx - pad);
                                const int hi = std::min(W - 1, ow - 1 + kx - pad);
                                const T* gsh = grow + (pad - kx);
                                for (int ix = lo; ix <= hi; ++ix)
                                    drow[ix] += wv * gsh[ix];
                            } else {
                                for (int ix = 0; ix < W; ++ix) {
                                    const int ox_num = ix - kx + pad;
                                    if (ox_num < 0 || ox_num % stride != 0) continue;
                                    const int ox = ox_num / stride;
                                    if (ox >= ow) continue;
                                    drow[ix] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // d_weights and d_bias. Row sums use a fixed 16-lane partial pattern so
    // the loop vectorizes while staying deterministic.
    constexpr int kLanes = 16;
    for (int b = 0; b < input.n; ++b) {
        for (int o = 0; o < w.out_ch; ++o) {
            T bias_acc = T(0);
            for (int oy = 0; oy < oh; ++oy) {
                const T* grow = &d_output.at(b, o, oy, 0);
                T part[kLanes] = {};
                for (int ox = 0; ox < ow; ++ox) part[ox % kLanes] += grow[ox];
                T s = T(0);
                for (int l = 0; l < kLanes; ++l) s += part[l];
                bias_acc += s;
            }
            g.d_bias[o] += bias_acc;

            for (int i = 0; i < w.in_ch; ++i) {
                for (int ky = 0; ky < w.kh; ++ky) {
                    for (int kx = 0; kx < w.kw; ++kx) {
                        T part[kLanes] = {};
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            const T* grow = &d_output.at(b, o, oy, 0);
                            const T* irow = &input.at(b, i, iy, 0);
                            int lo = 0;
                            if (pad > kx) lo = (pad - kx + stride - 1) / stride;
                            const int num = W - 1 + pad - kx;
                            if (num < 0) continue;
                            const int hi = std::min(ow - 1, num / stride);
                            const T* ish = irow + (kx - pad);
                            if (stride == 1) {
                                for (int ox = lo; ox <= hi; ++ox)
                                    part[ox % kLanes] += grow[ox] * ish[ox];
                            } else {
                                for (int ox = lo; ox <= hi; ++ox)
                                    part[ox % kLanes] += grow[ox] * ish[ox * stride];
                            }
                        }
                        T s = T(0);
                        for (int l = 0; l < kLanes; ++l) s += part[l];
                        g.d_weights[((static_cast<std::size_t>(o) * w.in_ch + i) * w.kh + ky) * w.kw + kx] += s;
                    }
                }
            }
        }
    }
    return g;
}

// Transposed convolution (adjoint of conv2d with the same kernel geometry and
// channel roles swapped). Output extent per axis: (in-1)*stride - 2*pad + k
// + out_pad. Per-output-element accumulation order matches conv2d: bias,
// then in_ch-major, then kh, then kw.
template <typename T>
Tensor4T<T> deconv2d(const Tensor4T<T>& input, const ConvWeightsT<T>& w,
                     int stride, int pad, int out_pad) {
    if (input.c != w.in_ch)
        throw DimensionError("deconv2d: input channels " + std::to_string(input.c) +
                             " != kernel in_ch " + std::to_string(w.in_ch));
    if (stride < 1) throw GeometryError("deconv2d: stride must be positive");
    if (pad < 0) throw GeometryError("deconv2d: padding must be non-negative");
    if (out_pad < 0 || out_pad >= stride)
        throw GeometryError("deconv2d: out_pad must satisfy 0 <= out_pad < stride");

    const int oh = detail::deconv_out_extent(input.h, w.kh, stride, pad, out_pad);
    const int ow = detail::deconv_out_extent(input.w, w.kw, stride, pad, out_pad);
    if (oh < 1 || ow < 1)
        throw GeometryError("deconv2d: output extent is not positive");
    Tensor4T<T> out(input.n, w.out_ch, oh, ow);

    const int IH = input.h, IW = input.w;
    for (int b = 0; b < input.n; ++b) {
        for (int o = 0; o < w.out_ch; ++o) {
            const T bias_v = w.has_bias ? w.bias[o] : T(0);
            for (int oy = 0; oy < oh; ++oy) {
                T* orow = &out.at(b, o, oy, 0);
                for (int ox = 0; ox < ow; ++ox) orow[ox] = bias_v;
                for (int i = 0; i < w.in_ch; ++i) {
                    // valid taps satisfy oy = iy*stride - pad + ky
                    for (int ky = (oy + pad) % stride; ky < w.kh; ky += stride) {
                        const int iy = (oy + pad - ky) / stride;
                        if (iy < 0 || iy >= IH) continue;
                        const T* irow = &input.at(b, i, iy, 0);
                        const T* wrow = &w.wt(o, i, ky, 0);
                        for (int kx = 0; kx < w.kw; ++kx) {
                            const T wv = wrow[kx];
                            // ox = ix*stride - pad + kx for ix in [0, IW)
                            int ix0 = 0;
                            int ox0 = kx - pad;
                            if (ox0 < 0) {
                                const int step = (-ox0 + stride - 1) / stride;
                                ix0 += step;
                                ox0 += step * stride;
                            }
                            if (ix0 >= IW) continue;
                            const int cnt_out = (ox0 < ow) ? (ow - 1 - ox0) / stride + 1 : 0;
                            const int cnt = std::min(IW - ix0, cnt_out);
                            if (stride == 1) {
                                T* osh = orow + ox0;
                                const T* ish = irow + ix0;
                                for (int j = 0; j < cnt; ++j) osh[j] += wv * ish[j];
                            } else {
                                for (int j = 0; j < cnt; ++j)
                                    orow[ox0 + j * stride] += wv * irow[ix0 + j];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Gradients of sum(d_output .* deconv2d(input, w)).
template <typename T>
GradBundleT<T> deconv2d_backward(const Tensor4T<T>& input, const ConvWeightsT<T>& w,
                                 int stride, int pad, int out_pad,
                                 const Tensor4T<T>& d_output) {
    if (input.c != w.in_ch)
        throw DimensionError("deconv2d_backward: input/kernel channel mismatch");
    const int oh = detail::deconv_out_extent(input.h, w.kh, stride, pad, out_pad);
    const int ow = detail::deconv_out_extent(input.w, w.kw, stride, pad, out_pad);
    if (d_output.n != input.n || d_output.c != w.out_ch || d_output.h != oh ||
        d_output.w != ow)
        throw DimensionError("deconv2d_backward: d_output shape " + d_output.shape_str() +
                             " does not match forward output");

    GradBundleT<T> g;
    g.d_input = Tensor4T<T>(input.n, input.c, input.h, input.w);
    g.d_weights.assign(w.weights.size(), T(0));
    g.d_bias.assign(w.bias.size(), T(0));

    const int IH = input.h, IW = input.w;
    constexpr int kLanes = 16;

    for (int b = 0; b < input.n; ++b) {
        // d_input[b][i][iy][ix] = sum_{o,ky,kx} d_out[b][o][iy*s-p+ky][ix*s-p+kx] * w[o][i][ky][kx]
        for (int i = 0; i < input.c; ++i) {
            for (int iy = 0; iy < IH; ++iy) {
                T* drow = &g.d_input.at(b, i, iy, 0);
                for (int o = 0; o < w.out_ch; ++o) {
                    for (int ky = 0; ky < w.kh; ++ky) {
                        const int oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= oh) continue;
                        const T* grow = &d_output.at(b, o, oy, 0);
                        const T* wrow = &w.wt(o, i, ky, 0);
                        for (int kx = 0; kx < w.kw; ++kx) {
                            const T wv = wrow[kx];
                            int ix0 = 0;
                            int ox0 = kx - pad;
                            if (ox0 < 0) {
                                const int step = (-ox0 + stride - 1) / stride;
                                ix0 += step;
                                ox0 += step * stride;
                            }
                            if (ix0 >= IW || ox0 >= ow) continue;
                            const int cnt = std::min(IW - ix0, (ow - 1 - ox0) / stride + 1);
                            if (stride == 1) {
                                const T* gsh = grow + ox0;
                                T* dsh = drow + ix0;
                                for (int j = 0; j < cnt; ++j) dsh[j] += wv * gsh[j];
                            } else {
                                for (int j = 0; j < cnt; ++j)
                                    drow[ix0 + j] += wv * grow[ox0 + j * stride];
                            }
                        }
                    }
                }
            }
        }

        // d_weights[o][i][ky][kx] = sum_{iy,ix} input[b][i][iy][ix] * d_out[b][o][iy*s-p+ky][ix*s-p+kx]
        for (int o = 0; o < w.out_ch; ++o) {
            T bias_acc = T(0);
            for (int oy = 0; oy < oh; ++oy) {
                const T* grow = &d_output.at(b, o, oy, 0);
                T part[kLanes] = {};
                for (int ox = 0; ox < ow; ++ox) part[ox % kLanes] += grow[ox];
                T s = T(0);
                for (int l = 0; l < kLanes; ++l) s += part[l];
                bias_acc += s;
            }
            g.d_bias[o] += bias_acc;

            for (int i = 0; i < w.in_ch; ++i) {
                for (int ky = 0; ky < w.kh; ++ky) {
                    for (int kx = 0; kx < w.kw; ++kx) {
                        T part[kLanes] = {};
                        for (int iy = 0; iy < IH; ++iy) {
                            const int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= oh) continue;
                            const T* irow = &input.at(b, i, iy, 0);
                            const T* grow = &d_output.at(b, o, oy, 0);
                            int ix0 = 0;
                            int ox0 = kx - pad;
                            if (ox0 < 0) {
                                const int step = (-ox0 + stride - 1) / stride;
                                ix0 += step;
                                ox0 += step * stride;
                            }
                            if (ix0 >= IW || ox0 >= ow) continue;
                            const int cnt = std::min(IW - ix0, (ow - 1 - ox0) / stride + 1);
                            if (stride == 1) {
                                const T* gsh = grow + ox0;
                                const T* ish = irow + ix0;
                                for (int j = 0; j < cnt; ++j)
                                    part[j % kLanes] += ish[j] * gsh[j];
                            } else {
                                for (int j = 0; j < cnt; ++j)
                                    part[j % kLanes] += irow[ix0 + j] * grow[ox0 + j * stride];
                            }
                        }
                        T s = T(0);
                        for (int l = 0; l < kLanes; ++l) s += part[l];
                        g.d_weights[((static_cast<std::size_t>(o) * w.in_ch + i) * w.kh + ky) * w.kw + kx] += s;
                    }
                }
            }
        }
    }
    return g;
}

// Elementwise leaky ReLU: y = x for x >= 0, slope*x otherwise. The
// subgradient at exactly 0 uses factor 1.
template <typename T>
Tensor4T<T> leaky_relu(const Tensor4T<T>& input, T slope) {
    Tensor4T<T> out(input.n, input.c, input.h, input.w);
    const std::size_t total = input.size();
    const T* src = input.data.data();
    T* dst = out.data.data();
    for (std::size_t k = 0; k < total; ++k)
        dst[k] = src[k] >= T(0) ? src[k] : slope * src[k];
    return out;
}

template <typename T>
Tensor4T<T> leaky_relu_backward(const Tensor4T<T>& input, T slope,
                                const Tensor4T<T>& d_output) {
    if (!input.same_shape(d_output))
        throw DimensionError("leaky_relu_backward: shape mismatch");
    Tensor4T<T> d_in(input.n, input.c, input.h, input.w);
    const std::size_t total = input.size();
    const T* src = input.data.data();
    const T* g = d_output.data.data();
    T* dst = d_in.data.data();
    for (std::size_t k = 0; k < total; ++k)
        dst[k] = src[k] >= T(0) ? g[k] : slope * g[k];
    return d_in;
}

// Elementwise sum; backward routes d_output unchanged to both operands.
template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    if (!a.same_shape(b))
        throw DimensionError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor4T<T> out(a.n, a.c, a.h, a.w);
    const std::size_t total = a.size();
    for (std::size_t k = 0; k < total; ++k) out.data[k] = a.data[k] + b.data[k];
    return out;
}

// In-place accumulate: dst += src. Used when several branches feed one node.
template <typename T>
void add_into(Tensor4T<T>& dst, const Tensor4T<T>& src) {
    if (!dst.same_shape(src))
        throw DimensionError("add_into: shape mismatch");
    const std::size_t total = dst.size();
    for (std::size_t k = 0; k < total; ++k) dst.data[k] += src.data[k];
}

// Mean square error over all elements; the sum runs in double regardless of T.
template <typename T>
double mse(const Tensor4T<T>& pred, const Tensor4T<T>& target) {
    if (!pred.same_shape(target))
        throw DimensionError("mse: shape mismatch " + pred.shape_str() + " vs " +
                             target.shape_str());
    double acc = 0.0;
    const std::size_t total = pred.size();
    for (std::size_t k = 0; k < total; ++k) {
        const double d = static_cast<double>(pred.data[k]) - static_cast<double>(target.data[k]);
        acc += d * d;
    }
    return acc / static_cast<double>(total);
}

// d/d_pred of mse: (2/N)(pred - target).
template <typename T>
Tensor4T<T> mse_backward(const Tensor4T<T>& pred, const Tensor4T<T>& target) {
    if (!pred.same_shape(target))
        throw DimensionError("mse_backward: shape mismatch");
    Tensor4T<T> g(pred.n, pred.c, pred.h, pred.w);
    const std::size_t total = pred.size();
    const T scale = T(2) / static_cast<T>(total);
    for (std::size_t k = 0; k < total; ++k)
        g.data[k] = scale * (pred.data[k] - target.data[k]);
    return g;
}

// Float overloads backed by vectorized kernels (src/conv_fast.cpp); overload
// resolution prefers them over the templates for float operands. Geometries
// outside the fast set fall back to the templates, so behavior is identical.
Tensor4 conv2d(const Tensor4& input, const ConvWeights& w, int stride, int pad);
GradBundle conv2d_backward(const Tensor4& input, const ConvWeights& w, int stride,
                           int pad, const Tensor4& d_output);
Tensor4 deconv2d(const Tensor4& input, const ConvWeights& w, int stride, int pad,
                 int out_pad);
GradBundle deconv2d_backward(const Tensor4& input, const ConvWeights& w, int stride,
                             int pad, int out_pad, const Tensor4& d_output);

template <typename T>
bool all_finite(const Tensor4T<T>& t) {
    for (const T v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
void fill_random_uniform(Tensor4T<T>& t, Rng& rng, T lo, T hi) {
    for (T& v : t.data)
        v = lo + static_cast<T>(rng.unit()) * (hi - lo);
}

}  // namespace rrdncnn
