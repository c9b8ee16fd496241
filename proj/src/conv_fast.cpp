// Vectorized float kernels behind the conv2d/deconv2d overloads. Each output
// element is still accumulated in the contract order (bias, then in_ch-major,
// then kh, then kw); tiling only blocks across *distinct* output elements, so
// results stay deterministic. Geometries outside the fast set fall back to
// the reference templates in tensor.hpp.
//
// Tap positions are compile-time tables: the tap loop must fully unroll into
// affine address arithmetic or gcc refuses to vectorize the column loop.

#include <array>
#include <cstdlib>
#include <cstring>

#include "rrdncnn/tensor.hpp"

namespace rrdncnn {

namespace {

bool fast_enabled() {
    static const bool v = std::getenv("RRDNCNN_NO_FAST") == nullptr;
    return v;
}

// Input planes copied into a zero-filled border so kernels never branch on
// bounds. The 16-column slack keeps full tile reads in-bounds; slack taps
// multiply zeros, which the contract treats as the padding region.
struct Padded {
    std::vector<float> buf;
    int ph = 0, pw = 0;
    std::size_t chan_stride = 0, batch_stride = 0;

    const float* plane(int b, int c) const {
        return buf.data() + static_cast<std::size_t>(b) * batch_stride +
               static_cast<std::size_t>(c) * chan_stride;
    }
};

Padded build_padded(const Tensor4& t, int top, int left, int bottom, int right) {
    Padded p;
    p.ph = t.h + top + bottom;
    p.pw = t.w + left + right + 16;
    p.chan_stride = static_cast<std::size_t>(p.ph) * p.pw;
    p.batch_stride = p.chan_stride * t.c;
    p.buf.assign(p.batch_stride * t.n, 0.0f);
    for (int b = 0; b < t.n; ++b)
        for (int c = 0; c < t.c; ++c) {
            float* dst = p.buf.data() + b * p.batch_stride + c * p.chan_stride;
            for (int y = 0; y < t.h; ++y)
                std::memcpy(dst + static_cast<std::size_t>(y + top) * p.pw + left,
                            &t.at(b, c, y, 0), static_cast<std::size_t>(t.w) * sizeof(float));
        }
    return p;
}

// ------------------------------------------------------------ tap tables

template <int K>
struct ConvTaps {
    static constexpr int count = K * K;
    static constexpr int plane(int t) { return 0; }
    static constexpr int dy(int t) { return t / K; }
    static constexpr int dx(int t) { return t % K; }
};

// Transposed conv k3 s2 p1, output parity (PY, PX). oy = 2y'+py selects
// ky = 1 reading row y' (even oy) or ky = {0, 2} reading rows y'+1, y'
// (odd oy); columns mirror. Taps enumerate (ky, kx) ascending.
template <int PY, int PX>
struct DeconvTaps {
    static constexpr int ny = (PY == 0) ? 1 : 2;
    static constexpr int nx = (PX == 0) ? 1 : 2;
    static constexpr int count = ny * nx;
    static constexpr int ky(int t) { return (PY == 0) ? 1 : (t / nx == 0 ? 0 : 2); }
    static constexpr int kx(int t) { return (PX == 0) ? 1 : (t % nx == 0 ? 0 : 2); }
    static constexpr int plane(int t) { return 0; }
    static constexpr int dy(int t) { return (PY == 0) ? 0 : (t / nx == 0 ? 1 : 0); }
    static constexpr int dx(int t) { return (PX == 0) ? 0 : (t % nx == 0 ? 1 : 0); }
};

// Backward-data of the same deconv, reading d_output split into four padded
// row/column-parity subplanes (index 2*row_parity + col_parity, origin at the
// 1-sample pad). Tap (ky,kx) reads d_out[2iy-1+ky][2ix-1+kx].
struct DeconvBwdTaps {
    static constexpr int count = 9;
    static constexpr int rowsel(int ky) { return (ky + 1) % 2; }  // 0 = even rows
    static constexpr int plane(int t) {
        return rowsel(t / 3) * 2 + rowsel(t % 3);
    }
    // padded-subplane row = iy + dy with dy in {0,1}: ky=0 reads odd row iy-1
    // (pad origin shifts it to iy), ky=1 even row iy (+1), ky=2 odd row iy (+1)
    static constexpr int dy(int t) { return (t / 3 == 0) ? 0 : 1; }
    static constexpr int dx(int t) { return (t % 3 == 0) ? 0 : 1; }
};

// ------------------------------------------------------------ microkernels

// 4 output lanes x 16 columns in registers; reduction over (channel, tap)
// innermost and in order. Sources come from up to four equally-strided plane
// arrays selected per tap at compile time.
template <class TAPS>
void tile4x16(const float* __restrict p0, const float* __restrict p1,
              const float* __restrict p2, const float* __restrict p3,
              std::size_t cstride, std::ptrdiff_t rstride, int row, int col,
              int cin, const float* __restrict wg, const float* __restrict bias4,
              float* const out4[4], int ncols, int ostep) {
    float acc0[16], acc1[16], acc2[16], acc3[16];
    for (int x = 0; x < 16; ++x) {
        acc0[x] = bias4[0];
        acc1[x] = bias4[1];
        acc2[x] = bias4[2];
        acc3[x] = bias4[3];
    }
    const float* w = wg;
    for (int c = 0; c < cin; ++c) {
#pragma GCC unroll 25
        for (int t = 0; t < TAPS::count; ++t) {
            const float* base = TAPS::plane(t) == 0   ? p0
                                : TAPS::plane(t) == 1 ? p1
                                : TAPS::plane(t) == 2 ? p2
                                                      : p3;
            const float* s = base + c * cstride +
                             static_cast<std::ptrdiff_t>(row + TAPS::dy(t)) * rstride +
                             col + TAPS::dx(t);
            const float w0 = w[0], w1 = w[1], w2 = w[2], w3 = w[3];
            w += 4;
            for (int x = 0; x < 16; ++x) {
                const float sv = s[x];
                acc0[x] += w0 * sv;
                acc1[x] += w1 * sv;
                acc2[x] += w2 * sv;
                acc3[x] += w3 * sv;
            }
        }
    }
    const float* acc[4] = {acc0, acc1, acc2, acc3};
    for (int o = 0; o < 4; ++o) {
        if (!out4[o]) continue;
        if (ostep == 1) {
            std::memcpy(out4[o], acc[o], static_cast<std::size_t>(ncols) * sizeof(float));
        } else {
            for (int x = 0; x < ncols; ++x) out4[o][x * ostep] = acc[o][x];
        }
    }
}

// 4x4 channel block of dot products over a stack of row pairs; eight vector
// lanes (lane = column index mod 8) keep the reduction deterministic. Rows
// advance internally so the accumulators never leave registers.
__attribute__((always_inline)) inline void dot4x4_planes(
    const float* __restrict a0, const float* __restrict a1, const float* __restrict a2,
    const float* __restrict a3, std::ptrdiff_t astride, const float* __restrict s0,
    const float* __restrict s1, const float* __restrict s2, const float* __restrict s3,
    std::ptrdiff_t sstride, int rows, int len, float acc[4][4][8]) {
    for (int r = 0; r < rows; ++r) {
        int x = 0;
        for (; x + 8 <= len; x += 8) {
            for (int l = 0; l < 8; ++l) {
                const float b0 = s0[x + l], b1 = s1[x + l], b2 = s2[x + l], b3 = s3[x + l];
                const float v0 = a0[x + l], v1 = a1[x + l], v2 = a2[x + l], v3 = a3[x + l];
                acc[0][0][l] += v0 * b0; acc[0][1][l] += v0 * b1; acc[0][2][l] += v0 * b2; acc[0][3][l] += v0 * b3;
                acc[1][0][l] += v1 * b0; acc[1][1][l] += v1 * b1; acc[1][2][l] += v1 * b2; acc[1][3][l] += v1 * b3;
                acc[2][0][l] += v2 * b0; acc[2][1][l] += v2 * b1; acc[2][2][l] += v2 * b2; acc[2][3][l] += v2 * b3;
                acc[3][0][l] += v3 * b0; acc[3][1][l] += v3 * b1; acc[3][2][l] += v3 * b2; acc[3][3][l] += v3 * b3;
            }
        }
        for (; x < len; ++x) {
            const int l = x % 8;
            acc[0][0][l] += a0[x] * s0[x]; acc[0][1][l] += a0[x] * s1[x];
            acc[0][2][l] += a0[x] * s2[x]; acc[0][3][l] += a0[x] * s3[x];
            acc[1][0][l] += a1[x] * s0[x]; acc[1][1][l] += a1[x] * s1[x];
            acc[1][2][l] += a1[x] * s2[x]; acc[1][3][l] += a1[x] * s3[x];
            acc[2][0][l] += a2[x] * s0[x]; acc[2][1][l] += a2[x] * s1[x];
            acc[2][2][l] += a2[x] * s2[x]; acc[2][3][l] += a2[x] * s3[x];
            acc[3][0][l] += a3[x] * s0[x]; acc[3][1][l] += a3[x] * s1[x];
            acc[3][2][l] += a3[x] * s2[x]; acc[3][3][l] += a3[x] * s3[x];
        }
        a0 += astride; a1 += astride; a2 += astride; a3 += astride;
        s0 += sstride; s1 += sstride; s2 += sstride; s3 += sstride;
    }
}

float hsum8(const float* p) {
    float s = 0.0f;
    for (int l = 0; l < 8; ++l) s += p[l];
    return s;
}

// Gathered weights for one block of up to 4 output lanes: [cin][ntaps][4].
template <class Pick>
std::vector<float> gather_block(int cin, int ntaps, int lanes, Pick pick) {
    std::vector<float> wg(static_cast<std::size_t>(cin) * ntaps * 4, 0.0f);
    for (int c = 0; c < cin; ++c)
        for (int t = 0; t < ntaps; ++t)
            for (int l = 0; l < lanes; ++l)
                wg[(static_cast<std::size_t>(c) * ntaps + t) * 4 + l] = pick(c, t, l);
    return wg;
}

void bias_sums(const Tensor4& d_out, std::vector<float>& d_bias) {
    for (int o = 0; o < d_out.c; ++o) {
        double acc = 0.0;
        for (int b = 0; b < d_out.n; ++b)
            for (int oy = 0; oy < d_out.h; ++oy) {
                const float* g = &d_out.at(b, o, oy, 0);
                float part[8] = {};
                for (int ox = 0; ox < d_out.w; ++ox) part[ox % 8] += g[ox];
                acc += hsum8(part);
            }
        d_bias[o] = static_cast<float>(acc);
    }
}

// ---------------------------------------------------------------- conv2d s1

template <int K>
void conv2d_s1(const Tensor4& in, const ConvWeights& w, int pad, Tensor4& out) {
    const int OH = out.h, OW = out.w, C = w.in_ch;
    const Padded p = build_padded(in, pad, pad, pad, pad);
    constexpr int ntaps = K * K;

    for (int ob = 0; ob < w.out_ch; ob += 4) {
        const int lanes = std::min(4, w.out_ch - ob);
        const auto wg = gather_block(C, ntaps, lanes, [&](int c, int t, int l) {
            return w.wt(ob + l, c, t / K, t % K);
        });
        float bias4[4] = {};
        if (w.has_bias)
            for (int l = 0; l < lanes; ++l) bias4[l] = w.bias[ob + l];

        for (int b = 0; b < in.n; ++b) {
            const float* base = p.plane(b, 0);
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox0 = 0; ox0 < OW; ox0 += 16) {
                    float* out4[4] = {};
                    for (int l = 0; l < lanes; ++l) out4[l] = &out.at(b, ob + l, oy, ox0);
                    tile4x16<ConvTaps<K>>(base, nullptr, nullptr, nullptr, p.chan_stride,
                                          p.pw, oy, ox0, C, wg.data(), bias4, out4,
                                          std::min(16, OW - ox0), 1);
                }
            }
        }
    }
}

// d_input of a stride-1 conv is a stride-1 conv of d_output with the kernel
// flipped and channel roles swapped.
template <int K>
void conv2d_s1_dinput(const Tensor4& d_out, const ConvWeights& w, int pad,
                      Tensor4& d_in) {
    const int C = w.out_ch;
    const int rpad = K - 1 - pad;
    const Padded p = build_padded(d_out, rpad, rpad, rpad, rpad);
    constexpr int ntaps = K * K;
    const float bias4[4] = {};

    for (int ib = 0; ib < w.in_ch; ib += 4) {
        const int lanes = std::min(4, w.in_ch - ib);
        const auto wg = gather_block(C, ntaps, lanes, [&](int c, int t, int l) {
            return w.wt(c, ib + l, K - 1 - t / K, K - 1 - t % K);
        });
        for (int b = 0; b < d_out.n; ++b) {
            const float* base = p.plane(b, 0);
            for (int iy = 0; iy < d_in.h; ++iy) {
                for (int ox0 = 0; ox0 < d_in.w; ox0 += 16) {
                    float* out4[4] = {};
                    for (int l = 0; l < lanes; ++l) out4[l] = &d_in.at(b, ib + l, iy, ox0);
                    tile4x16<ConvTaps<K>>(base, nullptr, nullptr, nullptr, p.chan_stride,
                                          p.pw, iy, ox0, C, wg.data(), bias4, out4,
                                          std::min(16, d_in.w - ox0), 1);
                }
            }
        }
    }
}

template <int K>
void conv2d_s1_dweights(const Tensor4& in, const ConvWeights& w, int pad,
                        const Tensor4& d_out, std::vector<float>& d_weights) {
    const int OH = d_out.h, OW = d_out.w;
    const Padded p = build_padded(in, pad, pad, pad, pad);

    for (int ob = 0; ob < w.out_ch; ob += 4) {
        const int on = std::min(4, w.out_ch - ob);
        for (int ib = 0; ib < w.in_ch; ib += 4) {
            const int in_n = std::min(4, w.in_ch - ib);
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    float acc[4][4][8] = {};
                    for (int b = 0; b < in.n; ++b) {
                        const float* a[4];
                        const float* s[4];
                        for (int l = 0; l < 4; ++l) {
                            a[l] = &d_out.at(b, ob + std::min(l, on - 1), 0, 0);
                            s[l] = p.plane(b, ib + std::min(l, in_n - 1)) +
                                   static_cast<std::size_t>(ky) * p.pw + kx;
                        }
                        dot4x4_planes(a[0], a[1], a[2], a[3], OW, s[0], s[1], s[2], s[3],
                                      p.pw, OH, OW, acc);
                    }
                    for (int oi = 0; oi < on; ++oi)
                        for (int ii = 0; ii < in_n; ++ii)
                            d_weights[((static_cast<std::size_t>(ob + oi) * w.in_ch + ib + ii) * K + ky) * K + kx] =
                                hsum8(acc[oi][ii]);
                }
            }
        }
    }
}

// ------------------------------------------------- deconv2d k3 s2 p1 op<=1

void deconv2d_k3s2_fwd(const Tensor4& in, const ConvWeights& w, Tensor4& out) {
    const int C = w.in_ch, OH = out.h, OW = out.w;
    const Padded p = build_padded(in, 0, 0, 1, 1);

    auto run_parity = [&]<int PY, int PX>() {
        using Taps = DeconvTaps<PY, PX>;
        for (int ob = 0; ob < w.out_ch; ob += 4) {
            const int lanes = std::min(4, w.out_ch - ob);
            const auto wg = gather_block(C, Taps::count, lanes, [&](int c, int t, int l) {
                return w.wt(ob + l, c, Taps::ky(t), Taps::kx(t));
            });
            float bias4[4] = {};
            if (w.has_bias)
                for (int l = 0; l < lanes; ++l) bias4[l] = w.bias[ob + l];

            const int ny = (OH - PY + 1) / 2;
            const int nx = (OW - PX + 1) / 2;
            for (int b = 0; b < in.n; ++b) {
                const float* base = p.plane(b, 0);
                for (int yy = 0; yy < ny; ++yy) {
                    for (int x0 = 0; x0 < nx; x0 += 16) {
                        float* out4[4] = {};
                        for (int l = 0; l < lanes; ++l)
                            out4[l] = &out.at(b, ob + l, 2 * yy + PY, 2 * x0 + PX);
                        tile4x16<Taps>(base, nullptr, nullptr, nullptr, p.chan_stride,
                                       p.pw, yy, x0, C, wg.data(), bias4, out4,
                                       std::min(16, nx - x0), 2);
                    }
                }
            }
        }
    };
    run_parity.template operator()<0, 0>();
    run_parity.template operator()<0, 1>();
    run_parity.template operator()<1, 0>();
    run_parity.template operator()<1, 1>();
}

// d_output split into four row/column-parity subplanes of equal padded size,
// packed per channel: [b][c][4][sph][spw].
struct SubPlanes {
    std::vector<float> buf;
    int sph = 0, spw = 0;
    std::size_t plane_sz = 0, chan_stride = 0, batch_stride = 0;

    const float* base(int b, int sub) const {
        return buf.data() + static_cast<std::size_t>(b) * batch_stride +
               static_cast<std::size_t>(sub) * plane_sz;
    }
};

SubPlanes split_parity(const Tensor4& t) {
    SubPlanes s;
    const int rows = (t.h + 1) / 2, cols = (t.w + 1) / 2;
    s.sph = rows + 2;
    s.spw = cols + 2 + 16;
    s.plane_sz = static_cast<std::size_t>(s.sph) * s.spw;
    s.chan_stride = s.plane_sz * 4;
    s.batch_stride = s.chan_stride * t.c;
    s.buf.assign(s.batch_stride * t.n, 0.0f);
    for (int b = 0; b < t.n; ++b)
        for (int c = 0; c < t.c; ++c)
            for (int pr = 0; pr < 2; ++pr)
                for (int pc = 0; pc < 2; ++pc) {
                    float* dst = s.buf.data() + b * s.batch_stride + c * s.chan_stride +
                                 (pr * 2 + pc) * s.plane_sz;
                    const int nr = (t.h - pr + 1) / 2, nc = (t.w - pc + 1) / 2;
                    for (int y = 0; y < nr; ++y) {
                        float* drow = dst + static_cast<std::size_t>(y + 1) * s.spw + 1;
                        const float* srow = &t.at(b, c, 2 * y + pr, 0);
                        for (int x = 0; x < nc; ++x) drow[x] = srow[2 * x + pc];
                    }
                }
    return s;
}

void deconv2d_k3s2_dinput(const ConvWeights& w, const SubPlanes& sp, int n,
                          Tensor4& d_in) {
    const int C = w.out_ch;
    const float bias4[4] = {};

    for (int ib = 0; ib < w.in_ch; ib += 4) {
        const int lanes = std::min(4, w.in_ch - ib);
        const auto wg = gather_block(C, 9, lanes, [&](int c, int t, int l) {
            return w.wt(c, ib + l, t / 3, t % 3);
        });
        for (int b = 0; b < n; ++b) {
            const float* p0 = sp.base(b, 0);
            const float* p1 = sp.base(b, 1);
            const float* p2 = sp.base(b, 2);
            const float* p3 = sp.base(b, 3);
            for (int iy = 0; iy < d_in.h; ++iy) {
                for (int x0 = 0; x0 < d_in.w; x0 += 16) {
                    float* out4[4] = {};
                    for (int l = 0; l < lanes; ++l) out4[l] = &d_in.at(b, ib + l, iy, x0);
                    tile4x16<DeconvBwdTaps>(p0, p1, p2, p3, sp.chan_stride, sp.spw, iy,
                                            x0, C, wg.data(), bias4, out4,
                                            std::min(16, d_in.w - x0), 1);
                }
            }
        }
    }
}

void deconv2d_k3s2_dweights(const Tensor4& in, const ConvWeights& w,
                            const SubPlanes& sp, std::vector<float>& d_weights) {
    const int W = in.w;

    for (int ob = 0; ob < w.out_ch; ob += 4) {
        const int on = std::min(4, w.out_ch - ob);
        for (int ib = 0; ib < w.in_ch; ib += 4) {
            const int in_n = std::min(4, w.in_ch - ib);
            for (int t = 0; t < 9; ++t) {
                const int sub = DeconvBwdTaps::plane(t);
                const int dy = DeconvBwdTaps::dy(t), dx = DeconvBwdTaps::dx(t);
                float acc[4][4][8] = {};
                for (int b = 0; b < in.n; ++b) {
                    const float* a0 = sp.base(b, sub) + dy * sp.spw + dx;
                    const float* a[4];
                    const float* s[4];
                    for (int l = 0; l < 4; ++l) {
                        a[l] = a0 + static_cast<std::size_t>(ob + std::min(l, on - 1)) * sp.chan_stride;
                        s[l] = &in.at(b, ib + std::min(l, in_n - 1), 0, 0);
                    }
                    dot4x4_planes(a[0], a[1], a[2], a[3], sp.spw, s[0], s[1], s[2], s[3],
                                  W, in.h, W, acc);
                }
                for (int oi = 0; oi < on; ++oi)
                    for (int ii = 0; ii < in_n; ++ii)
                        d_weights[((static_cast<std::size_t>(ob + oi) * w.in_ch + ib + ii) * 3 + t / 3) * 3 + t % 3] =
                            hsum8(acc[oi][ii]);
            }
        }
    }
}

bool conv_fast_ok(const ConvWeights& w, int stride) {
    return fast_enabled() && stride == 1 && w.kh == w.kw && (w.kh == 3 || w.kh == 5);
}

bool deconv_fast_ok(const ConvWeights& w, int stride, int pad, int out_pad) {
    return fast_enabled() && stride == 2 && pad == 1 && out_pad <= 1 && w.kh == 3 &&
           w.kw == 3;
}

}  // namespace

Tensor4 conv2d(const Tensor4& input, const ConvWeights& w, int stride, int pad) {
    if (!conv_fast_ok(w, stride)) return conv2d<float>(input, w, stride, pad);
    if (input.c != w.in_ch)
        throw DimensionError("conv2d: input channels " + std::to_string(input.c) +
                             " != kernel in_ch " + std::to_string(w.in_ch));
    if (pad < 0) throw GeometryError("conv2d: padding must be non-negative");
    const int oh = detail::conv_out_extent(input.h, w.kh, stride, pad);
    const int ow = detail::conv_out_extent(input.w, w.kw, stride, pad);
    Tensor4 out(input.n, w.out_ch, oh, ow);
    if (w.kh == 3)
        conv2d_s1<3>(input, w, pad, out);
    else
        conv2d_s1<5>(input, w, pad, out);
    return out;
}

GradBundle conv2d_backward(const Tensor4& input, const ConvWeights& w, int stride,
                           int pad, const Tensor4& d_output) {
    if (!conv_fast_ok(w, stride) || pad > w.kh - 1)
        return conv2d_backward<float>(input, w, stride, pad, d_output);
    const int oh = detail::conv_out_extent(input.h, w.kh, stride, pad);
    const int ow = detail::conv_out_extent(input.w, w.kw, stride, pad);
    if (input.c != w.in_ch)
        throw DimensionError("conv2d_backward: input/kernel channel mismatch");
    if (d_output.n != input.n || d_output.c != w.out_ch || d_output.h != oh ||
        d_output.w != ow)
        throw DimensionError("conv2d_backward: d_output shape " + d_output.shape_str() +
                             " does not match forward output");

    GradBundle g;
    g.d_input = Tensor4(input.n, input.c, input.h, input.w);
    g.d_weights.assign(w.weights.size(), 0.0f);
    g.d_bias.assign(w.bias.size(), 0.0f);
    if (w.kh == 3) {
        conv2d_s1_dinput<3>(d_output, w, pad, g.d_input);
        conv2d_s1_dweights<3>(input, w, pad, d_output, g.d_weights);
    } else {
        conv2d_s1_dinput<5>(d_output, w, pad, g.d_input);
        conv2d_s1_dweights<5>(input, w, pad, d_output, g.d_weights);
    }
    bias_sums(d_output, g.d_bias);
    return g;
}

Tensor4 deconv2d(const Tensor4& input, const ConvWeights& w, int stride, int pad,
                 int out_pad) {
    if (!deconv_fast_ok(w, stride, pad, out_pad))
        return deconv2d<float>(input, w, stride, pad, out_pad);
    if (input.c != w.in_ch)
        throw DimensionError("deconv2d: input channels " + std::to_string(input.c) +
                             " != kernel in_ch " + std::to_string(w.in_ch));
    const int oh = detail::deconv_out_extent(input.h, w.kh, stride, pad, out_pad);
    const int ow = detail::deconv_out_extent(input.w, w.kw, stride, pad, out_pad);
    if (oh < 1 || ow < 1) throw GeometryError("deconv2d: output extent is not positive");
    Tensor4 out(input.n, w.out_ch, oh, ow);
    deconv2d_k3s2_fwd(input, w, out);
    return out;
}

GradBundle deconv2d_backward(const Tensor4& input, const ConvWeights& w, int stride,
                             int pad, int out_pad, const Tensor4& d_output) {
    if (!deconv_fast_ok(w, stride, pad, out_pad))
        return deconv2d_backward<float>(input, w, stride, pad, out_pad, d_output);
    if (input.c != w.in_ch)
        throw DimensionError("deconv2d_backward: input/kernel channel mismatch");
    const int oh = detail::deconv_out_extent(input.h, w.kh, stride, pad, out_pad);
    const int ow = detail::deconv_out_extent(input.w, w.kw, stride, pad, out_pad);
    if (d_output.n != input.n || d_output.c != w.out_ch || d_output.h != oh ||
        d_output.w != ow)
        throw DimensionError("deconv2d_backward: d_output shape " + d_output.shape_str() +
                             " does not match forward output");

    GradBundle g;
    g.d_input = Tensor4(input.n, input.c, input.h, input.w);
    g.d_weights.assign(w.weights.size(), 0.0f);
    g.d_bias.assign(w.bias.size(), 0.0f);
    const SubPlanes sp = split_parity(d_output);
    deconv2d_k3s2_dinput(w, sp, input.n, g.d_input);
    deconv2d_k3s2_dweights(input, w, sp, g.d_weights);
    bias_sums(d_output, g.d_bias);
    return g;
}

}  // namespace rrdncnn
