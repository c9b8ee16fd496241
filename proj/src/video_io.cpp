#include "rrdncnn/video_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace rrdncnn {

YuvFrame::YuvFrame(int w_, int h_) : w(w_), h(h_) {
    if (w_ < 2 || h_ < 2 || w_ % 2 != 0 || h_ % 2 != 0)
        throw DimensionError("YuvFrame: extents must be positive and even");
    y.assign(static_cast<std::size_t>(w_) * h_, 0);
    u.assign(static_cast<std::size_t>(w_ / 2) * (h_ / 2), 0);
    v.assign(static_cast<std::size_t>(w_ / 2) * (h_ / 2), 0);
}

std::size_t yuv420_frame_bytes(int w, int h) {
    return static_cast<std::size_t>(w) * h * 3 / 2;
}

std::vector<YuvFrame> read_yuv420(const std::string& path, int w, int h) {
    if (w < 2 || h < 2 || w % 2 != 0 || h % 2 != 0)
        throw DimensionError("read_yuv420: extents must be positive and even");
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("read_yuv420: cannot open '" + path + "'");
    const std::size_t size = static_cast<std::size_t>(f.tellg());
    const std::size_t fb = yuv420_frame_bytes(w, h);
    if (size % fb != 0)
        throw FormatError("read_yuv420: file size " + std::to_string(size) +
                          " is not a multiple of the frame size " + std::to_string(fb) +
                          " (" + std::to_string(w) + "x" + std::to_string(h) + " yuv420)");
    f.seekg(0);
    std::vector<YuvFrame> frames(size / fb, YuvFrame(w, h));
    for (YuvFrame& fr : frames) {
        f.read(reinterpret_cast<char*>(fr.y.data()), static_cast<std::streamsize>(fr.y.size()));
        f.read(reinterpret_cast<char*>(fr.u.data()), static_cast<std::streamsize>(fr.u.size()));
        f.read(reinterpret_cast<char*>(fr.v.data()), static_cast<std::streamsize>(fr.v.size()));
        if (!f) throw IoError("read_yuv420: short read from '" + path + "'");
    }
    return frames;
}

void write_yuv420(const std::string& path, const std::vector<YuvFrame>& frames) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("write_yuv420: cannot open '" + tmp + "'");
        for (const YuvFrame& fr : frames) {
            f.write(reinterpret_cast<const char*>(fr.y.data()), static_cast<std::streamsize>(fr.y.size()));
            f.write(reinterpret_cast<const char*>(fr.u.data()), static_cast<std::streamsize>(fr.u.size()));
            f.write(reinterpret_cast<const char*>(fr.v.data()), static_cast<std::streamsize>(fr.v.size()));
        }
        if (!f) throw IoError("write_yuv420: short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("write_yuv420: cannot rename '" + tmp + "' to '" + path + "'");
}

YPlane y_normalize(const std::vector<std::uint8_t>& plane, int w, int h) {
    YPlane p(w, h);
    for (std::size_t k = 0; k < plane.size(); ++k)
        p.samples[k] = static_cast<float>(plane[k]) * (1.0f / 255.0f);
    return p;
}

YPlane y_normalize(const YuvFrame& frame) { return y_normalize(frame.y, frame.w, frame.h); }

std::uint8_t denormalize_sample(float s) {
    const double c = std::min(1.0, std::max(0.0, static_cast<double>(s)));
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::vector<std::uint8_t> y_denormalize(const YPlane& plane) {
    std::vector<std::uint8_t> out(plane.samples.size());
    for (std::size_t k = 0; k < plane.samples.size(); ++k)
        out[k] = denormalize_sample(plane.samples[k]);
    return out;
}

namespace {

// Catmull-Rom taps for the two x2 phases. Down-sampling always lands on
// phase 1/2; up-sampling alternates between 1/4 and 3/4.
constexpr double kHalf[4] = {-0.0625, 0.5625, 0.5625, -0.0625};

double cubic(double a, double x) {
    const double ax = std::abs(x);
    if (ax < 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
    if (ax < 2.0) return a * (((ax - 5.0) * ax + 8.0) * ax - 4.0);
    return 0.0;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

YPlane bicubic_down2(const YPlane& plane) {
    if (plane.w % 2 != 0 || plane.h % 2 != 0)
        throw DimensionError("bicubic_down2: extents must be even");
    const int ow = plane.w / 2, oh = plane.h / 2;

    // horizontal pass: sample at source x = 2*ox + 0.5
    YPlane hp(ow, plane.h);
    for (int y = 0; y < plane.h; ++y) {
        const float* src = &plane.at(y, 0);
        for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int t = 0; t < 4; ++t)
                acc += kHalf[t] * src[clampi(2 * ox - 1 + t, 0, plane.w - 1)];
            hp.at(y, ox) = static_cast<float>(acc);
        }
    }
    // vertical pass, then clamp to [0,1]
    YPlane out(ow, oh);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int t = 0; t < 4; ++t)
                acc += kHalf[t] * hp.at(clampi(2 * oy - 1 + t, 0, plane.h - 1), ox);
            out.at(oy, ox) = static_cast<float>(std::min(1.0, std::max(0.0, acc)));
        }
    }
    return out;
}

YPlane bicubic_up2(const YPlane& plane) {
    const int ow = plane.w * 2, oh = plane.h * 2;
    // output i samples source position i/2 - 0.25: even i sits at phase 0.75
    // past source i/2 - 1, odd i at phase 0.25 past (i-1)/2
    double wts[2][4];
    for (int par = 0; par < 2; ++par) {
        const double frac = (par == 0) ? 0.75 : 0.25;
        for (int t = 0; t < 4; ++t) wts[par][t] = cubic(-0.5, frac + 1.0 - t);
    }
    auto tap_base = [](int i) { return (i % 2 == 0) ? i / 2 - 2 : (i - 1) / 2 - 1; };

    YPlane hp(ow, plane.h);
    for (int y = 0; y < plane.h; ++y) {
        for (int ox = 0; ox < ow; ++ox) {
            const int par = ox & 1;
            const int base = tap_base(ox);
            double acc = 0.0;
            for (int t = 0; t < 4; ++t)
                acc += wts[par][t] * plane.at(y, clampi(base + t, 0, plane.w - 1));
            hp.at(y, ox) = static_cast<float>(acc);
        }
    }
    YPlane out(ow, oh);
    for (int oy = 0; oy < oh; ++oy) {
        const int par = oy & 1;
        const int base = tap_base(oy);
        for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int t = 0; t < 4; ++t)
                acc += wts[par][t] * hp.at(clampi(base + t, 0, plane.h - 1), ox);
            out.at(oy, ox) = static_cast<float>(std::min(1.0, std::max(0.0, acc)));
        }
    }
    return out;
}

YPlane nn_up2(const YPlane& plane) {
    YPlane out(plane.w * 2, plane.h * 2);
    for (int y = 0; y < plane.h; ++y)
        for (int x = 0; x < plane.w; ++x) {
            const float s = plane.at(y, x);
            out.at(2 * y, 2 * x) = s;
            out.at(2 * y, 2 * x + 1) = s;
            out.at(2 * y + 1, 2 * x) = s;
            out.at(2 * y + 1, 2 * x + 1) = s;
        }
    return out;
}

std::vector<std::uint8_t> nn_up2_u8(const std::vector<std::uint8_t>& plane, int w, int h) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 4);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t s = plane[static_cast<std::size_t>(y) * w + x];
            const std::size_t r0 = static_cast<std::size_t>(2 * y) * (2 * w);
            out[r0 + 2 * x] = s;
            out[r0 + 2 * x + 1] = s;
            out[r0 + 2 * w + 2 * x] = s;
            out[r0 + 2 * w + 2 * x + 1] = s;
        }
    return out;
}

YPlane crop_multiple(const YPlane& plane, int m) {
    if (m < 1) throw ConfigError("crop_multiple: m must be positive");
    const int nw = (plane.w / m) * m, nh = (plane.h / m) * m;
    if (nw < 1 || nh < 1)
        throw DimensionError("crop_multiple: " + std::to_string(plane.w) + "x" +
                             std::to_string(plane.h) + " has no multiple of " +
                             std::to_string(m));
    YPlane out(nw, nh);
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) out.at(y, x) = plane.at(y, x);
    return out;
}

YuvFrame crop_multiple(const YuvFrame& frame, int m) {
    if (m < 1) throw ConfigError("crop_multiple: m must be positive");
    const int nw = (frame.w / m) * m, nh = (frame.h / m) * m;
    if (nw < 2 || nh < 2)
        throw DimensionError("crop_multiple: " + std::to_string(frame.w) + "x" +
                             std::to_string(frame.h) + " has no usable multiple of " +
                             std::to_string(m));
    YuvFrame out(nw, nh);
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x)
            out.y[static_cast<std::size_t>(y) * nw + x] = frame.y[static_cast<std::size_t>(y) * frame.w + x];
    const int cw = nw / 2, ch = nh / 2, scw = frame.w / 2;
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            out.u[static_cast<std::size_t>(y) * cw + x] = frame.u[static_cast<std::size_t>(y) * scw + x];
            out.v[static_cast<std::size_t>(y) * cw + x] = frame.v[static_cast<std::size_t>(y) * scw + x];
        }
    return out;
}

}  // namespace rrdncnn
