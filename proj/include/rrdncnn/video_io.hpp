#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrdncnn/common.hpp"

namespace rrdncnn {

// One raw 4:2:0 frame, 8-bit planar.
struct YuvFrame {
    int w = 0, h = 0;
    std::vector<std::uint8_t> y, u, v;

    YuvFrame() = default;
    YuvFrame(int w_, int h_);
};

// Normalized luma plane; samples live in [0, 1].
struct YPlane {
    int w = 0, h = 0;
    std::vector<float> samples;

    YPlane() = default;
    YPlane(int w_, int h_) : w(w_), h(h_), samples(static_cast<std::size_t>(w_) * h_, 0.0f) {}

    float& at(int y, int x) { return samples[static_cast<std::size_t>(y) * w + x]; }
    const float& at(int y, int x) const { return samples[static_cast<std::size_t>(y) * w + x]; }
};

std::size_t yuv420_frame_bytes(int w, int h);

// Raw planar YUV420 reader/writer. Extents are never inferred from the file.
std::vector<YuvFrame> read_yuv420(const std::string& path, int w, int h);
void write_yuv420(const std::string& path, const std::vector<YuvFrame>& frames);

// Luma <-> [0,1] conversion. Denormalization clamps to [0,1] first and rounds
// half away from zero.
YPlane y_normalize(const YuvFrame& frame);
YPlane y_normalize(const std::vector<std::uint8_t>& plane, int w, int h);
std::vector<std::uint8_t> y_denormalize(const YPlane& plane);
std::uint8_t denormalize_sample(float s);

// Separable Catmull-Rom (a = -0.5) 2x down-sampling with half-pixel-center
// alignment and clamp-to-edge borders; output is clamped to [0,1].
YPlane bicubic_down2(const YPlane& plane);

// Matching 2x up-sampler (same kernel and alignment). Not part of the coding
// loop; used as the plain-interpolation baseline in evaluation.
YPlane bicubic_up2(const YPlane& plane);

// Nearest-neighbor 2x: every source sample becomes a 2x2 block.
YPlane nn_up2(const YPlane& plane);
std::vector<std::uint8_t> nn_up2_u8(const std::vector<std::uint8_t>& plane, int w, int h);

// Crop extents down to the largest multiples of m, keeping the top-left.
YuvFrame crop_multiple(const YuvFrame& frame, int m);
YPlane crop_multiple(const YPlane& plane, int m);

}  // namespace rrdncnn
