#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrdncnn/common.hpp"

namespace rrdncnn {

constexpr double kPsnrCap = 99.0;  // reported for zero MSE so CSVs stay finite

// One rate-distortion measurement. qp is carried for CSV output only.
struct RDPoint {
    double bitrate = 0.0;  // kbps, > 0
    double psnr = 0.0;     // dB
    int qp = -1;
};

// Points must be in strictly increasing bitrate order. Non-monotone PSNR is
// suspicious but not fatal; validate() reports it as a warning string.
struct RDCurve {
    std::string label;
    std::vector<RDPoint> points;

    // returns a warning message or "" when the curve is clean
    std::string validate() const;
};

// Y-channel PSNR over 8-bit planes, integer-domain MSE.
double psnr(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
            int w, int h);
double psnr_from_mse(double mse);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01 K2=0.03,
// dynamic range 255, window evaluated at every pixel with clamped borders.
double ssim(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
            int w, int h);

// Classic Bjontegaard delta-rate: cubic fit of log10(bitrate) against PSNR
// per curve, averaged over the shared PSNR interval. Negative = savings.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

void emit_rd_csv(const std::vector<RDCurve>& curves, const std::string& path);
std::vector<RDCurve> parse_rd_csv(const std::string& path);

}  // namespace rrdncnn
