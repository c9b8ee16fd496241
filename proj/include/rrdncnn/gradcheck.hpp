#pragma once

#include <cstdint>
#include <string>

#include "rrdncnn/tensor.hpp"

namespace rrdncnn {

// One gradient-check case. op selects the primitive ("conv2d", "deconv2d",
// "leaky_relu", "add", "mse"); the conv geometry fields are ignored by the
// elementwise ops. Shapes must stay small (total elements <= 4096).
struct FdCase {
    std::string op;
    int n = 1, c = 1, h = 4, w = 4;
    int out_ch = 2;
    int kh = 3, kw = 3;
    int stride = 1, pad = 1, out_pad = 0;
    double slope = 0.01;
};

// Central finite differences (step 1e-3) against the analytic backward pass,
// both evaluated in double precision. Returns the worst relative error over
// every gradient entry (input, weights, bias where applicable).
double finite_diff_check(const FdCase& fd, std::uint64_t seed);

}  // namespace rrdncnn
