#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrdncnn/tensor.hpp"

namespace rrdncnn {

enum class Arch { v1, v2 };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& s);

// Declarative architecture description. v2 is the u-shaped network: a stem
// module, restoration and reconstruction stacks of two-module layers, one
// up-sampling skip deconvolution per restoration layer. v1 is the plain
// chain; its layer counts include the stem, the feature upsampler and the
// residual heads, which reproduces the published parameter budget.
struct NetworkConfig {
    Arch arch = Arch::v2;
    int channels = 64;
    int restoration_layers = 10;
    int reconstruction_layers = 10;
    int modules_per_layer = 2;
    int stem_kernel = 5;
    bool skip_connections = true;
    int scale = 2;

    static NetworkConfig v1_defaults();
    static NetworkConfig v2_defaults();
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

struct NamedConv {
    std::string name;
    ConvWeights w;
};

// The learnable weights plus resolved role indices into `entries`.
struct NetworkParams {
    NetworkConfig config;
    std::vector<NamedConv> entries;

    int stem = -1, res_head = -1, rec_head = -1, img_up = -1, feat_up = -1;
    std::vector<std::vector<int>> rest;   // [layer][module]
    std::vector<int> skips;               // v2 only, one per restoration layer
    std::vector<std::vector<int>> recon;  // [layer][module]

    std::size_t param_count() const;
};

struct ForwardOutputs {
    Tensor4 r_res;   // n x 1 x h x w
    Tensor4 lr_hat;  // n x 1 x h x w, == dlr + r_res by construction
    Tensor4 r_rec;   // n x 1 x 2h x 2w
    Tensor4 hr_hat;  // n x 1 x 2h x 2w, == upsample(lr_hat) + r_rec
};

// Activations recorded during forward for the hand-written backward pass.
struct ForwardTape {
    Tensor4 input;
    Tensor4 stem_pre;
    std::vector<Tensor4> rest_in, rest_p1, rest_h1, rest_p2;  // per layer
    Tensor4 rest_out;                                         // last features
    Tensor4 lr_hat;
    std::vector<Tensor4> recon_in, recon_q1, recon_m, recon_q2;
    Tensor4 recon_out;
};

struct ForwardOptions {
    bool mid_skip_sums = true;  // disable to measure the skip contribution
};

ForwardOutputs forward(const NetworkParams& net, const Tensor4& dlr,
                       ForwardTape* tape = nullptr, const ForwardOptions& opt = {});

// Per-entry gradients, aligned with NetworkParams::entries.
struct ParamGrads {
    std::vector<std::vector<float>> weights;
    std::vector<std::vector<float>> bias;

    static ParamGrads zeros_like(const NetworkParams& net);
};

// Backward through the whole network given the loss gradients w.r.t. lr_hat
// and hr_hat. The tape must come from a forward() call with the same params.
ParamGrads backward(const NetworkParams& net, const ForwardTape& tape,
                    const Tensor4& d_lr_hat, const Tensor4& d_hr_hat);

NetworkParams build_network(const NetworkConfig& config, std::uint64_t init_seed);

// Fill the role indices from entry names; throws FormatError when the entry
// set does not match the config. Used by build_network and checkpoint load.
void resolve_network_roles(NetworkParams& params);

// The (name, shape) list the config implies, in canonical order.
struct EntryShape {
    std::string name;
    int out_ch, in_ch, kh, kw;
};
std::vector<EntryShape> network_entry_shapes(const NetworkConfig& config);

std::size_t count_params(const NetworkConfig& config);
std::uint64_t count_macs(const NetworkConfig& config, int h, int w);
// One-line statement of the counting convention used by count_macs.
std::string mac_convention();

constexpr float kLeakySlope = 0.01f;

}  // namespace rrdncnn
