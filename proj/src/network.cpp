#include "rrdncnn/network.hpp"

#include <cmath>

namespace rrdncnn {

std::string arch_name(Arch a) { return a == Arch::v1 ? "v1" : "v2"; }

Arch arch_from_name(const std::string& s) {
    if (s == "v1") return Arch::v1;
    if (s == "v2") return Arch::v2;
    throw ConfigError("unknown architecture '" + s + "' (expected v1 or v2)");
}

NetworkConfig NetworkConfig::v1_defaults() {
    NetworkConfig c;
    c.arch = Arch::v1;
    c.reconstruction_layers = 15;
    c.modules_per_layer = 1;
    c.skip_connections = false;
    return c;
}

NetworkConfig NetworkConfig::v2_defaults() { return NetworkConfig{}; }

void NetworkConfig::validate() const {
    if (scale != 2) throw ConfigError("NetworkConfig: only scale 2 is supported");
    if (channels < 1 || restoration_layers < 1 || reconstruction_layers < 1 ||
        modules_per_layer < 1 || stem_kernel < 1 || stem_kernel % 2 == 0)
        throw ConfigError("NetworkConfig: invalid extents");
    if (skip_connections && reconstruction_layers != restoration_layers)
        throw ConfigError(
            "NetworkConfig: skip connections need matching restoration/reconstruction "
            "layer counts");
    if (arch == Arch::v2) {
        if (!skip_connections || modules_per_layer != 2)
            throw ConfigError("NetworkConfig: v2 layers are two-module layers joined by "
                              "up-sampling skip connections");
    } else {
        if (skip_connections) throw ConfigError("NetworkConfig: v1 has no skip connections");
        if (restoration_layers < 3 || reconstruction_layers < 3)
            throw ConfigError("NetworkConfig: v1 layer counts include stem/upsampler/heads "
                              "and must be >= 3");
    }
}

// Single source of truth for the parameter set; build_network, count_params
// and checkpoint loading all walk this list.
std::vector<EntryShape> network_entry_shapes(const NetworkConfig& c) {
    c.validate();
    std::vector<EntryShape> es;
    const int C = c.channels;
    const int sk = c.stem_kernel;
    if (c.arch == Arch::v2) {
        es.push_back({"stem", C, 1, sk, sk});
        for (int i = 0; i < c.restoration_layers; ++i)
            for (int m = 0; m < c.modules_per_layer; ++m)
                es.push_back({"rest" + std::to_string(i) + "_" + std::to_string(m), C, C, 3, 3});
        for (int i = 0; i < c.restoration_layers; ++i)
            es.push_back({"skip" + std::to_string(i), C, C, 3, 3});
        for (int j = 0; j < c.reconstruction_layers; ++j)
            for (int m = 0; m < c.modules_per_layer; ++m)
                es.push_back({"recon" + std::to_string(j) + "_" + std::to_string(m), C, C, 3, 3});
        es.push_back({"res_head", 1, C, 3, 3});
        es.push_back({"rec_head", 1, C, 3, 3});
        es.push_back({"img_up", 1, 1, 3, 3});
    } else {
        // chain: layer counts include the stem / feature upsampler / heads
        const int rest_mid = (c.restoration_layers - 2) * c.modules_per_layer;
        const int recon_mid = (c.reconstruction_layers - 2) * c.modules_per_layer;
        es.push_back({"stem", C, 1, sk, sk});
        for (int i = 0; i < rest_mid; ++i)
            es.push_back({"rest" + std::to_string(i), C, C, 3, 3});
        es.push_back({"res_head", 1, C, 3, 3});
        es.push_back({"feat_up", C, C, 3, 3});
        for (int j = 0; j < recon_mid; ++j)
            es.push_back({"recon" + std::to_string(j), C, C, 3, 3});
        es.push_back({"rec_head", 1, C, 3, 3});
        es.push_back({"img_up", 1, 1, 3, 3});
    }
    return es;
}


void resolve_network_roles(NetworkParams& p) {
    const NetworkConfig& c = p.config;
    p.rest.clear();
    p.skips.clear();
    p.recon.clear();
    auto index_of = [&](const std::string& name) {
        for (std::size_t k = 0; k < p.entries.size(); ++k)
            if (p.entries[k].name == name) return static_cast<int>(k);
        throw FormatError("network entry '" + name + "' is missing");
    };
    p.stem = index_of("stem");
    p.res_head = index_of("res_head");
    p.rec_head = index_of("rec_head");
    p.img_up = index_of("img_up");
    if (c.arch == Arch::v2) {
        p.feat_up = -1;
        for (int i = 0; i < c.restoration_layers; ++i) {
            std::vector<int> mods;
            for (int m = 0; m < c.modules_per_layer; ++m)
                mods.push_back(index_of("rest" + std::to_string(i) + "_" + std::to_string(m)));
            p.rest.push_back(std::move(mods));
            p.skips.push_back(index_of("skip" + std::to_string(i)));
        }
        for (int j = 0; j < c.reconstruction_layers; ++j) {
            std::vector<int> mods;
            for (int m = 0; m < c.modules_per_layer; ++m)
                mods.push_back(index_of("recon" + std::to_string(j) + "_" + std::to_string(m)));
            p.recon.push_back(std::move(mods));
        }
    } else {
        p.feat_up = index_of("feat_up");
        const int rest_mid = (c.restoration_layers - 2) * c.modules_per_layer;
        const int recon_mid = (c.reconstruction_layers - 2) * c.modules_per_layer;
        for (int i = 0; i < rest_mid; ++i) p.rest.push_back({index_of("rest" + std::to_string(i))});
        for (int j = 0; j < recon_mid; ++j) p.recon.push_back({index_of("recon" + std::to_string(j))});
    }
}

std::size_t NetworkParams::param_count() const {
    std::size_t n = 0;
    for (const NamedConv& e : entries) n += e.w.param_count();
    return n;
}

NetworkParams build_network(const NetworkConfig& config, std::uint64_t init_seed) {
    config.validate();
    NetworkParams p;
    p.config = config;
    Rng rng(init_seed);
    for (const EntryShape& es : network_entry_shapes(config)) {
        NamedConv e;
        e.name = es.name;
        e.w = ConvWeights(es.out_ch, es.in_ch, es.kh, es.kw, true);
        const double stddev = std::sqrt(2.0 / (static_cast<double>(es.in_ch) * es.kh * es.kw));
        for (float& v : e.w.weights) v = static_cast<float>(rng.normal() * stddev);
        // biases stay zero
        p.entries.push_back(std::move(e));
    }
    resolve_network_roles(p);
    return p;
}

std::size_t count_params(const NetworkConfig& config) {
    config.validate();
    std::size_t n = 0;
    for (const EntryShape& es : network_entry_shapes(config))
        n += static_cast<std::size_t>(es.out_ch) * es.in_ch * es.kh * es.kw + es.out_ch;
    return n;
}

std::string mac_convention() {
    return "convolution MACs = output elements x (in_ch x kh x kw); transposed "
           "convolution MACs = input elements x (out_ch x kh x kw)";
}

std::uint64_t count_macs(const NetworkConfig& config, int h, int w) {
    config.validate();
    if (h < 1 || w < 1) throw ConfigError("count_macs: extents must be positive");
    const std::uint64_t lr = static_cast<std::uint64_t>(h) * w;
    const std::uint64_t hr = lr * 4;
    std::uint64_t macs = 0;
    auto conv = [&](std::uint64_t px, int oc, int ic, int k) {
        macs += px * static_cast<std::uint64_t>(oc) * ic * k * k;
    };
    auto deconv = [&](std::uint64_t px_in, int oc, int ic, int k) {
        macs += px_in * static_cast<std::uint64_t>(oc) * ic * k * k;
    };
    const int C = config.channels;
    if (config.arch == Arch::v2) {
        conv(lr, C, 1, config.stem_kernel);
        for (int i = 0; i < config.restoration_layers * config.modules_per_layer; ++i)
            conv(lr, C, C, 3);
        for (int i = 0; i < config.restoration_layers; ++i) deconv(lr, C, C, 3);
        conv(lr, 1, C, 3);   // res_head
        deconv(lr, 1, 1, 3); // img_up
        for (int j = 0; j < config.reconstruction_layers * config.modules_per_layer; ++j)
            conv(hr, C, C, 3);
        conv(hr, 1, C, 3);   // rec_head
    } else {
        conv(lr, C, 1, config.stem_kernel);
        for (int i = 0; i < (config.restoration_layers - 2) * config.modules_per_layer; ++i)
            conv(lr, C, C, 3);
        conv(lr, 1, C, 3);
        deconv(lr, C, C, 3);  // feat_up
        for (int j = 0; j < (config.reconstruction_layers - 2) * config.modules_per_layer; ++j)
            conv(hr, C, C, 3);
        conv(hr, 1, C, 3);
        deconv(lr, 1, 1, 3);
    }
    return macs;
}

namespace {

const ConvWeights& W(const NetworkParams& p, int idx) { return p.entries[idx].w; }

void check_input(const NetworkParams& net, const Tensor4& dlr) {
    if (dlr.c != 1)
        throw DimensionError("forward: input must have a single channel, got " +
                             dlr.shape_str());
    if (dlr.h < net.config.stem_kernel || dlr.w < net.config.stem_kernel)
        throw DimensionError("forward: input extents must be >= the stem kernel");
}

}  // namespace

ForwardOutputs forward(const NetworkParams& net, const Tensor4& dlr, ForwardTape* tape,
                       const ForwardOptions& opt) {
    check_input(net, dlr);
    const NetworkConfig& c = net.config;
    const int spad = c.stem_kernel / 2;

    ForwardTape local;
    ForwardTape& t = tape ? *tape : local;
    const bool rec = tape != nullptr;
    if (rec) {
        t = ForwardTape{};
        t.input = dlr;
    }

    Tensor4 a;
    {
        Tensor4 pre = conv2d(dlr, W(net, net.stem), 1, spad);
        if (rec) t.stem_pre = pre;
        a = leaky_relu(pre, kLeakySlope);
    }

    std::vector<Tensor4> skip_out;  // v2: u_i per restoration layer
    if (c.arch == Arch::v2) {
        for (std::size_t i = 0; i < net.rest.size(); ++i) {
            if (rec) t.rest_in.push_back(a);
            Tensor4 p1 = conv2d(a, W(net, net.rest[i][0]), 1, 1);
            Tensor4 h1 = leaky_relu(p1, kLeakySlope);
            Tensor4 p2 = conv2d(h1, W(net, net.rest[i][1]), 1, 1);
            if (rec) {
                t.rest_p1.push_back(std::move(p1));
                t.rest_h1.push_back(h1);
                t.rest_p2.push_back(p2);
            }
            a = leaky_relu(p2, kLeakySlope);
            skip_out.push_back(deconv2d(a, W(net, net.skips[i]), 2, 1, 1));
        }
    } else {
        for (std::size_t i = 0; i < net.rest.size(); ++i) {
            if (rec) t.rest_in.push_back(a);
            Tensor4 p1 = conv2d(a, W(net, net.rest[i][0]), 1, 1);
            if (rec) t.rest_p1.push_back(p1);
            a = leaky_relu(p1, kLeakySlope);
        }
    }
    if (rec) t.rest_out = a;

    ForwardOutputs out;
    out.r_res = conv2d(a, W(net, net.res_head), 1, 1);
    out.lr_hat = add(dlr, out.r_res);
    if (rec) t.lr_hat = out.lr_hat;

    Tensor4 up = deconv2d(out.lr_hat, W(net, net.img_up), 2, 1, 1);

    Tensor4 b;
    if (c.arch == Arch::v2) {
        const int L = static_cast<int>(net.recon.size());
        b = skip_out.back();  // reconstruction stem: up-sampled last features
        for (int j = 0; j < L; ++j) {
            if (rec) t.recon_in.push_back(b);
            Tensor4 q1 = conv2d(b, W(net, net.recon[j][0]), 1, 1);
            Tensor4 g1 = leaky_relu(q1, kLeakySlope);
            // mirrored pairing: layer j (0-based) receives skip L-1-j
            Tensor4 m = opt.mid_skip_sums ? add(g1, skip_out[L - 1 - j]) : std::move(g1);
            Tensor4 q2 = conv2d(m, W(net, net.recon[j][1]), 1, 1);
            if (rec) {
                t.recon_q1.push_back(std::move(q1));
                t.recon_m.push_back(m);
                t.recon_q2.push_back(q2);
            }
            b = leaky_relu(q2, kLeakySlope);
        }
    } else {
        Tensor4 fpre = deconv2d(a, W(net, net.feat_up), 2, 1, 1);
        if (rec) t.recon_q1.push_back(fpre);
        b = leaky_relu(fpre, kLeakySlope);
        for (std::size_t j = 0; j < net.recon.size(); ++j) {
            if (rec) t.recon_in.push_back(b);
            Tensor4 q1 = conv2d(b, W(net, net.recon[j][0]), 1, 1);
            if (rec) t.recon_m.push_back(q1);  // v1: pre-activation of module j
            b = leaky_relu(q1, kLeakySlope);
        }
    }
    if (rec) t.recon_out = b;

    out.r_rec = conv2d(b, W(net, net.rec_head), 1, 1);
    out.hr_hat = add(up, out.r_rec);
    return out;
}

ParamGrads ParamGrads::zeros_like(const NetworkParams& net) {
    ParamGrads g;
    g.weights.reserve(net.entries.size());
    g.bias.reserve(net.entries.size());
    for (const NamedConv& e : net.entries) {
        g.weights.emplace_back(e.w.weights.size(), 0.0f);
        g.bias.emplace_back(e.w.bias.size(), 0.0f);
    }
    return g;
}

namespace {

void accumulate(ParamGrads& g, int idx, const GradBundle& gb) {
    std::vector<float>& wq = g.weights[idx];
    for (std::size_t k = 0; k < wq.size(); ++k) wq[k] += gb.d_weights[k];
    std::vector<float>& bq = g.bias[idx];
    for (std::size_t k = 0; k < bq.size(); ++k) bq[k] += gb.d_bias[k];
}

}  // namespace

ParamGrads backward(const NetworkParams& net, const ForwardTape& t,
                    const Tensor4& d_lr_hat, const Tensor4& d_hr_hat) {
    const NetworkConfig& c = net.config;
    const int spad = c.stem_kernel / 2;
    ParamGrads g = ParamGrads::zeros_like(net);

    // hr_hat = img_up(lr_hat) + r_rec
    GradBundle rec_head_g = conv2d_backward(t.recon_out, W(net, net.rec_head), 1, 1, d_hr_hat);
    accumulate(g, net.rec_head, rec_head_g);
    Tensor4 d_b = std::move(rec_head_g.d_input);

    Tensor4 d_rest_out;  // gradient flowing into the last restoration features
    std::vector<Tensor4> d_skip;  // v2: per skip output

    if (c.arch == Arch::v2) {
        const int L = static_cast<int>(net.recon.size());
        d_skip.resize(L);
        for (int j = L - 1; j >= 0; --j) {
            Tensor4 d_q2 = leaky_relu_backward(t.recon_q2[j], kLeakySlope, d_b);
            GradBundle g2 = conv2d_backward(t.recon_m[j], W(net, net.recon[j][1]), 1, 1, d_q2);
            accumulate(g, net.recon[j][1], g2);
            // m = g1 + skip[L-1-j]: gradient routes to both
            const int si = L - 1 - j;
            if (d_skip[si].size() == 0)
                d_skip[si] = g2.d_input;
            else
                add_into(d_skip[si], g2.d_input);
            Tensor4 d_q1 = leaky_relu_backward(t.recon_q1[j], kLeakySlope, g2.d_input);
            GradBundle g1 = conv2d_backward(t.recon_in[j], W(net, net.recon[j][0]), 1, 1, d_q1);
            accumulate(g, net.recon[j][0], g1);
            d_b = std::move(g1.d_input);
        }
        // reconstruction stem is skip[L-1]
        add_into(d_skip[L - 1], d_b);
    } else {
        for (int j = static_cast<int>(net.recon.size()) - 1; j >= 0; --j) {
            Tensor4 d_q1 = leaky_relu_backward(t.recon_m[j], kLeakySlope, d_b);
            GradBundle gj = conv2d_backward(t.recon_in[j], W(net, net.recon[j][0]), 1, 1, d_q1);
            accumulate(g, net.recon[j][0], gj);
            d_b = std::move(gj.d_input);
        }
        Tensor4 d_fpre = leaky_relu_backward(t.recon_q1[0], kLeakySlope, d_b);
        GradBundle gf = deconv2d_backward(t.rest_out, W(net, net.feat_up), 2, 1, 1, d_fpre);
        accumulate(g, net.feat_up, gf);
        d_rest_out = std::move(gf.d_input);
    }

    // lr_hat feeds both the restoration loss and the image upsampler
    GradBundle up_g = deconv2d_backward(t.lr_hat, W(net, net.img_up), 2, 1, 1, d_hr_hat);
    accumulate(g, net.img_up, up_g);
    Tensor4 d_lr = add(d_lr_hat, up_g.d_input);

    // lr_hat = dlr + r_res
    GradBundle res_head_g = conv2d_backward(t.rest_out, W(net, net.res_head), 1, 1, d_lr);
    accumulate(g, net.res_head, res_head_g);
    if (d_rest_out.size() == 0)
        d_rest_out = std::move(res_head_g.d_input);
    else
        add_into(d_rest_out, res_head_g.d_input);

    Tensor4 d_a = std::move(d_rest_out);
    if (c.arch == Arch::v2) {
        for (int i = static_cast<int>(net.rest.size()) - 1; i >= 0; --i) {
            // a_i feeds skip i and (for i < last) the next restoration layer
            const Tensor4 a_i = (i + 1 < static_cast<int>(net.rest.size()))
                                    ? t.rest_in[i + 1]
                                    : t.rest_out;
            GradBundle sg = deconv2d_backward(a_i, W(net, net.skips[i]), 2, 1, 1, d_skip[i]);
            accumulate(g, net.skips[i], sg);
            add_into(d_a, sg.d_input);

            Tensor4 d_p2 = leaky_relu_backward(t.rest_p2[i], kLeakySlope, d_a);
            GradBundle g2 = conv2d_backward(t.rest_h1[i], W(net, net.rest[i][1]), 1, 1, d_p2);
            accumulate(g, net.rest[i][1], g2);
            Tensor4 d_p1 = leaky_relu_backward(t.rest_p1[i], kLeakySlope, g2.d_input);
            GradBundle g1 = conv2d_backward(t.rest_in[i], W(net, net.rest[i][0]), 1, 1, d_p1);
            accumulate(g, net.rest[i][0], g1);
            d_a = std::move(g1.d_input);
        }
    } else {
        for (int i = static_cast<int>(net.rest.size()) - 1; i >= 0; --i) {
            Tensor4 d_p1 = leaky_relu_backward(t.rest_p1[i], kLeakySlope, d_a);
            GradBundle gi = conv2d_backward(t.rest_in[i], W(net, net.rest[i][0]), 1, 1, d_p1);
            accumulate(g, net.rest[i][0], gi);
            d_a = std::move(gi.d_input);
        }
    }

    Tensor4 d_stem_pre = leaky_relu_backward(t.stem_pre, kLeakySlope, d_a);
    GradBundle gs = conv2d_backward(t.input, W(net, net.stem), 1, spad, d_stem_pre);
    accumulate(g, net.stem, gs);
    return g;
}

}  // namespace rrdncnn
