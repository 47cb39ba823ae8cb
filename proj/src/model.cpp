#include "tilefreq/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "tilefreq/binio.hpp"
#include "tilefreq/rng.hpp"

namespace tilefreq {

namespace {

void check_spec(const ArchSpec& spec) {
    if (spec.num_classes < 1) throw std::invalid_argument("ArchSpec: numClasses must be >= 1");
    if (spec.latent_dim < 1) throw std::invalid_argument("ArchSpec: latentDim must be >= 1");
    if (spec.arch == Arch::tileCnn) {
        if (spec.channels < 1 || spec.k < 1 || spec.conv_channels < 1 || spec.conv1_channels < 1) {
            throw std::invalid_argument("ArchSpec: invalid tileCnn dims");
        }
    } else if (spec.input_dim < 1) {
        throw std::invalid_argument("ArchSpec: inputDim must be >= 1");
    }
}

DenseLayer make_dense(int in, int out) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.w.assign(static_cast<std::size_t>(out) * in, 0.0);
    l.b.assign(out, 0.0);
    return l;
}

ConvLayer make_conv(int in_ch, int out_ch, int ksize) {
    ConvLayer l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.ksize = ksize;
    l.w.assign(static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize, 0.0);
    l.b.assign(out_ch, 0.0);
    return l;
}

// All-zero parameter set with the right shapes for the architecture.
ModelParams make_layout(const ArchSpec& spec) {
    check_spec(spec);
    ModelParams p;
    p.spec = spec;
    switch (spec.arch) {
        case Arch::linear:
            p.fc1 = make_dense(spec.input_dim, spec.num_classes);
            break;
        case Arch::mlp256:
            p.fc1 = make_dense(spec.input_dim, spec.latent_dim);
            p.fc2 = make_dense(spec.latent_dim, spec.num_classes);
            break;
        case Arch::tileCnn:
            p.conv3 = make_conv(spec.channels, spec.conv_channels, 3);
            p.conv1 = make_conv(spec.conv_channels, spec.conv1_channels, 1);
            p.fc1 = make_dense(spec.conv1_channels * spec.k * spec.k, spec.latent_dim);
            p.fc2 = make_dense(spec.latent_dim, spec.num_classes);
            break;
    }
    return p;
}

void xavier_fill(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w) v = rng.next_in(-a, a);
}

void relu(std::span<const double> pre, std::vector<double>& act) {
    act.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

void relu_grad(std::span<const double> pre, std::vector<double>& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (pre[i] <= 0.0) d[i] = 0.0;
    }
}

std::vector<double> dense_forward(const DenseLayer& l, std::span<const double> x) {
    if (static_cast<int>(x.size()) != l.in) throw std::invalid_argument("dense: input size mismatch");
    std::vector<double> out(l.out);
    for (int o = 0; o < l.out; ++o) {
        double acc = l.b[o];
        const double* wo = l.w.data() + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) acc += wo[i] * x[i];
        out[o] = acc;
    }
    return out;
}

// Accumulates into glayer and returns d loss / d x.
std::vector<double> dense_backward(const DenseLayer& l, std::span<const double> x,
                                   std::span<const double> dout, DenseLayer& glayer) {
    std::vector<double> dx(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
        double g = dout[o];
        glayer.b[o] += g;
        double* gw = glayer.w.data() + static_cast<std::size_t>(o) * l.in;
        const double* wo = l.w.data() + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) {
            gw[i] += g * x[i];
            dx[i] += wo[i] * g;
        }
    }
    return dx;
}

// 3x3 conv, stride 1, zero padding 1, square n x n planes.
std::vector<double> conv3_forward(const ConvLayer& l, std::span<const double> x, int n) {
    std::vector<double> out(static_cast<std::size_t>(l.out_ch) * n * n);
    for (int oc = 0; oc < l.out_ch; ++oc) {
        for (int y = 0; y < n; ++y) {
            for (int xx = 0; xx < n; ++xx) {
                double acc = l.b[oc];
                for (int ic = 0; ic < l.in_ch; ++ic) {
                    for (int dy = 0; dy < 3; ++dy) {
                        int iy = y + dy - 1;
                        if (iy < 0 || iy >= n) continue;
                        for (int dx = 0; dx < 3; ++dx) {
                            int ix = xx + dx - 1;
                            if (ix < 0 || ix >= n) continue;
                            acc += l.w[((static_cast<std::size_t>(oc) * l.in_ch + ic) * 3 + dy) * 3 + dx] *
                                   x[(static_cast<std::size_t>(ic) * n + iy) * n + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(oc) * n + y) * n + xx] = acc;
            }
        }
    }
    return out;
}

std::vector<double> conv3_backward(const ConvLayer& l, std::span<const double> x,
                                   std::span<const double> dout, int n, ConvLayer& glayer) {
    std::vector<double> dx(x.size(), 0.0);
    for (int oc = 0; oc < l.out_ch; ++oc) {
        for (int y = 0; y < n; ++y) {
            for (int xx = 0; xx < n; ++xx) {
                double g = dout[(static_cast<std::size_t>(oc) * n + y) * n + xx];
                glayer.b[oc] += g;
                for (int ic = 0; ic < l.in_ch; ++ic) {
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = y + ky - 1;
                        if (iy < 0 || iy >= n) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = xx + kx - 1;
                            if (ix < 0 || ix >= n) continue;
                            std::size_t wi = ((static_cast<std::size_t>(oc) * l.in_ch + ic) * 3 + ky) * 3 + kx;
                            std::size_t xi = (static_cast<std::size_t>(ic) * n + iy) * n + ix;
                            glayer.w[wi] += g * x[xi];
                            dx[xi] += l.w[wi] * g;
                        }
                    }
                }
            }
        }
    }
    return dx;
}

std::vector<double> conv1_forward(const ConvLayer& l, std::span<const double> x, int n) {
    std::vector<double> out(static_cast<std::size_t>(l.out_ch) * n * n);
    const int px = n * n;
    for (int oc = 0; oc < l.out_ch; ++oc) {
        for (int p = 0; p < px; ++p) {
            double acc = l.b[oc];
            for (int ic = 0; ic < l.in_ch; ++ic) {
                acc += l.w[static_cast<std::size_t>(oc) * l.in_ch + ic] * x[static_cast<std::size_t>(ic) * px + p];
            }
            out[static_cast<std::size_t>(oc) * px + p] = acc;
        }
    }
    return out;
}

std::vector<double> conv1_backward(const ConvLayer& l, std::span<const double> x,
                                   std::span<const double> dout, int n, ConvLayer& glayer) {
    std::vector<double> dx(x.size(), 0.0);
    const int px = n * n;
    for (int oc = 0; oc < l.out_ch; ++oc) {
        for (int p = 0; p < px; ++p) {
            double g = dout[static_cast<std::size_t>(oc) * px + p];
            glayer.b[oc] += g;
            for (int ic = 0; ic < l.in_ch; ++ic) {
                std::size_t wi = static_cast<std::size_t>(oc) * l.in_ch + ic;
                std::size_t xi = static_cast<std::size_t>(ic) * px + p;
                glayer.w[wi] += g * x[xi];
                dx[xi] += l.w[wi] * g;
            }
        }
    }
    return dx;
}

void check_features(const ArchSpec& spec, std::span<const double> features) {
    if (static_cast<int>(features.size()) != spec.feature_dim()) {
        throw std::invalid_argument("forward: feature size mismatch");
    }
}

// Runs the tileCnn stack through the latent layer; fills the trace.
void cnn_trunk(const ModelParams& params, std::span<const double> features, ForwardTrace& t) {
    const int n = params.spec.k;
    t.input.assign(features.begin(), features.end());
    t.conv3_pre = conv3_forward(params.conv3, features, n);
    relu(t.conv3_pre, t.conv3_act);
    t.conv1_pre = conv1_forward(params.conv1, t.conv3_act, n);
    relu(t.conv1_pre, t.conv1_act);
    t.fc1_pre = dense_forward(params.fc1, t.conv1_act);
}

// Backprop from d loss / d fc1_pre down through the conv stack.
void cnn_trunk_backward(const ModelParams& params, const ForwardTrace& t,
                        std::vector<double> dfc1_pre, ModelParams& grads) {
    const int n = params.spec.k;
    std::vector<double> dconv1_act = dense_backward(params.fc1, t.conv1_act, dfc1_pre, grads.fc1);
    relu_grad(t.conv1_pre, dconv1_act);
    std::vector<double> dconv3_act = conv1_backward(params.conv1, t.conv3_act, dconv1_act, n, grads.conv1);
    relu_grad(t.conv3_pre, dconv3_act);
    conv3_backward(params.conv3, t.input, dconv3_act, n, grads.conv3);
}

}  // namespace

std::string to_string(Arch arch) {
    switch (arch) {
        case Arch::linear: return "linear";
        case Arch::mlp256: return "mlp256";
        case Arch::tileCnn: return "tileCnn";
    }
    return "?";
}

Arch arch_from_string(const std::string& s) {
    if (s == "linear") return Arch::linear;
    if (s == "mlp256") return Arch::mlp256;
    if (s == "tileCnn") return Arch::tileCnn;
    throw std::invalid_argument("unknown architecture: " + s);
}

ModelParams init_params(const ArchSpec& spec, std::uint64_t seed) {
    ModelParams p = make_layout(spec);
    if (spec.arch == Arch::tileCnn) {
        Rng r3(seed, 11), r1(seed, 12);
        xavier_fill(p.conv3.w, spec.channels * 9, spec.conv_channels * 9, r3);
        xavier_fill(p.conv1.w, spec.conv_channels, spec.conv1_channels, r1);
    }
    Rng rf1(seed, 13), rf2(seed, 14);
    xavier_fill(p.fc1.w, p.fc1.in, p.fc1.out, rf1);
    if (spec.arch != Arch::linear) xavier_fill(p.fc2.w, p.fc2.in, p.fc2.out, rf2);
    return p;
}

ModelParams zeros_like(const ModelParams& params) { return make_layout(params.spec); }

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
    auto step = [lr](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    };
    step(params.conv3.w, grads.conv3.w);
    step(params.conv3.b, grads.conv3.b);
    step(params.conv1.w, grads.conv1.w);
    step(params.conv1.b, grads.conv1.b);
    step(params.fc1.w, grads.fc1.w);
    step(params.fc1.b, grads.fc1.b);
    step(params.fc2.w, grads.fc2.w);
    step(params.fc2.b, grads.fc2.b);
}

std::size_t param_count(const ModelParams& p) {
    return p.conv3.w.size() + p.conv3.b.size() + p.conv1.w.size() + p.conv1.b.size() +
           p.fc1.w.size() + p.fc1.b.size() + p.fc2.w.size() + p.fc2.b.size();
}

std::vector<double> forward(const ModelParams& params, std::span<const double> features,
                            ForwardTrace* trace) {
    check_features(params.spec, features);
    ForwardTrace local;
    ForwardTrace& t = trace ? *trace : local;
    switch (params.spec.arch) {
        case Arch::linear:
            t.input.assign(features.begin(), features.end());
            t.logits = dense_forward(params.fc1, features);
            break;
        case Arch::mlp256:
            t.input.assign(features.begin(), features.end());
            t.fc1_pre = dense_forward(params.fc1, features);
            relu(t.fc1_pre, t.fc1_act);
            t.logits = dense_forward(params.fc2, t.fc1_act);
            break;
        case Arch::tileCnn:
            cnn_trunk(params, features, t);
            relu(t.fc1_pre, t.fc1_act);
            t.logits = dense_forward(params.fc2, t.fc1_act);
            break;
    }
    return t.logits;
}

void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> dlogits, ModelParams& grads) {
    if (static_cast<int>(dlogits.size()) != params.spec.num_classes) {
        throw std::invalid_argument("backward: dlogits size mismatch");
    }
    switch (params.spec.arch) {
        case Arch::linear:
            dense_backward(params.fc1, trace.input, dlogits, grads.fc1);
            break;
        case Arch::mlp256: {
            std::vector<double> dfc1_act = dense_backward(params.fc2, trace.fc1_act, dlogits, grads.fc2);
            relu_grad(trace.fc1_pre, dfc1_act);
            dense_backward(params.fc1, trace.input, dfc1_act, grads.fc1);
            break;
        }
        case Arch::tileCnn: {
            std::vector<double> dfc1_act = dense_backward(params.fc2, trace.fc1_act, dlogits, grads.fc2);
            relu_grad(trace.fc1_pre, dfc1_act);
            cnn_trunk_backward(params, trace, std::move(dfc1_act), grads);
            break;
        }
    }
}

std::vector<double> encoder_forward(const ModelParams& params, std::span<const double> features,
                                    ForwardTrace* trace) {
    if (params.spec.arch != Arch::tileCnn) {
        throw std::invalid_argument("encoder_forward: tileCnn architecture required");
    }
    check_features(params.spec, features);
    ForwardTrace local;
    ForwardTrace& t = trace ? *trace : local;
    cnn_trunk(params, features, t);
    return t.fc1_pre;
}

void encoder_backward(const ModelParams& params, const ForwardTrace& trace,
                      std::span<const double> dlatent, ModelParams& grads) {
    if (params.spec.arch != Arch::tileCnn) {
        throw std::invalid_argument("encoder_backward: tileCnn architecture required");
    }
    if (static_cast<int>(dlatent.size()) != params.spec.latent_dim) {
        throw std::invalid_argument("encoder_backward: dlatent size mismatch");
    }
    cnn_trunk_backward(params, trace, std::vector<double>(dlatent.begin(), dlatent.end()), grads);
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("TFM1", 4);
    put_u32(out, static_cast<std::uint32_t>(params.spec.arch));
    put_u32(out, static_cast<std::uint32_t>(params.spec.input_dim));
    put_u32(out, static_cast<std::uint32_t>(params.spec.channels));
    put_u32(out, static_cast<std::uint32_t>(params.spec.k));
    put_u32(out, static_cast<std::uint32_t>(params.spec.conv_channels));
    put_u32(out, static_cast<std::uint32_t>(params.spec.conv1_channels));
    put_u32(out, static_cast<std::uint32_t>(params.spec.latent_dim));
    put_u32(out, static_cast<std::uint32_t>(params.spec.num_classes));
    auto dump = [&out](const std::vector<double>& v) {
        for (double x : v) put_f64(out, x);
    };
    dump(params.conv3.w);
    dump(params.conv3.b);
    dump(params.conv1.w);
    dump(params.conv1.b);
    dump(params.fc1.w);
    dump(params.fc1.b);
    dump(params.fc2.w);
    dump(params.fc2.b);
    if (!out) throw std::runtime_error("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    check_magic(in, "TFM1", path);
    std::uint32_t tag = get_u32(in, path);
    if (tag > 2) throw std::runtime_error("unknown architecture tag in " + path);
    ArchSpec spec;
    spec.arch = static_cast<Arch>(tag);
    spec.input_dim = static_cast<int>(get_u32(in, path));
    spec.channels = static_cast<int>(get_u32(in, path));
    spec.k = static_cast<int>(get_u32(in, path));
    spec.conv_channels = static_cast<int>(get_u32(in, path));
    spec.conv1_channels = static_cast<int>(get_u32(in, path));
    spec.latent_dim = static_cast<int>(get_u32(in, path));
    spec.num_classes = static_cast<int>(get_u32(in, path));
    ModelParams p = make_layout(spec);
    auto fill = [&in, &path](std::vector<double>& v) {
        for (double& x : v) x = get_f64(in, path);
    };
    fill(p.conv3.w);
    fill(p.conv3.b);
    fill(p.conv1.w);
    fill(p.conv1.b);
    fill(p.fc1.w);
    fill(p.fc1.b);
    fill(p.fc2.w);
    fill(p.fc2.b);
    return p;
}

}  // namespace tilefreq
