#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tilefreq {

enum class Arch { linear, mlp256, tileCnn };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& s);

struct ArchSpec {
    Arch arch = Arch::mlp256;
    int input_dim = 2;        // linear / mlp256 feature dimension
    int channels = 3;         // tileCnn input channels
    int k = 8;                // tileCnn spatial size (k x k coefficient block)
    int conv_channels = 16;   // 3x3 conv output channels
    int conv1_channels = 16;  // 1x1 conv output channels
    int latent_dim = 256;
    int num_classes = 1;

    int feature_dim() const {
        return arch == Arch::tileCnn ? channels * k * k : input_dim;
    }
};

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
};

struct ConvLayer {
    int in_ch = 0, out_ch = 0, ksize = 1;
    std::vector<double> w;  // out_ch x in_ch x ksize x ksize
    std::vector<double> b;  // out_ch
};

// Also used as the gradient container: zeros_like + sgd_step below.
struct ModelParams {
    ArchSpec spec;
    ConvLayer conv3, conv1;  // tileCnn only
    DenseLayer fc1;          // linear: in->classes; mlp/cnn: in->latent
    DenseLayer fc2;          // mlp/cnn: latent->classes
};

// Xavier-uniform weights (a = sqrt(6/(fanIn+fanOut))), zero biases,
// deterministic given seed.
ModelParams init_params(const ArchSpec& spec, std::uint64_t seed);

ModelParams zeros_like(const ModelParams& params);
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);
std::size_t param_count(const ModelParams& params);

struct ForwardTrace {
    std::vector<double> input;
    std::vector<double> conv3_pre, conv3_act;  // tileCnn
    std::vector<double> conv1_pre, conv1_act;  // tileCnn
    std::vector<double> fc1_pre, fc1_act;
    std::vector<double> logits;
};

// features: input_dim for linear/mlp256, channels*k*k (channel-major
// row-major CoeffBlock values) for tileCnn.
std::vector<double> forward(const ModelParams& params, std::span<const double> features,
                            ForwardTrace* trace = nullptr);

// Accumulates d loss / d params into grads given d loss / d logits.
void backward(const ModelParams& params, const ForwardTrace& trace,
              std::span<const double> dlogits, ModelParams& grads);

// tile2vec encoder: the tileCnn stack up to and including the latent linear
// layer, pre-ReLU (the classifier head applies ReLU then fc2 on top of this).
std::vector<double> encoder_forward(const ModelParams& params, std::span<const double> features,
                                    ForwardTrace* trace = nullptr);
void encoder_backward(const ModelParams& params, const ForwardTrace& trace,
                      std::span<const double> dlatent, ModelParams& grads);

// Checkpoint file: magic "TFM1", uint32 arch tag, uint32 dims, float64
// parameters in layer order, little-endian.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace tilefreq
