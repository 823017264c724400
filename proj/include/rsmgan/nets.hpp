#ifndef RSMGAN_NETS_HPP
#define RSMGAN_NETS_HPP

#include "rsmgan/layers.hpp"

#include <string>
#include <vector>

namespace rsmgan {

struct NetworkConfig;

/// Convolutional-recurrent encoder: a conv stack applied slot-wise, a
/// ConvLSTM over the slot sequence at every depth, and Eq-4 attention
/// combining each layer's hidden states into one map per scale.
struct Encoder {
    ParamRegistry params;
    std::vector<Conv2d> convs;
    std::vector<ConvLSTM> lstms;
    std::vector<long> spatial; // per layer output H (=W)
    long in_channels = 0;
    long input_hw = 0;
    double rescale = 5.0;

    Encoder() = default;
    Encoder(const std::string& name, const NetworkConfig& cfg, long n, long in_c, Rng rng);

    struct Output {
        std::vector<Var> combined;   // per layer, (B, c_l, s_l, s_l)
        std::vector<Tensor> alphas;  // per layer, (B, N)
        Var latent;                  // (B, c_L * s_L * s_L)
    };

    Output forward(const std::vector<Var>& slots, const Tensor& mask) const;
};

/// Deconvolution stack mirroring the encoder, concatenating each scale's
/// attention-combined map on the way up; final layer is linear.
struct Decoder {
    ParamRegistry params;
    std::vector<ConvTranspose2d> deconvs; // index l: layer (l+1) of the encoder
    std::vector<long> spatial;            // encoder spatial sizes incl. input
    long out_channels = 0;

    Decoder() = default;
    Decoder(const std::string& name, const NetworkConfig& cfg, long n, long out_c, Rng rng);

    Var forward(const std::vector<Var>& combined) const;
};

/// Three stride-2 conv layers and a linear head producing one critic value
/// per sample. No normalization layers (they fight the gradient penalty).
struct Discriminator {
    ParamRegistry params;
    std::vector<Conv2d> convs;
    Dense head;
    long in_channels = 0;
    long input_hw = 0;

    Discriminator() = default;
    Discriminator(const std::string& name, const NetworkConfig& cfg, long n, long in_c, Rng rng);

    Var forward(const Var& x) const; // (B,C,n,n) -> (B,1)
};

} // namespace rsmgan

#endif
