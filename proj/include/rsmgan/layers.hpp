#ifndef RSMGAN_LAYERS_HPP
#define RSMGAN_LAYERS_HPP

#include "rsmgan/autograd.hpp"
#include "rsmgan/rng.hpp"
#include "rsmgan/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rsmgan {

using autograd::Var;

/// Named trainable parameters of a network component.
struct ParamRegistry {
    std::vector<std::pair<std::string, Var>> entries;

    Var add(const std::string& name, Tensor init) {
        entries.emplace_back(name, autograd::leaf(std::move(init)));
        return entries.back().second;
    }
    std::vector<Var> vars() const {
        std::vector<Var> v;
        v.reserve(entries.size());
        for (const auto& e : entries) v.push_back(e.second);
        return v;
    }
};

Tensor normal_init(std::vector<long> shape, double stddev, Rng& rng);

struct Conv2d {
    Var weight; // (Cin*k*k, Cout)
    Var bias;   // (Cout); null when bias disabled
    long cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, long cin, long cout, long k, long stride,
           long pad, Rng& rng, bool with_bias = true);

    Var forward(const Var& x) const; // (B,Cin,H,W) -> (B,Cout,OH,OW)
    static long out_size(long in, long k, long stride, long pad) {
        return (in + 2 * pad - k) / stride + 1;
    }
};

struct ConvTranspose2d {
    Var weight; // (Cout*k*k, Cin)  — adjoint-of-conv layout
    Var bias;   // (Cout)
    long cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

    ConvTranspose2d() = default;
    ConvTranspose2d(ParamRegistry& reg, const std::string& name, long cin, long cout, long k,
                    long stride, long pad, Rng& rng);

    /// Output spatial size must be specified; the implied output padding is
    /// (out - ((in-1)*stride - 2*pad + k)) and must lie in [0, stride).
    Var forward(const Var& x, long out_h, long out_w) const;
};

struct Dense {
    Var weight; // (In, Out)
    Var bias;   // (Out)
    Dense() = default;
    Dense(ParamRegistry& reg, const std::string& name, long in, long out, Rng& rng);
    Var forward(const Var& x) const; // (B,In) -> (B,Out)
};

/// Convolutional LSTM over a slot sequence; spatial size is preserved
/// (3x3 kernels, stride 1, pad 1).
struct ConvLSTM {
    Conv2d input_conv;  // Cin  -> 4*Ch, with bias
    Conv2d hidden_conv; // Ch   -> 4*Ch, no bias
    long channels = 0;

    ConvLSTM() = default;
    ConvLSTM(ParamRegistry& reg, const std::string& name, long cin, long ch, Rng& rng);

    /// Hidden states per input slot, oldest first. When a mask (B, N) is
    /// given, masked slots are skipped: the recurrent state passes through
    /// unchanged, so masked content cannot reach any later state.
    std::vector<Var> run(const std::vector<Var>& xs, const Tensor* mask = nullptr) const;
};

/// Eq-4 smoothed attention: softmax of rescaled flattened inner products
/// against the final (current-step) state, holiday slots masked out and the
/// surviving weights renormalized. Returns the combined state and the
/// post-mask weights (B, N).
struct AttentionResult {
    Var combined;
    Tensor weights;
};

AttentionResult attention_combine(const std::vector<Var>& states, const Tensor& mask,
                                  double rescale);

/// Tensor-level convenience over a single (unbatched) slot list.
struct AttentionOutput {
    Tensor combined;
    std::vector<double> weights;
};

AttentionOutput attention_combine(const std::vector<Tensor>& states, const std::vector<char>& mask,
                                  double rescale);

} // namespace rsmgan

#endif
