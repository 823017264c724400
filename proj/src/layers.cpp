#include "rsmgan/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rsmgan {

namespace ag = autograd;

Tensor normal_init(std::vector<long> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (long i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
    return t;
}

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, long cin_, long cout_, long k_,
               long stride_, long pad_, Rng& rng, bool with_bias)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_) {
    double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    weight = reg.add(name + ".W", normal_init({cin * k * k, cout}, stddev, rng));
    if (with_bias) bias = reg.add(name + ".b", Tensor::zeros({cout}));
}

Var Conv2d::forward(const Var& x) const {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4 || s[1] != cin)
        throw std::invalid_argument("Conv2d: input shape mismatch, got " +
                                    Tensor::shape_str(s) + " want Cin=" + std::to_string(cin));
    auto geom = ag::ConvGeom::make(s[0], cin, s[2], s[3], k, stride, pad);
    Var cols = ag::im2col(x, geom);
    Var z = ag::matmul(cols, weight);
    Var out = ag::nhwc_to_nchw(z, geom.B, geom.OH, geom.OW, cout);
    if (bias) out = ag::add_channel_bias(out, bias);
    return out;
}

ConvTranspose2d::ConvTranspose2d(ParamRegistry& reg, const std::string& name, long cin_, long cout_,
                                 long k_, long stride_, long pad_, Rng& rng)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_) {
    double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    weight = reg.add(name + ".W", normal_init({cout * k * k, cin}, stddev, rng));
    bias = reg.add(name + ".b", Tensor::zeros({cout}));
}

Var ConvTranspose2d::forward(const Var& x, long out_h, long out_w) const {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4 || s[1] != cin)
        throw std::invalid_argument("ConvTranspose2d: input shape mismatch");
    const long B = s[0], H = s[2], W = s[3];
    const long base_h = (H - 1) * stride - 2 * pad + k;
    const long base_w = (W - 1) * stride - 2 * pad + k;
    if (out_h < base_h || out_h - base_h >= stride || out_w < base_w || out_w - base_w >= stride)
        throw std::invalid_argument("ConvTranspose2d: unreachable output size " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    // The deconv output plays the image role of a conv whose patch side is x.
    auto geom = ag::ConvGeom::make(B, cout, out_h, out_w, k, stride, pad);
    if (geom.OH != H || geom.OW != W)
        throw std::invalid_argument("ConvTranspose2d: geometry mismatch");
    Var x2 = ag::nchw_to_nhwc(x);                       // (B*H*W, Cin)
    Var cols = ag::matmul(x2, ag::transpose(weight));   // (B*H*W, Cout*k*k)
    Var img = ag::col2im(cols, geom);                   // (B, Cout, out_h, out_w)
    return ag::add_channel_bias(img, bias);
}

Dense::Dense(ParamRegistry& reg, const std::string& name, long in, long out, Rng& rng) {
    double stddev = std::sqrt(2.0 / static_cast<double>(in));
    weight = reg.add(name + ".W", normal_init({in, out}, stddev, rng));
    bias = reg.add(name + ".b", Tensor::zeros({out}));
}

Var Dense::forward(const Var& x) const {
    return ag::add_row_bias(ag::matmul(x, weight), bias);
}

ConvLSTM::ConvLSTM(ParamRegistry& reg, const std::string& name, long cin, long ch, Rng& rng)
    : channels(ch) {
    input_conv = Conv2d(reg, name + ".wx", cin, 4 * ch, 3, 1, 1, rng, true);
    hidden_conv = Conv2d(reg, name + ".wh", ch, 4 * ch, 3, 1, 1, rng, false);
    // Forget-gate bias starts at 1 so early training does not wash state out.
    Tensor& b = input_conv.bias->value;
    for (long c = ch; c < 2 * ch; ++c) b[c] = 1.0;
}

std::vector<Var> ConvLSTM::run(const std::vector<Var>& xs, const Tensor* mask) const {
    if (xs.empty()) throw std::invalid_argument("ConvLSTM: empty slot sequence");
    const auto& s = xs[0]->value.shape();
    const long B = s[0], H = s[2], W = s[3];
    if (mask && (mask->rank() != 2 || mask->dim(0) != B ||
                 mask->dim(1) != static_cast<long>(xs.size())))
        throw std::invalid_argument("ConvLSTM: mask must be (B, slots)");
    Var h = ag::constant(Tensor::zeros({B, channels, H, W}));
    Var c = ag::constant(Tensor::zeros({B, channels, H, W}));
    std::vector<Var> hidden;
    hidden.reserve(xs.size());
    for (size_t t = 0; t < xs.size(); ++t) {
        Var gates = ag::add(input_conv.forward(xs[t]), hidden_conv.forward(h));
        Var gi = ag::sigmoid(ag::slice_channels(gates, 0, channels));
        Var gf = ag::sigmoid(ag::slice_channels(gates, channels, 2 * channels));
        Var go = ag::sigmoid(ag::slice_channels(gates, 2 * channels, 3 * channels));
        Var gg = ag::tanh_op(ag::slice_channels(gates, 3 * channels, 4 * channels));
        Var c_new = ag::add(ag::mul(gf, c), ag::mul(gi, gg));
        Var h_new = ag::mul(go, ag::tanh_op(c_new));
        if (mask) {
            Tensor keep({B});
            Tensor skip({B});
            bool any_masked = false;
            for (long b = 0; b < B; ++b) {
                double m = mask->at2(b, static_cast<long>(t)) != 0.0 ? 1.0 : 0.0;
                keep[b] = m;
                skip[b] = 1.0 - m;
                if (m == 0.0) any_masked = true;
            }
            if (any_masked) {
                c_new = ag::add(ag::mul_sample(c_new, keep), ag::mul_sample(c, skip));
                h_new = ag::add(ag::mul_sample(h_new, keep), ag::mul_sample(h, skip));
            }
        }
        c = c_new;
        h = h_new;
        hidden.push_back(h);
    }
    return hidden;
}

AttentionResult attention_combine(const std::vector<Var>& states, const Tensor& mask,
                                  double rescale) {
    if (states.empty()) throw std::invalid_argument("attention_combine: no states");
    if (!(rescale > 0.0)) throw std::invalid_argument("attention_combine: rescale must be positive");
    const long N = static_cast<long>(states.size());
    const auto& shape = states[0]->value.shape();
    long B = shape[0];
    long F = 1;
    for (size_t i = 1; i < shape.size(); ++i) F *= shape[i];
    if (mask.rank() != 2 || mask.dim(0) != B || mask.dim(1) != N)
        throw std::invalid_argument("attention_combine: mask must be (B,N)");
    for (long b = 0; b < B; ++b) {
        bool any = false;
        for (long i = 0; i < N; ++i)
            if (mask.at2(b, i) != 0.0) any = true;
        if (!any) throw std::invalid_argument("attention_combine: all slots masked");
    }

    std::vector<Var> flat;
    flat.reserve(static_cast<size_t>(N));
    for (const auto& st : states) flat.push_back(ag::reshape(st, {B, F}));
    const Var& query = flat.back(); // current step

    std::vector<Var> sims;
    sims.reserve(static_cast<size_t>(N));
    for (long i = 0; i < N; ++i)
        sims.push_back(ag::row_sum(ag::mul(query, flat[static_cast<size_t>(i)])));
    Var logits = ag::scale(ag::hstack(sims), 1.0 / rescale); // (B,N)

    // Numerically stabilized masked softmax; the shift is detached and the
    // mask multiplies the exponentials, so surviving weights renormalize.
    Tensor shift({B, 1});
    for (long b = 0; b < B; ++b) {
        double mx = -std::numeric_limits<double>::infinity();
        for (long i = 0; i < N; ++i)
            if (mask.at2(b, i) != 0.0) mx = std::max(mx, logits->value.at2(b, i));
        shift.at2(b, 0) = mx;
    }
    Var centered = ag::sub(logits, ag::repeat_cols(ag::constant(shift), N));
    Var e = ag::mul(ag::exp_op(centered), ag::constant(mask));
    Var denom = ag::row_sum(e);
    Var alpha = ag::div(e, ag::repeat_cols(denom, N)); // (B,N)

    Var combined;
    for (long i = 0; i < N; ++i) {
        Var wi = ag::repeat_cols(ag::col(alpha, i), F);
        Var term = ag::mul(wi, flat[static_cast<size_t>(i)]);
        combined = combined ? ag::add(combined, term) : term;
    }
    combined = ag::reshape(combined, shape);
    return {combined, alpha->value};
}

AttentionOutput attention_combine(const std::vector<Tensor>& states, const std::vector<char>& mask,
                                  double rescale) {
    if (states.size() != mask.size())
        throw std::invalid_argument("attention_combine: mask size mismatch");
    const long N = static_cast<long>(states.size());
    std::vector<Var> vars;
    vars.reserve(states.size());
    for (const auto& t : states) {
        std::vector<long> shape{1};
        for (long d : t.shape()) shape.push_back(d);
        vars.push_back(ag::constant(t.reshaped(shape)));
    }
    Tensor m({1, N});
    for (long i = 0; i < N; ++i) m.at2(0, i) = mask[static_cast<size_t>(i)] ? 1.0 : 0.0;
    ag::NoGradGuard guard;
    AttentionResult res = attention_combine(vars, m, rescale);
    AttentionOutput out;
    out.combined = res.combined->value.reshaped(states[0].shape());
    out.weights.resize(static_cast<size_t>(N));
    for (long i = 0; i < N; ++i) out.weights[static_cast<size_t>(i)] = res.weights.at2(0, i);
    return out;
}

} // namespace rsmgan
