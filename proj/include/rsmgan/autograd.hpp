#ifndef RSMGAN_AUTOGRAD_HPP
#define RSMGAN_AUTOGRAD_HPP

#include "rsmgan/tensor.hpp"

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace rsmgan::autograd {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in a define-by-run graph. Backward rules are expressed in
/// terms of the same differentiable primitives, so gradients can be
/// differentiated again (create_graph) — the WGAN gradient penalty needs
/// grad-of-grad with respect to the critic parameters.
struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<Var> parents;
    // Given this node's own Var and the incoming output gradient, produce
    // one gradient Var per parent (nullptr where no gradient flows).
    std::function<std::vector<Var>(const Var& self, const Var& gy)> vjp;
    const char* op = "leaf";
};

/// RAII guard disabling graph construction (inference / plain backward).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

Var constant(Tensor v);
Var leaf(Tensor v); // trainable / differentiable input
Var detach(const Var& v);

// ---- elementwise & scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var leaky_relu(const Var& a, double negative_slope);
Var exp_op(const Var& a);
Var sqrt_op(const Var& a);

// ---- linear algebra & shape ----
Var matmul(const Var& a, const Var& b); // (M,K) x (K,N)
Var transpose(const Var& a);            // 2D
Var reshape(const Var& a, std::vector<long> shape);
Var sum_all(const Var& a);                  // -> shape {1}
Var spread(const Var& a, std::vector<long> shape); // scalar -> full tensor
Var row_sum(const Var& a);                  // (R,C) -> (R,1)
Var repeat_cols(const Var& a, long cols);   // (R,1) -> (R,C)
Var col(const Var& a, long j);              // (R,C) -> (R,1)
Var hstack(const std::vector<Var>& cols);   // N x (R,1) -> (R,N)

// ---- 4D image ops (B,C,H,W) ----
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& a, long from, long to);
Var add_channel_bias(const Var& x, const Var& bias); // bias shape (C)
Var channel_sum(const Var& x);                       // -> (C)
Var broadcast_channel(const Var& bias, std::vector<long> shape);
Var add_row_bias(const Var& x, const Var& bias); // (R,C) + (C)
Var col_sum(const Var& x);                       // (R,C) -> (C)
Var broadcast_rows(const Var& bias, long rows);

/// Conv geometry relating an image (B,C,H,W) to its patch matrix
/// (B*OH*OW, C*kh*kw) with OH = floor((H + 2p - k)/s) + 1.
struct ConvGeom {
    long B = 0, C = 0, H = 0, W = 0;
    long k = 3, s = 1, p = 1;
    long OH = 0, OW = 0;

    static ConvGeom make(long B, long C, long H, long W, long k, long s, long p);
};

Var im2col(const Var& x, const ConvGeom& g);    // image -> patches
Var col2im(const Var& cols, const ConvGeom& g); // patches -> image (scatter-add)
Var nhwc_to_nchw(const Var& x2d, long B, long H, long W, long C);
Var nchw_to_nhwc(const Var& x4d); // -> (B*H*W, C)

/// Multiply every sample of a 4D batch by its own constant scalar.
Var mul_sample(const Var& x, const Tensor& per_sample);

// ---- reverse pass ----
using GradMap = std::unordered_map<Node*, Var>;

/// Reverse-mode sweep from a scalar root. With create_graph the returned
/// gradients are themselves differentiable graph nodes.
GradMap backward(const Var& root, bool create_graph = false);

/// Gradient tensor for v, zero-shaped like v when none flowed.
Tensor grad_of(const GradMap& grads, const Var& v);

double scalar_value(const Var& v);

} // namespace rsmgan::autograd

#endif
