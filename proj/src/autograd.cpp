#include "rsmgan/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rsmgan::autograd {

namespace {

thread_local int g_no_grad_depth = 0;

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<std::vector<Var>(const Var&, const Var&)> vjp, const char* op) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = op;
    bool track = grad_enabled();
    if (track) {
        track = false;
        for (const auto& p : parents)
            if (p && p->requires_grad) track = true;
    }
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->vjp = std::move(vjp);
    }
    return node;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    Tensor::shape_str(a->value.shape()) + " vs " +
                                    Tensor::shape_str(b->value.shape()));
}

} // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

Var constant(Tensor v) {
    auto node = std::make_shared<Node>();
    node->value = std::move(v);
    node->op = "const";
    return node;
}

Var leaf(Tensor v) {
    auto node = std::make_shared<Node>();
    node->value = std::move(v);
    node->requires_grad = true;
    node->op = "leaf";
    return node;
}

Var detach(const Var& v) { return constant(v->value); }

// ---- elementwise ----

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    out.array() += b->value.array();
    return make_node(std::move(out), {a, b},
                     [](const Var&, const Var& gy) { return std::vector<Var>{gy, gy}; }, "add");
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    out.array() -= b->value.array();
    return make_node(std::move(out), {a, b},
                     [](const Var&, const Var& gy) {
                         return std::vector<Var>{gy, neg(gy)};
                     },
                     "sub");
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    out.array() *= b->value.array();
    return make_node(std::move(out), {a, b},
                     [](const Var& self, const Var& gy) {
                         return std::vector<Var>{mul(gy, self->parents[1]),
                                                 mul(gy, self->parents[0])};
                     },
                     "mul");
}

Var div(const Var& a, const Var& b) {
    check_same_shape(a, b, "div");
    Tensor out = a->value;
    out.array() /= b->value.array();
    return make_node(std::move(out), {a, b},
                     [](const Var& self, const Var& gy) {
                         const Var& num = self->parents[0];
                         const Var& den = self->parents[1];
                         Var ga = div(gy, den);
                         Var gb = neg(div(mul(gy, num), mul(den, den)));
                         return std::vector<Var>{ga, gb};
                     },
                     "div");
}

Var neg(const Var& a) {
    Tensor out = a->value;
    out.array() = -out.array();
    return make_node(std::move(out), {a},
                     [](const Var&, const Var& gy) { return std::vector<Var>{neg(gy)}; }, "neg");
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    out.array() *= s;
    return make_node(std::move(out), {a},
                     [s](const Var&, const Var& gy) { return std::vector<Var>{scale(gy, s)}; },
                     "scale");
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a->value;
    out.array() += s;
    return make_node(std::move(out), {a},
                     [](const Var&, const Var& gy) { return std::vector<Var>{gy}; }, "add_scalar");
}

Var sigmoid(const Var& a) {
    Tensor out = a->value;
    out.array() = 1.0 / (1.0 + (-out.array()).exp());
    return make_node(std::move(out), {a},
                     [](const Var& self, const Var& gy) {
                         // y' = y (1 - y)
                         Var one_minus = add_scalar(neg(self), 1.0);
                         return std::vector<Var>{mul(gy, mul(self, one_minus))};
                     },
                     "sigmoid");
}

Var tanh_op(const Var& a) {
    Tensor out = a->value;
    out.array() = out.array().tanh();
    return make_node(std::move(out), {a},
                     [](const Var& self, const Var& gy) {
                         Var one_minus_sq = add_scalar(neg(mul(self, self)), 1.0);
                         return std::vector<Var>{mul(gy, one_minus_sq)};
                     },
                     "tanh");
}

Var leaky_relu(const Var& a, double negative_slope) {
    Tensor out = a->value;
    Tensor mask(a->value.shape());
    for (long i = 0; i < out.numel(); ++i) {
        if (out[i] >= 0.0) {
            mask[i] = 1.0;
        } else {
            mask[i] = negative_slope;
            out[i] *= negative_slope;
        }
    }
    return make_node(std::move(out), {a},
                     [mask](const Var&, const Var& gy) {
                         return std::vector<Var>{mul(gy, constant(mask))};
                     },
                     "leaky_relu");
}

Var exp_op(const Var& a) {
    Tensor out = a->value;
    out.array() = out.array().exp();
    return make_node(std::move(out), {a},
                     [](const Var& self, const Var& gy) {
                         return std::vector<Var>{mul(gy, self)};
                     },
                     "exp");
}

Var sqrt_op(const Var& a) {
    Tensor out = a->value;
    out.array() = out.array().sqrt();
    return make_node(std::move(out), {a},
                     [](const Var& self, const Var& gy) {
                         return std::vector<Var>{div(gy, scale(self, 2.0))};
                     },
                     "sqrt");
}

// ---- linear algebra & shape ----

Var matmul(const Var& a, const Var& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " +
                                    Tensor::shape_str(a->value.shape()) + " x " +
                                    Tensor::shape_str(b->value.shape()));
    const long M = a->value.dim(0), K = a->value.dim(1), N = b->value.dim(1);
    Tensor out(std::vector<long>{M, N});
    out.mat(M, N).noalias() = a->value.mat(M, K) * b->value.mat(K, N);
    return make_node(std::move(out), {a, b},
                     [](const Var& self, const Var& gy) {
                         const Var& a_ = self->parents[0];
                         const Var& b_ = self->parents[1];
                         return std::vector<Var>{matmul(gy, transpose(b_)),
                                                 matmul(transpose(a_), gy)};
                     },
                     "matmul");
}

Var transpose(const Var& a) {
    if (a->value.rank() != 2) throw std::invalid_argument("transpose: 2D only");
    const long R = a->value.dim(0), C = a->value.dim(1);
    Tensor out(std::vector<long>{C, R});
    out.mat(C, R) = a->value.mat(R, C).transpose();
    return make_node(std::move(out), {a},
                     [](const Var&, const Var& gy) { return std::vector<Var>{transpose(gy)}; },
                     "transpose");
}

Var reshape(const Var& a, std::vector<long> shape) {
    Tensor out = a->value.reshaped(shape);
    std::vector<long> orig = a->value.shape();
    return make_node(std::move(out), {a},
                     [orig](const Var&, const Var& gy) {
                         return std::vector<Var>{reshape(gy, orig)};
                     },
                     "reshape");
}

Var sum_all(const Var& a) {
    Tensor out = Tensor::scalar(a->value.array().sum());
    std::vector<long> shape = a->value.shape();
    return make_node(std::move(out), {a},
                     [shape](const Var&, const Var& gy) {
                         return std::vector<Var>{spread(gy, shape)};
                     },
                     "sum_all");
}

Var spread(const Var& a, std::vector<long> shape) {
    if (a->value.numel() != 1) throw std::invalid_argument("spread: scalar input expected");
    Tensor out = Tensor::full(shape, a->value[0]);
    return make_node(std::move(out), {a},
                     [](const Var&, const Var& gy) { return std::vector<Var>{sum_all(gy)}; },
                     "spread");
}

Var row_sum(const Var& a) {
    if (a->value.rank() != 2) throw std::invalid_argument("row_sum: 2D only");
    const long R = a->value.dim(0), C = a->value.dim(1);
    Tensor out(std::vector<long>{R, 1});
    for (long r = 0; r < R; ++r) {
        double s = 0.0;
        for (long c = 0; c < C; ++c) s += a->value.at2(r, c);
        out.at2(r, 0) = s;
    }
    return make_node(std::move(out), {a},
                     [C](const Var&, const Var& gy) {
                         return std::vector<Var>{repeat_cols(gy, C)};
                     },
                     "row_sum");
}

Var repeat_cols(const Var& a, long cols) {
    if (a->value.rank() != 2 || a->value.dim(1) != 1)
        throw std::invalid_argument("repeat_cols: (R,1) input expected");
    const long R = a->value.dim(0);
    Tensor out(std::vector<long>{R, cols});
    for (long r = 0; r < R; ++r)
        for (long c = 0; c < cols; ++c) out.at2(r, c) = a->value.at2(r, 0);
    return make_node(std::move(out), {a},
                     [](const Var&, const Var& gy) { return std::vector<Var>{row_sum(gy)}; },
                     "repeat_cols");
}

namespace {
Var pad_col(const Var& a, long j, long total_cols) {
    const long R = a->value.dim(0);
    Tensor out(std::vector<long>{R, total_cols});
    for (long r = 0; r < R; ++r) out.at2(r, j) = a->value.at2(r, 0);
    return make_node(std::move(out), {a},
                     [j](const Var&, const Var& gy) { return std::vector<Var>{col(gy, j)}; },
                     "pad_col");
}
} // namespace

Var col(const Var& a, long j) {
    if (a->value.rank() != 2) throw std::invalid_argument("col: 2D only");
    const long R = a->value.dim(0), C = a->value.dim(1);
    if (j < 0 || j >= C) throw std::invalid_argument("col: index out of range");
    Tensor out(std::vector<long>{R, 1});
    for (long r = 0; r < R; ++r) out.at2(r, 0) = a->value.at2(r, j);
    return make_node(std::move(out), {a},
                     [j, C](const Var&, const Var& gy) {
                         return std::vector<Var>{pad_col(gy, j, C)};
                     },
                     "col");
}

Var hstack(const std::vector<Var>& cols_in) {
    if (cols_in.empty()) throw std::invalid_argument("hstack: empty input");
    const long R = cols_in[0]->value.dim(0);
    const long N = static_cast<long>(cols_in.size());
    Tensor out(std::vector<long>{R, N});
    for (long j = 0; j < N; ++j) {
        if (cols_in[static_cast<size_t>(j)]->value.rank() != 2 ||
            cols_in[static_cast<size_t>(j)]->value.dim(0) != R ||
            cols_in[static_cast<size_t>(j)]->value.dim(1) != 1)
            throw std::invalid_argument("hstack: all inputs must be (R,1)");
        for (long r = 0; r < R; ++r) out.at2(r, j) = cols_in[static_cast<size_t>(j)]->value.at2(r, 0);
    }
    return make_node(std::move(out), cols_in,
                     [N](const Var&, const Var& gy) {
                         std::vector<Var> gs;
                         gs.reserve(static_cast<size_t>(N));
                         for (long j = 0; j < N; ++j) gs.push_back(col(gy, j));
                         return gs;
                     },
                     "hstack");
}

// ---- 4D image ops ----

Var concat_channels(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (a->value.rank() != 4 || b->value.rank() != 4 || sa[0] != sb[0] || sa[2] != sb[2] ||
        sa[3] != sb[3])
        throw std::invalid_argument("concat_channels: incompatible shapes");
    const long B = sa[0], Ca = sa[1], Cb = sb[1], H = sa[2], W = sa[3];
    Tensor out(std::vector<long>{B, Ca + Cb, H, W});
    const long plane = H * W;
    for (long n = 0; n < B; ++n) {
        std::copy_n(a->value.data() + n * Ca * plane, Ca * plane,
                    out.data() + n * (Ca + Cb) * plane);
        std::copy_n(b->value.data() + n * Cb * plane, Cb * plane,
                    out.data() + (n * (Ca + Cb) + Ca) * plane);
    }
    return make_node(std::move(out), {a, b},
                     [Ca, Cb](const Var& self, const Var& gy) {
                         (void)self;
                         return std::vector<Var>{slice_channels(gy, 0, Ca),
                                                 slice_channels(gy, Ca, Ca + Cb)};
                     },
                     "concat_channels");
}

namespace {
Var pad_channels(const Var& a, long from, long total_channels) {
    const auto& s = a->value.shape();
    const long B = s[0], C = s[1], H = s[2], W = s[3];
    Tensor out(std::vector<long>{B, total_channels, H, W});
    const long plane = H * W;
    for (long n = 0; n < B; ++n)
        std::copy_n(a->value.data() + n * C * plane, C * plane,
                    out.data() + (n * total_channels + from) * plane);
    return make_node(std::move(out), {a},
                     [from, C](const Var&, const Var& gy) {
                         return std::vector<Var>{slice_channels(gy, from, from + C)};
                     },
                     "pad_channels");
}
} // namespace

Var slice_channels(const Var& a, long from, long to) {
    const auto& s = a->value.shape();
    if (a->value.rank() != 4 || from < 0 || to > s[1] || from >= to)
        throw std::invalid_argument("slice_channels: bad range");
    const long B = s[0], C = s[1], H = s[2], W = s[3], Cs = to - from;
    Tensor out(std::vector<long>{B, Cs, H, W});
    const long plane = H * W;
    for (long n = 0; n < B; ++n)
        std::copy_n(a->value.data() + (n * C + from) * plane, Cs * plane,
                    out.data() + n * Cs * plane);
    const long total = C;
    return make_node(std::move(out), {a},
                     [from, total](const Var&, const Var& gy) {
                         return std::vector<Var>{pad_channels(gy, from, total)};
                     },
                     "slice_channels");
}

Var add_channel_bias(const Var& x, const Var& bias) {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4 || bias->value.rank() != 1 || bias->value.dim(0) != s[1])
        throw std::invalid_argument("add_channel_bias: bad shapes");
    Tensor out = x->value;
    const long B = s[0], C = s[1], plane = s[2] * s[3];
    for (long n = 0; n < B; ++n)
        for (long c = 0; c < C; ++c) {
            double bv = bias->value[c];
            double* ptr = out.data() + (n * C + c) * plane;
            for (long i = 0; i < plane; ++i) ptr[i] += bv;
        }
    return make_node(std::move(out), {x, bias},
                     [](const Var&, const Var& gy) {
                         return std::vector<Var>{gy, channel_sum(gy)};
                     },
                     "add_channel_bias");
}

Var channel_sum(const Var& x) {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4) throw std::invalid_argument("channel_sum: 4D only");
    const long B = s[0], C = s[1], plane = s[2] * s[3];
    Tensor out(std::vector<long>{C});
    for (long n = 0; n < B; ++n)
        for (long c = 0; c < C; ++c) {
            const double* ptr = x->value.data() + (n * C + c) * plane;
            double acc = 0.0;
            for (long i = 0; i < plane; ++i) acc += ptr[i];
            out[c] += acc;
        }
    std::vector<long> shape = s;
    return make_node(std::move(out), {x},
                     [shape](const Var&, const Var& gy) {
                         return std::vector<Var>{broadcast_channel(gy, shape)};
                     },
                     "channel_sum");
}

Var broadcast_channel(const Var& bias, std::vector<long> shape) {
    if (bias->value.rank() != 1 || shape.size() != 4 || bias->value.dim(0) != shape[1])
        throw std::invalid_argument("broadcast_channel: bad shapes");
    const long B = shape[0], C = shape[1], plane = shape[2] * shape[3];
    Tensor out(shape);
    for (long n = 0; n < B; ++n)
        for (long c = 0; c < C; ++c) {
            double bv = bias->value[c];
            double* ptr = out.data() + (n * C + c) * plane;
            for (long i = 0; i < plane; ++i) ptr[i] = bv;
        }
    return make_node(std::move(out), {bias},
                     [](const Var&, const Var& gy) { return std::vector<Var>{channel_sum(gy)}; },
                     "broadcast_channel");
}

Var add_row_bias(const Var& x, const Var& bias) {
    const auto& s = x->value.shape();
    if (x->value.rank() != 2 || bias->value.rank() != 1 || bias->value.dim(0) != s[1])
        throw std::invalid_argument("add_row_bias: bad shapes");
    Tensor out = x->value;
    const long R = s[0], C = s[1];
    for (long r = 0; r < R; ++r)
        for (long c = 0; c < C; ++c) out.at2(r, c) += bias->value[c];
    return make_node(std::move(out), {x, bias},
                     [](const Var&, const Var& gy) {
                         return std::vector<Var>{gy, col_sum(gy)};
                     },
                     "add_row_bias");
}

Var col_sum(const Var& x) {
    if (x->value.rank() != 2) throw std::invalid_argument("col_sum: 2D only");
    const long R = x->value.dim(0), C = x->value.dim(1);
    Tensor out(std::vector<long>{C});
    for (long r = 0; r < R; ++r)
        for (long c = 0; c < C; ++c) out[c] += x->value.at2(r, c);
    return make_node(std::move(out), {x},
                     [R](const Var&, const Var& gy) {
                         return std::vector<Var>{broadcast_rows(gy, R)};
                     },
                     "col_sum");
}

Var broadcast_rows(const Var& bias, long rows) {
    if (bias->value.rank() != 1) throw std::invalid_argument("broadcast_rows: 1D bias expected");
    const long C = bias->value.dim(0);
    Tensor out(std::vector<long>{rows, C});
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < C; ++c) out.at2(r, c) = bias->value[c];
    return make_node(std::move(out), {bias},
                     [](const Var&, const Var& gy) { return std::vector<Var>{col_sum(gy)}; },
                     "broadcast_rows");
}

// ---- im2col / col2im ----

ConvGeom ConvGeom::make(long B, long C, long H, long W, long k, long s, long p) {
    ConvGeom g;
    g.B = B;
    g.C = C;
    g.H = H;
    g.W = W;
    g.k = k;
    g.s = s;
    g.p = p;
    g.OH = (H + 2 * p - k) / s + 1;
    g.OW = (W + 2 * p - k) / s + 1;
    if (g.OH <= 0 || g.OW <= 0) throw std::invalid_argument("ConvGeom: kernel larger than input");
    return g;
}

Var im2col(const Var& x, const ConvGeom& g) {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4 || s[0] != g.B || s[1] != g.C || s[2] != g.H || s[3] != g.W)
        throw std::invalid_argument("im2col: image shape does not match geometry");
    Tensor out(std::vector<long>{g.B * g.OH * g.OW, g.C * g.k * g.k});
    const double* in = x->value.data();
    double* o = out.data();
    const long cols = g.C * g.k * g.k;
    for (long b = 0; b < g.B; ++b)
        for (long oh = 0; oh < g.OH; ++oh)
            for (long ow = 0; ow < g.OW; ++ow) {
                double* row = o + ((b * g.OH + oh) * g.OW + ow) * cols;
                for (long c = 0; c < g.C; ++c)
                    for (long ki = 0; ki < g.k; ++ki) {
                        long h = oh * g.s - g.p + ki;
                        for (long kj = 0; kj < g.k; ++kj) {
                            long w = ow * g.s - g.p + kj;
                            double v = 0.0;
                            if (h >= 0 && h < g.H && w >= 0 && w < g.W)
                                v = in[((b * g.C + c) * g.H + h) * g.W + w];
                            row[(c * g.k + ki) * g.k + kj] = v;
                        }
                    }
            }
    ConvGeom geom = g;
    return make_node(std::move(out), {x},
                     [geom](const Var&, const Var& gy) {
                         return std::vector<Var>{col2im(gy, geom)};
                     },
                     "im2col");
}

Var col2im(const Var& cols, const ConvGeom& g) {
    const auto& s = cols->value.shape();
    if (cols->value.rank() != 2 || s[0] != g.B * g.OH * g.OW || s[1] != g.C * g.k * g.k)
        throw std::invalid_argument("col2im: patch shape does not match geometry");
    Tensor out(std::vector<long>{g.B, g.C, g.H, g.W});
    const double* in = cols->value.data();
    double* o = out.data();
    const long ncols = g.C * g.k * g.k;
    for (long b = 0; b < g.B; ++b)
        for (long oh = 0; oh < g.OH; ++oh)
            for (long ow = 0; ow < g.OW; ++ow) {
                const double* row = in + ((b * g.OH + oh) * g.OW + ow) * ncols;
                for (long c = 0; c < g.C; ++c)
                    for (long ki = 0; ki < g.k; ++ki) {
                        long h = oh * g.s - g.p + ki;
                        if (h < 0 || h >= g.H) continue;
                        for (long kj = 0; kj < g.k; ++kj) {
                            long w = ow * g.s - g.p + kj;
                            if (w < 0 || w >= g.W) continue;
                            o[((b * g.C + c) * g.H + h) * g.W + w] += row[(c * g.k + ki) * g.k + kj];
                        }
                    }
            }
    ConvGeom geom = g;
    return make_node(std::move(out), {cols},
                     [geom](const Var&, const Var& gy) {
                         return std::vector<Var>{im2col(gy, geom)};
                     },
                     "col2im");
}

Var nhwc_to_nchw(const Var& x2d, long B, long H, long W, long C) {
    if (x2d->value.rank() != 2 || x2d->value.dim(0) != B * H * W || x2d->value.dim(1) != C)
        throw std::invalid_argument("nhwc_to_nchw: bad input shape");
    Tensor out(std::vector<long>{B, C, H, W});
    const double* in = x2d->value.data();
    for (long b = 0; b < B; ++b)
        for (long h = 0; h < H; ++h)
            for (long w = 0; w < W; ++w) {
                const double* row = in + ((b * H + h) * W + w) * C;
                for (long c = 0; c < C; ++c) out.at4(b, c, h, w) = row[c];
            }
    return make_node(std::move(out), {x2d},
                     [](const Var&, const Var& gy) { return std::vector<Var>{nchw_to_nhwc(gy)}; },
                     "nhwc_to_nchw");
}

Var nchw_to_nhwc(const Var& x4d) {
    const auto& s = x4d->value.shape();
    if (x4d->value.rank() != 4) throw std::invalid_argument("nchw_to_nhwc: 4D only");
    const long B = s[0], C = s[1], H = s[2], W = s[3];
    Tensor out(std::vector<long>{B * H * W, C});
    double* o = out.data();
    for (long b = 0; b < B; ++b)
        for (long h = 0; h < H; ++h)
            for (long w = 0; w < W; ++w) {
                double* row = o + ((b * H + h) * W + w) * C;
                for (long c = 0; c < C; ++c) row[c] = x4d->value.at4(b, c, h, w);
            }
    return make_node(std::move(out), {x4d},
                     [B, H, W, C](const Var&, const Var& gy) {
                         return std::vector<Var>{nhwc_to_nchw(gy, B, H, W, C)};
                     },
                     "nchw_to_nhwc");
}

Var mul_sample(const Var& x, const Tensor& per_sample) {
    const auto& s = x->value.shape();
    if (x->value.rank() != 4 || per_sample.rank() != 1 || per_sample.dim(0) != s[0])
        throw std::invalid_argument("mul_sample: expected (B,C,H,W) and per-sample (B)");
    Tensor out = x->value;
    const long B = s[0], rest = s[1] * s[2] * s[3];
    for (long b = 0; b < B; ++b) {
        double w = per_sample[b];
        double* ptr = out.data() + b * rest;
        for (long i = 0; i < rest; ++i) ptr[i] *= w;
    }
    Tensor weights = per_sample;
    return make_node(std::move(out), {x},
                     [weights](const Var&, const Var& gy) {
                         return std::vector<Var>{mul_sample(gy, weights)};
                     },
                     "mul_sample");
}

// ---- reverse pass ----

GradMap backward(const Var& root, bool create_graph) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->value.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!root->requires_grad)
        throw std::invalid_argument("backward: root does not require grad");

    // Iterative topological sort over the requires_grad subgraph.
    std::vector<Var> topo;
    std::unordered_set<Node*> visited;
    struct Frame {
        Var node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        bool descended = false;
        while (f.next_parent < f.node->parents.size()) {
            const Var& p = f.node->parents[f.next_parent++];
            if (p && p->requires_grad && !visited.count(p.get())) {
                visited.insert(p.get());
                stack.push_back({p, 0});
                descended = true;
                break;
            }
        }
        if (!descended && f.next_parent >= f.node->parents.size()) {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    GradMap grads;
    grads[root.get()] = constant(Tensor::ones(root->value.shape()));

    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        const Var& node = *it;
        auto git = grads.find(node.get());
        if (git == grads.end() || !node->vjp) continue;
        std::vector<Var> pgrads = node->vjp(node, git->second);
        if (pgrads.size() != node->parents.size())
            throw std::runtime_error(std::string("backward: vjp arity mismatch in op ") + node->op);
        for (size_t i = 0; i < pgrads.size(); ++i) {
            const Var& p = node->parents[i];
            if (!p || !p->requires_grad || !pgrads[i]) continue;
            auto pit = grads.find(p.get());
            if (pit == grads.end())
                grads.emplace(p.get(), pgrads[i]);
            else
                pit->second = add(pit->second, pgrads[i]);
        }
    }
    return grads;
}

Tensor grad_of(const GradMap& grads, const Var& v) {
    auto it = grads.find(v.get());
    if (it == grads.end()) return Tensor::zeros(v->value.shape());
    return it->second->value;
}

double scalar_value(const Var& v) {
    if (v->value.numel() != 1) throw std::invalid_argument("scalar_value: not a scalar");
    return v->value[0];
}

} // namespace rsmgan::autograd
