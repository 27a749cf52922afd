#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fast_math.hpp"
#include "pecan/autograd.hpp"

namespace pecan::ops {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(t.shape()));
    }
}

// log(cosh(v)) without overflow.
double log_cosh(double v) {
    const double u = std::fabs(v);
    return u + std::log1p(std::exp(-2.0 * u)) - std::log(2.0);
}

} // namespace

NodeId lower(Graph& g, NodeId x, const ConvGeometry& geom) {
    const Tensor& in = g.value(x);
    require_rank(in, 4, "lower");
    geom.validate();
    if (in.extent(1) != geom.c_in || in.extent(2) != geom.h_in || in.extent(3) != geom.w_in) {
        throw ShapeError("lower: input " + to_string(in.shape()) + " does not match the convolution geometry");
    }
    const std::size_t B = in.extent(0), C = geom.c_in, H = geom.h_in, W = geom.w_in, k = geom.k;
    const std::size_t ho = geom.h_out(), wo = geom.w_out(), n = ho * wo, K = geom.rows();
    const std::size_t s = geom.stride;
    const auto pad = static_cast<std::ptrdiff_t>(geom.padding);

    // Precompute the source offset of every (position, row) pair within one image; -1 reads as padding.
    auto index = std::make_shared<std::vector<std::ptrdiff_t>>(n * K);
    for (std::size_t oh = 0; oh < ho; ++oh) {
        for (std::size_t ow = 0; ow < wo; ++ow) {
            std::ptrdiff_t* row = index->data() + (oh * wo + ow) * K;
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t ki = 0; ki < k; ++ki) {
                    for (std::size_t kj = 0; kj < k; ++kj) {
                        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * s + ki) - pad;
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * s + kj) - pad;
                        const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(H) &&
                                            iw < static_cast<std::ptrdiff_t>(W);
                        row[(c * k + ki) * k + kj] =
                            inside ? static_cast<std::ptrdiff_t>((c * H + static_cast<std::size_t>(ih)) * W +
                                                                 static_cast<std::size_t>(iw))
                                   : -1;
                    }
                }
            }
        }
    }

    const std::size_t image = C * H * W;
    Tensor out(Shape{B * n, K});
    for (std::size_t b = 0; b < B; ++b) {
        const double* src = in.raw() + b * image;
        double* dst = out.raw() + b * n * K;
        for (std::size_t e = 0; e < n * K; ++e) {
            const std::ptrdiff_t at = (*index)[e];
            dst[e] = at < 0 ? 0.0 : src[at];
        }
    }
    return g.add("lower", std::move(out), {x}, [x, index, B, n, K, image](Graph& gr, NodeId self) {
        if (!gr.requires_grad(x)) return;
        const Tensor& dy = gr.grad_buffer(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t b = 0; b < B; ++b) {
            double* dst = dx.raw() + b * image;
            const double* src = dy.raw() + b * n * K;
            for (std::size_t e = 0; e < n * K; ++e) {
                const std::ptrdiff_t at = (*index)[e];
                if (at >= 0) dst[at] += src[e];
            }
        }
    });
}

NodeId unlower(Graph& g, NodeId y, std::size_t h, std::size_t w) {
    const Tensor& in = g.value(y);
    require_rank(in, 2, "unlower");
    const std::size_t n = h * w, C = in.extent(1);
    if (n == 0 || in.extent(0) % n != 0) {
        throw ShapeError("unlower: " + std::to_string(in.extent(0)) + " rows do not split into " + std::to_string(h) +
                         "x" + std::to_string(w) + " maps");
    }
    const std::size_t B = in.extent(0) / n;
    Tensor out(Shape{B, C, h, w});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t pos = 0; pos < n; ++pos)
            for (std::size_t c = 0; c < C; ++c) out[(b * C + c) * n + pos] = in[(b * n + pos) * C + c];
    return g.add("unlower", std::move(out), {y}, [y, B, C, n](Graph& gr, NodeId self) {
        const Tensor& dy = gr.grad_buffer(self);
        Tensor& dx = gr.grad_buffer(y);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t pos = 0; pos < n; ++pos)
                for (std::size_t c = 0; c < C; ++c) dx[(b * n + pos) * C + c] += dy[(b * C + c) * n + pos];
    });
}

NodeId affine(Graph& g, NodeId xt, NodeId w, NodeId b) {
    const Tensor& X = g.value(xt);
    const Tensor& Wm = g.value(w);
    const Tensor& bias = g.value(b);
    require_rank(X, 2, "affine");
    require_rank(Wm, 2, "affine");
    const std::size_t N = X.extent(0), K = X.extent(1), O = Wm.extent(0);
    if (Wm.extent(1) != K) {
        throw ShapeError("affine: input " + to_string(X.shape()) + " against weights " + to_string(Wm.shape()));
    }
    if (bias.rank() != 1 || bias.extent(0) != O) throw ShapeError("affine: bias must be [" + std::to_string(O) + "]");

    std::vector<double> wt(K * O);
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t k = 0; k < K; ++k) wt[k * O + o] = Wm[o * K + k];

    Tensor Y(Shape{N, O});
    for (std::size_t i = 0; i < N; ++i) {
        double* yr = Y.raw() + i * O;
        const double* xr = X.raw() + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const double xv = xr[k];
            if (xv == 0.0) continue;
            const double* wr = wt.data() + k * O;
            for (std::size_t o = 0; o < O; ++o) yr[o] += xv * wr[o];
        }
        for (std::size_t o = 0; o < O; ++o) yr[o] += bias[o];
    }
    return g.add("affine", std::move(Y), {xt, w, b}, [xt, w, b, N, K, O](Graph& gr, NodeId self) {
        const Tensor& dY = gr.grad_buffer(self);
        if (gr.requires_grad(xt)) {
            const Tensor& Wv = gr.value(w);
            Tensor& dX = gr.grad_buffer(xt);
            for (std::size_t i = 0; i < N; ++i) {
                double* dx = dX.raw() + i * K;
                for (std::size_t o = 0; o < O; ++o) {
                    const double gy = dY[i * O + o];
                    if (gy == 0.0) continue;
                    const double* wr = Wv.raw() + o * K;
                    for (std::size_t k = 0; k < K; ++k) dx[k] += gy * wr[k];
                }
            }
        }
        if (gr.requires_grad(w)) {
            const Tensor& Xv = gr.value(xt);
            Tensor& dW = gr.grad_buffer(w);
            for (std::size_t i = 0; i < N; ++i) {
                const double* xr = Xv.raw() + i * K;
                for (std::size_t o = 0; o < O; ++o) {
                    const double gy = dY[i * O + o];
                    if (gy == 0.0) continue;
                    double* dw = dW.raw() + o * K;
                    for (std::size_t k = 0; k < K; ++k) dw[k] += gy * xr[k];
                }
            }
        }
        if (gr.requires_grad(b)) {
            Tensor& db = gr.grad_buffer(b);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t o = 0; o < O; ++o) db[o] += dY[i * O + o];
        }
    });
}

namespace {

// Forward state kept for the backward pass of one pecan_quantize node.
struct QuantizeState {
    std::size_t N = 0, D = 0, d = 0, p = 0;
    std::vector<double> soft;          // [N, D, p] relaxed weights
    std::vector<float> soft_f;         // the same in single precision on the straight-through path
    std::vector<std::uint32_t> index;  // [N, D] hard choice (distance variant)
};

// Straight-through distance forward. Scores and soft weights are computed in
// single precision; every prototype whose float score lies within a rounding
// bound of the best is rescored in double in the order l1_scores uses, so the
// hard choice is exactly the one lookup-table inference makes.
void distance_ste_forward(const Tensor& X, const Tensor& Cb, double tau, QuantizeState& st, Tensor& out) {
    const std::size_t N = st.N, D = st.D, d = st.d, p = st.p, K = D * d;
    st.soft_f.resize(N * D * p);
    st.index.resize(N * D);
    const std::vector<float> cf(Cb.raw(), Cb.raw() + Cb.size());
    std::vector<float> cmax(D, 0.0f);
    for (std::size_t j = 0; j < D; ++j)
        for (std::size_t q = 0; q < d * p; ++q) cmax[j] = std::max(cmax[j], std::fabs(cf[j * d * p + q]));
    const float inv_tau = static_cast<float>(1.0 / tau);
    const float unit = 5e-7f * static_cast<float>(d + 2);
    std::vector<float> xf(d), zf(p);
    // Result for an all-zero subvector, per group: soft weights then the hard index.
    std::vector<float> zero_soft(D * p);
    std::vector<std::uint32_t> zero_best(D, 0);
    std::vector<bool> zero_ready(D, false);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            const double* x = X.raw() + i * K + j * d;
            const double* C = Cb.raw() + j * d * p;
            const float* Cf = cf.data() + j * d * p;
            float* s = st.soft_f.data() + (i * D + j) * p;
            double* xq = out.raw() + i * K + j * d;
            bool zero_row = true;
            for (std::size_t r = 0; r < d; ++r) zero_row = zero_row && x[r] == 0.0;
            if (zero_row && zero_ready[j]) {
                std::copy_n(zero_soft.data() + j * p, p, s);
                const std::uint32_t k = zero_best[j];
                st.index[i * D + j] = k;
                for (std::size_t r = 0; r < d; ++r) xq[r] = C[r * p + k];
                continue;
            }
            float mass = 0.0f;
            for (std::size_t r = 0; r < d; ++r) {
                xf[r] = static_cast<float>(x[r]);
                mass += std::fabs(xf[r]);
            }
            std::fill(zf.begin(), zf.end(), 0.0f);
            for (std::size_t r = 0; r < d; ++r) {
                const float xr = xf[r];
                const float* row = Cf + r * p;
                for (std::size_t m = 0; m < p; ++m) zf[m] -= std::fabs(xr - row[m]);
            }
            const float top = *std::max_element(zf.begin(), zf.end());
            const float margin = unit * (1.0f + std::fabs(top) + mass + static_cast<float>(d) * cmax[j]);
            std::size_t best = p;
            double best_z = 0.0;
            for (std::size_t m = 0; m < p; ++m) {
                if (zf[m] < top - margin) continue;
                double z = 0.0;
                for (std::size_t r = 0; r < d; ++r) z = z - std::fabs(x[r] - C[r * p + m]);
                if (best == p || best_z < z) {
                    best = m;
                    best_z = z;
                }
            }
            for (std::size_t m = 0; m < p; ++m) s[m] = detail::exp_nonpos((zf[m] - top) * inv_tau);
            const float inv = static_cast<float>(1.0 / detail::lane_sum(s, p));
            for (std::size_t m = 0; m < p; ++m) s[m] *= inv;
            st.index[i * D + j] = static_cast<std::uint32_t>(best);
            for (std::size_t r = 0; r < d; ++r) xq[r] = C[r * p + best];
            if (zero_row) {
                std::copy_n(s, p, zero_soft.data() + j * p);
                zero_best[j] = static_cast<std::uint32_t>(best);
                zero_ready[j] = true;
            }
        }
    }
}

void softmax_row(const double* z, double* s, std::size_t p, double tau, bool fast) {
    double top = z[0];
    for (std::size_t m = 1; m < p; ++m) top = std::max(top, z[m]);
    double sum = 0.0;
    if (fast) {
        for (std::size_t m = 0; m < p; ++m) {
            s[m] = detail::exp_nonpos((z[m] - top) / tau);
            sum += s[m];
        }
    } else {
        for (std::size_t m = 0; m < p; ++m) {
            s[m] = std::exp((z[m] - top) / tau);
            sum += s[m];
        }
    }
    for (std::size_t m = 0; m < p; ++m) s[m] /= sum;
}

} // namespace

NodeId pecan_quantize(Graph& g, NodeId xt, NodeId cb, const PecanOptions& opt) {
    const Tensor& X = g.value(xt);
    const Tensor& Cb = g.value(cb);
    require_rank(X, 2, "pecan_quantize");
    require_rank(Cb, 3, "pecan_quantize");
    if (opt.method == Method::baseline) throw ValueError("pecan_quantize needs the angle or distance method");
    if (!(opt.tau > 0.0)) throw ValueError("pecan_quantize: tau must be positive");
    if (!(opt.slope > 0.0)) throw ValueError("pecan_quantize: slope must be positive");
    auto st = std::make_shared<QuantizeState>();
    st->N = X.extent(0);
    st->D = Cb.extent(0);
    st->d = Cb.extent(1);
    st->p = Cb.extent(2);
    const std::size_t N = st->N, D = st->D, d = st->d, p = st->p, K = D * d;
    if (X.extent(1) != K) {
        throw ShapeError("pecan_quantize: rows of length " + std::to_string(X.extent(1)) + " against codebook " +
                         to_string(Cb.shape()));
    }
    const bool angle = opt.method == Method::pecan_a;
    const bool ste = !angle && !opt.relaxed_forward && !opt.smooth_distance;
    Tensor out(Shape{N, K});
    if (ste) {
        distance_ste_forward(X, Cb, opt.tau, *st, out);
    } else {
        st->soft.resize(N * D * p);
        if (!angle) st->index.resize(N * D);
    }

    std::vector<double> z(p);
    for (std::size_t i = 0; i < (ste ? 0 : N); ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            const double* x = X.raw() + i * K + j * d;
            const double* C = Cb.raw() + j * d * p;
            double* s = st->soft.data() + (i * D + j) * p;
            double* xq = out.raw() + i * K + j * d;
            std::fill(z.begin(), z.end(), 0.0);
            if (angle) {
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t m = 0; m < p; ++m) z[m] = z[m] + x[r] * C[r * p + m];
            } else if (opt.smooth_distance) {
                const double a = opt.slope;
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t m = 0; m < p; ++m) z[m] -= log_cosh(a * (x[r] - C[r * p + m])) / a;
            } else {
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t m = 0; m < p; ++m) z[m] = z[m] - std::fabs(x[r] - C[r * p + m]);
            }
            softmax_row(z.data(), s, p, opt.tau, !angle);
            if (angle || opt.relaxed_forward) {
                for (std::size_t r = 0; r < d; ++r) {
                    double acc = 0.0;
                    for (std::size_t m = 0; m < p; ++m) acc += s[m] * C[r * p + m];
                    xq[r] = acc;
                }
            } else {
                std::size_t best = 0;
                for (std::size_t m = 1; m < p; ++m)
                    if (z[best] < z[m]) best = m;
                st->index[i * D + j] = static_cast<std::uint32_t>(best);
                for (std::size_t r = 0; r < d; ++r) xq[r] = C[r * p + best];
            }
        }
    }

    return g.add("pecan_quantize", std::move(out), {xt, cb}, [xt, cb, opt, st](Graph& gr, NodeId self) {
        const std::size_t N = st->N, D = st->D, d = st->d, p = st->p, K = D * d;
        const bool angle = opt.method == Method::pecan_a;
        const bool want_x = gr.requires_grad(xt), want_c = gr.requires_grad(cb);
        const Tensor& dOut = gr.grad_buffer(self);
        const Tensor& X = gr.value(xt);
        const Tensor& Cb = gr.value(cb);
        Tensor* dX = want_x ? &gr.grad_buffer(xt) : nullptr;
        Tensor* dC = want_c ? &gr.grad_buffer(cb) : nullptr;
        const double a = opt.slope, tau = opt.tau;
        std::vector<double> gm(p), gz(p), sbuf(p);
        std::vector<float> gzf(p), thf(p), cf, tanh_zero;
        std::vector<double> zero_mass;
        if (!angle && !opt.smooth_distance) {
            cf.assign(Cb.raw(), Cb.raw() + Cb.size());
            tanh_zero.resize(cf.size());
            const float af = static_cast<float>(a);
            for (std::size_t q = 0; q < cf.size(); ++q) tanh_zero[q] = detail::fast_tanh(af * (0.0f - cf[q]));
            zero_mass.assign(D * p, 0.0);
        }
        std::vector<std::size_t> active;
        active.reserve(p);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < D; ++j) {
                const double* dxq = dOut.raw() + i * K + j * d;
                const double* x = X.raw() + i * K + j * d;
                const double* C = Cb.raw() + j * d * p;
                const double* s = sbuf.data();
                if (st->soft_f.empty()) {
                    s = st->soft.data() + (i * D + j) * p;
                } else {
                    const float* sf = st->soft_f.data() + (i * D + j) * p;
                    for (std::size_t m = 0; m < p; ++m) sbuf[m] = sf[m];
                }
                double* dc = dC ? dC->raw() + j * d * p : nullptr;
                double* dx = dX ? dX->raw() + i * K + j * d : nullptr;

                // g_m = C_m . dxq: sensitivity of the loss to each assignment weight.
                std::fill(gm.begin(), gm.end(), 0.0);
                for (std::size_t r = 0; r < d; ++r) {
                    const double gr_ = dxq[r];
                    if (gr_ == 0.0) continue;
                    for (std::size_t m = 0; m < p; ++m) gm[m] += C[r * p + m] * gr_;
                }
                for (std::size_t m = 0; m < p; ++m) gz[m] = s[m] * gm[m];
                const double sg = detail::lane_sum(gz.data(), p);
                for (std::size_t m = 0; m < p; ++m) gz[m] = s[m] * (gm[m] - sg) / tau;

                // Reconstruction path into the prototypes.
                if (dc) {
                    if (angle || opt.relaxed_forward) {
                        for (std::size_t r = 0; r < d; ++r)
                            for (std::size_t m = 0; m < p; ++m) dc[r * p + m] += s[m] * dxq[r];
                    } else {
                        const std::size_t k = st->index[i * D + j];
                        for (std::size_t r = 0; r < d; ++r) dc[r * p + k] += dxq[r];
                    }
                }

                if (angle) {
                    // z_m = C_m . x
                    for (std::size_t r = 0; r < d; ++r) {
                        if (dc)
                            for (std::size_t m = 0; m < p; ++m) dc[r * p + m] += gz[m] * x[r];
                        if (dx) {
                            double acc = 0.0;
                            for (std::size_t m = 0; m < p; ++m) acc += gz[m] * C[r * p + m];
                            dx[r] += acc;
                        }
                    }
                    continue;
                }

                // z_m = -sum_r dist(x_r - c_rm); d z_m / d c_rm = tanh(a u), d z_m / d x_r = -tanh(a u).
                if (opt.smooth_distance) {
                    active.clear();
                    for (std::size_t m = 0; m < p; ++m)
                        if (s[m] >= opt.skip_below && gz[m] != 0.0) active.push_back(m);
                    for (std::size_t r = 0; r < d; ++r) {
                        const double xr = x[r];
                        double acc = 0.0;
                        for (std::size_t m : active) {
                            const double t = gz[m] * detail::fast_tanh(a * (xr - C[r * p + m]));
                            if (dc) dc[r * p + m] += t;
                            acc += t;
                        }
                        if (dx) dx[r] -= acc;
                    }
                    continue;
                }
                // Straight-through path: tanh in single precision, accumulation in double.
                // Zero inputs reuse tanh(-a c); all-zero rows without an input gradient
                // are folded into one product per group at the end.
                for (std::size_t m = 0; m < p; ++m) gzf[m] = s[m] >= opt.skip_below ? static_cast<float>(gz[m]) : 0.0f;
                bool zero_row = true;
                for (std::size_t r = 0; r < d; ++r) zero_row = zero_row && x[r] == 0.0;
                if (zero_row && !dx) {
                    double* acc = zero_mass.data() + j * p;
                    for (std::size_t m = 0; m < p; ++m) acc[m] += gzf[m];
                    continue;
                }
                const float af = static_cast<float>(a);
                const float* Cf = cf.data() + j * d * p;
                const float* T0 = tanh_zero.data() + j * d * p;
                for (std::size_t r = 0; r < d; ++r) {
                    if (x[r] == 0.0) {
                        const float* trow = T0 + r * p;
                        for (std::size_t m = 0; m < p; ++m) thf[m] = gzf[m] * trow[m];
                    } else {
                        const float xr = static_cast<float>(x[r]);
                        const float* crow = Cf + r * p;
                        for (std::size_t m = 0; m < p; ++m) thf[m] = gzf[m] * detail::fast_tanh(af * (xr - crow[m]));
                    }
                    if (dc) {
                        double* drow = dc + r * p;
                        for (std::size_t m = 0; m < p; ++m) drow[m] += thf[m];
                    }
                    if (dx) dx[r] -= detail::lane_sum(thf.data(), p);
                }
            }
        }
        if (dC && !zero_mass.empty()) {
            for (std::size_t j = 0; j < D; ++j)
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t m = 0; m < p; ++m)
                        dC->raw()[(j * d + r) * p + m] += zero_mass[j * p + m] * tanh_zero[(j * d + r) * p + m];
        }
    });
}

NodeId conv2d(Graph& g, NodeId x, NodeId w, NodeId b, const ConvGeometry& geom) {
    return unlower(g, affine(g, lower(g, x, geom), w, b), geom.h_out(), geom.w_out());
}

NodeId relu(Graph& g, NodeId x) {
    Tensor out = g.value(x);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return g.add("relu", std::move(out), {x}, [x](Graph& gr, NodeId self) {
        const Tensor& dy = gr.grad_buffer(self);
        const Tensor& xv = gr.value(x);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t e = 0; e < dx.size(); ++e)
            if (xv[e] > 0.0) dx[e] += dy[e];
    });
}

NodeId maxpool2d(Graph& g, NodeId x, std::size_t k, std::size_t stride) {
    const Tensor& in = g.value(x);
    require_rank(in, 4, "maxpool2d");
    const std::size_t B = in.extent(0), C = in.extent(1), H = in.extent(2), W = in.extent(3);
    if (k == 0 || stride == 0 || k > H || k > W) throw ShapeError("maxpool2d: window does not fit the input");
    const std::size_t ho = (H - k) / stride + 1, wo = (W - k) / stride + 1;
    Tensor out(Shape{B, C, ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const std::size_t base = bc * H * W;
        for (std::size_t oh = 0; oh < ho; ++oh) {
            for (std::size_t ow = 0; ow < wo; ++ow, ++o) {
                std::size_t best = base + oh * stride * W + ow * stride;
                for (std::size_t ki = 0; ki < k; ++ki) {
                    for (std::size_t kj = 0; kj < k; ++kj) {
                        const std::size_t at = base + (oh * stride + ki) * W + ow * stride + kj;
                        if (in[at] > in[best]) best = at;
                    }
                }
                out[o] = in[best];
                (*argmax)[o] = best;
            }
        }
    }
    return g.add("maxpool2d", std::move(out), {x}, [x, argmax](Graph& gr, NodeId self) {
        const Tensor& dy = gr.grad_buffer(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t e = 0; e < argmax->size(); ++e) dx[(*argmax)[e]] += dy[e];
    });
}

NodeId reshape(Graph& g, NodeId x, Shape shape) {
    Tensor out = g.value(x).reshaped(std::move(shape));
    return g.add("reshape", std::move(out), {x}, [x](Graph& gr, NodeId self) {
        const Tensor& dy = gr.grad_buffer(self);
        Tensor& dx = gr.grad_buffer(x);
        for (std::size_t e = 0; e < dx.size(); ++e) dx[e] += dy[e];
    });
}

NodeId softmax_cross_entropy(Graph& g, NodeId logits, std::span<const int> labels) {
    const Tensor& z = g.value(logits);
    require_rank(z, 2, "softmax_cross_entropy");
    const std::size_t B = z.extent(0), C = z.extent(1);
    if (labels.size() != B) throw ShapeError("softmax_cross_entropy: label count does not match the batch");
    auto probs = std::make_shared<Tensor>(Shape{B, C});
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= C) {
            throw ValueError("softmax_cross_entropy: label " + std::to_string(labels[b]) + " out of range");
        }
        const double* row = z.raw() + b * C;
        double* pr = probs->raw() + b * C;
        const double top = *std::max_element(row, row + C);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            pr[c] = std::exp(row[c] - top);
            sum += pr[c];
        }
        for (std::size_t c = 0; c < C; ++c) pr[c] /= sum;
        loss += std::log(sum) - (row[labels[b]] - top);
    }
    loss /= static_cast<double>(B);
    std::vector<int> lab(labels.begin(), labels.end());
    return g.add("softmax_cross_entropy", Tensor(Shape{1}, loss), {logits},
                 [logits, probs, lab = std::move(lab), B, C](Graph& gr, NodeId self) {
                     const double up = gr.grad_buffer(self)[0] / static_cast<double>(B);
                     Tensor& dz = gr.grad_buffer(logits);
                     for (std::size_t b = 0; b < B; ++b) {
                         for (std::size_t c = 0; c < C; ++c) {
                             const double target = static_cast<int>(c) == lab[b] ? 1.0 : 0.0;
                             dz[b * C + c] += up * ((*probs)[b * C + c] - target);
                         }
                     }
                 });
}

NodeId sum(Graph& g, NodeId x) {
    double total = 0.0;
    for (double v : g.value(x).data()) total += v;
    return g.add("sum", Tensor(Shape{1}, total), {x}, [x](Graph& gr, NodeId self) {
        const double up = gr.grad_buffer(self)[0];
        Tensor& dx = gr.grad_buffer(x);
        for (double& v : dx.data()) v += up;
    });
}

} // namespace pecan::ops
