#include "pecan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pecan/matcher.hpp"
#include "pecan/rng.hpp"

namespace pecan {

namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

struct Evaluation {
    double loss;
    std::vector<Tensor> grads;
};

Evaluation evaluate(const std::vector<Tensor>& inputs, const GraphBuilder& build, const Tensor* weights_in,
                    Tensor* weights_out, std::uint64_t seed, bool with_grad) {
    Graph g;
    std::vector<NodeId> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.parameter(t, true));
    const NodeId out = build(g, leaves);
    const Tensor& y = g.value(out);
    Tensor r;
    if (weights_in) {
        r = *weights_in;
    } else {
        SplitMix64 rng(seed ^ 0xA5A5A5A5ULL);
        r = random_tensor(y.shape(), rng, 0.5, 1.5);
        if (weights_out) *weights_out = r;
    }
    if (r.shape() != y.shape()) throw ShapeError("gradcheck: output shape changed between evaluations");
    double loss = 0.0;
    for (std::size_t e = 0; e < y.size(); ++e) loss += y[e] * r[e];
    Evaluation ev{loss, {}};
    if (!with_grad) return ev;
    const NodeId target = g.add("weighted_sum", Tensor(Shape{1}, loss), {out}, [out, r](Graph& gr, NodeId self) {
        const double up = gr.grad_buffer(self)[0];
        Tensor& dy = gr.grad_buffer(out);
        for (std::size_t e = 0; e < dy.size(); ++e) dy[e] += up * r[e];
    });
    g.backward(target);
    for (NodeId id : leaves) ev.grads.push_back(g.grad(id));
    return ev;
}

} // namespace

GradcheckResult gradcheck(std::string name, std::vector<Tensor> inputs, const GraphBuilder& build,
                          std::uint64_t seed, double eps, double tol) {
    GradcheckResult res;
    res.op = std::move(name);
    res.tolerance = tol;
    Tensor weights;
    const Evaluation analytic = evaluate(inputs, build, nullptr, &weights, seed, true);
    for (std::size_t in = 0; in < inputs.size(); ++in) {
        double diff = 0.0, scale = 0.0;
        for (std::size_t e = 0; e < inputs[in].size(); ++e) {
            const double saved = inputs[in][e];
            inputs[in][e] = saved + eps;
            const double up = evaluate(inputs, build, &weights, nullptr, seed, false).loss;
            inputs[in][e] = saved - eps;
            const double down = evaluate(inputs, build, &weights, nullptr, seed, false).loss;
            inputs[in][e] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            diff = std::max(diff, std::fabs(analytic.grads[in][e] - numeric));
            scale = std::max(scale, std::fabs(numeric));
            ++res.points;
        }
        res.max_rel_error = std::max(res.max_rel_error, diff / std::max(scale, 1e-12));
    }
    return res;
}

std::vector<GradcheckResult> standard_gradchecks(std::uint64_t seed, double eps, double tol) {
    SplitMix64 rng(seed);
    std::vector<GradcheckResult> out;

    {
        ConvGeometry geom;
        geom.c_in = 2;
        geom.c_out = 3;
        geom.k = 3;
        geom.stride = 1;
        geom.padding = 1;
        geom.h_in = geom.w_in = 5;
        std::vector<Tensor> in{random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 18}, rng), random_tensor({3}, rng)};
        out.push_back(gradcheck("conv", in, [geom](Graph& g, const std::vector<NodeId>& v) {
            return ops::conv2d(g, v[0], v[1], v[2], geom);
        }, seed + 1, eps, tol));
    }
    {
        std::vector<Tensor> in{random_tensor({4, 7}, rng), random_tensor({5, 7}, rng), random_tensor({5}, rng)};
        out.push_back(gradcheck("fc", in, [](Graph& g, const std::vector<NodeId>& v) {
            return ops::affine(g, v[0], v[1], v[2]);
        }, seed + 2, eps, tol));
    }
    {
        // Entries kept at least 0.1 away from the kink.
        Tensor x = random_tensor({3, 8}, rng);
        for (double& v : x.data()) v = v < 0 ? v - 0.1 : v + 0.1;
        out.push_back(gradcheck("relu", {x}, [](Graph& g, const std::vector<NodeId>& v) {
            return ops::relu(g, v[0]);
        }, seed + 3, eps, tol));
    }
    {
        // A shuffled ramp: every window has a unique maximum with a 0.01 margin.
        Tensor x(Shape{2, 2, 4, 4});
        std::vector<double> ramp(x.size());
        std::iota(ramp.begin(), ramp.end(), 0.0);
        for (std::size_t i = ramp.size(); i > 1; --i) std::swap(ramp[i - 1], ramp[rng.below(i)]);
        for (std::size_t e = 0; e < x.size(); ++e) x[e] = 0.01 * ramp[e];
        out.push_back(gradcheck("maxpool", {x}, [](Graph& g, const std::vector<NodeId>& v) {
            return ops::maxpool2d(g, v[0], 2, 2);
        }, seed + 4, eps, tol));
    }
    {
        const std::vector<int> labels{0, 3, 1, 2, 3};
        out.push_back(gradcheck("softmax_xent", {random_tensor({5, 4}, rng, -2.0, 2.0)},
                                [labels](Graph& g, const std::vector<NodeId>& v) {
                                    return ops::softmax_cross_entropy(g, v[0], labels);
                                }, seed + 5, eps, tol));
    }
    const std::size_t N = 6, D = 2, d = 3, p = 4, c_out = 5;
    {
        PecanOptions po;
        po.method = Method::pecan_a;
        po.tau = 1.0;
        std::vector<Tensor> in{random_tensor({N, D * d}, rng), random_tensor({D, d, p}, rng),
                               random_tensor({c_out, D * d}, rng), random_tensor({c_out}, rng)};
        out.push_back(gradcheck("pecan_a", in, [po](Graph& g, const std::vector<NodeId>& v) {
            return ops::affine(g, ops::pecan_quantize(g, v[0], v[1], po), v[2], v[3]);
        }, seed + 6, eps, tol));
    }
    {
        PecanOptions po;
        po.method = Method::pecan_d;
        po.tau = 0.5;
        po.slope = sign_slope(1.0, 2.0);
        po.relaxed_forward = true;
        po.smooth_distance = true;
        po.skip_below = 0.0;
        std::vector<Tensor> in{random_tensor({N, D * d}, rng), random_tensor({D, d, p}, rng),
                               random_tensor({c_out, D * d}, rng), random_tensor({c_out}, rng)};
        out.push_back(gradcheck("pecan_d_relaxed", in, [po](Graph& g, const std::vector<NodeId>& v) {
            return ops::affine(g, ops::pecan_quantize(g, v[0], v[1], po), v[2], v[3]);
        }, seed + 7, eps, tol));
    }
    return out;
}

} // namespace pecan
