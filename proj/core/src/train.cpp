#include "pecan/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "pecan/error.hpp"
#include "pecan/matcher.hpp"
#include "pecan/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pecan {

std::string_view to_string(Strategy s) noexcept {
    return s == Strategy::from_scratch ? "from_scratch" : "freeze_weights";
}

std::optional<Strategy> parse_strategy(std::string_view s) noexcept {
    if (s == "from_scratch") return Strategy::from_scratch;
    if (s == "freeze_weights") return Strategy::freeze_weights;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("lr must be positive");
    if (lr_decay_epochs <= 0) throw ConfigError("lr_decay_epochs must be positive");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("lr_decay_factor must lie in (0, 1]");
    if (!(tau_a > 0.0) || !(tau_d > 0.0)) throw ConfigError("temperatures must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie strictly between 0 and 1");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    if (kmeans_iters == 0 || calib_images == 0 || kmeans_columns == 0 || angle_fit_columns == 0) {
        throw ConfigError("kmeans_iters, calib_images, kmeans_columns and angle_fit_columns must be positive");
    }
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

void write_metrics_header(std::ostream& os) { os << "epoch\ttrain_loss\ttrain_acc\ttest_acc\tlr\ta_e\n"; }

void write_metrics_line(std::ostream& os, const EpochMetrics& m) {
    const auto flags = os.flags();
    os << m.epoch << '\t' << std::setprecision(6) << std::fixed << m.train_loss << '\t' << m.train_acc << '\t';
    if (m.test_acc) os << *m.test_acc;
    else os << '-';
    os.flags(flags);
    os << '\t' << std::setprecision(6) << m.lr << '\t' << m.slope << '\n';
    os.flags(flags);
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.learning_rate * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_epochs);
}

ForwardPass build_forward(const Model& model, const Tensor& batch, const ForwardOptions& opt) {
    model.validate();
    const NetworkSpec& spec = model.spec;
    if (batch.rank() != 4 || batch.extent(1) != spec.in_channels || batch.extent(2) != spec.in_height ||
        batch.extent(3) != spec.in_width) {
        throw ShapeError("batch " + to_string(batch.shape()) + " does not match the network input");
    }
    const std::size_t B = batch.extent(0);
    ForwardPass fp;
    Graph& g = fp.graph;
    fp.params.resize(spec.layers.size());
    NodeId x = opt.grad_input ? g.parameter(batch, true) : g.constant(batch);
    fp.input = x;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::relu:
                x = ops::relu(g, x);
                continue;
            case LayerKind::maxpool:
                x = ops::maxpool2d(g, x, l.k, l.stride);
                continue;
            case LayerKind::conv:
            case LayerKind::fc:
                break;
        }
        const LayerParams& p = model.params[i];
        ParamNodes& nodes = fp.params[i];
        nodes.weight = g.parameter(p.weight, opt.grad_weights);
        nodes.bias = g.parameter(p.bias, opt.grad_weights);
        NodeId xt = l.kind == LayerKind::fc ? ops::reshape(g, x, Shape{B, l.c_in}) : ops::lower(g, x, l.geometry());
        if (l.pecan()) {
            if (!p.codebook.uniform()) throw ValueError("layer '" + l.name + "': training needs an unpruned codebook");
            nodes.codebook = g.parameter(p.codebook.to_tensor(), opt.grad_codebooks);
            PecanOptions po;
            po.method = l.method;
            po.tau = l.tau;
            po.slope = opt.slope;
            po.relaxed_forward = opt.relaxed_forward;
            po.smooth_distance = opt.smooth_distance;
            xt = ops::pecan_quantize(g, xt, nodes.codebook, po);
        }
        const NodeId y = ops::affine(g, xt, nodes.weight, nodes.bias);
        x = l.kind == LayerKind::conv ? ops::unlower(g, y, l.h_out, l.w_out) : y;
    }
    if (g.value(x).rank() != 2) x = ops::reshape(g, x, Shape{B, g.value(x).size() / B});
    fp.logits = x;
    return fp;
}

Tensor graph_logits(const Model& model, const Tensor& batch) {
    ForwardOptions opt;
    opt.grad_weights = opt.grad_codebooks = false;
    ForwardPass fp = build_forward(model, batch, opt);
    return fp.graph.value(fp.logits);
}

double evaluate(const Model& model, const Dataset& data, std::size_t limit) {
    return InferenceEngine(model).accuracy(data, limit);
}

namespace {

// Every batch allocates and frees the same large graph buffers. Keeping them
// in the heap instead of returning them to the system avoids a page-fault
// storm on each step.
void retain_freed_memory() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)done;
#endif
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    SplitMix64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

// Adam moments of one parameter tensor (or one codebook group inside a [D, d, p] gradient).
struct AdamSlot {
    Tensor* value;
    std::size_t layer;
    int kind;           // 0 weight, 1 bias, 2 codebook group
    std::size_t group;  // codebook group index
    std::vector<double> m, v;
};

// Full-batch Adam on mean |x - C s|^2 with s = softmax(C^T x / tau); c is [d, p], x is [d, n].
void fit_angle_codebook(Tensor& c, const Tensor& x, double tau, std::size_t steps) {
    constexpr double rate = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const std::size_t d = c.extent(0), p = c.extent(1), n = x.extent(1);
    std::vector<double> m(c.size()), v(c.size()), grad(c.size());
    std::vector<double> col(d), w(p), rec(d), gs(p);
    for (std::size_t step = 1; step <= steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t r = 0; r < d; ++r) col[r] = x[r * n + i];
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t k = 0; k < p; ++k) w[k] += c[r * p + k] * col[r];
            const double top = *std::max_element(w.begin(), w.end());
            double total = 0.0;
            for (double& z : w) total += (z = std::exp((z - top) / tau));
            for (double& z : w) z /= total;
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t k = 0; k < p; ++k) acc += c[r * p + k] * w[k];
                rec[r] = 2.0 * (acc - col[r]) / static_cast<double>(n);
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                gs[k] = 0.0;
                for (std::size_t r = 0; r < d; ++r) gs[k] += c[r * p + k] * rec[r];
                dot += w[k] * gs[k];
            }
            for (std::size_t k = 0; k < p; ++k) gs[k] = w[k] * (gs[k] - dot) / tau;
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t k = 0; k < p; ++k) grad[r * p + k] += rec[r] * w[k] + col[r] * gs[k];
        }
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        for (std::size_t q = 0; q < c.size(); ++q) {
            m[q] = b1 * m[q] + (1.0 - b1) * grad[q];
            v[q] = b2 * v[q] + (1.0 - b2) * grad[q] * grad[q];
            c[q] -= rate * (m[q] / c1) / (std::sqrt(v[q] / c2) + eps);
        }
    }
}

} // namespace

TrainResult train(Model model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    model.validate();
    const NetworkSpec& spec = model.spec;
    if (train_set.channels() != spec.in_channels || train_set.height() != spec.in_height ||
        train_set.width() != spec.in_width) {
        throw ShapeError("training data does not match the network input");
    }
    const Dataset data = train_set.head(cfg.train_subset);
    retain_freed_memory();
    const bool freeze = cfg.strategy == Strategy::freeze_weights && spec.has_pecan();

    std::vector<AdamSlot> slots;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (!l.parameterized()) continue;
        LayerParams& p = model.params[i];
        if (!freeze) {
            slots.push_back({&p.weight, i, 0, 0, std::vector<double>(p.weight.size()), std::vector<double>(p.weight.size())});
            slots.push_back({&p.bias, i, 1, 0, std::vector<double>(p.bias.size()), std::vector<double>(p.bias.size())});
        }
        if (l.pecan()) {
            for (std::size_t j = 0; j < p.codebook.groups(); ++j) {
                Tensor& c = p.codebook.group(j);
                slots.push_back({&c, i, 2, j, std::vector<double>(c.size()), std::vector<double>(c.size())});
            }
        }
    }

    ForwardOptions fo;
    fo.grad_weights = !freeze;
    fo.grad_codebooks = true;

    TrainResult result;
    std::uint64_t step = 0;
    std::vector<int> labels;
    for (int e = 0; e < cfg.epochs; ++e) {
        const double lr = learning_rate_at(cfg, e);
        fo.slope = sign_slope(e, cfg.epochs);
        const auto order = shuffled(data.size(), cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(e + 1));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Tensor x = data.batch(idx, labels);
            ForwardPass fp = build_forward(model, x, fo);
            Graph& g = fp.graph;
            const NodeId loss = ops::softmax_cross_entropy(g, fp.logits, labels);
            const double lv = g.value(loss)[0];
            if (!std::isfinite(lv)) {
                throw DivergenceError(e, "non-finite training loss at epoch " + std::to_string(e) + ", batch " +
                                             std::to_string(start / cfg.batch_size));
            }
            loss_sum += lv * static_cast<double>(idx.size());
            correct += count_correct(g.value(fp.logits), labels);
            g.backward(loss);

            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (AdamSlot& s : slots) {
                const ParamNodes& nodes = fp.params[s.layer];
                const NodeId node = s.kind == 0 ? nodes.weight : s.kind == 1 ? nodes.bias : nodes.codebook;
                if (!g.has_grad(node)) continue;
                const Tensor& grad = g.grad_buffer(node);
                const double* gp = grad.raw() + (s.kind == 2 ? s.group * s.value->size() : 0);
                double* w = s.value->raw();
                for (std::size_t k = 0; k < s.m.size(); ++k) {
                    s.m[k] = cfg.beta1 * s.m[k] + (1.0 - cfg.beta1) * gp[k];
                    s.v[k] = cfg.beta2 * s.v[k] + (1.0 - cfg.beta2) * gp[k] * gp[k];
                    w[k] -= lr * (s.m[k] / c1) / (std::sqrt(s.v[k] / c2) + cfg.adam_eps);
                }
            }
        }
        EpochMetrics m;
        m.epoch = e;
        m.train_loss = loss_sum / static_cast<double>(data.size());
        m.train_acc = static_cast<double>(correct) / static_cast<double>(data.size());
        m.lr = lr;
        m.slope = fo.slope;
        model.epoch = e + 1;
        const bool last = e + 1 == cfg.epochs;
        if (test_set && (last || (cfg.eval_every > 0 && (e + 1) % cfg.eval_every == 0))) {
            m.test_acc = evaluate(model, *test_set, cfg.test_subset);
        }
        result.history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    result.model = std::move(model);
    return result;
}

void calibrate_codebooks(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    const std::size_t images = std::min(cfg.calib_images, data.size());
    if (images == 0) throw ValueError("calibrate_codebooks: no calibration images");
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerSpec& l = model.spec.layers[i];
        if (!l.pecan()) continue;
        const InferenceEngine engine(model);
        const std::size_t n = l.h_out * l.w_out;
        const std::size_t total = images * n;
        const std::size_t take = std::min(total, cfg.kmeans_columns);
        if (take < l.p) {
            throw ValueError("layer '" + l.name + "': " + std::to_string(take) + " calibration columns for p = " +
                             std::to_string(l.p) + " prototypes");
        }
        // Uniform sample of (image, position) pairs without replacement.
        std::vector<std::size_t> pick(total);
        std::iota(pick.begin(), pick.end(), std::size_t{0});
        SplitMix64 rng(cfg.seed + 7919 * (i + 1));
        for (std::size_t s = 0; s < take; ++s) std::swap(pick[s], pick[s + rng.below(total - s)]);
        pick.resize(take);
        std::sort(pick.begin(), pick.end());

        std::vector<Tensor> samples(l.groups, Tensor(Shape{l.dim, take}));
        std::size_t col = 0;
        for (std::size_t at = 0; at < take;) {
            const std::size_t img = pick[at] / n;
            Tensor x = engine.forward_until<double>(data.sample(img), i);
            ConvGeometry geom = l.geometry();
            if (l.kind == LayerKind::fc) {
                x = std::move(x).reshaped(Shape{x.size(), 1, 1});
                geom.c_in = x.size();
                geom.h_in = geom.w_in = 1;
            }
            const Tensor cols = im2col(x, geom);
            for (; at < take && pick[at] / n == img; ++at, ++col) {
                const std::size_t pos = pick[at] % n;
                for (std::size_t j = 0; j < l.groups; ++j)
                    for (std::size_t r = 0; r < l.dim; ++r) samples[j][r * take + col] = cols[(j * l.dim + r) * n + pos];
            }
        }
        std::vector<Tensor> groups;
        for (std::size_t j = 0; j < l.groups; ++j) {
            groups.push_back(kmeans_init(samples[j], l.p, cfg.kmeans_iters, cfg.seed + 1000 * (i + 1) + j));
            if (l.method == Method::pecan_a && cfg.angle_fit_steps > 0) {
                const std::size_t fit = std::min(take, cfg.angle_fit_columns);
                Tensor sub(Shape{l.dim, fit});
                for (std::size_t r = 0; r < l.dim; ++r)
                    for (std::size_t q = 0; q < fit; ++q) sub[r * fit + q] = samples[j][r * take + q * take / fit];
                fit_angle_codebook(groups.back(), sub, l.tau, cfg.angle_fit_steps);
            }
        }
        model.params[i].codebook = Codebook(l.dim, std::move(groups));
    }
    model.calibrated = true;
}

} // namespace pecan
