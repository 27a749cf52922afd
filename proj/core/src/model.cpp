#include "pecan/model.hpp"

#include <cmath>

#include "pecan/rng.hpp"

namespace pecan {

LayerParams& Model::at(std::string_view layer) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].name == layer) return params.at(i);
    throw ValueError("no layer named '" + std::string(layer) + "'");
}

const LayerParams& Model::at(std::string_view layer) const {
    return const_cast<Model&>(*this).at(layer);
}

std::size_t Model::prototype_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].pecan()) n += params[i].codebook.total_prototypes();
    return n;
}

void Model::validate() const {
    if (params.size() != spec.layers.size()) throw ShapeError("model has parameters for a different layer count");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (!l.parameterized()) continue;
        const LayerParams& p = params[i];
        const std::string where = "layer '" + l.name + "': ";
        if (p.weight.shape() != Shape{l.c_out, l.fan_in()}) {
            throw ShapeError(where + "weight " + to_string(p.weight.shape()) + " does not match the spec");
        }
        if (p.bias.shape() != Shape{l.c_out}) throw ShapeError(where + "bias does not match the spec");
        if (l.pecan() && (p.codebook.groups() != l.groups || p.codebook.dim() != l.dim)) {
            throw ShapeError(where + "codebook does not match D = " + std::to_string(l.groups) +
                             ", d = " + std::to_string(l.dim));
        }
    }
}

Model init_model(const NetworkSpec& spec, std::uint64_t seed) {
    Model m;
    m.spec = spec;
    m.seed = seed;
    SplitMix64 rng(seed);
    for (const LayerSpec& l : spec.layers) {
        LayerParams p;
        if (l.parameterized()) {
            if (l.h_out == 0) throw ValueError("init_model: spec is not resolved");
            const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
            p.weight = Tensor(Shape{l.c_out, l.fan_in()});
            for (double& w : p.weight.data()) w = rng.uniform(-bound, bound);
            p.bias = Tensor(Shape{l.c_out});
            if (l.pecan()) {
                std::vector<Tensor> groups;
                for (std::size_t j = 0; j < l.groups; ++j) {
                    Tensor c(Shape{l.dim, l.p});
                    for (double& v : c.data()) v = rng.normal();
                    groups.push_back(std::move(c));
                }
                p.codebook = Codebook(l.dim, std::move(groups));
            }
        }
        m.params.push_back(std::move(p));
    }
    return m;
}

void transfer_weights(Model& dst, const Model& src) {
    for (std::size_t i = 0; i < dst.spec.layers.size(); ++i) {
        const LayerSpec& l = dst.spec.layers[i];
        if (!l.parameterized()) continue;
        const LayerSpec* s = src.spec.find(l.name);
        if (!s || !s->parameterized()) throw ValueError("transfer_weights: source has no layer '" + l.name + "'");
        const LayerParams& from = src.at(l.name);
        if (from.weight.shape() != dst.params[i].weight.shape()) {
            throw ShapeError("transfer_weights: layer '" + l.name + "' shapes differ");
        }
        dst.params[i].weight = from.weight;
        dst.params[i].bias = from.bias;
    }
}

Tensor codebook_tensor(const LayerParams& params) { return params.codebook.to_tensor(); }

InferenceEngine::InferenceEngine(Model model) : model_(std::move(model)) {
    model_.validate();
    luts_.resize(model_.spec.layers.size());
    for (std::size_t i = 0; i < model_.spec.layers.size(); ++i) {
        const LayerSpec& l = model_.spec.layers[i];
        if (l.pecan()) luts_[i] = build_lut(model_.params[i].weight, model_.params[i].codebook, l.name);
    }
}

const LookupTable* InferenceEngine::lut(std::size_t i) const {
    return luts_.at(i) ? &*luts_[i] : nullptr;
}

std::size_t InferenceEngine::predict(const Tensor& image) const {
    return argmax_index<double>(logits(image).data());
}

InferenceEngine::AuditReport InferenceEngine::audit_sample(const Tensor& image) const {
    AuditReport report;
    BasicTensor<Counted> x = image.cast<Counted>();
    for (std::size_t i = 0; i < model_.spec.layers.size(); ++i) {
        const LayerSpec& l = model_.spec.layers[i];
        const OpCounter c = pecan::audit([&] { x = layer_forward<Counted>(i, x); });
        if (l.parameterized()) {
            report.layers.push_back({l.name, c});
            report.total += c;
        } else if (c.adds != 0 || c.muls != 0) {
            throw Error("layer '" + l.name + "' performed counted arithmetic");
        }
    }
    report.logits = Tensor(Shape{x.size()});
    for (std::size_t e = 0; e < x.size(); ++e) report.logits[e] = x[e].value();
    return report;
}

double InferenceEngine::accuracy(const Dataset& data, std::size_t limit) const {
    const std::size_t n = limit == 0 ? data.size() : std::min(limit, data.size());
    if (n == 0) throw ValueError("accuracy over an empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (static_cast<int>(predict(data.sample(i))) == data.label(i)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<std::optional<UsageHistogram>> InferenceEngine::usage(const Dataset& data, std::size_t limit) const {
    std::vector<std::optional<UsageHistogram>> hist(model_.spec.layers.size());
    for (std::size_t i = 0; i < model_.spec.layers.size(); ++i)
        if (model_.spec.layers[i].method == Method::pecan_d && model_.spec.layers[i].pecan())
            hist[i] = make_histogram(model_.params[i].codebook);
    const FeatureHook<double> hook = [&](std::size_t layer, const GroupedFeatures& x) {
        if (hist[layer]) accumulate_usage(*hist[layer], x, model_.params[layer].codebook);
    };
    const std::size_t n = limit == 0 ? data.size() : std::min(limit, data.size());
    for (std::size_t i = 0; i < n; ++i) forward<double>(data.sample(i), &hook);
    return hist;
}

NetworkCost model_cost(const Model& model) {
    NetworkCost out = network_cost(model.spec);
    std::size_t row = 0;
    out.total.adds = out.total.muls = 0;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerSpec& l = model.spec.layers[i];
        if (!l.parameterized()) continue;
        LayerCost& c = out.layers[row++].cost;
        if (l.pecan()) {
            const Codebook& cb = model.params[i].codebook;
            std::vector<std::size_t> counts(cb.groups());
            for (std::size_t j = 0; j < counts.size(); ++j) counts[j] = cb.group(j).extent(1);
            c = layer_cost(l, counts);
        }
        out.total.adds += c.adds;
        out.total.muls += c.muls;
    }
    return out;
}

PruneReport prune_model(const Model& model, const Dataset& calibration, std::size_t limit) {
    const InferenceEngine engine(model);
    PruneReport report;
    report.model = model;
    report.usage = engine.usage(calibration, limit);
    report.prototypes_before = model.prototype_count();
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        if (!report.usage[i]) continue;
        PruneResult pruned = prune_unused(model.params[i].codebook, *engine.lut(i), *report.usage[i]);
        report.model.params[i].codebook = std::move(pruned.codebook);
    }
    report.prototypes_after = report.model.prototype_count();
    return report;
}

} // namespace pecan
