#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pecan/codebook.hpp"
#include "pecan/cost_model.hpp"
#include "pecan/dataset.hpp"
#include "pecan/lut.hpp"
#include "pecan/network.hpp"
#include "pecan/op_counter.hpp"
#include "pecan/tensor.hpp"

namespace pecan {

/// Parameters of one layer; empty tensors for activation and pooling layers.
struct LayerParams {
    Tensor weight;      ///< [c_out, c_in*k*k]
    Tensor bias;        ///< [c_out]
    Codebook codebook;  ///< PECAN layers only

    bool operator==(const LayerParams&) const = default;
};

/// A network description with its learned values.
struct Model {
    NetworkSpec spec;
    std::vector<LayerParams> params;  ///< aligned with spec.layers
    std::uint64_t seed = 0;
    int epoch = 0;
    /// Whether codebooks were fitted to data rather than left at their random start.
    bool calibrated = false;

    LayerParams& at(std::string_view layer);
    const LayerParams& at(std::string_view layer) const;
    /// Total prototypes over all PECAN layers.
    std::size_t prototype_count() const;
    /// Checks shapes of every parameter against the spec.
    void validate() const;

    bool operator==(const Model&) const = default;
};

/**
 * Fresh parameters: He-uniform weights (bound sqrt(6 / fan_in)), zero biases
 * and, for PECAN layers, standard-normal prototypes. `spec` must be resolved.
 */
Model init_model(const NetworkSpec& spec, std::uint64_t seed);

/// Copy weight and bias of every same-named, same-shaped parameterized layer.
void transfer_weights(Model& dst, const Model& src);

/// Codebook of a uniform PECAN layer as a [D, d, p] tensor.
Tensor codebook_tensor(const LayerParams& params);

/// Called with the grouped features entering each PECAN layer.
template <class T>
using FeatureHook = std::function<void(std::size_t layer, const BasicGroupedFeatures<T>& x)>;

/**
 * Table-driven inference over one sample. Lookup tables are built once per
 * PECAN layer at construction; baseline layers multiply directly. Every
 * kernel is templated on the scalar so the same code path runs plain or
 * audited.
 */
class InferenceEngine {
public:
    explicit InferenceEngine(Model model);

    const Model& model() const noexcept { return model_; }
    /// Lookup table of layer i, or nullptr for non-PECAN layers.
    const LookupTable* lut(std::size_t i) const;

    /// Output of layer i given its input ([c, h, w]).
    template <class T>
    BasicTensor<T> layer_forward(std::size_t i, const BasicTensor<T>& x, const FeatureHook<T>* hook = nullptr) const;

    /// Input to layer `stop` (the network output when stop == number of layers).
    template <class T>
    BasicTensor<T> forward_until(const BasicTensor<T>& image, std::size_t stop,
                                 const FeatureHook<T>* hook = nullptr) const {
        BasicTensor<T> x = image;
        for (std::size_t i = 0; i < stop; ++i) x = layer_forward(i, x, hook);
        return x;
    }

    /// Flat logits of one [c, h, w] sample.
    template <class T>
    BasicTensor<T> forward(const BasicTensor<T>& image, const FeatureHook<T>* hook = nullptr) const {
        BasicTensor<T> y = forward_until(image, model_.spec.layers.size(), hook);
        return std::move(y).reshaped(Shape{y.size()});
    }

    Tensor logits(const Tensor& image) const { return forward<double>(image); }
    std::size_t predict(const Tensor& image) const;

    struct LayerAudit {
        std::string layer;
        OpCounter counted;
    };
    struct AuditReport {
        std::vector<LayerAudit> layers;  ///< parameterized layers only
        OpCounter total;
        Tensor logits;
    };
    /// Runs one sample on audited scalars, one tally per parameterized layer.
    AuditReport audit_sample(const Tensor& image) const;

    /// Top-1 accuracy over the first `limit` samples (all when 0).
    double accuracy(const Dataset& data, std::size_t limit = 0) const;

    /// Hard-assignment histograms of every distance-based layer over the first `limit` samples.
    std::vector<std::optional<UsageHistogram>> usage(const Dataset& data, std::size_t limit = 0) const;

private:
    Model model_;
    std::vector<std::optional<LookupTable>> luts_;
};

/// Closed-form cost of a model, honouring the actual prototype count of every group.
NetworkCost model_cost(const Model& model);

/// Outcome of usage-based pruning.
struct PruneReport {
    Model model;
    std::vector<std::optional<UsageHistogram>> usage;  ///< per layer, distance layers only
    std::size_t prototypes_before = 0;
    std::size_t prototypes_after = 0;
};

/**
 * Tally hard assignments of every distance layer over the first `limit`
 * samples (all when 0) and drop the prototypes that were never chosen. On
 * those samples the pruned model's outputs equal the original's bit for bit.
 */
PruneReport prune_model(const Model& model, const Dataset& calibration, std::size_t limit = 0);

template <class T>
BasicTensor<T> InferenceEngine::layer_forward(std::size_t i, const BasicTensor<T>& x,
                                              const FeatureHook<T>* hook) const {
    const LayerSpec& l = model_.spec.layers.at(i);
    switch (l.kind) {
        case LayerKind::relu: {
            BasicTensor<T> y = x;
            for (T& v : y.data()) v = v > T(0.0) ? v : T(0.0);
            return y;
        }
        case LayerKind::maxpool: {
            const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
            BasicTensor<T> y(Shape{C, l.h_out, l.w_out});
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t oh = 0; oh < l.h_out; ++oh) {
                    for (std::size_t ow = 0; ow < l.w_out; ++ow) {
                        T best = x[(c * H + oh * l.stride) * W + ow * l.stride];
                        for (std::size_t ki = 0; ki < l.k; ++ki)
                            for (std::size_t kj = 0; kj < l.k; ++kj) {
                                const T v = x[(c * H + oh * l.stride + ki) * W + ow * l.stride + kj];
                                if (v > best) best = v;
                            }
                        y[(c * l.h_out + oh) * l.w_out + ow] = best;
                    }
                }
            }
            return y;
        }
        case LayerKind::conv:
        case LayerKind::fc:
            break;
    }
    const LayerParams& p = model_.params[i];
    ConvGeometry geom = l.geometry();
    BasicTensor<T> input = x;
    if (l.kind == LayerKind::fc) {
        input = std::move(input).reshaped(Shape{x.size(), 1, 1});
        geom.c_in = x.size();
        geom.h_in = geom.w_in = 1;
    }
    const BasicTensor<T> cols = im2col(input, geom);
    BasicTensor<T> y;
    if (l.pecan()) {
        const BasicGroupedFeatures<T> grouped = split_groups(cols, l.groups, l.dim);
        if (hook && *hook) (*hook)(i, grouped);
        y = l.method == Method::pecan_d ? infer_d(grouped, p.codebook, *luts_[i])
                                        : infer_a(grouped, p.codebook, *luts_[i], l.tau);
    } else {
        y = matmul(p.weight.cast<T>(), cols);
    }
    const std::size_t n = y.extent(1);
    for (std::size_t o = 0; o < l.c_out; ++o)
        for (std::size_t c = 0; c < n; ++c) add_uncounted(y[o * n + c], p.bias[o]);
    return std::move(y).reshaped(Shape{l.c_out, l.h_out, l.w_out});
}

} // namespace pecan
