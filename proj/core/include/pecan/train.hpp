#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pecan/autograd.hpp"
#include "pecan/dataset.hpp"
#include "pecan/model.hpp"

namespace pecan {

enum class Strategy { from_scratch, freeze_weights };

std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> parse_strategy(std::string_view s) noexcept;

struct TrainConfig {
    int epochs = 150;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    int lr_decay_epochs = 50;  ///< multiply the rate by lr_decay_factor every this many epochs
    double lr_decay_factor = 0.1;
    double tau_a = 1.0;
    double tau_d = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /**
     * freeze_weights trains only the prototypes of PECAN layers. A network
     * without PECAN layers has nothing to freeze towards, so its weights train
     * under either strategy.
     */
    Strategy strategy = Strategy::freeze_weights;
    std::uint64_t seed = 0;
    std::size_t kmeans_iters = 25;
    std::size_t calib_images = 1000;     ///< images fed to codebook initialization
    std::size_t kmeans_columns = 20000;  ///< cap on sampled columns per layer for k-means
    /// Adam steps refining angle codebooks on reconstruction error after k-means; 0 skips the refinement.
    std::size_t angle_fit_steps = 300;
    std::size_t angle_fit_columns = 4000;
    std::size_t train_subset = 0;        ///< first n training images; 0 = all
    std::size_t test_subset = 0;         ///< first n test images; 0 = all
    int eval_every = 1;                  ///< test evaluation period in epochs; 0 = final epoch only

    /// Throws ConfigError on non-positive counts or Adam betas outside (0, 1).
    void validate() const;
};

/// One line of the metrics log.
struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> test_acc;
    double lr = 0.0;
    double slope = 1.0;  ///< a(e) = exp(4e/E)
};

/// "epoch\ttrain_loss\ttrain_acc\ttest_acc\tlr\ta_e"
void write_metrics_header(std::ostream& os);
/// Tab-separated values; a skipped test evaluation prints "-".
void write_metrics_line(std::ostream& os, const EpochMetrics& m);

struct TrainResult {
    Model model;
    std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Learning rate in effect during epoch e (0-based).
double learning_rate_at(const TrainConfig& cfg, int epoch);

/**
 * Adam on mean cross-entropy for cfg.epochs epochs. Epoch e (0-based) feeds
 * a = exp(4e/E) to the distance layers' tanh surrogate. Samples are shuffled
 * per epoch from cfg.seed; the run is deterministic. Throws DivergenceError
 * on a non-finite loss. On glibc the first call raises the allocator's mmap
 * and trim thresholds for the rest of the process.
 */
TrainResult train(Model model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/**
 * Fit every PECAN codebook to data, front to back: each layer's k-means runs
 * on the features it receives when all earlier PECAN layers already use their
 * fitted codebooks. Columns are subsampled to cfg.kmeans_columns per layer.
 *
 * k-means centers make poor angle codebooks: with nonnegative features the
 * longest center wins every dot-product match. Angle layers therefore
 * continue with cfg.angle_fit_steps full-batch Adam steps (rate 0.01) on the
 * mean squared error |x - C softmax(C^T x / tau)|^2 over up to
 * cfg.angle_fit_columns of the sampled columns.
 */
void calibrate_codebooks(Model& model, const Dataset& data, const TrainConfig& cfg);

/// Accuracy through lookup-table inference.
double evaluate(const Model& model, const Dataset& data, std::size_t limit = 0);

/// Options for building a differentiable forward pass of a model.
struct ForwardOptions {
    double slope = 1.0;
    bool relaxed_forward = false;
    bool smooth_distance = false;
    bool grad_weights = true;
    bool grad_codebooks = true;
    bool grad_input = false;
};

/// Graph nodes of one layer's parameters (npos where absent).
struct ParamNodes {
    static constexpr NodeId npos = static_cast<NodeId>(-1);
    NodeId weight = npos, bias = npos, codebook = npos;
};

struct ForwardPass {
    Graph graph;
    NodeId input = 0;
    NodeId logits = 0;  ///< [B, classes]
    std::vector<ParamNodes> params;
};

/// Record the training-time forward pass of a batch [B, c, h, w]. PECAN codebooks must be uniform.
ForwardPass build_forward(const Model& model, const Tensor& batch, const ForwardOptions& opt = {});

/// Logits from the training graph, [B, classes].
Tensor graph_logits(const Model& model, const Tensor& batch);

} // namespace pecan
