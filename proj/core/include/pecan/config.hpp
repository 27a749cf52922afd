#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pecan/network.hpp"
#include "pecan/train.hpp"

namespace pecan {

/// Everything a run needs: the network and the training settings.
struct RunConfig {
    NetworkSpec spec = lenet5(Method::baseline);
    Method method = Method::baseline;
    TrainConfig train;
};

/**
 * Parse the flat key=value format. Several pairs may share a line, '#'
 * starts a comment, and later assignments win.
 *
 * Global keys: arch, method, strategy, epochs, batch_size, lr,
 * lr_decay_epochs, lr_decay_factor, tau_a, tau_d, beta1, beta2, adam_eps,
 * seed, kmeans_iters, calib_images, kmeans_columns, angle_fit_steps,
 * angle_fit_columns, train_subset,
 * test_subset, eval_every, and p, D, d, tau applied to every PECAN layer.
 * Per-layer keys: <layer>.method, <layer>.p, <layer>.D, <layer>.d,
 * <layer>.tau.
 *
 * Unknown keys, malformed values and constraint violations raise
 * ConfigError carrying the offending line number.
 */
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text: every global key, then explicit per-layer PECAN settings.
std::string serialize_config(const RunConfig& cfg);

} // namespace pecan
