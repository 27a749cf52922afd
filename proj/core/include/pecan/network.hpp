#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pecan/tensor.hpp"

namespace pecan {

enum class LayerKind { conv, fc, relu, maxpool };
enum class Method { baseline, pecan_a, pecan_d };

std::string_view to_string(LayerKind kind) noexcept;
std::string_view to_string(Method method) noexcept;
std::optional<LayerKind> parse_layer_kind(std::string_view s) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;

/**
 * One layer of a feed-forward network. conv and fc layers carry parameters;
 * fc is treated as a convolution with k = h_out = w_out = 1 over the
 * flattened input. For PECAN layers, groups (D) times dim (d) must equal
 * c_in * k * k.
 */
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::conv;
    std::size_t c_in = 0;
    std::size_t c_out = 0;
    std::size_t k = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    Method method = Method::baseline;
    std::size_t p = 0;
    std::size_t groups = 0;  ///< D
    std::size_t dim = 0;     ///< d
    double tau = 1.0;

    // Filled in by NetworkSpec::resolve().
    std::size_t h_in = 0, w_in = 0, h_out = 0, w_out = 0;

    bool parameterized() const noexcept { return kind == LayerKind::conv || kind == LayerKind::fc; }
    bool pecan() const noexcept { return parameterized() && method != Method::baseline; }
    /// Rows of the lowered feature matrix, c_in * k * k.
    std::size_t fan_in() const noexcept { return c_in * k * k; }
    /// Lowering geometry; fc layers map to a 1x1 convolution on a 1x1 map.
    ConvGeometry geometry() const noexcept;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    std::string arch = "custom";
    std::size_t in_channels = 1;
    std::size_t in_height = 28;
    std::size_t in_width = 28;
    std::vector<LayerSpec> layers;

    /**
     * Propagate spatial extents through the layers and check that channels
     * chain, pooling windows fit and every PECAN layer satisfies D*d ==
     * c_in*k*k with p >= 1. Throws ShapeError / ValueError.
     */
    void resolve();

    std::size_t classes() const;
    LayerSpec* find(std::string_view name) noexcept;
    const LayerSpec* find(std::string_view name) const noexcept;
    bool has_pecan() const noexcept;

    bool operator==(const NetworkSpec&) const = default;
};

/// Default PECAN settings (p, D, d) of the built-in architectures.
struct PecanSetting {
    std::size_t p, groups, dim;
};

/**
 * Modified LeNet5 for 28x28 MNIST: CONV 3x3 (8) - ReLU - maxpool 2 -
 * CONV 3x3 (16) - ReLU - maxpool 2 - FC 400->128 - ReLU - FC 128->64 - ReLU -
 * FC 64->10. Every parameterized layer uses `method` with the reference
 * per-layer settings; tau defaults to 1 (angle) or 0.5 (distance).
 */
NetworkSpec lenet5(Method method = Method::baseline);

/// VGG-Small for 32x32 CIFAR inputs; representable for cost accounting.
NetworkSpec vgg_small(Method method = Method::baseline);

/// Built-in architecture by name ("lenet5", "vgg_small").
NetworkSpec builtin_network(std::string_view arch, Method method);

/// Reference setting for one layer of a built-in architecture.
std::optional<PecanSetting> reference_setting(std::string_view arch, std::string_view layer, Method method);

/// Apply `method` to every parameterized layer using the reference settings.
void apply_method(NetworkSpec& spec, Method method, double tau_a = 1.0, double tau_d = 0.5);

} // namespace pecan
