#include "pecan/network.hpp"

#include <algorithm>
#include <array>

#include "pecan/error.hpp"

namespace pecan {

std::string_view to_string(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::fc: return "fc";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
    }
    return "?";
}

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::baseline: return "baseline";
        case Method::pecan_a: return "pecan_a";
        case Method::pecan_d: return "pecan_d";
    }
    return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view s) noexcept {
    if (s == "conv") return LayerKind::conv;
    if (s == "fc") return LayerKind::fc;
    if (s == "relu") return LayerKind::relu;
    if (s == "maxpool") return LayerKind::maxpool;
    return std::nullopt;
}

std::optional<Method> parse_method(std::string_view s) noexcept {
    if (s == "baseline" || s == "cnn") return Method::baseline;
    if (s == "pecan_a" || s == "angle" || s == "dot") return Method::pecan_a;
    if (s == "pecan_d" || s == "distance") return Method::pecan_d;
    return std::nullopt;
}

ConvGeometry LayerSpec::geometry() const noexcept {
    ConvGeometry g;
    g.c_in = c_in;
    g.c_out = c_out;
    g.k = k;
    g.stride = stride;
    g.padding = padding;
    g.h_in = h_in;
    g.w_in = w_in;
    return g;
}

void NetworkSpec::resolve() {
    if (in_channels == 0 || in_height == 0 || in_width == 0) throw ShapeError("network input extents must be positive");
    if (layers.empty()) throw ShapeError("network has no layers");
    std::size_t c = in_channels, h = in_height, w = in_width;
    for (LayerSpec& l : layers) {
        const std::string where = "layer '" + l.name + "': ";
        switch (l.kind) {
            case LayerKind::conv: {
                if (l.c_in != c) {
                    throw ShapeError(where + "expects " + std::to_string(l.c_in) + " input channels, previous layer gives " +
                                     std::to_string(c));
                }
                l.h_in = h;
                l.w_in = w;
                ConvGeometry g = l.geometry();
                try {
                    g.validate();
                } catch (const ShapeError& e) {
                    throw ShapeError(where + e.what());
                }
                l.h_out = g.h_out();
                l.w_out = g.w_out();
                break;
            }
            case LayerKind::fc: {
                if (l.c_in != c * h * w) {
                    throw ShapeError(where + "expects " + std::to_string(l.c_in) + " inputs, previous layer gives " +
                                     std::to_string(c * h * w));
                }
                if (l.k != 1 || l.stride != 1 || l.padding != 0) throw ShapeError(where + "fc layers use k=1, stride=1, padding=0");
                l.h_in = l.w_in = l.h_out = l.w_out = 1;
                break;
            }
            case LayerKind::relu:
                l.c_in = l.c_out = c;
                l.h_in = l.h_out = h;
                l.w_in = l.w_out = w;
                break;
            case LayerKind::maxpool:
                if (l.k == 0 || l.stride == 0 || l.k > h || l.k > w) throw ShapeError(where + "pooling window does not fit");
                l.c_in = l.c_out = c;
                l.h_in = h;
                l.w_in = w;
                l.h_out = (h - l.k) / l.stride + 1;
                l.w_out = (w - l.k) / l.stride + 1;
                break;
        }
        if (l.parameterized()) {
            if (l.c_out == 0) throw ShapeError(where + "c_out must be positive");
            if (l.pecan()) {
                if (l.p == 0) throw ValueError(where + "p must be >= 1");
                if (l.groups == 0 || l.dim == 0 || l.groups * l.dim != l.fan_in()) {
                    throw ValueError(where + "D*d = " + std::to_string(l.groups) + "*" + std::to_string(l.dim) +
                                     " does not equal c_in*k^2 = " + std::to_string(l.fan_in()));
                }
                if (!(l.tau > 0.0)) throw ValueError(where + "tau must be positive");
            }
        }
        c = l.c_out;
        h = l.h_out;
        w = l.w_out;
    }
}

std::size_t NetworkSpec::classes() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    const LayerSpec& last = layers.back();
    return last.c_out * last.h_out * last.w_out;
}

LayerSpec* NetworkSpec::find(std::string_view name) noexcept {
    auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.name == name; });
    return it == layers.end() ? nullptr : &*it;
}

const LayerSpec* NetworkSpec::find(std::string_view name) const noexcept {
    auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.name == name; });
    return it == layers.end() ? nullptr : &*it;
}

bool NetworkSpec::has_pecan() const noexcept {
    return std::any_of(layers.begin(), layers.end(), [](const LayerSpec& l) { return l.pecan(); });
}

namespace {

LayerSpec conv(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t padding = 0) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::conv;
    l.c_in = c_in;
    l.c_out = c_out;
    l.k = k;
    l.padding = padding;
    return l;
}

LayerSpec fc(std::string name, std::size_t c_in, std::size_t c_out) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::fc;
    l.c_in = c_in;
    l.c_out = c_out;
    return l;
}

LayerSpec relu(std::string name) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::relu;
    return l;
}

LayerSpec maxpool(std::string name, std::size_t k) {
    LayerSpec l;
    l.name = std::move(name);
    l.kind = LayerKind::maxpool;
    l.k = k;
    l.stride = k;
    return l;
}

struct Reference {
    std::string_view arch, layer;
    PecanSetting angle, distance;
};

// p, D, d per layer for the angle and distance variants.
constexpr std::array kReference{
    Reference{"lenet5", "conv1", {4, 1, 9}, {64, 1, 9}},
    Reference{"lenet5", "conv2", {8, 3, 24}, {64, 8, 9}},
    Reference{"lenet5", "fc1", {8, 25, 16}, {64, 50, 8}},
    Reference{"lenet5", "fc2", {8, 8, 16}, {64, 16, 8}},
    Reference{"lenet5", "fc3", {8, 4, 16}, {64, 8, 8}},
    Reference{"vgg_small", "conv1", {16, 3, 9}, {32, 9, 3}},
    Reference{"vgg_small", "conv2", {16, 128, 9}, {32, 384, 3}},
    Reference{"vgg_small", "conv3", {16, 36, 32}, {32, 384, 3}},
    Reference{"vgg_small", "conv4", {16, 72, 32}, {32, 768, 3}},
    Reference{"vgg_small", "conv5", {16, 72, 32}, {32, 768, 3}},
    Reference{"vgg_small", "conv6", {16, 144, 32}, {32, 1536, 3}},
    Reference{"vgg_small", "fc", {16, 512, 16}, {32, 512, 16}},
};

} // namespace

std::optional<PecanSetting> reference_setting(std::string_view arch, std::string_view layer, Method method) {
    if (method == Method::baseline) return std::nullopt;
    for (const Reference& r : kReference)
        if (r.arch == arch && r.layer == layer) return method == Method::pecan_a ? r.angle : r.distance;
    return std::nullopt;
}

void apply_method(NetworkSpec& spec, Method method, double tau_a, double tau_d) {
    for (LayerSpec& l : spec.layers) {
        if (!l.parameterized()) continue;
        l.method = method;
        if (method == Method::baseline) {
            l.p = l.groups = l.dim = 0;
            l.tau = 1.0;
            continue;
        }
        l.tau = method == Method::pecan_a ? tau_a : tau_d;
        if (auto s = reference_setting(spec.arch, l.name, method)) {
            l.p = s->p;
            l.groups = s->groups;
            l.dim = s->dim;
        } else {
            // Prototype per input channel: D = c_in, d = k^2.
            l.groups = l.c_in;
            l.dim = l.k * l.k;
            l.p = method == Method::pecan_a ? 8 : 64;
        }
    }
}

NetworkSpec lenet5(Method method) {
    NetworkSpec s;
    s.arch = "lenet5";
    s.in_channels = 1;
    s.in_height = s.in_width = 28;
    s.layers = {conv("conv1", 1, 8, 3), relu("relu1"),   maxpool("pool1", 2), conv("conv2", 8, 16, 3),
                relu("relu2"),          maxpool("pool2", 2), fc("fc1", 400, 128),  relu("relu3"),
                fc("fc2", 128, 64),     relu("relu4"),       fc("fc3", 64, 10)};
    apply_method(s, method);
    s.resolve();
    return s;
}

NetworkSpec vgg_small(Method method) {
    NetworkSpec s;
    s.arch = "vgg_small";
    s.in_channels = 3;
    s.in_height = s.in_width = 32;
    s.layers = {conv("conv1", 3, 128, 3, 1),   relu("relu1"), conv("conv2", 128, 128, 3, 1), relu("relu2"),
                maxpool("pool1", 2),           conv("conv3", 128, 256, 3, 1), relu("relu3"),
                conv("conv4", 256, 256, 3, 1), relu("relu4"), maxpool("pool2", 2),
                conv("conv5", 256, 512, 3, 1), relu("relu5"), conv("conv6", 512, 512, 3, 1), relu("relu6"),
                maxpool("pool3", 2),           fc("fc", 8192, 10)};
    apply_method(s, method);
    s.resolve();
    return s;
}

NetworkSpec builtin_network(std::string_view arch, Method method) {
    if (arch == "lenet5") return lenet5(method);
    if (arch == "vgg_small") return vgg_small(method);
    throw ValueError("unknown architecture '" + std::string(arch) + "'");
}

} // namespace pecan
