#include "pecan/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>

#include "pecan/error.hpp"

namespace pecan {

void HardwareModel::validate() const {
    if (mul_cycles == 0 || add_cycles == 0 || mul_power == 0 || add_power == 0) {
        throw ValueError("hardware model weights must be positive");
    }
}

LayerCost layer_cost(Method method, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t h_out,
                     std::size_t w_out, std::size_t p, std::size_t groups, std::size_t dim) {
    if (c_in == 0 || c_out == 0 || k == 0 || h_out == 0 || w_out == 0) {
        throw ValueError("layer_cost: layer extents must be positive");
    }
    using U = std::uint64_t;
    const U positions = U(h_out) * w_out;
    LayerCost c;
    c.method = method;
    if (method == Method::baseline) {
        c.adds = c.muls = U(c_in) * positions * k * k * c_out;
        return c;
    }
    if (p == 0 || groups == 0 || dim == 0) throw ValueError("layer_cost: p, D and d must be positive");
    if (U(groups) * dim != U(c_in) * k * k) {
        throw ValueError("layer_cost: D*d = " + std::to_string(groups * dim) + " does not equal c_in*k^2 = " +
                         std::to_string(c_in * k * k));
    }
    if (method == Method::pecan_a) {
        c.adds = c.muls = U(p) * groups * positions * (U(dim) + c_out);
    } else {
        c.adds = U(groups) * positions * (2 * U(p) * dim + c_out);
        c.muls = 0;
    }
    return c;
}

LayerCost layer_cost(const LayerSpec& l) {
    if (!l.parameterized()) return {0, 0, l.method};
    return layer_cost(l.method, l.c_in, l.c_out, l.k, l.h_out, l.w_out, l.p, l.groups, l.dim);
}

LayerCost layer_cost(const LayerSpec& l, std::span<const std::size_t> prototypes) {
    if (!l.pecan()) return layer_cost(l);
    if (prototypes.size() != l.groups) throw ValueError("layer_cost: one prototype count per group expected");
    using U = std::uint64_t;
    const U positions = U(l.h_out) * l.w_out;
    LayerCost c{0, 0, l.method};
    for (std::size_t p : prototypes) {
        if (p == 0) throw ValueError("layer_cost: every group needs a prototype");
        if (l.method == Method::pecan_a) {
            c.adds += U(p) * positions * (U(l.dim) + l.c_out);
        } else {
            c.adds += positions * (2 * U(p) * l.dim + l.c_out);
        }
    }
    if (l.method == Method::pecan_a) c.muls = c.adds;
    return c;
}

NetworkCost network_cost(const NetworkSpec& spec) {
    NetworkCost out;
    bool mixed = false;
    for (const LayerSpec& l : spec.layers) {
        if (!l.parameterized()) continue;
        if (l.h_out == 0) throw ValueError("network_cost: spec is not resolved");
        LayerCost c = layer_cost(l);
        if (!out.layers.empty() && c.method != out.total.method) mixed = true;
        out.total.method = c.method;
        out.total.adds += c.adds;
        out.total.muls += c.muls;
        out.layers.push_back({l.name, c});
    }
    if (mixed) out.total.method = Method::baseline;
    return out;
}

NetworkCost network_cost(NetworkSpec spec, Method method) {
    apply_method(spec, method);
    spec.resolve();
    return network_cost(spec);
}

std::uint64_t latency_cycles(const LayerCost& cost, const HardwareModel& hw) {
    hw.validate();
    return hw.mul_cycles * cost.muls + hw.add_cycles * cost.adds;
}

std::uint64_t power_index(const LayerCost& cost, const HardwareModel& hw) {
    hw.validate();
    return hw.mul_power * cost.muls + hw.add_power * cost.adds;
}

double normalized_power(const LayerCost& cost, const LayerCost& reference, const HardwareModel& hw) {
    const std::uint64_t ref = power_index(reference, hw);
    if (ref == 0) throw ValueError("normalized_power: reference cost is zero");
    return static_cast<double>(power_index(cost, hw)) / static_cast<double>(ref);
}

LayerCost adder_cost(const LayerCost& baseline) noexcept {
    return {baseline.adds + baseline.muls, 0, Method::baseline};
}

LayerCost round_counts(const LayerCost& cost, std::uint64_t unit) noexcept {
    if (unit == 0) return cost;
    auto round = [unit](std::uint64_t n) { return (n + unit / 2) / unit * unit; };
    return {round(cost.adds), round(cost.muls), cost.method};
}

std::vector<HardwareRow> hardware_comparison(const NetworkSpec& spec, const HardwareModel& hw,
                                             std::uint64_t round_unit) {
    const LayerCost cnn = network_cost(spec, Method::baseline).total;
    std::vector<HardwareRow> rows;
    auto push = [&](std::string name, const LayerCost& c) {
        rows.push_back({std::move(name), c, latency_cycles(c, hw), latency_cycles(round_counts(c, round_unit), hw),
                        normalized_power(c, cnn, hw)});
    };
    push("CNN", cnn);
    push("AdderNet", adder_cost(cnn));
    push("PECAN-A", network_cost(spec, Method::pecan_a).total);
    push("PECAN-D", network_cost(spec, Method::pecan_d).total);
    return rows;
}

void write_hardware_csv(std::ostream& os, const std::vector<HardwareRow>& rows) {
    os << "model,adds,muls,cycles,rounded_cycles,power\n";
    for (const HardwareRow& r : rows)
        os << r.model << ',' << r.cost.adds << ',' << r.cost.muls << ',' << r.cycles << ',' << r.rounded_cycles << ','
           << r.power << '\n';
}

std::size_t pecan_a_feasible_p(std::size_t c_out, std::size_t dim, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ValueError("lambda must lie strictly between 0 and 1");
    const double bound = std::min(lambda * static_cast<double>(c_out), (1.0 - lambda) * static_cast<double>(dim));
    return static_cast<std::size_t>(std::floor(bound));
}

std::string format_count(std::uint64_t n) {
    char buf[32];
    if (n >= 1'000'000'000ULL) std::snprintf(buf, sizeof buf, "%.2fG", static_cast<double>(n) / 1e9);
    else if (n >= 1'000'000ULL) std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(n) / 1e6);
    else if (n >= 1'000ULL) std::snprintf(buf, sizeof buf, "%.2fK", static_cast<double>(n) / 1e3);
    else std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(n));
    return buf;
}

void write_cost_table(std::ostream& os, const NetworkCost& cost, const HardwareModel& hw) {
    auto row = [&](const std::string& name, const LayerCost& c) {
        os << std::left << std::setw(8) << name << std::setw(10) << to_string(c.method) << std::right << std::setw(12)
           << c.adds << std::setw(12) << c.muls << std::setw(10) << format_count(c.adds) << std::setw(10)
           << format_count(c.muls) << std::setw(14) << latency_cycles(c, hw) << std::setw(14) << power_index(c, hw)
           << '\n';
    };
    os << std::left << std::setw(8) << "layer" << std::setw(10) << "method" << std::right << std::setw(12) << "adds"
       << std::setw(12) << "muls" << std::setw(10) << "adds" << std::setw(10) << "muls" << std::setw(14) << "cycles"
       << std::setw(14) << "power" << '\n';
    for (const auto& r : cost.layers) row(r.layer, r.cost);
    row("total", cost.total);
}

void write_cost_csv(std::ostream& os, const NetworkCost& cost, const HardwareModel& hw) {
    os << "layer,method,adds,muls,cycles,power\n";
    auto row = [&](const std::string& name, const LayerCost& c) {
        os << name << ',' << to_string(c.method) << ',' << c.adds << ',' << c.muls << ',' << latency_cycles(c, hw)
           << ',' << power_index(c, hw) << '\n';
    };
    for (const auto& r : cost.layers) row(r.layer, r.cost);
    row("total", cost.total);
}

} // namespace pecan
