#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pecan/network.hpp"
#include "pecan/op_counter.hpp"

namespace pecan {

/// Closed-form inference cost of one layer (or a sum of layers).
struct LayerCost {
    std::uint64_t adds = 0;
    std::uint64_t muls = 0;
    Method method = Method::baseline;

    OpCounter counter() const noexcept { return {adds, muls}; }
    bool operator==(const LayerCost&) const = default;
};

/// Latency and power weights per scalar operation, in normalized units.
struct HardwareModel {
    std::uint64_t mul_cycles = 4;
    std::uint64_t add_cycles = 2;
    std::uint64_t mul_power = 4;
    std::uint64_t add_power = 1;

    void validate() const;
};

/**
 * Operation counts of one layer:
 *   baseline  c_in * h_out * w_out * k^2 * c_out adds and muls
 *   pecan_a   p * D * h_out * w_out * (d + c_out) adds and muls
 *   pecan_d   D * h_out * w_out * (2 p d + c_out) adds, no muls
 * Fully connected layers pass k = h_out = w_out = 1. For the PECAN methods
 * D*d must equal c_in*k^2.
 */
LayerCost layer_cost(Method method, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t h_out,
                     std::size_t w_out, std::size_t p = 0, std::size_t groups = 0, std::size_t dim = 0);

/// Cost of a resolved parameterized layer under its own method.
LayerCost layer_cost(const LayerSpec& layer);

/**
 * Cost of a PECAN layer whose group j keeps prototypes[j] prototypes, as after
 * pruning. Per position, group j costs p_j*(d + c_out) adds and muls under
 * pecan_a and 2*p_j*d + c_out adds under pecan_d.
 */
LayerCost layer_cost(const LayerSpec& layer, std::span<const std::size_t> prototypes);

struct LayerCostRow {
    std::string layer;
    LayerCost cost;
};

struct NetworkCost {
    std::vector<LayerCostRow> layers;  ///< parameterized layers only
    LayerCost total;
};

/// Per-layer and summed costs; activations, pooling and biases are free.
NetworkCost network_cost(const NetworkSpec& spec);

/// Same network with every parameterized layer switched to `method` first.
NetworkCost network_cost(NetworkSpec spec, Method method);

std::uint64_t latency_cycles(const LayerCost& cost, const HardwareModel& hw = {});
std::uint64_t power_index(const LayerCost& cost, const HardwareModel& hw = {});
/// power_index(cost) / power_index(reference).
double normalized_power(const LayerCost& cost, const LayerCost& reference, const HardwareModel& hw = {});

/**
 * Largest p keeping PECAN-A multiplications below the baseline split by
 * lambda: floor(min(lambda * c_out, (1 - lambda) * d)). lambda in (0, 1).
 */
std::size_t pecan_a_feasible_p(std::size_t c_out, std::size_t dim, double lambda);

/// The same layer with L1 similarity in place of products: each multiply-accumulate becomes two additions.
LayerCost adder_cost(const LayerCost& baseline) noexcept;

struct HardwareRow {
    std::string model;  ///< "CNN", "AdderNet", "PECAN-A", "PECAN-D"
    LayerCost cost;
    std::uint64_t cycles = 0;
    /// Cycles recomputed from counts first rounded to the nearest multiple of the comparison's unit.
    std::uint64_t rounded_cycles = 0;
    double power = 0.0;  ///< relative to the CNN row
};

/// Counts rounded to the nearest multiple of `unit` (halves away from zero); unit 0 leaves them exact.
LayerCost round_counts(const LayerCost& cost, std::uint64_t unit) noexcept;

/**
 * Latency and power of one architecture built as CNN, AdderNet, PECAN-A and
 * PECAN-D. Published tables quote cycles computed from counts already rounded
 * to two decimals (unit 10^7 at the G scale); `round_unit` reproduces that.
 */
std::vector<HardwareRow> hardware_comparison(const NetworkSpec& spec, const HardwareModel& hw = {},
                                             std::uint64_t round_unit = 0);

/// CSV with header model,adds,muls,cycles,rounded_cycles,power.
void write_hardware_csv(std::ostream& os, const std::vector<HardwareRow>& rows);

/// Compact magnitude, e.g. 48672 -> "48.67K", 1998064 -> "2.00M".
std::string format_count(std::uint64_t n);

/// Aligned human-readable table with a total row.
void write_cost_table(std::ostream& os, const NetworkCost& cost, const HardwareModel& hw = {});

/// CSV with header layer,method,adds,muls,cycles,power and a "total" row.
void write_cost_csv(std::ostream& os, const NetworkCost& cost, const HardwareModel& hw = {});

} // namespace pecan
