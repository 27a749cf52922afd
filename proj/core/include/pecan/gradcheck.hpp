#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pecan/autograd.hpp"

namespace pecan {

struct GradcheckResult {
    std::string op;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t points = 0;  ///< finite-difference evaluations per sign

    bool passed() const noexcept { return max_rel_error <= tolerance; }
};

/// Builds the checked expression from leaf nodes holding the inputs.
using GraphBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/**
 * Compare reverse-mode gradients of L = sum(out * R), R a fixed random tensor,
 * with central differences of step eps for every entry of every input. The
 * error of one input is ||analytic - numeric||_inf / max(||numeric||_inf, 1e-12);
 * the result reports the worst input.
 */
GradcheckResult gradcheck(std::string name, std::vector<Tensor> inputs, const GraphBuilder& build,
                          std::uint64_t seed, double eps = 1e-4, double tol = 1e-5);

/**
 * Checks for conv, fc, relu (off the kink), maxpool (off ties), softmax
 * cross-entropy, the angle layer end to end and the relaxed surrogate path
 * of the distance layer.
 */
std::vector<GradcheckResult> standard_gradchecks(std::uint64_t seed, double eps = 1e-4, double tol = 1e-5);

} // namespace pecan
