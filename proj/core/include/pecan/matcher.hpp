#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pecan/op_counter.hpp"
#include "pecan/tensor.hpp"

namespace pecan {

enum class MatchMethod { angle, distance };

/// Similarity settings for one PECAN layer at one point of training.
struct MatchConfig {
    MatchMethod method = MatchMethod::distance;
    double tau = 0.5;
    int epoch = 0;         ///< e, 0-based
    int total_epochs = 1;  ///< E

    /// Throws ValueError unless tau > 0, E >= 1 and 0 <= e <= E.
    void validate() const;
    /// a = exp(4e/E)
    double slope() const;
};

/**
 * Prototype weights for one (group, column) pair: soft scores, or a one-hot
 * vector for hard assignment. Entries are nonnegative and sum to one.
 */
struct Assignment {
    Tensor weights;  ///< [p]

    std::size_t size() const noexcept { return weights.size(); }
    /// Index of the largest weight, lowest index on ties.
    std::size_t argmax() const noexcept;
    bool one_hot() const noexcept;
};

/// softmax(logits / tau) with max-subtraction. tau must be positive.
Assignment softmax(std::span<const double> logits, double tau);

/// softmax((c^T x) / tau); x is [d], c is [d, p].
Assignment attention_scores(const Tensor& x, const Tensor& c, double tau = 1.0);

/// c * a, i.e. the assignment-weighted combination of prototypes; returns [d].
Tensor reconstruct(const Tensor& c, const Assignment& a);

/**
 * scores[m] = -sum_r |x_r - c[r, m]| using subtraction, abs and addition only.
 * Writes p entries into `out`. On audited scalars each (x, prototype) pairing
 * costs 2d additions and no multiplications.
 */
template <class T>
void l1_scores_into(std::span<const T> x, const Tensor& c, std::span<T> out) {
    using std::abs;
    const std::size_t d = c.extent(0);
    const std::size_t p = c.extent(1);
    if (x.size() != d || out.size() < p) {
        throw ShapeError("l1_scores: subvector of length " + std::to_string(x.size()) +
                         " against codebook " + to_string(c.shape()));
    }
    for (std::size_t m = 0; m < p; ++m) out[m] = T{};
    const double* cp = c.raw();
    for (std::size_t r = 0; r < d; ++r) {
        const T xr = x[r];
        const double* row = cp + r * p;
        for (std::size_t m = 0; m < p; ++m) out[m] = out[m] - abs(xr - row[m]);
    }
}

/// Dot-product scores c^T x; p*d multiply-accumulates on audited scalars.
template <class T>
void dot_scores_into(std::span<const T> x, const Tensor& c, std::span<T> out) {
    const std::size_t d = c.extent(0);
    const std::size_t p = c.extent(1);
    if (x.size() != d || out.size() < p) {
        throw ShapeError("dot_scores: subvector of length " + std::to_string(x.size()) +
                         " against codebook " + to_string(c.shape()));
    }
    for (std::size_t m = 0; m < p; ++m) out[m] = T{};
    const double* cp = c.raw();
    for (std::size_t r = 0; r < d; ++r) {
        const T xr = x[r];
        const double* row = cp + r * p;
        for (std::size_t m = 0; m < p; ++m) out[m] = out[m] + xr * T(row[m]);
    }
}

/// -||x - c_m||_1 for every prototype m; x is [d], c is [d, p]. Returns [p].
Tensor l1_scores(const Tensor& x, const Tensor& c);

/// Index of the maximal score, lowest index on ties.
template <class T>
std::size_t argmax_index(std::span<const T> scores) noexcept {
    std::size_t best = 0;
    for (std::size_t m = 1; m < scores.size(); ++m)
        if (scores[best] < scores[m]) best = m;
    return best;
}

/// One-hot at the maximal score (ties to the lowest index).
Assignment hard_assign(std::span<const double> scores);

/// softmax(scores / tau). Throws ValueError for tau <= 0.
Assignment relaxed_assign(std::span<const double> scores, double tau);

/**
 * Straight-through assignment: the forward value is hard_assign(scores) while
 * gradients are those of relaxed_assign(scores, tau).
 */
struct SteAssignment {
    Assignment value;    ///< one-hot, used in the forward pass
    Assignment relaxed;  ///< softmax(scores / tau), defines the backward pass
    double tau = 1.0;

    /// Gradient with respect to the scores given dL/d(assignment).
    Tensor vjp(std::span<const double> upstream) const;
};

SteAssignment ste_assign(std::span<const double> scores, double tau);

/**
 * Vector-Jacobian product of s = softmax(z / tau):
 * dL/dz_m = s_m (g_m - sum_k s_k g_k) / tau.
 */
Tensor softmax_vjp(const Assignment& s, double tau, std::span<const double> upstream);

/// a = exp(4e/E)
double sign_slope(double epoch, double total_epochs);

/**
 * Epoch-aware surrogate for sign(r) used when differentiating |x - c|:
 * tanh(a r) with a = exp(4e/E). Smooth early in training, sign-like at e = E.
 */
double sign_grad(double r, double epoch, double total_epochs);

} // namespace pecan
