#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pecan/codebook.hpp"
#include "pecan/matcher.hpp"
#include "pecan/op_counter.hpp"
#include "pecan/tensor.hpp"

namespace pecan {

/**
 * Precomputed filter-prototype products Y^(j) = W1^(j) C1^(j), one
 * [c_out, p_j] matrix per group.
 */
class LookupTable {
public:
    LookupTable() = default;
    LookupTable(std::vector<Tensor> groups, std::string provenance = {});

    std::size_t groups() const noexcept { return groups_.size(); }
    std::size_t c_out() const noexcept { return groups_.empty() ? 0 : groups_.front().extent(0); }
    std::size_t count(std::size_t j) const { return groups_.at(j).extent(1); }
    const Tensor& group(std::size_t j) const { return groups_.at(j); }
    const std::string& provenance() const noexcept { return provenance_; }

    bool operator==(const LookupTable&) const = default;

private:
    std::vector<Tensor> groups_;
    std::string provenance_;
};

/**
 * Permute the [c_out, D*d] filter matrix to W1 = [D, c_out, d] and multiply
 * each slice by its codebook group. The only multiplications a PECAN-D layer
 * ever performs happen here, once, offline.
 */
LookupTable build_lut(const Tensor& weights, const Codebook& cb, std::string provenance = {});

namespace detail {
void check_lut_operands(std::size_t groups, std::size_t dim, const Codebook& cb, const LookupTable& lut);
} // namespace detail

/**
 * Distance-based table inference. For every column and group: L1 scores over
 * the group's prototypes, argmax (lowest index on ties), then accumulate the
 * matching table column. Returns [c_out, n].
 *
 * Audited cost: D*n*(2*p*d + c_out) additions, zero multiplications.
 */
template <class T>
BasicTensor<T> infer_d(const BasicGroupedFeatures<T>& x, const Codebook& cb, const LookupTable& lut) {
    const std::size_t D = x.groups(), d = x.dim(), n = x.columns();
    detail::check_lut_operands(D, d, cb, lut);
    const std::size_t c_out = lut.c_out();
    BasicTensor<T> y(Shape{c_out, n});
    std::vector<T> sub(d);
    std::vector<T> scores(cb.max_count());
    T* yp = y.raw();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            const Tensor& proto = cb.group(j);
            const std::size_t p = proto.extent(1);
            for (std::size_t r = 0; r < d; ++r) sub[r] = x.at(j, r, i);
            std::span<T> s(scores.data(), p);
            l1_scores_into<T>(sub, proto, s);
            const std::size_t k = argmax_index<T>(s);
            const double* table = lut.group(j).raw();
            for (std::size_t o = 0; o < c_out; ++o) yp[o * n + i] = yp[o * n + i] + table[o * p + k];
        }
    }
    return y;
}

/**
 * Angle-based table inference: soft scores softmax(C^T x / tau) weight the
 * table columns. Returns [c_out, n].
 *
 * Audited cost: p*D*n*(d + c_out) additions and as many multiplications. The
 * softmax itself (max, exp, normalization) runs uncounted.
 */
template <class T>
BasicTensor<T> infer_a(const BasicGroupedFeatures<T>& x, const Codebook& cb, const LookupTable& lut, double tau) {
    if (!(tau > 0.0)) throw ValueError("infer_a needs tau > 0");
    const std::size_t D = x.groups(), d = x.dim(), n = x.columns();
    detail::check_lut_operands(D, d, cb, lut);
    const std::size_t c_out = lut.c_out();
    BasicTensor<T> y(Shape{c_out, n});
    std::vector<T> sub(d);
    std::vector<T> scores(cb.max_count());
    std::vector<double> logits(cb.max_count());
    std::vector<T> weights(cb.max_count());
    T* yp = y.raw();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            const Tensor& proto = cb.group(j);
            const std::size_t p = proto.extent(1);
            for (std::size_t r = 0; r < d; ++r) sub[r] = x.at(j, r, i);
            dot_scores_into<T>(sub, proto, std::span<T>(scores.data(), p));
            for (std::size_t m = 0; m < p; ++m) logits[m] = value_of(scores[m]);
            const Assignment s = softmax(std::span<const double>(logits.data(), p), tau);
            for (std::size_t m = 0; m < p; ++m) weights[m] = T(s.weights[m]);
            const double* table = lut.group(j).raw();
            for (std::size_t o = 0; o < c_out; ++o) {
                T acc = yp[o * n + i];
                for (std::size_t m = 0; m < p; ++m) acc = acc + T(table[o * p + m]) * weights[m];
                yp[o * n + i] = acc;
            }
        }
    }
    return y;
}

/// Hard-assignment call tallies, counts[j][m] for group j, prototype m.
struct UsageHistogram {
    std::vector<std::vector<std::uint64_t>> counts;

    std::size_t groups() const noexcept { return counts.size(); }
    std::uint64_t total(std::size_t j) const;
    std::size_t used(std::size_t j) const;
    bool has_zeros() const noexcept;
};

/// Empty histogram shaped like the codebook.
UsageHistogram make_histogram(const Codebook& cb);

/// Add the hard assignments of every column of x to hist.
void accumulate_usage(UsageHistogram& hist, const GroupedFeatures& x, const Codebook& cb);

UsageHistogram usage_histogram(const GroupedFeatures& x, const Codebook& cb);

struct PruneResult {
    Codebook codebook;
    LookupTable lut;
    std::vector<std::vector<std::size_t>> kept;  ///< kept[j][new index] = old index
};

/**
 * Drop zero-count prototypes together with their table columns. A group whose
 * histogram is all zero keeps its single most used (lowest index) prototype
 * rather than becoming empty.
 */
PruneResult prune_unused(const Codebook& cb, const LookupTable& lut, const UsageHistogram& hist);

} // namespace pecan
