#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pecan/tensor.hpp"

namespace pecan {

/**
 * Column matrix regrouped by rows: data is [D, d, n], group j holding rows
 * j*d .. (j+1)*d of the original [D*d, n] matrix.
 */
template <class T>
struct BasicGroupedFeatures {
    BasicTensor<T> data;

    std::size_t groups() const { return data.extent(0); }
    std::size_t dim() const { return data.extent(1); }
    std::size_t columns() const { return data.extent(2); }

    /// Entry r of the subvector (group j, column i).
    const T& at(std::size_t j, std::size_t r, std::size_t i) const noexcept {
        return data[(j * dim() + r) * columns() + i];
    }
};

using GroupedFeatures = BasicGroupedFeatures<double>;

template <class T>
BasicGroupedFeatures<T> split_groups(const BasicTensor<T>& x, std::size_t groups, std::size_t dim) {
    if (x.rank() != 2) throw ShapeError("split_groups expects a matrix, got " + to_string(x.shape()));
    if (groups == 0 || dim == 0 || groups * dim != x.extent(0)) {
        throw ShapeError("split_groups: " + std::to_string(x.extent(0)) + " rows cannot form " +
                         std::to_string(groups) + " groups of " + std::to_string(dim));
    }
    return {x.reshaped(Shape{groups, dim, x.extent(1)})};
}

template <class T>
BasicTensor<T> merge_groups(const BasicGroupedFeatures<T>& g) {
    return g.data.reshaped(Shape{g.groups() * g.dim(), g.columns()});
}

/**
 * Per-group prototype sets C^(j), each stored as a [d, p_j] matrix whose
 * columns are prototypes.
 *
 * Training always produces the same p for every group. Pruning may leave
 * groups with different counts, which is why groups are stored separately.
 */
class Codebook {
public:
    Codebook() = default;
    Codebook(std::size_t dim, std::vector<Tensor> groups);

    /// From a [D, d, p] tensor.
    static Codebook from_tensor(const Tensor& t);

    std::size_t groups() const noexcept { return groups_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count(std::size_t group) const { return groups_.at(group).extent(1); }
    /// Common prototype count; throws ValueError when groups differ.
    std::size_t count() const;
    std::size_t max_count() const noexcept;
    std::size_t total_prototypes() const noexcept;
    bool uniform() const noexcept;

    const Tensor& group(std::size_t j) const { return groups_.at(j); }
    Tensor& group(std::size_t j) { return groups_.at(j); }

    /// [D, d, p]; requires uniform().
    Tensor to_tensor() const;

    bool operator==(const Codebook&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<Tensor> groups_;
};

struct KMeansResult {
    Tensor centers;               ///< [d, p]
    std::vector<double> inertia;  ///< total squared distance after each assignment step
    std::size_t iterations = 0;
};

/**
 * k-means++ seeding followed by Lloyd iterations on the columns of `samples`
 * ([d, n]). Squared Euclidean assignment, ties to the lowest center index.
 * An emptied cluster is reseeded with the sample farthest from its center.
 * Stops early once assignments no longer change.
 */
KMeansResult kmeans(const Tensor& samples, std::size_t p, std::size_t max_iters, std::uint64_t seed);

/// Centers only; see kmeans().
Tensor kmeans_init(const Tensor& samples, std::size_t p, std::size_t max_iters, std::uint64_t seed);

inline constexpr std::size_t kDefaultKMeansIters = 25;

/// Independent k-means per group, group j seeded with seed + j.
Codebook init_codebook(const GroupedFeatures& x, std::size_t p, std::uint64_t seed,
                       std::size_t max_iters = kDefaultKMeansIters);

} // namespace pecan
