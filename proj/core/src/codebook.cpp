#include "pecan/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pecan/rng.hpp"

namespace pecan {

Codebook::Codebook(std::size_t dim, std::vector<Tensor> groups)
    : dim_(dim), groups_(std::move(groups)) {
    if (dim_ == 0 || groups_.empty()) throw ShapeError("codebook needs at least one group of dimension >= 1");
    for (std::size_t j = 0; j < groups_.size(); ++j) {
        const Tensor& g = groups_[j];
        if (g.rank() != 2 || g.extent(0) != dim_) {
            throw ShapeError("codebook group " + std::to_string(j) + " has shape " + to_string(g.shape()) +
                             ", expected [" + std::to_string(dim_) + ", p]");
        }
        for (double v : g.data()) {
            if (!std::isfinite(v)) throw ValueError("codebook group " + std::to_string(j) + " has a non-finite prototype entry");
        }
    }
}

Codebook Codebook::from_tensor(const Tensor& t) {
    if (t.rank() != 3) throw ShapeError("codebook tensor must be [D, d, p], got " + to_string(t.shape()));
    const std::size_t D = t.extent(0), d = t.extent(1), p = t.extent(2);
    std::vector<Tensor> groups;
    groups.reserve(D);
    for (std::size_t j = 0; j < D; ++j) {
        const auto first = t.data().begin() + static_cast<std::ptrdiff_t>(j * d * p);
        groups.emplace_back(Shape{d, p}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(d * p)));
    }
    return Codebook(d, std::move(groups));
}

std::size_t Codebook::count() const {
    if (!uniform()) throw ValueError("codebook groups hold different prototype counts");
    return groups_.front().extent(1);
}

std::size_t Codebook::max_count() const noexcept {
    std::size_t m = 0;
    for (const Tensor& g : groups_) m = std::max(m, g.extent(1));
    return m;
}

std::size_t Codebook::total_prototypes() const noexcept {
    std::size_t total = 0;
    for (const Tensor& g : groups_) total += g.extent(1);
    return total;
}

bool Codebook::uniform() const noexcept {
    return std::all_of(groups_.begin(), groups_.end(),
                       [&](const Tensor& g) { return g.extent(1) == groups_.front().extent(1); });
}

Tensor Codebook::to_tensor() const {
    const std::size_t p = count();
    Tensor out(Shape{groups(), dim_, p});
    for (std::size_t j = 0; j < groups(); ++j)
        std::copy(groups_[j].data().begin(), groups_[j].data().end(), out.raw() + j * dim_ * p);
    return out;
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) noexcept {
    double s = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        const double diff = a[r] - b[r];
        s += diff * diff;
    }
    return s;
}

// Returns the index of the first entry whose cumulative weight exceeds u * total.
std::size_t weighted_pick(const std::vector<double>& weights, double total, SplitMix64& rng) {
    const double target = rng.uniform() * total;
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        running += weights[i];
        if (running > target && weights[i] > 0.0) return i;
    }
    // Round-off can leave target at the very end; take the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

} // namespace

KMeansResult kmeans(const Tensor& samples, std::size_t p, std::size_t max_iters, std::uint64_t seed) {
    if (samples.rank() != 2) throw ShapeError("kmeans samples must be [d, n], got " + to_string(samples.shape()));
    if (p == 0) throw ValueError("kmeans needs p >= 1");
    if (max_iters == 0) throw ValueError("kmeans needs max_iters >= 1");
    const std::size_t d = samples.extent(0);
    const std::size_t n = samples.extent(1);
    for (double v : samples.data())
        if (!std::isfinite(v)) throw ValueError("kmeans samples contain a non-finite value");

    // Sample-major copy so that each sample is contiguous.
    std::vector<double> pts(n * d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t i = 0; i < n; ++i) pts[i * d + r] = samples[r * n + i];

    SplitMix64 rng(seed);
    std::vector<double> centers(p * d);
    std::vector<double> mindist(n, std::numeric_limits<double>::infinity());

    // k-means++ seeding.
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t chosen;
        if (c == 0) {
            chosen = rng.below(n);
        } else {
            const double total = std::accumulate(mindist.begin(), mindist.end(), 0.0);
            chosen = total > 0.0 ? weighted_pick(mindist, total, rng) : rng.below(n);
        }
        std::copy_n(pts.data() + chosen * d, d, centers.data() + c * d);
        for (std::size_t i = 0; i < n; ++i)
            mindist[i] = std::min(mindist[i], squared_distance(pts.data() + i * d, centers.data() + c * d, d));
    }

    KMeansResult result;
    std::vector<std::size_t> assign(n, p);
    std::vector<double> dist(n, 0.0);
    std::vector<double> sums(p * d);
    std::vector<std::size_t> sizes(p);

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = pts.data() + i * d;
            std::size_t best = 0;
            double best_d = squared_distance(x, centers.data(), d);
            for (std::size_t c = 1; c < p; ++c) {
                const double dc = squared_distance(x, centers.data() + c * d, d);
                if (dc < best_d) {
                    best_d = dc;
                    best = c;
                }
            }
            changed |= assign[i] != best;
            assign[i] = best;
            dist[i] = best_d;
            inertia += best_d;
        }
        result.inertia.push_back(inertia);
        result.iterations = iter + 1;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++sizes[assign[i]];
            for (std::size_t r = 0; r < d; ++r) sums[assign[i] * d + r] += pts[i * d + r];
        }
        bool reseeded = false;
        for (std::size_t c = 0; c < p; ++c) {
            if (sizes[c] > 0) {
                for (std::size_t r = 0; r < d; ++r)
                    centers[c * d + r] = sums[c * d + r] / static_cast<double>(sizes[c]);
                continue;
            }
            const auto far = static_cast<std::size_t>(
                std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
            if (dist[far] <= 0.0) continue;  // every sample already sits on a center
            std::copy_n(pts.data() + far * d, d, centers.data() + c * d);
            dist[far] = 0.0;
            reseeded = true;
        }
        if (!changed && !reseeded && iter > 0) break;
    }

    result.centers = Tensor(Shape{d, p});
    for (std::size_t c = 0; c < p; ++c)
        for (std::size_t r = 0; r < d; ++r) result.centers[r * p + c] = centers[c * d + r];
    return result;
}

Tensor kmeans_init(const Tensor& samples, std::size_t p, std::size_t max_iters, std::uint64_t seed) {
    return kmeans(samples, p, max_iters, seed).centers;
}

Codebook init_codebook(const GroupedFeatures& x, std::size_t p, std::uint64_t seed, std::size_t max_iters) {
    const std::size_t D = x.groups(), d = x.dim(), n = x.columns();
    std::vector<Tensor> groups;
    groups.reserve(D);
    for (std::size_t j = 0; j < D; ++j) {
        const auto first = x.data.data().begin() + static_cast<std::ptrdiff_t>(j * d * n);
        Tensor samples(Shape{d, n}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(d * n)));
        groups.push_back(kmeans_init(samples, p, max_iters, seed + j));
    }
    return Codebook(d, std::move(groups));
}

} // namespace pecan
