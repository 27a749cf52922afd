#include "pecan/lut.hpp"

#include <algorithm>

namespace pecan {

LookupTable::LookupTable(std::vector<Tensor> groups, std::string provenance)
    : groups_(std::move(groups)), provenance_(std::move(provenance)) {
    if (groups_.empty()) throw ShapeError("lookup table needs at least one group");
    for (const Tensor& g : groups_) {
        if (g.rank() != 2 || g.extent(0) != groups_.front().extent(0)) {
            throw ShapeError("lookup table groups must all be [c_out, p]");
        }
    }
}

LookupTable build_lut(const Tensor& weights, const Codebook& cb, std::string provenance) {
    const std::size_t D = cb.groups(), d = cb.dim();
    if (weights.rank() != 2 || weights.extent(1) != D * d) {
        throw ShapeError("build_lut: weights " + to_string(weights.shape()) + " do not match codebook D*d = " +
                         std::to_string(D * d));
    }
    const std::size_t c_out = weights.extent(0);
    const Tensor w1 = reshape_permute(weights, Shape{c_out, D, d}, {1, 0, 2});
    std::vector<Tensor> groups;
    groups.reserve(D);
    for (std::size_t j = 0; j < D; ++j) {
        const auto first = w1.data().begin() + static_cast<std::ptrdiff_t>(j * c_out * d);
        Tensor slice(Shape{c_out, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c_out * d)));
        groups.push_back(matmul(slice, cb.group(j)));
    }
    return LookupTable(std::move(groups), std::move(provenance));
}

namespace detail {

void check_lut_operands(std::size_t groups, std::size_t dim, const Codebook& cb, const LookupTable& lut) {
    if (cb.groups() != groups || cb.dim() != dim) {
        throw ShapeError("features grouped as " + std::to_string(groups) + "x" + std::to_string(dim) +
                         " but codebook is " + std::to_string(cb.groups()) + "x" + std::to_string(cb.dim()));
    }
    if (lut.groups() != groups) throw ShapeError("lookup table group count does not match the codebook");
    for (std::size_t j = 0; j < groups; ++j) {
        if (lut.count(j) != cb.count(j)) {
            throw ShapeError("lookup table group " + std::to_string(j) + " has " + std::to_string(lut.count(j)) +
                             " columns for " + std::to_string(cb.count(j)) + " prototypes");
        }
    }
}

} // namespace detail

std::uint64_t UsageHistogram::total(std::size_t j) const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts.at(j)) t += c;
    return t;
}

std::size_t UsageHistogram::used(std::size_t j) const {
    const auto& row = counts.at(j);
    return static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](std::uint64_t c) { return c > 0; }));
}

bool UsageHistogram::has_zeros() const noexcept {
    for (const auto& row : counts)
        if (std::find(row.begin(), row.end(), 0u) != row.end()) return true;
    return false;
}

UsageHistogram make_histogram(const Codebook& cb) {
    UsageHistogram h;
    h.counts.resize(cb.groups());
    for (std::size_t j = 0; j < cb.groups(); ++j) h.counts[j].assign(cb.count(j), 0);
    return h;
}

void accumulate_usage(UsageHistogram& hist, const GroupedFeatures& x, const Codebook& cb) {
    const std::size_t D = x.groups(), d = x.dim(), n = x.columns();
    if (cb.groups() != D || cb.dim() != d) throw ShapeError("usage_histogram: features do not match codebook");
    if (hist.groups() != D) throw ShapeError("usage_histogram: histogram does not match codebook");
    std::vector<double> sub(d);
    std::vector<double> scores(cb.max_count());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            const std::size_t p = cb.count(j);
            if (hist.counts[j].size() != p) throw ShapeError("usage_histogram: histogram does not match codebook");
            for (std::size_t r = 0; r < d; ++r) sub[r] = x.at(j, r, i);
            std::span<double> s(scores.data(), p);
            l1_scores_into<double>(sub, cb.group(j), s);
            ++hist.counts[j][argmax_index<double>(s)];
        }
    }
}

UsageHistogram usage_histogram(const GroupedFeatures& x, const Codebook& cb) {
    UsageHistogram h = make_histogram(cb);
    accumulate_usage(h, x, cb);
    return h;
}

PruneResult prune_unused(const Codebook& cb, const LookupTable& lut, const UsageHistogram& hist) {
    detail::check_lut_operands(cb.groups(), cb.dim(), cb, lut);
    if (hist.groups() != cb.groups()) throw ShapeError("prune_unused: histogram does not match codebook");
    const std::size_t d = cb.dim(), c_out = lut.c_out();
    PruneResult out;
    std::vector<Tensor> protos, tables;
    for (std::size_t j = 0; j < cb.groups(); ++j) {
        const auto& counts = hist.counts[j];
        const std::size_t p = cb.count(j);
        if (counts.size() != p) throw ShapeError("prune_unused: histogram does not match codebook");
        std::vector<std::size_t> keep;
        for (std::size_t m = 0; m < p; ++m)
            if (counts[m] > 0) keep.push_back(m);
        if (keep.empty()) {
            keep.push_back(static_cast<std::size_t>(
                std::distance(counts.begin(), std::max_element(counts.begin(), counts.end()))));
        }
        const std::size_t q = keep.size();
        Tensor c(Shape{d, q});
        Tensor t(Shape{c_out, q});
        for (std::size_t m = 0; m < q; ++m) {
            for (std::size_t r = 0; r < d; ++r) c[r * q + m] = cb.group(j)[r * p + keep[m]];
            for (std::size_t o = 0; o < c_out; ++o) t[o * q + m] = lut.group(j)[o * p + keep[m]];
        }
        protos.push_back(std::move(c));
        tables.push_back(std::move(t));
        out.kept.push_back(std::move(keep));
    }
    out.codebook = Codebook(d, std::move(protos));
    out.lut = LookupTable(std::move(tables), lut.provenance());
    return out;
}

} // namespace pecan
