#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pecan/error.hpp"

namespace pecan {

using Shape = std::vector<std::size_t>;

/// Product of all extents; 1 for the rank-0 shape.
std::size_t element_count(const Shape& shape) noexcept;

/// "[a, b, c]"
std::string to_string(const Shape& shape);

/**
 * Dense row-major tensor (last axis fastest).
 *
 * Extents are always >= 1, so a tensor is never empty; the default-constructed
 * tensor is a rank-0 scalar holding one value-initialized element.
 *
 * The scalar type is a template parameter so that the same kernels can run on
 * plain doubles or on audited scalars (see op_counter.hpp).
 */
template <class T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() : data_(1, T{}) {}

    explicit BasicTensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)) {
        check_extents();
        data_.assign(element_count(shape_), fill);
    }

    BasicTensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != element_count(shape_)) {
            throw ShapeError("tensor data holds " + std::to_string(data_.size()) +
                             " elements but shape " + to_string(shape_) + " needs " +
                             std::to_string(element_count(shape_)));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                             to_string(shape_));
        }
        return shape_[axis];
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }

    T& operator[](std::size_t flat) noexcept { return data_[flat]; }
    const T& operator[](std::size_t flat) const noexcept { return data_[flat]; }

    template <class... I>
    T& operator()(I... idx) noexcept { return data_[offset(idx...)]; }
    template <class... I>
    const T& operator()(I... idx) const noexcept { return data_[offset(idx...)]; }

    /// Same data, new extents. Throws if the element count changes.
    BasicTensor reshaped(Shape shape) const& {
        BasicTensor out = *this;
        out.reshape_in_place(std::move(shape));
        return out;
    }
    BasicTensor reshaped(Shape shape) && {
        reshape_in_place(std::move(shape));
        return std::move(*this);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <class U>
    BasicTensor<U> cast() const {
        std::vector<U> out;
        out.reserve(data_.size());
        for (const T& v : data_) out.push_back(static_cast<U>(v));
        return BasicTensor<U>(shape_, std::move(out));
    }

    bool operator==(const BasicTensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_) {
            if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape_));
        }
    }

    void reshape_in_place(Shape shape) {
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape));
        }
        if (element_count(shape) != data_.size()) {
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        }
        shape_ = std::move(shape);
    }

    template <class... I>
    std::size_t offset(I... idx) const noexcept {
        const std::size_t index[] = {static_cast<std::size_t>(idx)...};
        std::size_t flat = 0;
        for (std::size_t a = 0; a < sizeof...(I); ++a) flat = flat * shape_[a] + index[a];
        return flat;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<double>;

/// Square-kernel convolution geometry with symmetric stride and padding.
struct ConvGeometry {
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    std::size_t k = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t h_in = 1;
    std::size_t w_in = 1;

    /// Throws ShapeError unless both output extents are positive integers.
    void validate() const;
    std::size_t h_out() const noexcept { return (h_in + 2 * padding - k) / stride + 1; }
    std::size_t w_out() const noexcept { return (w_in + 2 * padding - k) / stride + 1; }
    std::size_t rows() const noexcept { return c_in * k * k; }
    std::size_t columns() const noexcept { return h_out() * w_out(); }
};

/**
 * Lower a [c_in, h_in, w_in] image to its [c_in*k*k, h_out*w_out] column matrix.
 *
 * Column i is the receptive field of output position i (row-major over the
 * output grid). Rows are channel-major, then row-major over the k x k window,
 * so they form c_in contiguous blocks of k*k. Padding reads as zero.
 */
template <class T>
BasicTensor<T> im2col(const BasicTensor<T>& input, const ConvGeometry& geom) {
    geom.validate();
    if (input.shape() != Shape{geom.c_in, geom.h_in, geom.w_in}) {
        throw ShapeError("im2col input " + to_string(input.shape()) + " does not match geometry " +
                         to_string(Shape{geom.c_in, geom.h_in, geom.w_in}));
    }
    const std::size_t k = geom.k;
    const std::size_t ho = geom.h_out();
    const std::size_t wo = geom.w_out();
    const std::size_t n = ho * wo;
    BasicTensor<T> cols(Shape{geom.rows(), n});
    T* out = cols.raw();
    const T* in = input.raw();
    const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
    for (std::size_t c = 0; c < geom.c_in; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* row = out + ((c * k + ky) * k + kx) * n;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * geom.stride + ky) - pad;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * geom.stride + kx) - pad;
                        const bool inside = iy >= 0 && ix >= 0 &&
                                            iy < static_cast<std::ptrdiff_t>(geom.h_in) &&
                                            ix < static_cast<std::ptrdiff_t>(geom.w_in);
                        row[oy * wo + ox] =
                            inside ? in[(c * geom.h_in + static_cast<std::size_t>(iy)) * geom.w_in +
                                        static_cast<std::size_t>(ix)]
                                   : T{};
                    }
                }
            }
        }
    }
    return cols;
}

/// Adjoint of im2col: scatter-add every column entry back to its image position.
template <class T>
BasicTensor<T> fold(const BasicTensor<T>& columns, const ConvGeometry& geom) {
    geom.validate();
    const std::size_t k = geom.k;
    const std::size_t ho = geom.h_out();
    const std::size_t wo = geom.w_out();
    const std::size_t n = ho * wo;
    if (columns.shape() != Shape{geom.rows(), n}) {
        throw ShapeError("fold input " + to_string(columns.shape()) + " does not match geometry " +
                         to_string(Shape{geom.rows(), n}));
    }
    BasicTensor<T> image(Shape{geom.c_in, geom.h_in, geom.w_in});
    T* out = image.raw();
    const T* in = columns.raw();
    const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
    for (std::size_t c = 0; c < geom.c_in; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* row = in + ((c * k + ky) * k + kx) * n;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * geom.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geom.h_in)) continue;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * geom.stride + kx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(geom.w_in)) continue;
                        T& dst = out[(c * geom.h_in + static_cast<std::size_t>(iy)) * geom.w_in +
                                     static_cast<std::size_t>(ix)];
                        dst = dst + row[oy * wo + ox];
                    }
                }
            }
        }
    }
    return image;
}

/**
 * Real matrix product [m,n] x [n,q] -> [m,q].
 *
 * Each output accumulates from zero in ascending inner index, so on audited
 * scalars the product costs exactly m*n*q additions and m*n*q multiplications.
 */
template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul extents disagree: " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
    }
    const std::size_t m = a.extent(0);
    const std::size_t n = a.extent(1);
    const std::size_t q = b.extent(1);
    BasicTensor<T> c(Shape{m, q});
    T* cp = c.raw();
    const T* ap = a.raw();
    const T* bp = b.raw();
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = cp + i * q;
        for (std::size_t kk = 0; kk < n; ++kk) {
            const T aik = ap[i * n + kk];
            const T* brow = bp + kk * q;
            for (std::size_t j = 0; j < q; ++j) crow[j] = crow[j] + aik * brow[j];
        }
    }
    return c;
}

/// Relabel the extents; data order is untouched.
template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& t, Shape new_shape) {
    return t.reshaped(std::move(new_shape));
}

/// Axis permutation: output axis a is input axis axis_order[a].
template <class T>
BasicTensor<T> permute(const BasicTensor<T>& t, const std::vector<std::size_t>& axis_order) {
    const std::size_t r = t.rank();
    if (axis_order.size() != r) {
        throw ShapeError("permutation of length " + std::to_string(axis_order.size()) +
                         " for rank-" + std::to_string(r) + " tensor");
    }
    std::vector<bool> seen(r, false);
    Shape out_shape(r);
    for (std::size_t a = 0; a < r; ++a) {
        if (axis_order[a] >= r || seen[axis_order[a]]) throw ShapeError("invalid axis permutation");
        seen[axis_order[a]] = true;
        out_shape[a] = t.shape()[axis_order[a]];
    }
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t a = r; a-- > 1;) in_stride[a - 1] = in_stride[a] * t.shape()[a];

    BasicTensor<T> out(out_shape);
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t a = 0; a < r; ++a) src += idx[a] * in_stride[axis_order[a]];
        out[flat] = t[src];
        for (std::size_t a = r; a-- > 0;) {
            if (++idx[a] < out_shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

/// reshape to new_shape, then permute by axis_order.
template <class T>
BasicTensor<T> reshape_permute(const BasicTensor<T>& t, Shape new_shape,
                               const std::vector<std::size_t>& axis_order) {
    return permute(reshape(t, std::move(new_shape)), axis_order);
}

/// [m, n] -> [n, m]
template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& t) {
    if (t.rank() != 2) throw ShapeError("transpose needs a matrix, got " + to_string(t.shape()));
    const std::size_t m = t.extent(0);
    const std::size_t n = t.extent(1);
    BasicTensor<T> out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = t[i * n + j];
    return out;
}

} // namespace pecan
