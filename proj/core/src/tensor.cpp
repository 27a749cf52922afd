#include "pecan/tensor.hpp"

#include <sstream>

namespace pecan {

std::size_t element_count(const Shape& shape) noexcept {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void ConvGeometry::validate() const {
    if (c_in == 0 || c_out == 0 || k == 0 || stride == 0 || h_in == 0 || w_in == 0) {
        throw ShapeError("convolution geometry needs positive channels, kernel, stride and input");
    }
    const auto check = [&](std::size_t in, const char* axis) {
        const std::size_t span = in + 2 * padding;
        if (span < k) {
            throw ShapeError(std::string("kernel ") + std::to_string(k) + " exceeds padded " + axis +
                             " extent " + std::to_string(span));
        }
        if ((span - k) % stride != 0) {
            throw ShapeError(std::string("non-integer output ") + axis + ": (" + std::to_string(in) +
                             " + 2*" + std::to_string(padding) + " - " + std::to_string(k) + ")/" +
                             std::to_string(stride));
        }
    };
    check(h_in, "height");
    check(w_in, "width");
}

} // namespace pecan
