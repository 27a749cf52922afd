#include "pecan/op_counter.hpp"

namespace pecan::detail {

OpCounter*& active_counter() noexcept {
    thread_local OpCounter* counter = nullptr;
    return counter;
}

} // namespace pecan::detail
