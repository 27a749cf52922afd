#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace pecan {

/// Tally of scalar additions and multiplications.
struct OpCounter {
    std::uint64_t adds = 0;
    std::uint64_t muls = 0;

    OpCounter& operator+=(const OpCounter& o) noexcept {
        adds += o.adds;
        muls += o.muls;
        return *this;
    }
    friend OpCounter operator+(OpCounter a, const OpCounter& b) noexcept { return a += b; }
    bool operator==(const OpCounter&) const = default;
};

namespace detail {
/// Counter that Counted arithmetic reports to on this thread, or nullptr.
OpCounter*& active_counter() noexcept;
} // namespace detail

/**
 * Audited real scalar.
 *
 * Counting rules: +, - and a multiply-accumulate's add each count one
 * addition; * counts one multiplication. Negation, abs, comparisons, division
 * and transcendentals are free. Construction from double is free.
 */
class Counted {
public:
    constexpr Counted() noexcept = default;
    constexpr Counted(double v) noexcept : v_(v) {} // NOLINT: implicit by design of the kernels

    constexpr double value() const noexcept { return v_; }
    explicit constexpr operator double() const noexcept { return v_; }

    friend Counted operator+(Counted a, Counted b) noexcept {
        tick_add();
        return Counted(a.v_ + b.v_);
    }
    friend Counted operator-(Counted a, Counted b) noexcept {
        tick_add();
        return Counted(a.v_ - b.v_);
    }
    friend Counted operator*(Counted a, Counted b) noexcept {
        tick_mul();
        return Counted(a.v_ * b.v_);
    }
    friend Counted operator/(Counted a, Counted b) noexcept { return Counted(a.v_ / b.v_); }
    friend Counted operator-(Counted a) noexcept { return Counted(-a.v_); }

    Counted& operator+=(Counted b) noexcept { return *this = *this + b; }
    Counted& operator-=(Counted b) noexcept { return *this = *this - b; }
    Counted& operator*=(Counted b) noexcept { return *this = *this * b; }

    friend bool operator==(Counted a, Counted b) noexcept { return a.v_ == b.v_; }
    friend auto operator<=>(Counted a, Counted b) noexcept { return a.v_ <=> b.v_; }

    friend Counted abs(Counted a) noexcept { return Counted(std::fabs(a.v_)); }

private:
    static void tick_add() noexcept {
        if (OpCounter* c = detail::active_counter()) ++c->adds;
    }
    static void tick_mul() noexcept {
        if (OpCounter* c = detail::active_counter()) ++c->muls;
    }

    double v_ = 0.0;
};

/// Plain value of a scalar, without counting.
inline double value_of(double x) noexcept { return x; }
inline double value_of(Counted x) noexcept { return x.value(); }

/// y += b outside the tally (bias terms are excluded from the cost model).
inline void add_uncounted(double& y, double b) noexcept { y += b; }
inline void add_uncounted(Counted& y, double b) noexcept { y = Counted(y.value() + b); }

/**
 * Run `fn` with a fresh counter installed on this thread and return the tally.
 *
 * Nested audits each see only their own operations. Concurrent audits on
 * different threads use independent counters.
 */
template <class F>
OpCounter audit(F&& fn) {
    OpCounter counter;
    OpCounter*& slot = detail::active_counter();
    OpCounter* previous = std::exchange(slot, &counter);
    struct Restore {
        OpCounter*& slot;
        OpCounter* previous;
        ~Restore() { slot = previous; }
    } restore{slot, previous};
    std::forward<F>(fn)();
    return counter;
}

} // namespace pecan
