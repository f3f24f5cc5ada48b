#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "companion/errors.hpp"

namespace companion {

/// Exact rational over int64. Reward formulas are small ratios, so every
/// intermediate fits comfortably; arithmetic runs in 128-bit and throws
/// std::overflow_error if a reduced result ever leaves int64 range.
class Fraction {
public:
    constexpr Fraction() = default;
    Fraction(std::int64_t num, std::int64_t den) {
        if (den == 0) throw ArgumentError("Fraction: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        num_ = g ? num / g : num;
        den_ = g ? den / g : den;
    }
    static Fraction whole(std::int64_t n) { return Fraction(n, 1); }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Fraction operator+(const Fraction& a, const Fraction& b) {
        return reduce(wide(a.num_) * b.den_ + wide(b.num_) * a.den_, wide(a.den_) * b.den_);
    }
    friend Fraction operator-(const Fraction& a, const Fraction& b) {
        return reduce(wide(a.num_) * b.den_ - wide(b.num_) * a.den_, wide(a.den_) * b.den_);
    }
    friend Fraction operator*(const Fraction& a, const Fraction& b) {
        return reduce(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
    }
    friend Fraction operator/(const Fraction& a, const Fraction& b) {
        if (b.num_ == 0) throw ArgumentError("Fraction: division by zero");
        return reduce(wide(a.num_) * b.den_, wide(a.den_) * b.num_);
    }
    Fraction& operator+=(const Fraction& o) { return *this = *this + o; }

    friend bool operator==(const Fraction& a, const Fraction& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Fraction& a, const Fraction& b) { return !(a == b); }
    friend bool operator<(const Fraction& a, const Fraction& b) {
        return wide(a.num_) * b.den_ < wide(b.num_) * a.den_;
    }
    friend bool operator<=(const Fraction& a, const Fraction& b) { return !(b < a); }
    friend bool operator>(const Fraction& a, const Fraction& b) { return b < a; }
    friend bool operator>=(const Fraction& a, const Fraction& b) { return !(a < b); }

    std::string str() const {
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

private:
    using i128 = __int128;
    static i128 wide(std::int64_t v) { return static_cast<i128>(v); }
    static i128 abs128(i128 v) { return v < 0 ? -v : v; }
    static i128 gcd128(i128 a, i128 b) {
        a = abs128(a);
        b = abs128(b);
        while (b != 0) {
            const i128 t = a % b;
            a = b;
            b = t;
        }
        return a;
    }
    static Fraction reduce(i128 num, i128 den) {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const i128 g = gcd128(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        constexpr i128 lo = static_cast<i128>(INT64_MIN);
        constexpr i128 hi = static_cast<i128>(INT64_MAX);
        if (num < lo || num > hi || den > hi) {
            throw std::overflow_error("Fraction: reduced value exceeds int64 range");
        }
        Fraction f;
        f.num_ = static_cast<std::int64_t>(num);
        f.den_ = static_cast<std::int64_t>(den);
        return f;
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

} // namespace companion
