#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "companion/errors.hpp"

namespace companion {

/// USD amount held as integer cents. Voucher and budget arithmetic must be
/// exact, so currency never touches binary floating point internally; JSON
/// numbers are rounded to the nearest cent on ingest.
class Money {
public:
    constexpr Money() = default;
    static constexpr Money from_cents(std::int64_t cents) {
        Money m;
        m.cents_ = cents;
        return m;
    }
    static Money from_number(double value) {
        return from_cents(std::llround(value * 100.0));
    }
    /// Parses "12.34", "12.3", "12", "$12.34". More than two decimals is an error.
    static Money parse(std::string_view s) {
        std::size_t i = 0;
        while (i < s.size() && (s[i] == ' ' || s[i] == '$')) ++i;
        std::size_t e = s.size();
        while (e > i && s[e - 1] == ' ') --e;
        bool neg = false;
        if (i < e && (s[i] == '-' || s[i] == '+')) {
            neg = s[i] == '-';
            ++i;
        }
        if (i >= e) throw ArgumentError("Money: empty amount");
        std::int64_t dollars = 0;
        bool any = false;
        while (i < e && s[i] >= '0' && s[i] <= '9') {
            dollars = dollars * 10 + (s[i] - '0');
            ++i;
            any = true;
        }
        std::int64_t cents = 0;
        if (i < e && s[i] == '.') {
            ++i;
            int digits = 0;
            while (i < e && s[i] >= '0' && s[i] <= '9') {
                if (digits < 2) cents = cents * 10 + (s[i] - '0');
                ++digits;
                ++i;
                any = true;
            }
            if (digits > 2) throw ArgumentError("Money: more than two decimal places");
            if (digits == 1) cents *= 10;
        }
        if (!any || i != e) throw ArgumentError("Money: cannot parse amount '" + std::string(s) + "'");
        const std::int64_t total = dollars * 100 + cents;
        return from_cents(neg ? -total : total);
    }

    std::int64_t cents() const { return cents_; }
    double to_number() const { return static_cast<double>(cents_) / 100.0; }
    /// "12.34" with exactly two decimals.
    std::string str() const {
        const std::int64_t a = cents_ < 0 ? -cents_ : cents_;
        std::string out = cents_ < 0 ? "-" : "";
        out += std::to_string(a / 100);
        out.push_back('.');
        out.push_back(static_cast<char>('0' + (a / 10) % 10));
        out.push_back(static_cast<char>('0' + a % 10));
        return out;
    }

    friend Money operator+(Money a, Money b) { return from_cents(a.cents_ + b.cents_); }
    friend Money operator-(Money a, Money b) { return from_cents(a.cents_ - b.cents_); }
    friend bool operator==(Money a, Money b) { return a.cents_ == b.cents_; }
    friend bool operator!=(Money a, Money b) { return a.cents_ != b.cents_; }
    friend bool operator<(Money a, Money b) { return a.cents_ < b.cents_; }
    friend bool operator<=(Money a, Money b) { return a.cents_ <= b.cents_; }
    friend bool operator>(Money a, Money b) { return a.cents_ > b.cents_; }
    friend bool operator>=(Money a, Money b) { return a.cents_ >= b.cents_; }

    /// total * (percent_bp / 10000), rounded half away from zero to a cent.
    /// percent_bp is a percentage in basis points: 1050 means 10.50%.
    static Money percent_of(Money total, std::int64_t percent_bp) {
        const __int128 prod = static_cast<__int128>(total.cents_) * percent_bp;
        const __int128 q = prod / 10000;
        const __int128 r = prod % 10000;
        __int128 out = q;
        if (r >= 5000) out += 1;
        if (r <= -5000) out -= 1;
        return from_cents(static_cast<std::int64_t>(out));
    }

private:
    std::int64_t cents_ = 0;
};

} // namespace companion
