#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace stepcache {

// Exact rational number over 64-bit integers, always normalized (gcd 1,
// positive denominator). Large enough for the linear-equation domain; the
// constructor throws std::overflow_error if a product would not fit.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(std::int64_t numerator, std::int64_t denominator = 1);

    static Rational from_int(std::int64_t v) { return Rational(v); }

    // Parses "123", "-4", "2.5", "-0.125". Returns nullopt on malformed input.
    static std::optional<Rational> parse(const std::string& text);

    std::int64_t numerator() const { return num_; }
    std::int64_t denominator() const { return den_; }
    bool is_integer() const { return den_ == 1; }
    bool is_zero() const { return num_ == 0; }

    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;  // throws std::domain_error on /0
    Rational operator-() const { return Rational(-num_, den_); }

    bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rational& o) const { return !(*this == o); }

    // Integers render without a decimal point; non-integers as the shortest
    // decimal that round-trips through double.
    std::string to_string() const;

private:
    std::int64_t num_;
    std::int64_t den_;
};

// Shortest decimal string that parses back to exactly the same double.
std::string shortest_round_trip(double value);

}  // namespace stepcache
