#pragma once

// Exact arithmetic substrate: arbitrary-precision integers and fractions in
// lowest terms, plus the combinatorial helpers shared by the coefficient
// machinery.

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>

namespace gmch {

using BigInt = boost::multiprecision::cpp_int;
/// Always normalized (gcd-reduced, positive denominator).
using Rational = boost::multiprecision::cpp_rational;

inline BigInt binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    BigInt r = 1;
    for (unsigned i = 1; i <= k; ++i) {
        r *= n - k + i;
        r /= i;
    }
    return r;
}

/// (-1)^e as a signed small integer.
constexpr int minus_one_pow(long e) { return (e % 2 == 0) ? 1 : -1; }

/// (2k)!! / (2k+1)!!, with the empty product for k = 0.
inline Rational even_over_odd_double_factorial(unsigned k) {
    Rational r = 1;
    for (unsigned i = 1; i <= k; ++i) r *= Rational(2 * i, 2 * i + 1);
    return r;
}

/// (2k)!! / (2k-1)!!, with the empty product for k = 0.
inline Rational even_over_prev_odd_double_factorial(unsigned k) {
    Rational r = 1;
    for (unsigned i = 1; i <= k; ++i) r *= Rational(2 * i, 2 * i - 1);
    return r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

inline Rational abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

inline Rational pow(const Rational& base, unsigned e) {
    Rational r = 1;
    for (unsigned i = 0; i < e; ++i) r *= base;
    return r;
}

}  // namespace gmch
