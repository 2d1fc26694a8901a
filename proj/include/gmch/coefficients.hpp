#pragma once

// Exact construction of the auxiliary polynomial h (coefficient sequences
// c_k / d_k), the constants built from them, and certificates for every
// combinatorial identity and inequality the stability argument relies on.

#include "gmch/rational.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmch {

/// Coefficients of h(u, u_x) = sum_k e_k u^{2n-k} u_x^k, k = 0..2n, on the
/// two sides of the crest. e_0 = 1 and e_{2n} = (-1)^n/(2n+1) on both sides.
struct CoefficientTable {
    unsigned n = 0;
    std::vector<Rational> left;   ///< x < xi: c_k at index k
    std::vector<Rational> right;  ///< x > xi: d_k at index k
    Rational B;                   ///< sum_{k=1}^n (2k)!!/(2k+1)!!
    Rational two_minus_c1;

    const Rational& c(unsigned k) const { return left.at(k); }
    const Rational& d(unsigned k) const { return right.at(k); }
    const Rational& leading() const { return left.at(2 * n); }
    const Rational& c1() const { return left.at(1); }
};

enum class IdentityId {
    speed_balance,             // E2.14
    reduced_speed_balance,     // E2.15
    truncated_combination,     // E2.16
    odd_denominator_sum,       // E2.17
    two_minus_c1_sum,          // E3.33
    alternating_binomial_sum,  // E3.34
    quartic_factorization,     // E3.35
    left_recurrence,           // R4.3
    right_recurrence,          // R4.4
    phi_nonpositive,           // PHI_NONPOS
    combination_formula,       // COMBINATION_FORMULA
    f_factorization,           // F_FACTORIZATION
};

/// Wire names used in JSON certificate reports.
inline std::string wire_name(IdentityId id) {
    switch (id) {
        case IdentityId::speed_balance: return "E2.14";
        case IdentityId::reduced_speed_balance: return "E2.15";
        case IdentityId::truncated_combination: return "E2.16";
        case IdentityId::odd_denominator_sum: return "E2.17";
        case IdentityId::two_minus_c1_sum: return "E3.33";
        case IdentityId::alternating_binomial_sum: return "E3.34";
        case IdentityId::quartic_factorization: return "E3.35";
        case IdentityId::left_recurrence: return "R4.3";
        case IdentityId::right_recurrence: return "R4.4";
        case IdentityId::phi_nonpositive: return "PHI_NONPOS";
        case IdentityId::combination_formula: return "COMBINATION_FORMULA";
        case IdentityId::f_factorization: return "F_FACTORIZATION";
    }
    return "UNKNOWN";
}

struct Witness {
    unsigned n = 0;
    Rational residual;
    std::optional<Rational> at;  ///< sample point (z or similar), when relevant
    std::string detail;
};

struct Certificate {
    IdentityId id{};
    unsigned n_lo = 0;
    unsigned n_hi = 0;
    bool pass = true;
    std::optional<Witness> witness;  ///< present iff !pass
    std::string note;

    Certificate() = default;
    Certificate(IdentityId i, unsigned lo, unsigned hi) : id(i), n_lo(lo), n_hi(hi) {}

    void fail(Witness w) {
        if (!pass) return;  // keep the first witness
        pass = false;
        witness = std::move(w);
    }
};

inline nlohmann::json to_json(const Certificate& cert) {
    nlohmann::json j;
    j["identity_id"] = wire_name(cert.id);
    j["n_range"] = {cert.n_lo, cert.n_hi};
    j["status"] = cert.pass ? "pass" : "fail";
    if (cert.witness) {
        nlohmann::json w;
        w["n"] = cert.witness->n;
        w["residual"] = to_string(cert.witness->residual);
        if (cert.witness->at) w["at"] = to_string(*cert.witness->at);
        if (!cert.witness->detail.empty()) w["detail"] = cert.witness->detail;
        j["witness"] = std::move(w);
    }
    if (!cert.note.empty()) j["note"] = cert.note;
    return j;
}

namespace detail {

inline void require_positive(unsigned n) {
    if (n == 0) throw std::invalid_argument("n must be >= 1");
}

/// sum_{k=1}^{upper} (-1)^{k+1}/(2k+1) C(n,k)
inline Rational transport_sum(unsigned n, unsigned upper) {
    Rational s = 0;
    for (unsigned k = 1; k <= upper; ++k)
        s += Rational(minus_one_pow(k + 1) * BigInt(binomial(n, k)), 2 * k + 1);
    return s;
}

/// sum_{k=1}^{n} (-1)^{k-1}/(2k-1) C(n,k)
inline Rational odd_denominator_sum(unsigned n) {
    Rational s = 0;
    for (unsigned k = 1; k <= n; ++k)
        s += Rational(minus_one_pow(k - 1) * BigInt(binomial(n, k)), 2 * k - 1);
    return s;
}

/// 1 + sum_{k=1}^{n+1} (-1)^{k+1}/(2k-1) C(n+1,k)
inline Rational peakon_F_factor(unsigned n) { return 1 + odd_denominator_sum(n + 1); }

}  // namespace detail

/// B = sum_{k=1}^{n} (2k)!!/(2k+1)!!
inline Rational double_factorial_sum(unsigned n) {
    detail::require_positive(n);
    Rational b = 0;
    Rational term = 1;
    for (unsigned k = 1; k <= n; ++k) {
        term *= Rational(2 * k, 2 * k + 1);
        b += term;
    }
    return b;
}

/// kappa_n = 1 - sum_{k=1}^n (-1)^{k+1}/(2k+1) C(n,k); c = kappa_n a^{2n}.
inline Rational speed_factor(unsigned n) {
    detail::require_positive(n);
    return 1 - detail::transport_sum(n, n);
}

namespace detail {

// The five relation families of the left (sign = -1) or right (sign = +1)
// system, in the order they are usually stated. For n = 1 the coefficient of
// u^{2n} (index 0, equal to 1) plays the role of c_{2n-2}.
inline Certificate check_recurrences(const CoefficientTable& t, const std::vector<Rational>& e,
                                     int sign, IdentityId id) {
    Certificate cert{id, t.n, t.n};
    const unsigned n = t.n;
    const Rational lead(minus_one_pow(n), 2 * n + 1);
    auto check = [&](const Rational& lhs, const Rational& rhs, const std::string& what) {
        Rational r = lhs - rhs;
        if (r != 0) cert.fail(Witness{n, r, std::nullopt, what});
    };
    const auto at = [&](unsigned k) -> const Rational& { return e.at(k); };

    check(sign * 2 * lead + at(2 * n - 1), 0, "top odd coefficient");
    check(lead + sign * 2 * at(2 * n - 1) + at(2 * n - 2),
          Rational(minus_one_pow(n + 1) * binomial(n + 1, n), 2 * n - 1), "top even coefficient");
    for (unsigned j = 1; j + 1 <= n; ++j) {
        const unsigned k = 2 * j + 1;
        check(at(k) + sign * 2 * at(k - 1) + at(k - 2), 0, "odd k=" + std::to_string(k));
    }
    for (unsigned j = 2; j + 1 <= n; ++j) {
        const unsigned k = 2 * j;
        check(at(k) + sign * 2 * at(k - 1) + at(k - 2),
              Rational(minus_one_pow(j + 1) * binomial(n + 1, j), 2 * j - 1),
              "even k=" + std::to_string(k));
    }
    if (n >= 2)
        check(at(2) + sign * 2 * at(1) + 1, BigInt(binomial(n, 1) + binomial(n, 0)), "k=2");
    return cert;
}

}  // namespace detail

/// Exact checks of both recurrence systems: [left (c_k), right (d_k)].
inline std::array<Certificate, 2> verify_recurrences(const CoefficientTable& t) {
    return {detail::check_recurrences(t, t.left, -1, IdentityId::left_recurrence),
            detail::check_recurrences(t, t.right, +1, IdentityId::right_recurrence)};
}

/// Builds c_k, d_k from their closed forms and checks them against the
/// recurrence systems they must satisfy. Throws std::logic_error if the two
/// descriptions disagree.
inline CoefficientTable coefficient_table(unsigned n) {
    detail::require_positive(n);
    CoefficientTable t;
    t.n = n;
    t.left.assign(2 * n + 1, Rational(0));
    t.left[0] = 1;
    t.left[2 * n] = Rational(minus_one_pow(n), 2 * n + 1);

    const auto C = [n](unsigned j) { return BigInt(binomial(n + 1, j)); };

    Rational c1 = Rational(1, 2);
    for (unsigned j = 1; j <= n + 1; ++j)
        c1 += Rational(minus_one_pow(j + 1) * (2 * static_cast<long>(j) - 3) * C(j), 2 * (2 * j - 1));
    t.left[1] = c1;
    for (unsigned m = 1; m + 1 <= n; ++m) {
        Rational s = 0;
        for (unsigned j = m + 1; j <= n + 1; ++j)
            s += Rational(minus_one_pow(j + 1) * (2 * static_cast<long>(j) - (2 * static_cast<long>(m) + 1)) * C(j),
                          2 * j - 1);
        t.left[2 * m] = s;
    }
    for (unsigned m = 2; m <= n; ++m) {
        Rational s = 0;
        for (unsigned j = m + 1; j <= n + 1; ++j)
            s += Rational(minus_one_pow(j + 1) * (2 * static_cast<long>(j) - 2 * static_cast<long>(m)) * C(j),
                          2 * j - 1);
        t.left[2 * m - 1] = s;
    }

    // d_k = c_k for even k, -c_k for odd k.
    t.right = t.left;
    for (unsigned k = 1; k < 2 * n; k += 2) t.right[k] = -t.left[k];

    t.B = double_factorial_sum(n);
    t.two_minus_c1 = 2 - t.left[1];

    for (const auto& cert : verify_recurrences(t))
        if (!cert.pass)
            throw std::logic_error("coefficient closed forms violate recurrence (" + wire_name(cert.id) +
                                   ", " + cert.witness->detail + ") for n=" + std::to_string(n));
    return t;
}

/// phi(z) = sum_{k=1}^n c_{2k-1} z^{2k-2}
inline Rational phi_polynomial(const CoefficientTable& t, const Rational& z) {
    const Rational z2 = z * z;
    Rational acc = 0;
    for (unsigned k = t.n; k >= 1; --k) acc = acc * z2 + t.c(2 * k - 1);
    return acc;
}

/// f(z) = c_{2n-1}/2 z^{2n} + sum_{k=1}^{2n-1} c_k z^k + c_1/2
inline Rational f_polynomial(const CoefficientTable& t, const Rational& z) {
    const unsigned n = t.n;
    Rational acc = t.c(2 * n - 1) / 2;
    for (unsigned k = 2 * n - 1; k >= 1; --k) acc = acc * z + t.c(k);
    return acc * z + t.c1() / 2;
}

/// Exact checks, for every n in 1..n_max, of the binomial identities behind
/// the peakon speed law and the F(peakon) constant. The reduced speed-balance
/// identity is evaluated under both readings of its upper summation limit
/// (n-1 and n); the note records which reading is exact.
inline std::vector<Certificate> verify_identities(unsigned n_max) {
    detail::require_positive(n_max);
    Certificate speed{IdentityId::speed_balance, 1, n_max};
    Certificate reduced{IdentityId::reduced_speed_balance, 1, n_max};
    Certificate truncated{IdentityId::truncated_combination, 1, n_max};
    Certificate odd{IdentityId::odd_denominator_sum, 1, n_max};
    Certificate two_minus{IdentityId::two_minus_c1_sum, 1, n_max};
    Certificate alternating{IdentityId::alternating_binomial_sum, 1, n_max};
    Certificate combination{IdentityId::combination_formula, 1, n_max};

    unsigned exact_minus_one = 0, exact_full = 0;
    for (unsigned n = 1; n <= n_max; ++n) {
        const Rational s_full = detail::transport_sum(n, n);
        const Rational s_trunc = detail::transport_sum(n, n - 1);
        const Rational s_odd = detail::odd_denominator_sum(n);
        const Rational ratio = even_over_odd_double_factorial(n);
        auto expect = [n](Certificate& cert, const Rational& lhs, const Rational& rhs) {
            if (lhs != rhs) cert.fail(Witness{n, lhs - rhs, std::nullopt, {}});
        };

        expect(speed, Rational(1, 4 * n * (n + 1)) * ((2 * n + s_full) + (2 * n + 1) * s_odd), 1 - s_full);

        const Rational rhs_reduced = 2 * n + minus_one_pow(n);
        const Rational lhs_minus_one = (2 * n + 1) * s_trunc + s_odd;
        const Rational lhs_full = (2 * n + 1) * s_full + s_odd;
        if (lhs_minus_one == rhs_reduced) ++exact_minus_one;
        if (lhs_full == rhs_reduced) ++exact_full;
        if (lhs_minus_one != rhs_reduced && lhs_full != rhs_reduced)
            reduced.fail(Witness{n, lhs_minus_one - rhs_reduced, std::nullopt,
                                 "neither reading of the upper limit is exact"});

        expect(truncated, s_trunc, -(ratio - 1 - Rational(minus_one_pow(n), 2 * n + 1)));
        expect(odd, s_odd, even_over_prev_odd_double_factorial(n) - 1);

        const auto table = coefficient_table(n);
        expect(two_minus, table.two_minus_c1, detail::peakon_F_factor(n));

        Rational alt = 0;
        for (unsigned k = 1; k <= n + 1; ++k) alt += minus_one_pow(k + 1) * BigInt(binomial(n + 1, k));
        expect(alternating, alt, 1);

        Rational comb = 0;
        for (unsigned k = 0; k <= n; ++k) comb += Rational(minus_one_pow(k) * BigInt(binomial(n, k)), 2 * k + 1);
        expect(combination, comb, ratio);
    }
    auto reading = [n_max](unsigned count) {
        return count == n_max ? std::string("exact for all n") : "exact for " + std::to_string(count) + " of " + std::to_string(n_max) + " n";
    };
    reduced.note = "upper limit n-1: " + reading(exact_minus_one) + "; upper limit n: " + reading(exact_full);
    return {speed, reduced, truncated, odd, two_minus, alternating, combination};
}

/// Certifies phi(z) <= 0 on all of [-1, 1], and the sharper bound
/// phi(z) <= -B/(1+z)^2 at the sample points of [0, 1).
///
/// phi is evaluated exactly at z = j/D, j = -D..D. Between samples the
/// polynomial can exceed the larger endpoint value by at most
/// min(Lip * h/2, curv * h^2/8), with Lip = sum |c_{2k-1}| (2k-2) and
/// curv = sum |c_{2k-1}| (2k-2)(2k-3) bounding |phi'| and |phi''| on [-1,1].
/// The certificate passes when max sample + remainder <= 0.
inline Certificate certify_phi_nonpositive(const CoefficientTable& t, unsigned denominator_bound) {
    if (denominator_bound < 64) throw std::invalid_argument("denominator_bound must be >= 64");
    const unsigned n = t.n;
    Certificate cert{IdentityId::phi_nonpositive, n, n};

    // Integer form: phi(j/D) * den * D^{2n-2} = sum_k C_k j^{2k-2} D^{2n-2k}.
    BigInt den = 1;
    for (unsigned k = 1; k <= n; ++k) den = boost::multiprecision::lcm(den, denominator(t.c(2 * k - 1)));
    const BigInt D = denominator_bound;
    const BigInt D2 = D * D;
    std::vector<BigInt> scaled(n + 1);
    {
        BigInt dpow = 1;  // (D^2)^{n-k}
        for (unsigned k = n; k >= 1; --k) {
            const Rational ck = t.c(2 * k - 1) * den;
            scaled[k] = numerator(ck) * dpow;
            dpow *= D2;
        }
    }
    const BigInt sample_scale = den * boost::multiprecision::pow(D, 2 * n - 2);
    const BigInt B_num = numerator(t.B), B_den = denominator(t.B);
    const BigInt sharp_rhs = B_num * den * boost::multiprecision::pow(D, 2 * n);

    BigInt max_sample;
    bool first = true;
    const long Dl = static_cast<long>(denominator_bound);
    for (long j = -Dl; j <= Dl; ++j) {
        const BigInt jj = BigInt(j) * j;
        BigInt p = scaled[n];
        for (unsigned k = n - 1; k >= 1; --k) p = p * jj + scaled[k];
        if (first || p > max_sample) {
            max_sample = p;
            first = false;
        }
        if (p > 0) {
            cert.fail(Witness{n, Rational(p, sample_scale), Rational(j, denominator_bound), "phi > 0 at sample"});
            break;
        }
        if (j >= 0 && j < Dl) {
            // phi(z)(1+z)^2 + B <= 0  <=>  p (D+j)^2 B_den + B_num den D^{2n} <= 0
            const BigInt lhs = p * (D + j) * (D + j) * B_den + sharp_rhs;
            if (lhs > 0) {
                cert.fail(Witness{n, Rational(lhs, B_den * den * boost::multiprecision::pow(D, 2 * n)),
                                  Rational(j, denominator_bound), "phi(z) > -B/(1+z)^2 at sample"});
                break;
            }
        }
    }
    if (!cert.pass) return cert;

    Rational lip = 0, curv = 0;
    for (unsigned k = 2; k <= n; ++k) {
        lip += abs(t.c(2 * k - 1)) * (2 * k - 2);
        curv += abs(t.c(2 * k - 1)) * (2 * k - 2) * (2 * k - 3);
    }
    const Rational h(1, denominator_bound);
    const Rational rem_lip = lip * h / 2;
    const Rational rem_curv = curv * h * h / 8;
    const Rational remainder = std::min(rem_lip, rem_curv);
    const Rational max_phi(max_sample, sample_scale);
    const Rational bound = max_phi + remainder;
    cert.note = "max sample phi = " + std::to_string(to_double(max_phi)) +
                ", remainder = " + std::to_string(to_double(remainder)) +
                (rem_lip <= rem_curv ? " (Lipschitz)" : " (curvature)");
    if (bound > 0) cert.fail(Witness{n, bound, std::nullopt, "sample maximum plus remainder is positive"});
    return cert;
}

/// The remainder term grows with n (sum |c_k| is large near |z| = 1), so a
/// fixed spacing stops closing the bound; double D from `start` until it
/// does. A positive sample, or the sharp bound failing, ends the search.
inline Certificate certify_phi_nonpositive_refined(const CoefficientTable& t, unsigned start,
                                                   unsigned limit = 1u << 20) {
    Certificate cert;
    for (unsigned D = start;; D *= 2) {
        cert = certify_phi_nonpositive(t, D);
        const bool remainder_only = !cert.pass && !cert.witness->at;
        if (!remainder_only || D > limit / 2) {
            cert.note += (cert.note.empty() ? "" : "; ") + std::string("D = ") + std::to_string(D);
            return cert;
        }
    }
}

inline Certificate certify_phi_nonpositive(unsigned n, unsigned denominator_bound) {
    detail::require_positive(n);
    return certify_phi_nonpositive(coefficient_table(n), denominator_bound);
}

/// Checks f(z) == (1+z)^2/2 * phi(z) exactly at each sample.
inline Certificate verify_f_factorization(unsigned n, std::span<const Rational> samples) {
    const auto t = coefficient_table(n);
    Certificate cert{IdentityId::f_factorization, n, n};
    for (const auto& z : samples) {
        const Rational lhs = f_polynomial(t, z);
        const Rational rhs = (1 + z) * (1 + z) / 2 * phi_polynomial(t, z);
        if (lhs != rhs) {
            cert.fail(Witness{n, lhs - rhs, z, {}});
            break;
        }
    }
    return cert;
}

/// Checks coefficient-wise that
///   n y^{2n+2} - (n+1) a^2 y^{2n} + a^{2n+2}
///     == (y-a)^2 (n y^{2n} + sum_{k=1}^{2n-1} (2n+1-k) a^k y^{2n-k} + a^{2n}).
/// Both sides are homogeneous of degree 2n+2, so they are stored by y-power.
inline Certificate verify_P0_factorization(unsigned n) {
    detail::require_positive(n);
    Certificate cert{IdentityId::quartic_factorization, n, n};
    const unsigned deg = 2 * n + 2;
    std::vector<BigInt> target(deg + 1, 0);
    target[deg] = n;
    target[2 * n] = -BigInt(n + 1);
    target[0] = 1;

    std::vector<BigInt> cofactor(2 * n + 1, 0);  // by y-power
    cofactor[2 * n] = n;
    for (unsigned k = 1; k + 1 <= 2 * n; ++k) cofactor[2 * n - k] = 2 * n + 1 - k;
    cofactor[0] = 1;

    // (y - a)^2 = y^2 - 2 a y + a^2
    const std::array<BigInt, 3> square{1, -2, 1};  // by a-power
    std::vector<BigInt> product(deg + 1, 0);
    for (unsigned p = 0; p <= 2 * n; ++p)
        for (unsigned q = 0; q < 3; ++q) product[p + 2 - q] += cofactor[p] * square[q];

    for (unsigned p = deg + 1; p-- > 0;) {
        if (product[p] != target[p]) {
            cert.fail(Witness{n, Rational(product[p] - target[p]), std::nullopt,
                              "monomial y^" + std::to_string(p) + " a^" + std::to_string(deg - p)});
            break;
        }
    }
    return cert;
}

}  // namespace gmch
