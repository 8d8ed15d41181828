#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnio/errors.hpp"
#include "attnio/polyapprox.hpp"

namespace attnio {

using uint128 = unsigned __int128;

inline uint128 checked_mul_u128(uint128 a, uint128 b) {
    uint128 out;
    if (__builtin_mul_overflow(a, b, &out)) throw overflow_error("128-bit overflow in combinatorics");
    return out;
}

inline uint128 checked_add_u128(uint128 a, uint128 b) {
    uint128 out;
    if (__builtin_add_overflow(a, b, &out)) throw overflow_error("128-bit overflow in combinatorics");
    return out;
}

// Exact C(n, k); every intermediate division is exact.
inline uint128 binomial_u128(long long n, long long k) {
    if (n < 0 || k < 0) throw argument_error("binomial: negative argument");
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    uint128 acc = 1;
    for (long long i = 1; i <= k; ++i) {
        acc = checked_mul_u128(acc, static_cast<uint128>(n - k + i));
        acc /= static_cast<uint128>(i);
    }
    return acc;
}

inline double u128_to_double(uint128 v) { return static_cast<double>(v); }

// tau(w) = C(w+g, g): number of monomials of degree <= g in w variables.
inline uint128 tau(long long w, long long g) {
    if (w < 0 || g < 0) throw argument_error("tau: arguments must be >= 0");
    return binomial_u128(w + g, g);
}

// Both sides of the hockey-stick closed form, computed independently.
inline bool tau_identity_check(long long w, long long g) {
    if (w < 1) throw argument_error("tau_identity_check: w must be >= 1");
    uint128 lhs = 0;
    for (long long l = 0; l <= g; ++l) lhs = checked_add_u128(lhs, binomial_u128(w + l - 1, l));
    return lhs == binomial_u128(w + g, g);
}

struct Monomial {
    std::vector<int> exponents; // length d
    int degree = 0;             // sum of exponents
};

inline long long support(const Monomial& m) {
    long long s = 0;
    for (int e : m.exponents)
        if (e > 0) ++s;
    return s;
}

struct MonomialBasis {
    long long d = 0;
    long long g = 0;
    std::vector<Monomial> monomials;
};

inline constexpr uint128 kBasisCapacity = 10'000'000;

namespace detail {
inline void enumerate_compositions(long long d, int pos, int remaining, Monomial& scratch,
                                   std::vector<Monomial>& out) {
    if (pos == d - 1) {
        scratch.exponents[static_cast<size_t>(pos)] = remaining;
        out.push_back(scratch);
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        scratch.exponents[static_cast<size_t>(pos)] = e;
        enumerate_compositions(d, pos + 1, remaining - e, scratch, out);
    }
    scratch.exponents[static_cast<size_t>(pos)] = 0;
}
} // namespace detail

// Canonical order: ascending total degree; within a degree, exponent vectors
// descend lexicographically (the larger exponent on the lower variable index
// comes first). Index 0 is always the constant monomial.
inline MonomialBasis enumerate_basis(long long d, long long g) {
    if (d < 1 || g < 0) throw argument_error("enumerate_basis: need d >= 1, g >= 0");
    const uint128 r = tau(d, g);
    if (r > kBasisCapacity) throw capacity_error("enumerate_basis: basis larger than desk scale");
    MonomialBasis basis;
    basis.d = d;
    basis.g = g;
    basis.monomials.reserve(static_cast<size_t>(static_cast<uint64_t>(r)));
    Monomial scratch;
    scratch.exponents.assign(static_cast<size_t>(d), 0);
    for (int l = 0; l <= g; ++l) {
        scratch.degree = l;
        detail::enumerate_compositions(d, 0, l, scratch, basis.monomials);
    }
    return basis;
}

// l! / (a_1! ... a_d!) as a product of binomials, exact.
inline uint128 multinomial(const Monomial& m) {
    uint128 acc = 1;
    long long partial = 0;
    for (int e : m.exponents) {
        partial += e;
        acc = checked_mul_u128(acc, binomial_u128(partial, e));
    }
    return acc;
}

// Query-side expansion with the diagonal coefficient matrix folded in:
// entry(alpha) = c_|alpha| * multinomial(alpha) * prod_i q_i^alpha_i.
inline std::vector<double> expand_row_q(const std::vector<double>& q, const PolyApprox& p,
                                        const MonomialBasis& basis) {
    if (static_cast<long long>(q.size()) != basis.d)
        throw argument_error("expand_row_q: vector length != basis dimension");
    if (p.g != basis.g) throw argument_error("expand_row_q: polynomial degree != basis degree");
    std::vector<double> out(basis.monomials.size());
    for (size_t idx = 0; idx < basis.monomials.size(); ++idx) {
        const Monomial& m = basis.monomials[idx];
        double v = p.coeffs[static_cast<size_t>(m.degree)] * u128_to_double(multinomial(m));
        for (long long i = 0; i < basis.d; ++i)
            for (int e = 0; e < m.exponents[static_cast<size_t>(i)]; ++e) v *= q[static_cast<size_t>(i)];
        out[idx] = v;
    }
    return out;
}

// Key-side expansion is coefficient-free: entry(alpha) = prod_i k_i^alpha_i.
inline std::vector<double> expand_row_k(const std::vector<double>& k, const MonomialBasis& basis) {
    if (static_cast<long long>(k.size()) != basis.d)
        throw argument_error("expand_row_k: vector length != basis dimension");
    std::vector<double> out(basis.monomials.size());
    for (size_t idx = 0; idx < basis.monomials.size(); ++idx) {
        const Monomial& m = basis.monomials[idx];
        double v = 1.0;
        for (long long i = 0; i < basis.d; ++i)
            for (int e = 0; e < m.exponents[static_cast<size_t>(i)]; ++e) v *= k[static_cast<size_t>(i)];
        out[idx] = v;
    }
    return out;
}

// C(d, g/2-1) * tau(g/2-1) / tau(d): the fraction of basis columns whose
// support can fit in fewer than g/2 variables. Meaningful under d >= 5g.
inline double halfcover_ratio(long long d, long long g) {
    if (g < 2 || g % 2 != 0) throw argument_error("halfcover_ratio: g must be even and >= 2");
    if (d < 5 * g) throw argument_error("halfcover_ratio: requires d >= 5g");
    const long long h = g / 2 - 1;
    const uint128 numer = checked_mul_u128(binomial_u128(d, h), binomial_u128(h + g, g));
    const uint128 denom = tau(d, g);
    return u128_to_double(numer) / u128_to_double(denom);
}

} // namespace attnio
