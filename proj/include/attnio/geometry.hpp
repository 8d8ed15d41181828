#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "attnio/errors.hpp"
#include "attnio/featuremap.hpp"

namespace attnio {

inline long long cdiv(long long a, long long b) { return (a + b - 1) / b; }

inline long long isqrt_ll(long long v) {
    if (v < 0) throw argument_error("isqrt of negative");
    long long r = static_cast<long long>(std::sqrt(static_cast<double>(v)));
    while (r > 0 && r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

struct Strip {
    long long begin = 0;
    long long len = 0;
};

inline std::vector<Strip> make_strips(long long total, long long size) {
    if (size < 1) throw argument_error("make_strips: size must be >= 1");
    std::vector<Strip> out;
    out.reserve(static_cast<size_t>(cdiv(std::max<long long>(total, 0), size)));
    for (long long b = 0; b < total; b += size) out.push_back({b, std::min(size, total - b)});
    return out;
}

// Contiguous groups over the column indices {0..d-1}; all but the last have
// width `size`.
struct GroupPartition {
    long long d = 0;
    long long g = 0;
    long long size = 0;
    std::vector<Strip> groups;
};

inline GroupPartition make_group_partition(long long d, long long g, long long size) {
    if (d < 1 || g < 1 || size < 1) throw argument_error("make_group_partition: bad arguments");
    GroupPartition p;
    p.d = d;
    p.g = g;
    p.size = size;
    p.groups = make_strips(d, size);
    return p;
}

// The combination of g groups that owns a monomial: the groups its support
// touches, padded with the smallest group indices not already included. When
// fewer than g groups exist, the single all-groups combination owns all
// columns.
inline std::vector<int> assign_tile(const Monomial& m, const GroupPartition& part) {
    const long long ngroups = static_cast<long long>(part.groups.size());
    std::vector<int> combo;
    if (ngroups <= part.g) {
        combo.resize(static_cast<size_t>(ngroups));
        for (long long i = 0; i < ngroups; ++i) combo[static_cast<size_t>(i)] = static_cast<int>(i);
        return combo;
    }
    combo.reserve(static_cast<size_t>(part.g));
    int last = -1;
    for (size_t i = 0; i < m.exponents.size(); ++i) {
        if (m.exponents[i] == 0) continue;
        const int gid = static_cast<int>(static_cast<long long>(i) / part.size);
        if (gid != last) {
            combo.push_back(gid);
            last = gid;
        }
    }
    if (static_cast<long long>(combo.size()) > part.g)
        throw error("assign_tile: support touches more than g groups");
    // Pad with the smallest non-included group ids.
    size_t pos = 0;
    for (int gid = 0; static_cast<long long>(combo.size()) < part.g; ++gid) {
        while (pos < combo.size() && combo[pos] < gid) ++pos;
        if (pos < combo.size() && combo[pos] == gid) continue;
        combo.insert(combo.begin() + static_cast<std::ptrdiff_t>(pos), gid);
    }
    return combo;
}

inline constexpr long long kMaxAggregationTiles = 2'000'000;

// All g-subsets of {0..m-1} in lexicographic order of their sorted indices.
inline std::vector<std::vector<int>> lex_combinations(long long m, long long g) {
    const uint128 count = binomial_u128(m, g);
    if (count > static_cast<uint128>(kMaxAggregationTiles))
        throw capacity_error("lex_combinations: combination count above desk scale");
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<size_t>(static_cast<uint64_t>(count)));
    std::vector<int> c(static_cast<size_t>(g));
    for (long long i = 0; i < g; ++i) c[static_cast<size_t>(i)] = static_cast<int>(i);
    while (true) {
        out.push_back(c);
        long long i = g - 1;
        while (i >= 0 && c[static_cast<size_t>(i)] == m - g + i) --i;
        if (i < 0) break;
        ++c[static_cast<size_t>(i)];
        for (long long j = i + 1; j < g; ++j) c[static_cast<size_t>(j)] = c[static_cast<size_t>(j - 1)] + 1;
    }
    return out;
}

// Rank of a sorted g-subset in the lexicographic enumeration above.
inline long long combo_rank(const std::vector<int>& combo, long long m) {
    const long long g = static_cast<long long>(combo.size());
    long long rank = 0;
    int prev = -1;
    for (long long i = 0; i < g; ++i) {
        for (int v = prev + 1; v < combo[static_cast<size_t>(i)]; ++v)
            rank += static_cast<long long>(
                static_cast<uint64_t>(binomial_u128(m - 1 - v, g - 1 - i)));
        prev = combo[static_cast<size_t>(i)];
    }
    return rank;
}

// Per-combination slice of an aggregation tiling: the chosen groups, the
// width of their union in Q/K columns, and the owned basis columns.
struct ComboGeom {
    std::vector<int> groups;
    long long union_width = 0;
    std::vector<uint32_t> columns;
};

namespace detail {
inline std::vector<ComboGeom> bucket_columns(const MonomialBasis& basis, const GroupPartition& part) {
    const long long m = static_cast<long long>(part.groups.size());
    std::vector<std::vector<int>> combos;
    if (m <= part.g) {
        std::vector<int> all(static_cast<size_t>(m));
        for (long long i = 0; i < m; ++i) all[static_cast<size_t>(i)] = static_cast<int>(i);
        combos.push_back(std::move(all));
    } else {
        combos = lex_combinations(m, part.g);
    }
    std::vector<ComboGeom> out(combos.size());
    for (size_t i = 0; i < combos.size(); ++i) {
        out[i].groups = combos[i];
        for (int gid : combos[i]) out[i].union_width += part.groups[static_cast<size_t>(gid)].len;
    }
    for (uint32_t idx = 0; idx < basis.monomials.size(); ++idx) {
        const std::vector<int> combo = assign_tile(basis.monomials[idx], part);
        const long long rank = (m <= part.g) ? 0 : combo_rank(combo, m);
        out[static_cast<size_t>(rank)].columns.push_back(idx);
    }
    return out;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Per-schedule geometry records. Both the closed-form cost model and the
// trace generators consume exactly these; every floor/ceil lives here.
// ---------------------------------------------------------------------------

struct Case1Geom {
    long long n, d, g, M;
    long long r = 0;
    long long row_h = 0; // floor(M / 4d): Q/K/V strip height
};

struct KeyLemmaGeom {
    long long n, d, g, M, w;
    long long r = 0;
    GroupPartition part;
    std::vector<ComboGeom> combos;
    long long row_h = 0;     // floor(M / 4d): output strip, P1 strip, H chunk rows
    long long n_strips = 0;  // ceil(n / row_h)
    long long sum_union = 0; // sum over combos of union_width
};

struct Case3Geom {
    long long n, d, g, M;
    long long r = 0;
    GroupPartition part; // singleton groups
    std::vector<ComboGeom> combos;
    long long h_out = 0; // floor(M / 4g): output strip height, H chunk rows, P1 strip height
    std::vector<Strip> jstrips; // width-g strips over the d output columns
};

struct SquareGeom {
    long long n, d, g, M;
    long long r = 0;
    long long t = 0; // floor(floor(sqrt(M)) / 4)
};

struct WideGeom {
    long long n, d, g, M;
    long long r = 0;
    long long row_h = 0; // floor(M / 4d)
};

struct FlashGeom {
    long long n, d, M;
    long long block = 0;  // query/key block rows: max(1, floor(M / 8d))
    long long passes = 0; // ceil(n / block)
};

struct NaiveGeom {
    long long n, d, M;
    long long t = 0;  // score-phase square tile side
    long long rb = 0; // softmax-phase row block
    long long cb = 0; // softmax-phase key chunk
};

inline long long tau_ll(long long w, long long g) {
    const uint128 t = tau(w, g);
    if (t > static_cast<uint128>(INT64_MAX)) throw overflow_error("tau out of long long range");
    return static_cast<long long>(static_cast<uint64_t>(t));
}

inline Case1Geom build_case1_geom(long long n, long long d, long long g, long long M) {
    if (n < 0 || d < 1 || g < 0 || M < 8) throw argument_error("case1: bad parameters");
    Case1Geom geo{n, d, g, M};
    geo.r = tau_ll(d, g);
    if (4 * d * geo.r > M)
        throw planning_error("case1: requires d*tau(d) <= M/4 (case I)");
    geo.row_h = M / (4 * d);
    if (geo.row_h < 1) throw planning_error("case1: M too small for a row strip");
    return geo;
}

inline KeyLemmaGeom build_keylemma_geom(long long n, long long d, long long g, long long M,
                                        long long w, const MonomialBasis& basis) {
    if (n < 0 || d < 1 || g < 1 || M < 8) throw argument_error("keylemma: bad parameters");
    if (w < g || w > d) throw planning_error("keylemma: requires g <= w <= d");
    {
        const uint128 wt = checked_mul_u128(static_cast<uint128>(w), tau(w, g));
        if (wt > static_cast<uint128>(M / 4))
            throw planning_error("keylemma: requires w * tau(w) <= M/4");
    }
    KeyLemmaGeom geo;
    geo.n = n;
    geo.d = d;
    geo.g = g;
    geo.M = M;
    geo.w = w;
    geo.r = tau_ll(d, g);
    geo.row_h = M / (4 * d);
    if (geo.row_h < 1)
        throw planning_error("keylemma: M < 4d leaves no room for a full-width row strip");

    // Group width: ceil(w/g) keeps the group count (and with it the number of
    // aggregation tiles) low; fall back to floor(w/g) if the widened union
    // would break the w*tau(w) budget.
    long long s = std::max<long long>(1, cdiv(w, g));
    {
        const long long wt = std::min(d, g * s);
        bool ok = true;
        try {
            ok = checked_mul_u128(static_cast<uint128>(wt), tau(wt, g)) <=
                 static_cast<uint128>(M / 4);
        } catch (const overflow_error&) {
            ok = false;
        }
        if (!ok) s = std::max<long long>(1, w / g);
    }
    geo.part = make_group_partition(d, g, s);
    geo.combos = detail::bucket_columns(basis, geo.part);
    for (const auto& c : geo.combos) geo.sum_union += c.union_width;
    geo.n_strips = n > 0 ? cdiv(n, geo.row_h) : 0;
    return geo;
}

inline Case3Geom build_case3_geom(long long n, long long d, long long g, long long M,
                                  const MonomialBasis& basis) {
    if (n < 0 || d < 1 || g < 1 || M < 8) throw argument_error("case3special: bad parameters");
    if (d < g) throw planning_error("case3special: requires d >= g");
    // Applicability gate: neither the resident-intermediate regime nor the
    // generating-set regime, and M is comfortably above g^2.
    if (checked_mul_u128(static_cast<uint128>(4 * d), tau(d, g)) <= static_cast<uint128>(M))
        throw planning_error("case3special: parameters sit in case I");
    if (static_cast<long double>(M) >=
        std::ceil(std::pow(4.0L * std::exp(1.0L), static_cast<long double>(g + 1))))
        throw planning_error("case3special: parameters sit in case II");
    if (M <= 16 * g * g) throw planning_error("case3special: parameters sit in case IV");
    Case3Geom geo;
    geo.n = n;
    geo.d = d;
    geo.g = g;
    geo.M = M;
    geo.r = tau_ll(d, g);
    geo.h_out = M / (4 * g);
    if (geo.h_out < 1) throw planning_error("case3special: M too small for the tile height");
    geo.part = make_group_partition(d, g, 1);
    geo.combos = detail::bucket_columns(basis, geo.part);
    geo.jstrips = make_strips(d, g);
    return geo;
}

inline SquareGeom build_square_geom(long long n, long long d, long long g, long long M) {
    if (n < 0 || d < 1 || g < 0 || M < 8) throw argument_error("generic-square: bad parameters");
    SquareGeom geo{n, d, g, M};
    geo.r = tau_ll(d, g);
    geo.t = isqrt_ll(M) / 4;
    if (geo.t < 1) throw planning_error("generic-square: requires sqrt(M)/4 >= 1");
    if (geo.t * d > M / 4)
        throw planning_error("generic-square: a full row of Q does not fit beside the tiles");
    return geo;
}

inline WideGeom build_wide_geom(long long n, long long d, long long g, long long M) {
    if (n < 0 || d < 1 || g < 0 || M < 8) throw argument_error("generic-wide: bad parameters");
    WideGeom geo{n, d, g, M};
    geo.r = tau_ll(d, g);
    geo.row_h = M / (4 * d);
    if (geo.row_h < 1) throw planning_error("generic-wide: requires M >= 4d");
    return geo;
}

inline FlashGeom build_flash_geom(long long n, long long d, long long M) {
    if (n < 0 || d < 1) throw argument_error("flash: bad parameters");
    if (M < 4 * d) throw planning_error("flash: requires M >= 4d");
    FlashGeom geo{n, d, M};
    geo.block = std::max<long long>(1, M / (8 * d));
    if (4 * geo.block * d + geo.block + 4 > M)
        throw planning_error("flash: blocks do not fit in fast memory");
    geo.passes = n > 0 ? cdiv(n, geo.block) : 0;
    return geo;
}

inline NaiveGeom build_naive_geom(long long n, long long d, long long M) {
    if (n < 0 || d < 1) throw argument_error("naive: bad parameters");
    if (M < 16) throw planning_error("naive: requires M >= 16");
    NaiveGeom geo{n, d, M};
    geo.t = isqrt_ll(M) / 4;
    geo.rb = std::max<long long>(1, M / (8 * d));
    geo.cb = std::max<long long>(1, std::min(geo.rb, (M / 8) / geo.rb));
    if (geo.rb * d + geo.rb + geo.rb * geo.cb + geo.cb * d + 3 > M)
        throw planning_error("naive: softmax pass does not fit in fast memory");
    return geo;
}

} // namespace attnio
