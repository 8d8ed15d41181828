#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "attnio/errors.hpp"
#include "attnio/featuremap.hpp"
#include "attnio/geometry.hpp"

namespace attnio {

enum class CaseLabel { I, II, III, IV };

inline const char* case_name(CaseLabel c) {
    switch (c) {
        case CaseLabel::I: return "I";
        case CaseLabel::II: return "II";
        case CaseLabel::III: return "III";
        case CaseLabel::IV: return "IV";
    }
    return "?";
}

enum class ScheduleKind { Case1, KeyLemma, Case3Special, GenericSquare, GenericWide, Flash, Naive };

inline const char* schedule_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Case1: return "case1";
        case ScheduleKind::KeyLemma: return "keylemma";
        case ScheduleKind::Case3Special: return "case3special";
        case ScheduleKind::GenericSquare: return "generic-square";
        case ScheduleKind::GenericWide: return "generic-wide";
        case ScheduleKind::Flash: return "flash";
        case ScheduleKind::Naive: return "naive";
    }
    return "?";
}

inline std::optional<ScheduleKind> parse_schedule(const std::string& s) {
    for (ScheduleKind k : {ScheduleKind::Case1, ScheduleKind::KeyLemma, ScheduleKind::Case3Special,
                           ScheduleKind::GenericSquare, ScheduleKind::GenericWide, ScheduleKind::Flash,
                           ScheduleKind::Naive})
        if (s == schedule_name(k)) return k;
    return std::nullopt;
}

struct Params {
    long long n = 0;
    long long d = 0;
    long long g = 0;
    long long M = 0;
    long long r = 0; // tau(d)
    long long w = 0; // generating-set size; only the keylemma schedule reads it

    static Params make(long long n, long long d, long long g, long long M, long long w = 0) {
        Params p{n, d, g, M, 0, w};
        p.r = tau_ll(d, g);
        return p;
    }
};

// Concrete thresholds replacing the asymptotic regimes:
//   I   iff d*tau(d) <= M/4          (the whole intermediate fits beside a strip)
//   II  iff M >= ceil((4e)^(g+1))    (equivalently the chosen w0 reaches g)
//   III iff M > 16 g^2
//   IV  otherwise.
inline CaseLabel classify_case(long long d, long long g, long long M) {
    if (d < 1 || g < 1 || M < 8) throw argument_error("classify_case: need d >= 1, g >= 1, M >= 8");
    if (checked_mul_u128(static_cast<uint128>(4 * d), tau(d, g)) <= static_cast<uint128>(M))
        return CaseLabel::I;
    const long double threshold = std::ceil(std::pow(4.0L * std::exp(1.0L), static_cast<long double>(g + 1)));
    if (static_cast<long double>(M) >= threshold) return CaseLabel::II;
    if (M > 16 * g * g) return CaseLabel::III;
    return CaseLabel::IV;
}

// w0 = g * M^(1/(g+1)) / (4e), clamped to [g, d]; the pair (w, tau(w)) must
// satisfy w * tau(w) <= M/4 or the plan is rejected.
inline long long choose_w(long long g, long long M, long long d) {
    if (g < 1 || M < 8 || d < 1) throw argument_error("choose_w: bad arguments");
    const double root = std::pow(static_cast<double>(M), 1.0 / static_cast<double>(g + 1));
    long long w = static_cast<long long>(std::floor(static_cast<double>(g) * root / (4.0 * std::exp(1.0))));
    w = std::max(w, g);
    w = std::min(w, d);
    bool ok = true;
    try {
        ok = checked_mul_u128(static_cast<uint128>(w), tau(w, g)) <= static_cast<uint128>(M / 4);
    } catch (const overflow_error&) {
        ok = false;
    }
    if (!ok) throw planning_error("choose_w: w * tau(w) exceeds M/4; no keylemma plan at these parameters");
    return w;
}

// Largest w in [g, d] with w * tau(w) <= M/4; the Case II formula when it
// applies, a feasibility scan otherwise.
inline long long pick_keylemma_w(long long d, long long g, long long M) {
    if (classify_case(d, g, M) == CaseLabel::II) return choose_w(g, M, d);
    for (long long w = d; w >= g; --w) {
        try {
            if (checked_mul_u128(static_cast<uint128>(w), tau(w, g)) <= static_cast<uint128>(M / 4))
                return w;
        } catch (const overflow_error&) {
            continue;
        }
    }
    throw planning_error("pick_keylemma_w: no feasible w in [g, d]");
}

struct IoCount {
    unsigned long long loads = 0;
    unsigned long long stores = 0;
    unsigned long long total() const { return loads + stores; }
};

// Exact load/store tallies for each schedule, computed from the shared
// geometry records through closed-form arithmetic (never by walking a trace).
// simulate(generate(kind, p)) must agree with these to the integer.
inline IoCount analytic_io(ScheduleKind kind, const Params& p) {
    IoCount io;
    if (p.n == 0) return io;
    const auto n = static_cast<unsigned long long>(p.n);
    const auto d = static_cast<unsigned long long>(p.d);

    switch (kind) {
        case ScheduleKind::Case1: {
            const Case1Geom geo = build_case1_geom(p.n, p.d, p.g, p.M);
            const auto r = static_cast<unsigned long long>(geo.r);
            io.loads = 2 * n * d + r * d + n * d;
            io.stores = r * d + n * d;
            return io;
        }
        case ScheduleKind::KeyLemma: {
            const MonomialBasis basis = enumerate_basis(p.d, p.g);
            const KeyLemmaGeom geo = build_keylemma_geom(p.n, p.d, p.g, p.M, p.w, basis);
            const auto r = static_cast<unsigned long long>(geo.r);
            const auto S = static_cast<unsigned long long>(geo.n_strips);
            const auto W = static_cast<unsigned long long>(geo.sum_union);
            io.loads = n * W + S * r * d          // second multiplication: Q, then H tiles
                       + n * d + n * W            // first multiplication: V once, K per combo
                       + (S - 1) * r * d;         // partial-sum reloads between strips
            io.stores = n * d + S * r * d;
            return io;
        }
        case ScheduleKind::Case3Special: {
            const MonomialBasis basis = enumerate_basis(p.d, p.g);
            const Case3Geom geo = build_case3_geom(p.n, p.d, p.g, p.M, basis);
            const auto r = static_cast<unsigned long long>(geo.r);
            const auto g = static_cast<unsigned long long>(p.g);
            const auto C = static_cast<unsigned long long>(geo.combos.size());
            const auto J = static_cast<unsigned long long>(geo.jstrips.size());
            const auto S = static_cast<unsigned long long>(cdiv(p.n, geo.h_out));
            unsigned long long fit_rows = 0, big_rows = 0;
            for (const auto& c : geo.combos) {
                if (static_cast<long long>(c.columns.size()) <= geo.h_out)
                    fit_rows += c.columns.size();
                else
                    big_rows += c.columns.size();
            }
            io.loads = n * J * C * g + S * r * d // second multiplication: Q, then H tiles
                       + C * J * n * g + C * n * d // first multiplication: K and V per tile
                       + (S - 1) * big_rows * d;   // sub-tile partial sums reloaded per strip
            io.stores = n * d + fit_rows * d + S * big_rows * d;
            return io;
        }
        case ScheduleKind::GenericSquare: {
            const SquareGeom geo = build_square_geom(p.n, p.d, p.g, p.M);
            const auto r = static_cast<unsigned long long>(geo.r);
            const auto nstr = static_cast<unsigned long long>(cdiv(p.n, geo.t));
            const auto dstr = static_cast<unsigned long long>(cdiv(p.d, geo.t));
            const auto rstr = static_cast<unsigned long long>(cdiv(geo.r, geo.t));
            io.loads = n * d + nstr * r * d          // second multiplication
                       + rstr * dstr * n * d + rstr * n * d; // first multiplication
            io.stores = n * d + r * d;
            return io;
        }
        case ScheduleKind::GenericWide: {
            const WideGeom geo = build_wide_geom(p.n, p.d, p.g, p.M);
            const auto r = static_cast<unsigned long long>(geo.r);
            const auto nstr = static_cast<unsigned long long>(cdiv(p.n, geo.row_h));
            const auto rstr = static_cast<unsigned long long>(cdiv(geo.r, geo.row_h));
            io.loads = n * d + nstr * r * d + 2 * rstr * n * d;
            io.stores = n * d + r * d;
            return io;
        }
        case ScheduleKind::Flash: {
            const FlashGeom geo = build_flash_geom(p.n, p.d, p.M);
            const auto Tc = static_cast<unsigned long long>(geo.passes);
            io.loads = 2 * n * d + Tc * n * d + (Tc - 1) * n * (d + 1);
            io.stores = (Tc - 1) * n * (d + 1) + n * d;
            return io;
        }
        case ScheduleKind::Naive: {
            const NaiveGeom geo = build_naive_geom(p.n, p.d, p.M);
            const auto tstr = static_cast<unsigned long long>(cdiv(p.n, geo.t));
            const auto rstr = static_cast<unsigned long long>(cdiv(p.n, geo.rb));
            io.loads = 2 * n * d * tstr + n * n + rstr * n * d;
            io.stores = n * n + n * d;
            return io;
        }
    }
    throw planning_error("analytic_io: unknown schedule kind");
}

inline unsigned long long analytic_cost(ScheduleKind kind, const Params& p) {
    return analytic_io(kind, p).total();
}

struct LowerBound {
    double value = 0.0;
    bool hypothesis_ok = true; // false when the case III/IV bound needs d >= 5g and it fails
};

// Regime bound expressions instantiated with constant 1. Reported, never asserted
// against simulations beyond the trivial floor; the omega-constants are not
// part of the artifact.
inline LowerBound lower_bound(CaseLabel c, const Params& p) {
    LowerBound lb;
    const double n = static_cast<double>(p.n), d = static_cast<double>(p.d),
                 g = static_cast<double>(p.g), M = static_cast<double>(p.M),
                 r = static_cast<double>(p.r);
    switch (c) {
        case CaseLabel::I: lb.value = n * d; break;
        case CaseLabel::II:
            lb.value = n * r * d * g / std::pow(M, g / (g + 1.0));
            break;
        case CaseLabel::III:
            lb.value = n * r * d * g / M;
            lb.hypothesis_ok = p.d >= 5 * p.g;
            break;
        case CaseLabel::IV:
            lb.value = n * r * d / std::sqrt(M);
            lb.hypothesis_ok = p.d >= 5 * p.g;
            break;
    }
    return lb;
}

struct CostReport {
    ScheduleKind kind = ScheduleKind::Case1;
    CaseLabel case_label = CaseLabel::I;
    unsigned long long predicted_io = 0;
    double lower_bound_value = 0.0;
    bool hypothesis_ok = true;
};

inline CostReport make_cost_report(ScheduleKind kind, const Params& p) {
    CostReport rep;
    rep.kind = kind;
    rep.case_label = classify_case(p.d, p.g, p.M);
    rep.predicted_io = analytic_cost(kind, p);
    const LowerBound lb = lower_bound(rep.case_label, p);
    rep.lower_bound_value = lb.value;
    rep.hypothesis_ok = lb.hypothesis_ok;
    return rep;
}

inline std::string cost_report_json(const CostReport& rep) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"case\":\"" << case_name(rep.case_label) << "\",\"schedule\":\""
       << schedule_name(rep.kind) << "\",\"predicted_io\":" << rep.predicted_io
       << ",\"lower_bound\":" << rep.lower_bound_value
       << ",\"hypothesis_ok\":" << (rep.hypothesis_ok ? "true" : "false") << "}";
    return os.str();
}

} // namespace attnio
