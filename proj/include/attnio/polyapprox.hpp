#pragma once

#include <cmath>
#include <vector>

#include "attnio/errors.hpp"

namespace attnio {

// Degree-g truncated Taylor approximation of exp on [-D, D], certified by a
// dense-grid scan. Even degree keeps P(x) > 0 everywhere, which downstream
// code relies on for the invertibility of the approximate row-sum diagonal.
struct PolyApprox {
    long long g = 0;
    std::vector<double> coeffs; // c_0..c_g, c_l = 1/l!
    double domain = -1.0;       // half-width of the certified interval, < 0 until certified
    double rel_err = -1.0;      // certified max relative error on [-domain, domain]
};

inline constexpr long long kMaxDegree = 64;
inline constexpr int kCertifyGridPoints = 10001;

inline PolyApprox taylor_poly(long long g) {
    if (g < 0 || g % 2 != 0) throw argument_error("taylor_poly: degree must be even and >= 0");
    if (g > kMaxDegree) throw argument_error("taylor_poly: degree above cap");
    PolyApprox p;
    p.g = g;
    p.coeffs.resize(static_cast<size_t>(g) + 1);
    double c = 1.0;
    p.coeffs[0] = 1.0;
    for (long long l = 1; l <= g; ++l) {
        c /= static_cast<double>(l);
        p.coeffs[static_cast<size_t>(l)] = c;
    }
    return p;
}

inline double eval_poly(const PolyApprox& p, double x) {
    double acc = 0.0;
    for (size_t i = p.coeffs.size(); i-- > 0;) acc = acc * x + p.coeffs[i];
    return acc;
}

// Max of |P(x) - exp(x)| / exp(x) over 10001 equispaced points on [-D, D].
// The grid density is part of the contract; callers compare against it, not
// against an analytic remainder bound.
inline double certify(PolyApprox& p, double D) {
    if (D < 0 || !std::isfinite(D)) throw argument_error("certify: D must be finite and >= 0");
    double worst = 0.0;
    if (D == 0.0) {
        worst = std::abs(eval_poly(p, 0.0) - 1.0);
    } else {
        const int npts = kCertifyGridPoints;
        for (int i = 0; i < npts; ++i) {
            const double x = -D + 2.0 * D * static_cast<double>(i) / (npts - 1);
            const double e = std::exp(x);
            worst = std::max(worst, std::abs(eval_poly(p, x) - e) / e);
        }
    }
    p.domain = D;
    p.rel_err = worst;
    return worst;
}

// Smallest even degree in [2, 64] whose certified error on [-D, D] meets
// eps_rel. No claim is made that this matches any asymptotic degree formula;
// it is simply the minimal certified choice under this coefficient scheme.
inline long long choose_degree(double eps_rel, double D) {
    if (!(eps_rel > 0.0 && eps_rel < 1.0)) throw argument_error("choose_degree: need 0 < eps_rel < 1");
    if (D < 0 || !std::isfinite(D)) throw argument_error("choose_degree: D must be finite and >= 0");
    for (long long g = 2; g <= kMaxDegree; g += 2) {
        PolyApprox p = taylor_poly(g);
        if (certify(p, D) <= eps_rel) return g;
    }
    throw degree_overflow_error("choose_degree: no even degree <= 64 certifies eps_rel on this domain");
}

} // namespace attnio
