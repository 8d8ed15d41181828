#pragma once

#include <cmath>
#include <vector>

#include "attnio/core.hpp"
#include "attnio/errors.hpp"
#include "attnio/featuremap.hpp"
#include "attnio/polyapprox.hpp"

namespace attnio {

struct AttentionResult {
    Matrix output;               // nq x dv
    std::vector<double> row_sums; // softmax denominators, rescaled to the unshifted definition
};

// Row-softmax attention with max-subtraction. Q may have a different row
// count than K/V (the scalar-exponential reduction uses a 1x1 query against
// two keys).
inline AttentionResult exact_attention(const Matrix& Q, const Matrix& K, const Matrix& V) {
    if (Q.cols != K.cols) throw argument_error("exact_attention: Q/K feature dims differ");
    if (K.rows != V.rows) throw argument_error("exact_attention: K/V row counts differ");
    if (!Q.all_finite() || !K.all_finite() || !V.all_finite())
        throw argument_error("exact_attention: non-finite input");
    const long long nq = Q.rows, nk = K.rows, d = Q.cols, dv = V.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    AttentionResult res;
    res.output = Matrix(nq, dv);
    res.row_sums.resize(static_cast<size_t>(nq));
    std::vector<double> scores(static_cast<size_t>(nk));
    for (long long i = 0; i < nq; ++i) {
        double rowmax = -std::numeric_limits<double>::infinity();
        for (long long j = 0; j < nk; ++j) {
            double s = 0.0;
            for (long long c = 0; c < d; ++c) s += Q.at(i, c) * K.at(j, c);
            s *= scale;
            scores[static_cast<size_t>(j)] = s;
            rowmax = std::max(rowmax, s);
        }
        double denom = 0.0;
        for (long long j = 0; j < nk; ++j) {
            const double w = std::exp(scores[static_cast<size_t>(j)] - rowmax);
            scores[static_cast<size_t>(j)] = w;
            denom += w;
        }
        for (long long j = 0; j < nk; ++j) {
            const double w = scores[static_cast<size_t>(j)] / denom;
            for (long long c = 0; c < dv; ++c) res.output.at(i, c) += w * V.at(j, c);
        }
        // Rescale the shifted denominator back to sum_j exp(score_j); may
        // saturate to inf for extreme scores, which is fine for reporting.
        res.row_sums[static_cast<size_t>(i)] = denom * std::exp(rowmax);
    }
    return res;
}

// Additive-error approximate attention: expand Q/sqrt(d) and K through the
// monomial feature map of a certified even-degree polynomial, multiply
// U2^T V first, and normalize by the approximate row sums.
//
// The polynomial's relative error budget is eps / (4 * (1 + max|V|)):
// a relative eps_p on every unnormalized score perturbs each softmax weight
// by at most 2*eps_p/(1-eps_p), so outputs move by at most that times
// max|V|; the factor 4 absorbs the (1-eps_p)^-1 slack with room to spare.
inline AttentionResult approx_attention(const Matrix& Q, const Matrix& K, const Matrix& V,
                                        double eps) {
    if (Q.cols != K.cols) throw argument_error("approx_attention: Q/K feature dims differ");
    if (K.rows != V.rows) throw argument_error("approx_attention: K/V row counts differ");
    if (!Q.all_finite() || !K.all_finite() || !V.all_finite())
        throw argument_error("approx_attention: non-finite input");
    if (!(eps > 0.0)) throw argument_error("approx_attention: eps must be > 0");

    const long long nq = Q.rows, nk = K.rows, d = Q.cols, dv = V.cols;
    const double B = std::max(Q.max_abs(), K.max_abs());
    const double d_bound = std::sqrt(static_cast<double>(d)) * B * B;
    const double eps_poly = eps / (4.0 * (1.0 + V.max_abs()));

    long long g = 0;
    try {
        g = choose_degree(eps_poly, d_bound);
    } catch (const degree_overflow_error&) {
        throw entries_too_large_error(
            "approx_attention: entry magnitudes too large for the certified polynomial scheme");
    }

    const PolyApprox poly = taylor_poly(g);
    const MonomialBasis basis = enumerate_basis(d, g);
    const size_t r = basis.monomials.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    // H = U2^T V and h1 = U2^T 1, accumulated row by row of K.
    Matrix H(static_cast<long long>(r), dv);
    std::vector<double> h1(r, 0.0);
    std::vector<double> krow(static_cast<size_t>(d));
    for (long long j = 0; j < nk; ++j) {
        for (long long c = 0; c < d; ++c) krow[static_cast<size_t>(c)] = K.at(j, c);
        const std::vector<double> u2 = expand_row_k(krow, basis);
        for (size_t a = 0; a < r; ++a) {
            if (u2[a] == 0.0) continue;
            h1[a] += u2[a];
            for (long long c = 0; c < dv; ++c) H.at(static_cast<long long>(a), c) += u2[a] * V.at(j, c);
        }
    }

    AttentionResult res;
    res.output = Matrix(nq, dv);
    res.row_sums.resize(static_cast<size_t>(nq));
    std::vector<double> qrow(static_cast<size_t>(d));
    for (long long i = 0; i < nq; ++i) {
        for (long long c = 0; c < d; ++c) qrow[static_cast<size_t>(c)] = Q.at(i, c) * scale;
        const std::vector<double> u1 = expand_row_q(qrow, poly, basis);
        double denom = 0.0;
        std::vector<double> acc(static_cast<size_t>(dv), 0.0);
        for (size_t a = 0; a < r; ++a) {
            if (u1[a] == 0.0) continue;
            denom += u1[a] * h1[a];
            for (long long c = 0; c < dv; ++c)
                acc[static_cast<size_t>(c)] += u1[a] * H.at(static_cast<long long>(a), c);
        }
        if (!(denom > 0.0))
            throw argument_error("approx_attention: non-positive approximate row sum");
        res.row_sums[static_cast<size_t>(i)] = denom;
        for (long long c = 0; c < dv; ++c) res.output.at(i, c) = acc[static_cast<size_t>(c)] / denom;
    }
    return res;
}

// exp(x) recovered from a single exact-attention call with Q = (1),
// K^T = (x 2x), V = (1; 0): the (1,1) output equals 1 / (1 + e^x).
inline double exp_via_attention(double x) {
    if (!(std::abs(x) <= 30.0)) throw argument_error("exp_via_attention: |x| must be <= 30");
    Matrix Q(1, 1), K(2, 1), V(2, 1);
    Q.at(0, 0) = 1.0;
    K.at(0, 0) = x;
    K.at(1, 0) = 2.0 * x;
    V.at(0, 0) = 1.0;
    V.at(1, 0) = 0.0;
    const AttentionResult r = exact_attention(Q, K, V);
    return 1.0 / r.output.at(0, 0) - 1.0;
}

} // namespace attnio
