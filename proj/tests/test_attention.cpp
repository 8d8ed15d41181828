#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "attnio/attention.hpp"
#include "attnio/core.hpp"

using namespace attnio;

TEST_CASE("exact attention degenerate shapes") {
    Matrix Q(1, 1), K(1, 1), V(1, 1);
    V.at(0, 0) = 5.0;
    CHECK(exact_attention(Q, K, V).output.at(0, 0) == Catch::Approx(5.0));

    Q.at(0, 0) = 1.0;
    K.at(0, 0) = 1.0;
    V.at(0, 0) = 3.0;
    CHECK(exact_attention(Q, K, V).output.at(0, 0) == Catch::Approx(3.0));
}

TEST_CASE("zero queries give uniform weights") {
    const ProblemInstance p = gen_problem(2, 3, 0.5, 1.0, 3);
    Matrix zq(2, 3);
    const AttentionResult r = exact_attention(zq, p.K, p.V);
    for (long long c = 0; c < 3; ++c) {
        const double mean = 0.5 * (p.V.at(0, c) + p.V.at(1, c));
        CHECK(r.output.at(0, c) == Catch::Approx(mean));
        CHECK(r.output.at(1, c) == Catch::Approx(mean));
    }
}

TEST_CASE("outputs are convex combinations of value rows") {
    const ProblemInstance p = gen_problem(24, 5, 1.0, 2.0, 9);
    const AttentionResult r = exact_attention(p.Q, p.K, p.V);
    for (long long c = 0; c < p.d; ++c) {
        double lo = p.V.at(0, c), hi = p.V.at(0, c);
        for (long long j = 1; j < p.n; ++j) {
            lo = std::min(lo, p.V.at(j, c));
            hi = std::max(hi, p.V.at(j, c));
        }
        for (long long i = 0; i < p.n; ++i) {
            CHECK(r.output.at(i, c) >= lo - 1e-12);
            CHECK(r.output.at(i, c) <= hi + 1e-12);
        }
    }
    for (double s : r.row_sums) CHECK(s > 0.0);
}

TEST_CASE("exact attention rejects non-finite input") {
    Matrix Q(1, 1), K(1, 1), V(1, 1);
    Q.at(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(exact_attention(Q, K, V), argument_error);
}

TEST_CASE("approximate attention is linear in V") {
    const ProblemInstance p = gen_problem(8, 3, 0.5, 1.0, 21);
    Matrix zv(8, 3);
    const AttentionResult r = approx_attention(p.Q, p.K, zv, 1e-2);
    for (double v : r.output.data) CHECK(v == 0.0);
    for (double s : r.row_sums) CHECK(s > 0.0);
}

TEST_CASE("approximate attention meets the additive contract") {
    const ProblemInstance p = gen_problem(64, 8, 0.5, 1.0, 1);
    const AttentionResult exact = exact_attention(p.Q, p.K, p.V);
    const AttentionResult approx = approx_attention(p.Q, p.K, p.V, 1e-2);
    double dev = 0.0;
    for (size_t i = 0; i < exact.output.data.size(); ++i)
        dev = std::max(dev, std::abs(exact.output.data[i] - approx.output.data[i]));
    CHECK(dev <= 1e-2);
    for (double s : approx.row_sums) CHECK(s > 0.0);
}

TEST_CASE("oversized entries are rejected as out of reach") {
    ProblemInstance p = gen_problem(4, 1, 10.0, 1.0, 2);
    for (double& v : p.Q.data) v = 10.0; // d_bound = sqrt(1) * 100
    for (double& v : p.K.data) v = 10.0;
    CHECK_THROWS_AS(approx_attention(p.Q, p.K, p.V, 1e-3), entries_too_large_error);
}

TEST_CASE("exp recovered through a single attention call") {
    CHECK(exp_via_attention(0.0) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(exp_via_attention(1.0) - std::exp(1.0)) <= 1e-9);
    CHECK(std::abs(exp_via_attention(-2.0) - std::exp(-2.0)) <= 1e-9);
    for (int i = -30; i <= 30; ++i) {
        const double x = 0.1 * i;
        CHECK(std::abs(exp_via_attention(x) - std::exp(x)) <= 1e-9 * std::exp(x));
    }
    CHECK_THROWS_AS(exp_via_attention(31.0), argument_error);
}
