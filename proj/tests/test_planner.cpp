#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "attnio/planner.hpp"

using namespace attnio;

TEST_CASE("case classification thresholds") {
    CHECK(classify_case(4, 2, 256) == CaseLabel::I);    // d*r = 60 <= 64
    CHECK(classify_case(16, 2, 2048) == CaseLabel::II); // (4e)^3 ~ 1286 <= 2048
    CHECK(classify_case(10, 2, 512) == CaseLabel::III); // 16g^2 = 64 < 512 < 1286
    CHECK(classify_case(64, 8, 512) == CaseLabel::IV);  // 16g^2 = 1024 >= 512
    CHECK(classify_case(16, 2, 32768) == CaseLabel::I); // d*r = 2448 <= 8192
    CHECK_THROWS_AS(classify_case(0, 2, 256), argument_error);
}

TEST_CASE("classification is total over a grid") {
    for (long long d : {1, 2, 4, 8, 16, 32})
        for (long long g : {1, 2, 3, 4, 8})
            for (long long M : {8, 64, 512, 4096, 32768}) {
                const CaseLabel c = classify_case(d, g, M);
                CHECK((c == CaseLabel::I || c == CaseLabel::II || c == CaseLabel::III ||
                       c == CaseLabel::IV));
            }
}

TEST_CASE("choose_w follows the Case II formula") {
    CHECK(choose_w(2, 4096, 16) == 2);
    CHECK(choose_w(2, 32768, 16) == 5);
    CHECK(choose_w(1, 400, 8) == 1); // clamped up to g
    CHECK_THROWS_AS(choose_w(2, 8, 16), planning_error);
}

TEST_CASE("choose_w result satisfies the keylemma budget") {
    for (long long g : {1, 2, 3})
        for (long long M : {512, 2048, 8192, 32768, 131072}) {
            if (static_cast<long double>(M) <
                std::ceil(std::pow(4.0L * std::exp(1.0L), static_cast<long double>(g + 1))))
                continue;
            const long long w = choose_w(g, M, 64);
            CHECK(w >= g);
            CHECK(checked_mul_u128(static_cast<uint128>(w), tau(w, g)) <=
                  static_cast<uint128>(M / 4));
        }
}

TEST_CASE("pick_keylemma_w falls back to a feasibility scan") {
    const long long w = pick_keylemma_w(10, 2, 512); // case III
    CHECK(w >= 2);
    CHECK(checked_mul_u128(static_cast<uint128>(w), tau(w, 2)) <= static_cast<uint128>(512 / 4));
}

TEST_CASE("lower bound expressions") {
    Params p1 = Params::make(32, 4, 2, 256);
    CHECK(lower_bound(CaseLabel::I, p1).value == 128.0);

    Params p2 = Params::make(64, 16, 2, 2048);
    const double expect = 64.0 * 153.0 * 16.0 * 2.0 / std::pow(2048.0, 2.0 / 3.0);
    CHECK(lower_bound(CaseLabel::II, p2).value == Catch::Approx(expect));
    CHECK(lower_bound(CaseLabel::II, p2).hypothesis_ok);

    Params p4 = Params::make(32, 8, 2, 64);
    const LowerBound lb4 = lower_bound(CaseLabel::IV, p4);
    CHECK(lb4.value == Catch::Approx(32.0 * 45.0 * 8.0 / 8.0));
    CHECK(!lb4.hypothesis_ok); // d = 8 < 5g = 10

    Params p3 = Params::make(32, 10, 2, 512);
    CHECK(lower_bound(CaseLabel::III, p3).hypothesis_ok);
}

TEST_CASE("analytic cost of the empty problem is zero") {
    for (ScheduleKind k : {ScheduleKind::Case1, ScheduleKind::KeyLemma, ScheduleKind::Case3Special,
                           ScheduleKind::GenericSquare, ScheduleKind::GenericWide,
                           ScheduleKind::Flash, ScheduleKind::Naive}) {
        Params p = Params::make(0, 4, 2, 256, 2);
        CHECK(analytic_cost(k, p) == 0);
    }
}

TEST_CASE("case1 closed form") {
    Params p = Params::make(32, 4, 2, 256);
    // 4nd + 2rd with r = 15
    CHECK(analytic_cost(ScheduleKind::Case1, p) == 4 * 32 * 4 + 2 * 15 * 4);
    CHECK(analytic_cost(ScheduleKind::Case1, p) <= 8ull * 32 * 4);
}

TEST_CASE("keylemma closed form at the reference points") {
    // Hand tallies: full-width strips, V read once, partial sums spilled
    // only when more than one sequence strip exists.
    Params a = Params::make(64, 16, 2, 2048, 2);
    CHECK(analytic_cost(ScheduleKind::KeyLemma, a) == 45008);
    Params b = Params::make(64, 16, 2, 8192, 3);
    CHECK(analytic_cost(ScheduleKind::KeyLemma, b) == 21280);
    Params c = Params::make(64, 16, 2, 32768, 5);
    CHECK(analytic_cost(ScheduleKind::KeyLemma, c) == 17184);
}

TEST_CASE("analytic cost is non-increasing in M") {
    const std::vector<long long> Ms = {512, 1024, 2048, 4096, 8192, 16384, 32768};
    for (ScheduleKind k : {ScheduleKind::GenericSquare, ScheduleKind::GenericWide,
                           ScheduleKind::Flash, ScheduleKind::Naive}) {
        unsigned long long prev = ~0ull;
        for (long long M : Ms) {
            Params p = Params::make(48, 8, 2, M);
            unsigned long long cost;
            try {
                cost = analytic_cost(k, p);
            } catch (const planning_error&) {
                continue;
            }
            CHECK(cost <= prev);
            prev = cost;
        }
    }
    // keylemma with the planner's own w at each M
    unsigned long long prev = ~0ull;
    for (long long M : {2048, 8192, 32768}) {
        Params p = Params::make(64, 16, 2, M, pick_keylemma_w(16, 2, M));
        const unsigned long long cost = analytic_cost(ScheduleKind::KeyLemma, p);
        CHECK(cost <= prev);
        prev = cost;
    }
}

TEST_CASE("cost report serializes") {
    Params p = Params::make(32, 4, 2, 256);
    const CostReport rep = make_cost_report(ScheduleKind::Case1, p);
    const std::string js = cost_report_json(rep);
    CHECK(js.find("\"case\":\"I\"") != std::string::npos);
    CHECK(js.find("\"schedule\":\"case1\"") != std::string::npos);
    CHECK(js.find("\"predicted_io\":632") != std::string::npos);
    CHECK(js.find("\"hypothesis_ok\":true") != std::string::npos);
}

TEST_CASE("schedule kind names parse") {
    for (ScheduleKind k : {ScheduleKind::Case1, ScheduleKind::KeyLemma, ScheduleKind::Case3Special,
                           ScheduleKind::GenericSquare, ScheduleKind::GenericWide,
                           ScheduleKind::Flash, ScheduleKind::Naive})
        CHECK(parse_schedule(schedule_name(k)) == k);
    CHECK(!parse_schedule("bogus"));
}
