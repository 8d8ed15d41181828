#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <sstream>

#include "attnio/planner.hpp"
#include "attnio/schedules.hpp"

using namespace attnio;

namespace {
struct GridPoint {
    long long n, d, g, M, w;
    ScheduleKind kind;
};

void check_point(const GridPoint& gp) {
    INFO("kind=" << schedule_name(gp.kind) << " n=" << gp.n << " d=" << gp.d << " g=" << gp.g
                 << " M=" << gp.M << " w=" << gp.w);
    Params p = Params::make(gp.n, gp.d, gp.g, gp.M, gp.w);
    const unsigned long long predicted = analytic_cost(gp.kind, p);
    const IoStats st = simulate_schedule(gp.kind, p);
    CHECK(st.total_io() == predicted);
    CHECK(st.peak_resident <= static_cast<unsigned long long>(gp.M));
    CHECK(st.loads >= st.distinct_input_operands);

    const ProblemInstance prob = gen_problem(gp.n, gp.d, 0.5, 1.0, 7);
    const RunResult rr = run_schedule(gp.kind, prob, gp.g, gp.M, gp.w);
    CHECK(rr.stats.total_io() == predicted);
    CHECK(rr.replay_ok);
}
} // namespace

TEST_CASE("assign_tile picks the first generating combination") {
    const GroupPartition part = make_group_partition(4, 2, 1);
    Monomial constant{{0, 0, 0, 0}, 0};
    CHECK(assign_tile(constant, part) == std::vector<int>{0, 1});
    Monomial x3x4{{0, 0, 1, 1}, 2};
    CHECK(assign_tile(x3x4, part) == std::vector<int>{2, 3});
    Monomial x4sq{{0, 0, 0, 2}, 2};
    CHECK(assign_tile(x4sq, part) == std::vector<int>{0, 3});
}

TEST_CASE("column assignment partitions the basis") {
    for (long long d = 1; d <= 10; ++d) {
        for (long long g = 1; g <= 3 && g <= d; ++g) {
            const MonomialBasis basis = enumerate_basis(d, g);
            for (long long w = g; w <= d; ++w) {
                const long long s = std::max<long long>(1, cdiv(w, g));
                const GroupPartition part = make_group_partition(d, g, s);
                const long long m = static_cast<long long>(part.groups.size());
                std::set<std::pair<long long, uint32_t>> seen;
                std::vector<long long> widths(
                    static_cast<size_t>(m <= g ? 1
                                               : static_cast<long long>(static_cast<uint64_t>(
                                                     binomial_u128(m, g)))),
                    0);
                for (uint32_t idx = 0; idx < basis.monomials.size(); ++idx) {
                    const Monomial& mono = basis.monomials[idx];
                    const auto combo = assign_tile(mono, part);
                    // The combination must cover the monomial's support.
                    for (size_t v = 0; v < mono.exponents.size(); ++v) {
                        if (mono.exponents[v] == 0) continue;
                        const int gid = static_cast<int>(static_cast<long long>(v) / part.size);
                        CHECK(std::find(combo.begin(), combo.end(), gid) != combo.end());
                    }
                    const long long rank = m <= g ? 0 : combo_rank(combo, m);
                    const bool inserted = seen.insert({rank, idx}).second;
                    CHECK(inserted);
                    ++widths[static_cast<size_t>(rank)];
                }
                // Exact partition: every monomial assigned exactly once.
                CHECK(seen.size() == basis.monomials.size());
                long long total = 0;
                for (long long wd : widths) total += wd;
                CHECK(total == static_cast<long long>(basis.monomials.size()));
            }
        }
    }
}

TEST_CASE("keylemma column widths for d=4, g=2, w=2") {
    const MonomialBasis basis = enumerate_basis(4, 2);
    const KeyLemmaGeom geo = build_keylemma_geom(8, 4, 2, 2048, 2, basis);
    REQUIRE(geo.combos.size() == 6); // C(4,2)
    long long total = 0;
    for (const auto& c : geo.combos) {
        CHECK(c.columns.size() >= 1);
        total += static_cast<long long>(c.columns.size());
    }
    CHECK(total == 15);
}

TEST_CASE("analytic equals simulated, peak within M, replay true") {
    const std::vector<GridPoint> grid = {
        {32, 4, 2, 256, 0, ScheduleKind::Case1},
        {32, 4, 2, 256, 2, ScheduleKind::KeyLemma},
        {32, 4, 2, 256, 0, ScheduleKind::GenericSquare},
        {32, 4, 2, 256, 0, ScheduleKind::GenericWide},
        {32, 4, 2, 256, 0, ScheduleKind::Flash},
        {32, 4, 2, 256, 0, ScheduleKind::Naive},
        {64, 8, 2, 512, 0, ScheduleKind::Case3Special},
        {64, 8, 2, 512, 2, ScheduleKind::KeyLemma},
        {32, 10, 2, 512, 0, ScheduleKind::Case3Special},
        {64, 16, 2, 2048, 2, ScheduleKind::KeyLemma},
        {64, 16, 2, 8192, 3, ScheduleKind::KeyLemma},
        {64, 16, 2, 32768, 5, ScheduleKind::KeyLemma},
        {32, 5, 4, 256, 0, ScheduleKind::GenericSquare},
        {32, 5, 4, 256, 0, ScheduleKind::GenericWide},
        {16, 4, 4, 1024, 0, ScheduleKind::Case3Special},
        {128, 4, 2, 4096, 0, ScheduleKind::Case1},
        {32, 6, 2, 768, 0, ScheduleKind::Case1},
        {24, 3, 2, 320, 3, ScheduleKind::KeyLemma},
        {64, 4, 2, 256, 0, ScheduleKind::Naive},
    };
    for (const auto& gp : grid) check_point(gp);
}

TEST_CASE("square tile side for M=1024 is 8") {
    const SquareGeom geo = build_square_geom(16, 4, 2, 1024);
    CHECK(geo.t == 8);
    Params p = Params::make(16, 4, 2, 1024);
    CHECK(simulate_schedule(ScheduleKind::GenericSquare, p).total_io() ==
          analytic_cost(ScheduleKind::GenericSquare, p));
}

TEST_CASE("the expansion schedule undercuts flash at n=1024") {
    Params p = Params::make(1024, 4, 2, 4096);
    CHECK(analytic_cost(ScheduleKind::Case1, p) < analytic_cost(ScheduleKind::Flash, p));
}

TEST_CASE("case1 stays within the linear budget") {
    Params p = Params::make(32, 4, 2, 256);
    const IoStats st = simulate_schedule(ScheduleKind::Case1, p);
    CHECK(st.total_io() <= 8ull * 32 * 4);
    const ProblemInstance prob = gen_problem(8, 2, 0.5, 1.0, 3);
    CHECK(replay_check(ScheduleKind::Case1, prob, 2, 128));
}

TEST_CASE("schedule gating raises planning errors") {
    // case3special outside case III
    Params p1 = Params::make(32, 4, 2, 256); // case I
    CHECK_THROWS_AS(simulate_schedule(ScheduleKind::Case3Special, p1), planning_error);
    // keylemma with an infeasible w
    Params p2 = Params::make(32, 5, 4, 256, 4); // 4*tau(4,4)=280 > 64
    CHECK_THROWS_AS(simulate_schedule(ScheduleKind::KeyLemma, p2), planning_error);
    // square tiles too small
    Params p3 = Params::make(32, 64, 2, 256);
    CHECK_THROWS_AS(simulate_schedule(ScheduleKind::GenericSquare, p3), planning_error);
    // flash needs M >= 4d
    Params p4 = Params::make(32, 64, 2, 128);
    CHECK_THROWS_AS(simulate_schedule(ScheduleKind::Flash, p4), planning_error);
}

TEST_CASE("linear scaling of the expansion schedules") {
    auto fit_slope = [](const std::vector<std::pair<double, double>>& pts) {
        double mx = 0, my = 0;
        for (auto& [x, y] : pts) {
            mx += x;
            my += y;
        }
        mx /= pts.size();
        my /= pts.size();
        double num = 0, den = 0;
        for (auto& [x, y] : pts) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        return num / den;
    };

    std::vector<std::pair<double, double>> case1_pts, kl_pts, c3_pts;
    for (long long n : {64, 128, 256, 512}) {
        Params pc = Params::make(n, 4, 2, 256);
        case1_pts.push_back({std::log2(double(n)),
                             std::log2(double(analytic_cost(ScheduleKind::Case1, pc)))});
        Params pk = Params::make(n, 16, 2, 2048, 2);
        kl_pts.push_back({std::log2(double(n)),
                          std::log2(double(analytic_cost(ScheduleKind::KeyLemma, pk)))});
        Params p3 = Params::make(n, 10, 2, 512);
        c3_pts.push_back({std::log2(double(n)),
                          std::log2(double(analytic_cost(ScheduleKind::Case3Special, p3)))});
    }
    CHECK(fit_slope(case1_pts) == Catch::Approx(1.0).margin(0.05));
    CHECK(fit_slope(kl_pts) == Catch::Approx(1.0).margin(0.05));
    CHECK(fit_slope(c3_pts) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("flash doubles its cost by four when n doubles") {
    Params a = Params::make(256, 8, 2, 1024);
    Params b = Params::make(512, 8, 2, 1024);
    const double ratio = double(analytic_cost(ScheduleKind::Flash, b)) /
                         double(analytic_cost(ScheduleKind::Flash, a));
    CHECK(ratio == Catch::Approx(4.0).margin(0.2));
    // and the simulated counts agree with the closed form at both points
    CHECK(simulate_schedule(ScheduleKind::Flash, a).total_io() ==
          analytic_cost(ScheduleKind::Flash, a));
    CHECK(simulate_schedule(ScheduleKind::Flash, b).total_io() ==
          analytic_cost(ScheduleKind::Flash, b));
}

TEST_CASE("randomized parameters: analytic always equals simulated") {
    const ScheduleKind all[] = {ScheduleKind::Case1,        ScheduleKind::KeyLemma,
                                ScheduleKind::Case3Special, ScheduleKind::GenericSquare,
                                ScheduleKind::GenericWide,  ScheduleKind::Flash,
                                ScheduleKind::Naive};
    SplitMix64 rng(20250605);
    int done = 0, attempts = 0, replays = 0;
    while (done < 120 && attempts < 4000) {
        ++attempts;
        const long long n = 1 + static_cast<long long>(rng.next_u64() % 70);
        const long long d = 1 + static_cast<long long>(rng.next_u64() % 12);
        const long long g = 2 * (1 + static_cast<long long>(rng.next_u64() % 2));
        const long long M = 8 + static_cast<long long>(rng.next_u64() % 4096);
        const ScheduleKind kind = all[rng.next_u64() % 7];
        Params p = Params::make(n, d, g, M);
        unsigned long long predicted = 0;
        try {
            if (kind == ScheduleKind::KeyLemma) p.w = pick_keylemma_w(d, g, M);
            predicted = analytic_cost(kind, p);
        } catch (const planning_error&) {
            continue;
        } catch (const capacity_error&) {
            continue;
        }
        INFO("kind=" << schedule_name(kind) << " n=" << n << " d=" << d << " g=" << g
                     << " M=" << M << " w=" << p.w);
        const IoStats st = simulate_schedule(kind, p);
        REQUIRE(st.total_io() == predicted);
        REQUIRE(st.peak_resident <= static_cast<unsigned long long>(M));
        if (n <= 24 && replays < 25) {
            ++replays;
            const ProblemInstance prob = gen_problem(n, d, 0.5, 1.0, 555 + attempts);
            REQUIRE(run_schedule(kind, prob, g, M, p.w).replay_ok);
        }
        ++done;
    }
    CHECK(done >= 100);
    CHECK(replays >= 15);
}

TEST_CASE("mutated traces are rejected or fail replay") {
    const MonomialBasis basis = enumerate_basis(2, 2);
    Params p = Params::make(8, 2, 2, 128, 2);
    std::vector<TraceOp> trace = materialize_schedule(ScheduleKind::Case1, p, &basis);
    // Remove the first compute op.
    for (size_t i = 0; i < trace.size(); ++i) {
        if (trace[i].op == OpType::Compute) {
            trace.erase(trace.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    CHECK_THROWS_AS(simulate(trace, p.M, registry_for(p.n, p.d)), simulation_error);
}

TEST_CASE("trace dump format") {
    const MonomialBasis basis = enumerate_basis(1, 2);
    Params p = Params::make(2, 1, 2, 64, 1);
    const std::vector<TraceOp> trace = materialize_schedule(ScheduleKind::GenericWide, p, &basis);
    std::ostringstream os;
    dump_trace(os, trace);
    const std::string text = os.str();
    CHECK(text.find("L in:K:0:0:0") != std::string::npos);
    CHECK(text.find("C gen:U2:0:") != std::string::npos);
    CHECK(text.find("S out:Y:") != std::string::npos);
}
