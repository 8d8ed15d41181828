#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnio/attention.hpp"
#include "attnio/core.hpp"
#include "attnio/planner.hpp"
#include "attnio/schedules.hpp"

namespace attnio::cli {

// Exit codes: 0 success, 2 usage/argument, 3 planning, 4 simulation,
// 5 verification failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPlanning = 3;
inline constexpr int kExitSimulation = 4;
inline constexpr int kExitVerify = 5;

inline int thread_budget() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("ATTNIO_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int>(std::min<long>(v, hw > 0 ? hw * 4 : v));
    }
    return static_cast<int>(hw);
}

struct RunFlags {
    long long n = 0, d = 0, g = 0, M = 0, w = 0;
    double B = 0.5, vmax = 1.0, eps = 1e-2;
    uint64_t seed = 1;
    std::string schedule;
    std::string dump_path;
};

inline long long resolve_degree(const RunFlags& f) {
    if (f.g > 0) return f.g;
    const double d_bound = std::sqrt(static_cast<double>(f.d)) * f.B * f.B;
    const double eps_poly = f.eps / (4.0 * (1.0 + f.vmax));
    return choose_degree(eps_poly, d_bound);
}

inline nlohmann::json run_one(ScheduleKind kind, const ProblemInstance& prob, long long g,
                              long long M, long long w, const std::string& dump_path = {}) {
    Params p = Params::make(prob.n, prob.d, g, M, w);
    const CostReport rep = make_cost_report(kind, p);

    RunResult rr;
    if (!dump_path.empty()) {
        std::ofstream dump(dump_path);
        if (!dump) throw error("cannot open trace dump path: " + dump_path);
        MonomialBasis basis;
        PolyApprox poly;
        ReplayContext ctx;
        ctx.Q = &prob.Q;
        ctx.K = &prob.K;
        ctx.V = &prob.V;
        ctx.q_scale = 1.0 / std::sqrt(static_cast<double>(prob.d));
        if (!is_baseline(kind)) {
            basis = enumerate_basis(prob.d, g);
            poly = taylor_poly(g);
            ctx.basis = &basis;
            ctx.poly = &poly;
        }
        SimEngine eng(M, registry_for(prob.n, prob.d), &ctx);
        generate_schedule(kind, p, &basis, [&](const TraceOp& op) {
            dump_op(dump, op);
            eng.step(op);
        });
        rr.stats = eng.finish();
        const Matrix ref = schedule_oracle(kind, prob, g);
        rr.replay_ok = true;
        for (long long i = 0; i < ref.rows; ++i)
            for (long long j = 0; j < ref.cols; ++j) {
                const double dev = std::abs(ctx.result.at(i, j) - ref.at(i, j));
                rr.max_deviation = std::max(rr.max_deviation, dev);
                if (dev > 1e-9 * (1.0 + std::abs(ref.at(i, j)))) rr.replay_ok = false;
            }
    } else {
        rr = run_schedule(kind, prob, g, M, w);
    }

    nlohmann::json out;
    out["n"] = prob.n;
    out["d"] = prob.d;
    out["g"] = g;
    out["M"] = M;
    out["r"] = p.r;
    out["w"] = w;
    out["schedule"] = schedule_name(kind);
    out["case"] = case_name(rep.case_label);
    out["predicted_io"] = rep.predicted_io;
    out["lower_bound"] = rep.lower_bound_value;
    out["hypothesis_ok"] = rep.hypothesis_ok;
    out["loads"] = rr.stats.loads;
    out["stores"] = rr.stats.stores;
    out["computes"] = rr.stats.computes;
    out["peak_resident"] = rr.stats.peak_resident;
    out["total_io"] = rr.stats.total_io();
    out["replay_ok"] = rr.replay_ok;
    out["max_deviation"] = rr.max_deviation;
    return out;
}

inline int cmd_run(const RunFlags& f) {
    const auto kind = parse_schedule(f.schedule);
    if (!kind) {
        std::cerr << "unknown schedule: " << f.schedule << "\n";
        return kExitUsage;
    }
    const long long g = resolve_degree(f);
    const ProblemInstance prob = gen_problem(f.n, f.d, f.B, f.vmax, f.seed);
    long long w = f.w;
    if (*kind == ScheduleKind::KeyLemma && w == 0) w = pick_keylemma_w(f.d, g, f.M);
    const nlohmann::json out = run_one(*kind, prob, g, f.M, w, f.dump_path);
    std::cout << out.dump() << "\n";
    return kExitOk;
}

struct SweepFlags {
    std::vector<long long> n, d, g, M;
    std::vector<std::string> schedules;
    double B = 0.5, vmax = 1.0;
    uint64_t seed = 1;
    std::string out_path;
};

struct SweepRow {
    bool ok = false;
    std::string skipped_reason;
    long long n = 0, d = 0, g = 0, M = 0, r = 0;
    std::string schedule;
    std::string case_label;
    unsigned long long loads = 0, stores = 0, total_io = 0, analytic = 0;
    double lb = 0.0;
    bool replay_ok = false;
};

inline std::string csv_header() {
    return "n,d,g,M,r,schedule,case,loads,stores,total_io,analytic,lower_bound,replay_ok";
}

inline std::string csv_line(const SweepRow& row) {
    std::ostringstream os;
    os.precision(17);
    os << row.n << ',' << row.d << ',' << row.g << ',' << row.M << ',' << row.r << ','
       << row.schedule << ',' << row.case_label << ',' << row.loads << ',' << row.stores << ','
       << row.total_io << ',' << row.analytic << ',' << row.lb << ','
       << (row.replay_ok ? "true" : "false");
    return os.str();
}

inline int cmd_sweep(const SweepFlags& f) {
    std::vector<ScheduleKind> kinds;
    for (const auto& s : f.schedules) {
        const auto k = parse_schedule(s);
        if (!k) {
            std::cerr << "unknown schedule: " << s << "\n";
            return kExitUsage;
        }
        kinds.push_back(*k);
    }
    struct Cell {
        long long n, d, g, M;
        ScheduleKind kind;
    };
    std::vector<Cell> grid;
    for (long long n : f.n)
        for (long long d : f.d)
            for (long long g : f.g)
                for (long long M : f.M)
                    for (ScheduleKind k : kinds) grid.push_back({n, d, g, M, k});
    if (grid.size() > 10'000) {
        std::cerr << "sweep grid larger than 10000 rows\n";
        return kExitUsage;
    }

    std::vector<SweepRow> rows(grid.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            const Cell& c = grid[i];
            SweepRow& row = rows[i];
            row.n = c.n;
            row.d = c.d;
            row.g = c.g;
            row.M = c.M;
            row.schedule = schedule_name(c.kind);
            try {
                Params p = Params::make(c.n, c.d, c.g, c.M);
                if (c.kind == ScheduleKind::KeyLemma) p.w = pick_keylemma_w(c.d, c.g, c.M);
                row.r = p.r;
                row.case_label = case_name(classify_case(c.d, c.g, c.M));
                row.analytic = analytic_cost(c.kind, p);
                const LowerBound lb = lower_bound(classify_case(c.d, c.g, c.M), p);
                row.lb = lb.value;
                const ProblemInstance prob = gen_problem(c.n, c.d, f.B, f.vmax, f.seed);
                const RunResult rr = run_schedule(c.kind, prob, c.g, c.M, p.w);
                row.loads = rr.stats.loads;
                row.stores = rr.stats.stores;
                row.total_io = rr.stats.total_io();
                row.replay_ok = rr.replay_ok;
                row.ok = true;
            } catch (const std::exception& e) {
                row.skipped_reason = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(thread_budget(), static_cast<int>(grid.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::ofstream out(f.out_path);
    if (!out) {
        std::cerr << "cannot open output path: " << f.out_path << "\n";
        return 1;
    }
    out << csv_header() << "\n";
    for (const SweepRow& row : rows) {
        if (!row.ok) {
            std::cerr << "skipping " << row.schedule << " n=" << row.n << " d=" << row.d
                      << " g=" << row.g << " M=" << row.M << ": " << row.skipped_reason << "\n";
            continue;
        }
        out << csv_line(row) << "\n";
    }
    return kExitOk;
}

struct VerifyFlags {
    long long n = 0, d = 0;
    double B = 0.5, vmax = 1.0, eps = 1e-2;
    uint64_t seed = 1;
};

inline int cmd_verify(const VerifyFlags& f) {
    const ProblemInstance prob = gen_problem(f.n, f.d, f.B, f.vmax, f.seed);
    const AttentionResult exact = exact_attention(prob.Q, prob.K, prob.V);
    const AttentionResult approx = approx_attention(prob.Q, prob.K, prob.V, f.eps);
    double dev = 0.0;
    for (size_t i = 0; i < exact.output.data.size(); ++i)
        dev = std::max(dev, std::abs(exact.output.data[i] - approx.output.data[i]));
    const bool pass = dev <= f.eps;
    nlohmann::json out;
    out["n"] = f.n;
    out["d"] = f.d;
    out["B"] = f.B;
    out["eps"] = f.eps;
    out["max_abs_deviation"] = dev;
    out["pass"] = pass;
    std::cout << out.dump() << "\n";
    return pass ? kExitOk : kExitVerify;
}

inline int cmd_demo_exp(double x) {
    const double z = exp_via_attention(x);
    const double dev = std::abs(z - std::exp(x));
    std::cout.precision(17);
    std::cout << "z = " << z << "\n|z - exp(x)| = " << dev << "\n";
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"polynomial approximate attention + two-level memory I/O schedules"};
    app.require_subcommand(1);

    RunFlags rf;
    CLI::App* run = app.add_subcommand("run", "plan, trace, simulate and replay one schedule");
    run->add_option("--n", rf.n, "sequence length")->required();
    run->add_option("--d", rf.d, "feature dimension")->required();
    run->add_option("--M", rf.M, "fast memory capacity")->required();
    run->add_option("--schedule", rf.schedule,
                    "case1|keylemma|case3special|generic-square|generic-wide|flash|naive")
        ->required();
    run->add_option("--g", rf.g, "polynomial degree (default: derived from --eps and --B)");
    run->add_option("--w", rf.w, "generating-set size for keylemma (default: planner's choice)");
    run->add_option("--B", rf.B, "entry bound for Q and K");
    run->add_option("--vmax", rf.vmax, "entry bound for V");
    run->add_option("--eps", rf.eps, "additive error target used to derive g");
    run->add_option("--seed", rf.seed, "problem seed");
    run->add_option("--dump-trace", rf.dump_path, "write the op stream to this file");

    SweepFlags sf;
    CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid and write a CSV");
    sweep->add_option("--n", sf.n, "sequence lengths")->required()->delimiter(',');
    sweep->add_option("--d", sf.d, "feature dimensions")->required()->delimiter(',');
    sweep->add_option("--g", sf.g, "polynomial degrees")->required()->delimiter(',');
    sweep->add_option("--M", sf.M, "fast memory capacities")->required()->delimiter(',');
    sweep->add_option("--schedules", sf.schedules, "comma-separated schedule kinds")
        ->delimiter(',');
    sweep->add_option("--B", sf.B, "entry bound for Q and K");
    sweep->add_option("--vmax", sf.vmax, "entry bound for V");
    sweep->add_option("--seed", sf.seed, "problem seed");
    sweep->add_option("--out", sf.out_path, "CSV output path")->required();

    VerifyFlags vf;
    CLI::App* verify = app.add_subcommand("verify", "approximate vs exact attention deviation");
    verify->add_option("--n", vf.n, "sequence length")->required();
    verify->add_option("--d", vf.d, "feature dimension")->required();
    verify->add_option("--B", vf.B, "entry bound for Q and K");
    verify->add_option("--vmax", vf.vmax, "entry bound for V");
    verify->add_option("--eps", vf.eps, "additive error target")->required();
    verify->add_option("--seed", vf.seed, "problem seed");

    double demo_x = 0.0;
    CLI::App* demo = app.add_subcommand("demo-exp", "recover exp(x) from one attention call");
    demo->add_option("--x", demo_x, "argument, |x| <= 30")->required();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(rf);
        if (sweep->parsed()) return cmd_sweep(sf);
        if (verify->parsed()) return cmd_verify(vf);
        if (demo->parsed()) return cmd_demo_exp(demo_x);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const planning_error& e) {
        std::cerr << "planning error: " << e.what() << "\n";
        return kExitPlanning;
    } catch (const entries_too_large_error& e) {
        std::cerr << "planning error: " << e.what() << "\n";
        return kExitPlanning;
    } catch (const simulation_error& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kExitSimulation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

} // namespace attnio::cli
