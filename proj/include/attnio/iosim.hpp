#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "attnio/core.hpp"
#include "attnio/errors.hpp"
#include "attnio/featuremap.hpp"
#include "attnio/polyapprox.hpp"

namespace attnio {

enum class Kind : uint8_t { Input, Generated, Partial, Output };
enum class Tag : uint8_t { Q, K, V, U1, U2, H, Score, Weight, Acc, RowSum, Y };

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Input: return "in";
        case Kind::Generated: return "gen";
        case Kind::Partial: return "ps";
        case Kind::Output: return "out";
    }
    return "?";
}

inline const char* tag_name(Tag t) {
    switch (t) {
        case Tag::Q: return "Q";
        case Tag::K: return "K";
        case Tag::V: return "V";
        case Tag::U1: return "U1";
        case Tag::U2: return "U2";
        case Tag::H: return "H";
        case Tag::Score: return "S";
        case Tag::Weight: return "W";
        case Tag::Acc: return "ACC";
        case Tag::RowSum: return "L";
        case Tag::Y: return "Y";
    }
    return "?";
}

struct ValueId {
    Kind kind = Kind::Input;
    Tag tag = Tag::Q;
    uint32_t row = 0;
    uint32_t col = 0;
    uint32_t ver = 0;

    // Slot identity ignores the version: a new version of a partial sum
    // replaces the old one in place.
    uint64_t slot_key() const {
        return (static_cast<uint64_t>(kind) << 62) | (static_cast<uint64_t>(tag) << 56) |
               (static_cast<uint64_t>(row) << 28) | static_cast<uint64_t>(col);
    }
};

inline ValueId in_cell(Tag t, long long r, long long c) {
    return {Kind::Input, t, static_cast<uint32_t>(r), static_cast<uint32_t>(c), 0};
}
inline ValueId gen_cell(Tag t, long long r, long long c) {
    return {Kind::Generated, t, static_cast<uint32_t>(r), static_cast<uint32_t>(c), 0};
}
inline ValueId ps_cell(Tag t, long long r, long long c, long long ver) {
    return {Kind::Partial, t, static_cast<uint32_t>(r), static_cast<uint32_t>(c),
            static_cast<uint32_t>(ver)};
}
inline ValueId out_cell(Tag t, long long r, long long c) {
    return {Kind::Output, t, static_cast<uint32_t>(r), static_cast<uint32_t>(c), 0};
}

enum class OpType : uint8_t { Load, Store, Compute, Evict };

enum class ComputeKind : uint8_t {
    Feature, // monomial expansion entry of U1/U2, recomputed from resident Q/K cells
    Const,   // immediate (designated generated constant; empty input list allowed)
    Mac,     // [a,b] -> a*b, or [prev,a,b] -> prev + a*b
    Add,
    Sub,
    Mul,
    Div,
    Exp,   // [a] -> exp(a), [a,b] -> exp(a-b)
    Max,   // max over inputs
    Scale, // imm * a
    Copy
};

struct TraceOp {
    OpType op = OpType::Load;
    ValueId target; // loaded/stored/evicted id, or the compute output
    ComputeKind ck = ComputeKind::Copy;
    double imm = 0.0;
    std::vector<ValueId> ins;
};

struct MatrixDecl {
    Tag tag;
    long long rows = 0;
    long long cols = 0;
};

struct Registry {
    std::vector<MatrixDecl> inputs;
    std::vector<MatrixDecl> outputs;
};

struct IoStats {
    unsigned long long loads = 0;
    unsigned long long stores = 0;
    unsigned long long computes = 0;
    unsigned long long evict_warnings = 0;
    unsigned long long peak_resident = 0;
    unsigned long long distinct_input_operands = 0;
    unsigned long long total_io() const { return loads + stores; }
};

// Numeric context for replaying a trace's computations. Feature cells draw
// on the expanded problem matrices; everything else flows through the ops.
struct ReplayContext {
    const Matrix* Q = nullptr;
    const Matrix* K = nullptr;
    const Matrix* V = nullptr;
    const MonomialBasis* basis = nullptr;
    const PolyApprox* poly = nullptr;
    double q_scale = 1.0;
    Matrix result;

    double input_value(const ValueId& id) const {
        switch (id.tag) {
            case Tag::Q: return Q->at(id.row, id.col);
            case Tag::K: return K->at(id.row, id.col);
            case Tag::V: return V->at(id.row, id.col);
            default: throw argument_error("replay: unknown input tag");
        }
    }

    double feature_value(const ValueId& id) const {
        const Monomial& m = basis->monomials[id.col];
        double v;
        if (id.tag == Tag::U1) {
            v = poly->coeffs[static_cast<size_t>(m.degree)] * u128_to_double(multinomial(m));
            for (size_t i = 0; i < m.exponents.size(); ++i)
                for (int e = 0; e < m.exponents[i]; ++e)
                    v *= Q->at(id.row, static_cast<long long>(i)) * q_scale;
        } else if (id.tag == Tag::U2) {
            v = 1.0;
            for (size_t i = 0; i < m.exponents.size(); ++i)
                for (int e = 0; e < m.exponents[i]; ++e) v *= K->at(id.row, static_cast<long long>(i));
        } else {
            throw argument_error("replay: feature compute with non-U tag");
        }
        return v;
    }
};

// Two-level machine. Fast memory holds at most M values; loads and stores
// move values across the levels and are the only operations that cost.
// Streaming: feed ops through step() (or use it as a trace sink), then call
// finish() once to run the end-of-trace output check.
class SimEngine {
  public:
    SimEngine(long long M, Registry registry, ReplayContext* ctx = nullptr)
        : M_(M), reg_(std::move(registry)), ctx_(ctx) {
        if (M < 2) throw argument_error("simulate: M must be >= 2");
        resident_.reserve(1024);
        if (ctx_) {
            for (const auto& decl : reg_.outputs)
                if (decl.tag == Tag::Y) ctx_->result = Matrix(decl.rows, decl.cols);
        }
    }

    void operator()(const TraceOp& op) { step(op); }

    void step(const TraceOp& op) {
        switch (op.op) {
            case OpType::Load: do_load(op.target); break;
            case OpType::Store: do_store(op.target); break;
            case OpType::Compute: do_compute(op); break;
            case OpType::Evict: do_evict(op.target); break;
        }
    }

    IoStats finish() {
        for (const auto& decl : reg_.outputs) {
            for (long long r = 0; r < decl.rows; ++r)
                for (long long c = 0; c < decl.cols; ++c) {
                    const ValueId id = out_cell(decl.tag, r, c);
                    auto it = stored_.find(id.slot_key());
                    if (it == stored_.end())
                        throw missing_output_error("simulate: declared output never stored at (" +
                                                   std::to_string(r) + "," + std::to_string(c) + ")");
                }
        }
        stats_.distinct_input_operands = input_operands_.size();
        return stats_;
    }

    const IoStats& stats() const { return stats_; }

  private:
    struct Cell {
        uint32_t ver;
        double val;
    };

    long long M_;
    Registry reg_;
    ReplayContext* ctx_;
    IoStats stats_;
    std::unordered_map<uint64_t, Cell> resident_;
    std::unordered_map<uint64_t, Cell> stored_;
    std::unordered_set<uint64_t> input_operands_;

    const MatrixDecl* find_input_decl(Tag t) const {
        for (const auto& d : reg_.inputs)
            if (d.tag == t) return &d;
        return nullptr;
    }

    void place_resident(const ValueId& id, double val) {
        auto [it, inserted] = resident_.try_emplace(id.slot_key(), Cell{id.ver, val});
        if (!inserted) {
            it->second = Cell{id.ver, val};
            return;
        }
        if (static_cast<long long>(resident_.size()) > M_) {
            throw capacity_exceeded_error("simulate: resident count would exceed M=" +
                                          std::to_string(M_));
        }
        stats_.peak_resident = std::max<unsigned long long>(stats_.peak_resident, resident_.size());
    }

    void do_load(const ValueId& id) {
        ++stats_.loads;
        double val = 0.0;
        if (id.kind == Kind::Input) {
            const MatrixDecl* decl = find_input_decl(id.tag);
            if (!decl || id.row >= static_cast<uint64_t>(decl->rows) ||
                id.col >= static_cast<uint64_t>(decl->cols))
                throw load_unmaterialized_error("simulate: load of undeclared input cell");
            if (ctx_) val = ctx_->input_value(id);
        } else {
            auto it = stored_.find(id.slot_key());
            if (it == stored_.end() || it->second.ver != id.ver)
                throw load_unmaterialized_error("simulate: load of a value never stored (or stale version)");
            val = it->second.val;
        }
        place_resident(id, val);
    }

    void do_store(const ValueId& id) {
        auto it = resident_.find(id.slot_key());
        if (it == resident_.end() || it->second.ver != id.ver)
            throw operand_not_resident_error("simulate: store of a non-resident value");
        ++stats_.stores;
        stored_[id.slot_key()] = it->second;
        if (ctx_ && id.kind == Kind::Output && id.tag == Tag::Y)
            ctx_->result.at(id.row, id.col) = it->second.val;
    }

    double operand(const ValueId& id) {
        auto it = resident_.find(id.slot_key());
        if (it == resident_.end() || it->second.ver != id.ver)
            throw operand_not_resident_error("simulate: compute operand not resident");
        if (id.kind == Kind::Input) input_operands_.insert(id.slot_key());
        return it->second.val;
    }

    void do_compute(const TraceOp& op) {
        ++stats_.computes;
        const bool const_like = op.ck == ComputeKind::Const ||
                                (op.ck == ComputeKind::Feature && op.ins.empty());
        if (op.ins.empty() && !const_like)
            throw argument_error("simulate: compute with no inputs");
        double vals[3] = {0, 0, 0};
        const size_t nin = op.ins.size();
        for (size_t i = 0; i < nin; ++i) {
            const double v = operand(op.ins[i]);
            if (i < 3) vals[i] = v;
        }
        double out = 0.0;
        if (ctx_) {
            switch (op.ck) {
                case ComputeKind::Feature: out = ctx_->feature_value(op.target); break;
                case ComputeKind::Const: out = op.imm; break;
                case ComputeKind::Mac:
                    out = nin == 3 ? vals[0] + vals[1] * vals[2] : vals[0] * vals[1];
                    break;
                case ComputeKind::Add: out = vals[0] + vals[1]; break;
                case ComputeKind::Sub: out = vals[0] - vals[1]; break;
                case ComputeKind::Mul: out = vals[0] * vals[1]; break;
                case ComputeKind::Div: out = vals[0] / vals[1]; break;
                case ComputeKind::Exp: out = nin == 2 ? std::exp(vals[0] - vals[1]) : std::exp(vals[0]); break;
                case ComputeKind::Max: out = nin == 1 ? vals[0] : std::max(vals[0], vals[1]); break;
                case ComputeKind::Scale: out = op.imm * vals[0]; break;
                case ComputeKind::Copy: out = vals[0]; break;
            }
        }
        place_resident(op.target, out);
    }

    void do_evict(const ValueId& id) {
        auto it = resident_.find(id.slot_key());
        if (it == resident_.end()) {
            ++stats_.evict_warnings;
            return;
        }
        resident_.erase(it);
    }
};

inline IoStats simulate(const std::vector<TraceOp>& trace, long long M, const Registry& reg,
                        ReplayContext* ctx = nullptr) {
    SimEngine eng(M, reg, ctx);
    for (const auto& op : trace) eng.step(op);
    return eng.finish();
}

inline std::string format_id(const ValueId& id) {
    std::string s = kind_name(id.kind);
    s += ':';
    s += tag_name(id.tag);
    s += ':' + std::to_string(id.row) + ':' + std::to_string(id.col) + ':' + std::to_string(id.ver);
    return s;
}

// One op per line: `L id | S id | C out <- in1,in2,... | E id`.
inline void dump_op(std::ostream& os, const TraceOp& op) {
    switch (op.op) {
        case OpType::Load: os << "L " << format_id(op.target) << '\n'; break;
        case OpType::Store: os << "S " << format_id(op.target) << '\n'; break;
        case OpType::Evict: os << "E " << format_id(op.target) << '\n'; break;
        case OpType::Compute: {
            os << "C " << format_id(op.target) << " <- ";
            for (size_t i = 0; i < op.ins.size(); ++i) {
                if (i) os << ',';
                os << format_id(op.ins[i]);
            }
            os << '\n';
            break;
        }
    }
}

inline void dump_trace(std::ostream& os, const std::vector<TraceOp>& trace) {
    for (const auto& op : trace) dump_op(os, op);
}

} // namespace attnio
