#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "attnio/errors.hpp"

namespace attnio {

// Dense row-major double matrix. Values are immutable by convention once a
// problem instance is built; nothing here is thread-hostile.
struct Matrix {
    long long rows = 0;
    long long cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(long long r, long long c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw argument_error("Matrix: negative dimensions");
    }

    double& at(long long r, long long c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(long long r, long long c) const { return data[static_cast<size_t>(r) * cols + c]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

inline Matrix identity(long long n) {
    Matrix m(n, n);
    for (long long i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (long long i = 0; i < a.rows; ++i)
        for (long long j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

// Reference product in plain double precision. This is the numeric oracle for
// every schedule's computed values, so it stays a straight triple loop.
inline Matrix matmul_ref(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw argument_error("matmul_ref: shape mismatch");
    Matrix out(a.rows, b.cols);
    for (long long i = 0; i < a.rows; ++i) {
        for (long long k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (long long j = 0; j < b.cols; ++j) out.at(i, j) += aik * b.at(k, j);
        }
    }
    return out;
}

// SplitMix64: the fixed counter-based generator used for problem generation.
// Chosen so golden files replay bit-for-bit on any platform.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [-bound, bound].
    double next_symmetric(double bound) { return -bound + 2.0 * bound * next_unit(); }
};

struct ProblemInstance {
    long long n = 0;
    long long d = 0;
    double B = 0.0;
    double vmax = 0.0;
    uint64_t seed = 0;
    Matrix Q, K, V;
};

// Deterministic: fill order is Q, then K, then V, row-major.
inline ProblemInstance gen_problem(long long n, long long d, double B, double vmax,
                                   uint64_t seed) {
    if (n < 1 || d < 1) throw argument_error("gen_problem: n and d must be >= 1");
    if (B < 0 || vmax < 0 || !std::isfinite(B) || !std::isfinite(vmax))
        throw argument_error("gen_problem: bounds must be finite and non-negative");
    ProblemInstance p;
    p.n = n;
    p.d = d;
    p.B = B;
    p.vmax = vmax;
    p.seed = seed;
    p.Q = Matrix(n, d);
    p.K = Matrix(n, d);
    p.V = Matrix(n, d);
    SplitMix64 rng(seed);
    for (double& v : p.Q.data) v = rng.next_symmetric(B);
    for (double& v : p.K.data) v = rng.next_symmetric(B);
    for (double& v : p.V.data) v = rng.next_symmetric(vmax);
    return p;
}

// Textual matrix format: first line "rows cols", then one row per line.
// max_digits10 keeps the round trip exact.
inline void write_matrix(std::ostream& os, const Matrix& m) {
    os.precision(std::numeric_limits<double>::max_digits10);
    os << m.rows << ' ' << m.cols << '\n';
    for (long long i = 0; i < m.rows; ++i) {
        for (long long j = 0; j < m.cols; ++j) {
            if (j) os << ' ';
            os << m.at(i, j);
        }
        os << '\n';
    }
}

inline Matrix read_matrix(std::istream& is) {
    long long r = -1, c = -1;
    if (!(is >> r >> c) || r < 0 || c < 0) throw argument_error("read_matrix: bad header");
    Matrix m(r, c);
    for (auto& v : m.data)
        if (!(is >> v)) throw argument_error("read_matrix: truncated data");
    if (!m.all_finite()) throw argument_error("read_matrix: non-finite entry");
    return m;
}

} // namespace attnio
