#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace toolwear {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Row-vector convention throughout:
/// a length-m input times an m-by-n matrix yields a length-n result.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

inline bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

/// xU + hW + b with x: 1xM, U: MxN, h: 1xK, W: KxN, b: 1xN.
inline Vector affine(const Vector& x, const Matrix& U,
                     const Vector& h, const Matrix& W, const Vector& b) {
    require(U.rows == x.size() && W.rows == h.size(),
            "affine: input lengths do not match matrix row counts");
    require(U.cols == b.size() && W.cols == b.size(),
            "affine: matrix column counts do not match bias length");
    Vector out = b;
    for (std::size_t r = 0; r < U.rows; ++r) {
        const double xr = x[r];
        for (std::size_t c = 0; c < U.cols; ++c) out[c] += xr * U(r, c);
    }
    for (std::size_t r = 0; r < W.rows; ++r) {
        const double hr = h[r];
        for (std::size_t c = 0; c < W.cols; ++c) out[c] += hr * W(r, c);
    }
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vector sigmoid(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
    return out;
}

inline Vector tanh_act(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
    return out;
}

/// splitmix64 step; used to derive independent sub-seeds from one base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of the engine output.
/// std::uniform_real_distribution is not bit-portable across standard
/// libraries, so the mapping is spelled out here.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Glorot-style uniform init on [-s, s], s = sqrt(6 / (rows + cols)).
inline Matrix init_params(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    require(rows >= 1 && cols >= 1, "init_params: rows and cols must be >= 1");
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::mt19937_64 rng(seed);
    Matrix m(rows, cols);
    for (double& x : m.data) x = s * (2.0 * uniform01(rng) - 1.0);
    return m;
}

}  // namespace toolwear
