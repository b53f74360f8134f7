#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "anisodiff/vec.hpp"

namespace anisodiff {

/// Dense LU with partial pivoting. Fallback path and reference solver.
class DenseLU {
public:
    explicit DenseLU(std::vector<double> a, int n) : a_(std::move(a)), n_(n), piv_(n) {
        for (int k = 0; k < n_; ++k) {
            int p = k;
            double best = std::abs(at(k, k));
            for (int i = k + 1; i < n_; ++i) {
                const double v = std::abs(at(i, k));
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (best == 0.0) throw NumericalError("singular linear system (dense factorization)");
            piv_[k] = p;
            // swap only the active columns so multipliers stay in as-computed
            // positions; solve() interleaves the same swaps with elimination
            if (p != k)
                for (int j = k; j < n_; ++j) std::swap(at(k, j), at(p, j));
            const double inv = 1.0 / at(k, k);
            for (int i = k + 1; i < n_; ++i) {
                const double m = at(i, k) * inv;
                at(i, k) = m;
                for (int j = k + 1; j < n_; ++j) at(i, j) -= m * at(k, j);
            }
        }
    }

    void solve(std::span<double> b) const {
        for (int k = 0; k < n_; ++k) {
            if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
            for (int i = k + 1; i < n_; ++i) b[i] -= at(i, k) * b[k];
        }
        for (int k = n_ - 1; k >= 0; --k) {
            for (int j = k + 1; j < n_; ++j) b[k] -= at(k, j) * b[j];
            b[k] /= at(k, k);
        }
    }

private:
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    std::vector<double> a_;
    int n_;
    std::vector<int> piv_;
};

/// LU factorization of a banded matrix with kl sub- and ku superdiagonals,
/// partial pivoting (fill-in widens the upper band by kl). LAPACK-style band
/// storage: entry (i, j) lives at row kl + ku + i - j of column j.
class BandedLU {
public:
    BandedLU(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), lead_(2 * kl + ku + 1),
          ab_(static_cast<std::size_t>(lead_) * n, 0.0), piv_(n) {}

    /// Accumulate into entry (i, j); callable only before factor().
    void add(int i, int j, double v) { ab_[idx(i, j)] += v; }

    bool factor() {
        for (int k = 0; k < n_; ++k) {
            const int rows_below = std::min(kl_, n_ - 1 - k);
            int p = k;
            double best = std::abs(ab_[idx(k, k)]);
            for (int i = k + 1; i <= k + rows_below; ++i) {
                const double v = std::abs(ab_[idx(i, k)]);
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (best == 0.0) return false;
            piv_[k] = p;
            const int cols = std::min(n_ - 1, k + ku_ + kl_);
            if (p != k)
                for (int j = k; j <= cols; ++j) std::swap(ab_[idx(k, j)], ab_[idx(p, j)]);
            const double inv = 1.0 / ab_[idx(k, k)];
            for (int i = k + 1; i <= k + rows_below; ++i) {
                const double m = ab_[idx(i, k)] * inv;
                ab_[idx(i, k)] = m;
                for (int j = k + 1; j <= cols; ++j) ab_[idx(i, j)] -= m * ab_[idx(k, j)];
            }
        }
        return true;
    }

    void solve(std::span<double> b) const {
        for (int k = 0; k < n_; ++k) {
            if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
            const int rows_below = std::min(kl_, n_ - 1 - k);
            for (int i = k + 1; i <= k + rows_below; ++i) b[i] -= ab_[idx(i, k)] * b[k];
        }
        for (int k = n_ - 1; k >= 0; --k) {
            const int cols = std::min(n_ - 1, k + ku_ + kl_);
            for (int j = k + 1; j <= cols; ++j) b[k] -= ab_[idx(k, j)] * b[j];
            b[k] /= ab_[idx(k, k)];
        }
    }

private:
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(j) * lead_ + (kl_ + ku_ + i - j);
    }

    int n_, kl_, ku_, lead_;
    std::vector<double> ab_;
    std::vector<int> piv_;
};

/// Cyclic block tridiagonal matrix with 3x3 blocks: block row i holds
/// lower[i] at block column i-1, diag[i] at i, upper[i] at i+1 (mod n_nodes).
/// Blocks are row-major 3x3.
struct CyclicBlockTridiagonal {
    int n_nodes = 0;
    std::vector<std::array<double, 9>> lower, diag, upper;

    explicit CyclicBlockTridiagonal(int n)
        : n_nodes(n), lower(n, std::array<double, 9>{}), diag(n, std::array<double, 9>{}),
          upper(n, std::array<double, 9>{}) {}

    int dim() const { return 3 * n_nodes; }

    /// Dense row-major copy (for the fallback path and for tests).
    std::vector<double> to_dense() const {
        const int n = dim();
        std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
        auto put = [&](int bi, int bj, const std::array<double, 9>& blk) {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    a[static_cast<std::size_t>(3 * bi + r) * n + (3 * bj + c)] += blk[3 * r + c];
        };
        for (int i = 0; i < n_nodes; ++i) {
            put(i, (i + n_nodes - 1) % n_nodes, lower[i]);
            put(i, i, diag[i]);
            put(i, (i + 1) % n_nodes, upper[i]);
        }
        return a;
    }
};

/// Direct solve of a cyclic block tridiagonal system: banded LU on the
/// acyclic band, Woodbury correction for the two corner blocks, dense LU as a
/// fallback when the stripped band happens to be singular.
inline std::vector<double> solve_cyclic(const CyclicBlockTridiagonal& m,
                                        std::span<const double> rhs) {
    const int nb = m.n_nodes;
    const int n = m.dim();
    if (static_cast<int>(rhs.size()) != n)
        throw ConfigError("right-hand side size does not match the system");
    if (nb < 3) throw ConfigError("cyclic block system needs at least 3 nodes");

    constexpr int kl = 5, ku = 5;
    BandedLU band(n, kl, ku);
    auto add_block = [&](int bi, int bj, const std::array<double, 9>& blk) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) band.add(3 * bi + r, 3 * bj + c, blk[3 * r + c]);
    };
    for (int i = 0; i < nb; ++i) {
        add_block(i, i, m.diag[i]);
        if (i > 0) add_block(i, i - 1, m.lower[i]);
        if (i < nb - 1) add_block(i, i + 1, m.upper[i]);
    }

    auto dense_fallback = [&]() {
        std::vector<double> x(rhs.begin(), rhs.end());
        DenseLU lu(m.to_dense(), n);
        lu.solve(x);
        return x;
    };

    if (!band.factor()) return dense_fallback();

    // Corner blocks as a rank-6 update: M = B + U V^T with
    // U = [I3 in rows 0..2, cols 0..2; I3 in last 3 rows, cols 3..5],
    // V^T rows 0..2 = lower[0] at cols 3n-3..3n-1, rows 3..5 = upper[nb-1] at cols 0..2.
    std::vector<double> x(rhs.begin(), rhs.end());
    band.solve(x);

    std::array<std::vector<double>, 6> z;
    for (int c = 0; c < 6; ++c) {
        z[c].assign(n, 0.0);
        if (c < 3)
            z[c][c] = 1.0;
        else
            z[c][n - 3 + (c - 3)] = 1.0;
        band.solve(z[c]);
    }

    auto vt_dot = [&](const std::vector<double>& v, int r) {
        double s = 0.0;
        if (r < 3)
            for (int c = 0; c < 3; ++c) s += m.lower[0][3 * r + c] * v[n - 3 + c];
        else
            for (int c = 0; c < 3; ++c) s += m.upper[nb - 1][3 * (r - 3) + c] * v[c];
        return s;
    };

    std::vector<double> cap(36, 0.0); // I6 + V^T Z
    for (int r = 0; r < 6; ++r) {
        cap[static_cast<std::size_t>(r) * 6 + r] = 1.0;
        for (int c = 0; c < 6; ++c) cap[static_cast<std::size_t>(r) * 6 + c] += vt_dot(z[c], r);
    }
    std::array<double, 6> y{};
    for (int r = 0; r < 6; ++r) y[r] = vt_dot(x, r);

    try {
        DenseLU cap_lu(std::move(cap), 6);
        cap_lu.solve(std::span<double>(y.data(), 6));
    } catch (const NumericalError&) {
        return dense_fallback();
    }

    for (int c = 0; c < 6; ++c)
        for (int i = 0; i < n; ++i) x[i] -= z[c][i] * y[c];
    return x;
}

} // namespace anisodiff
