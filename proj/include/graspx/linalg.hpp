#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "graspx/errors.hpp"

namespace graspx {

/// Dense row-major matrix. Pose counts stay small (N at most in the dozens),
/// so no sparse machinery is needed anywhere in the library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(a_.data() + i * cols_, cols_);
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

/// Solves A x = b by Gaussian elimination with partial pivoting. A is taken
/// by value and destroyed. Throws SingularSystem when a pivot degenerates.
inline std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw DimensionMismatch("solve_dense: shape mismatch");

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    if (scale == 0.0) throw SingularSystem("solve_dense: zero matrix");

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
        if (std::abs(a(pivot, k)) <= 1e-13 * scale)
            throw SingularSystem("solve_dense: singular system");
        if (pivot != k) {
            for (std::size_t j = k; j < n; ++j) std::swap(a(k, j), a(pivot, j));
            std::swap(b[k], b[pivot]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }

    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Adjacency list of the support graph of a square nonnegative matrix:
/// edge i -> j iff m(i, j) > 0.
inline std::vector<std::vector<int>> support_graph(const Matrix& m) {
    std::vector<std::vector<int>> adj(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m(i, j) > 0.0) adj[i].push_back(static_cast<int>(j));
    return adj;
}

/// Set of nodes reachable from `start` (inclusive), by iterative DFS.
inline std::vector<bool> reachable_from(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<bool> seen(adj.size(), false);
    std::vector<int> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = true;
                stack.push_back(w);
            }
    }
    return seen;
}

} // namespace graspx
