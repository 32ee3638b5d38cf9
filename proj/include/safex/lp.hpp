#pragma once

// Small dense linear-programming machinery for the conservative-input
// constructions: a two-phase primal simplex with Bland's rule over
// problems of at most a few tens of rows/columns.

#include "safex/core.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace safex {

// Find z with G z <= g (componentwise).
struct LinearFeasibilityProblem {
  Matrix G;
  Vector g;

  LinearFeasibilityProblem(Matrix G_, Vector g_) : G(std::move(G_)), g(std::move(g_)) {
    require_shape(G.rows() == g.size(), "LinearFeasibilityProblem: G rows vs g");
    require_domain(G.rows() >= 1 && G.cols() >= 1, "LinearFeasibilityProblem: empty problem");
    require_domain(all_finite(G) && all_finite(g), "LinearFeasibilityProblem: non-finite entries");
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status;
  Vector x;          // meaningful for Optimal
  double objective;  // c^T x for Optimal
};

namespace detail {

constexpr double kSimplexTol = 1e-11;

// Primal simplex on an explicit dictionary tableau. `tab` holds B^{-1}A
// with the rhs in the last column; `basis[i]` is the variable index basic
// in row i. Bland's rule: entering = lowest-index negative reduced cost,
// leaving = lowest-index variable among minimum-ratio rows.
inline bool simplex_iterate(std::vector<std::vector<double>>& tab, std::vector<int>& basis,
                            const std::vector<double>& cost) {
  const std::size_t rows = tab.size();
  const std::size_t cols = cost.size();
  for (int iter = 0; iter < 100000; ++iter) {
    // reduced costs r_j = c_j - sum_i c_{basis[i]} tab[i][j]
    int entering = -1;
    for (std::size_t j = 0; j < cols; ++j) {
      double r = cost[j];
      for (std::size_t i = 0; i < rows; ++i) r -= cost[basis[i]] * tab[i][j];
      if (r < -kSimplexTol) { entering = static_cast<int>(j); break; }
    }
    if (entering < 0) return true;  // optimal

    int leave_row = -1;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (tab[i][entering] > kSimplexTol) {
        double ratio = tab[i][cols] / tab[i][entering];
        if (leave_row < 0 || ratio < best_ratio - kSimplexTol ||
            (ratio < best_ratio + kSimplexTol && basis[i] < basis[leave_row])) {
          leave_row = static_cast<int>(i);
          best_ratio = ratio;
        }
      }
    }
    if (leave_row < 0) return false;  // unbounded in the entering direction

    const double pivot = tab[leave_row][entering];
    for (double& v : tab[leave_row]) v /= pivot;
    for (std::size_t i = 0; i < rows; ++i) {
      if (static_cast<int>(i) == leave_row) continue;
      const double factor = tab[i][entering];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= cols; ++j) tab[i][j] -= factor * tab[leave_row][j];
    }
    basis[leave_row] = entering;
  }
  throw std::runtime_error("simplex: iteration limit exceeded");
}

}  // namespace detail

// Minimize c^T x subject to A x <= b over free x, via variable splitting,
// slacks, and phase-1 artificials.
inline LpResult lp_minimize(const Vector& c, const Matrix& A, const Vector& b) {
  require_shape(A.cols() == c.size() && A.rows() == b.size(), "lp_minimize: dimensions");
  const int v = static_cast<int>(c.size());
  const int p = static_cast<int>(b.size());

  // columns: x+ (v) | x- (v) | slack (p) | artificial (rows with b < 0)
  std::vector<int> art_col(p, -1);
  int n_art = 0;
  for (int i = 0; i < p; ++i)
    if (b[i] < 0.0) art_col[i] = n_art++;
  const int cols = 2 * v + p + n_art;

  std::vector<std::vector<double>> tab(p, std::vector<double>(cols + 1, 0.0));
  std::vector<int> basis(p);
  for (int i = 0; i < p; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < v; ++j) {
      tab[i][j] = sign * A(i, j);
      tab[i][v + j] = -sign * A(i, j);
    }
    tab[i][2 * v + i] = sign;  // slack (coefficient -1 on flipped rows)
    tab[i][cols] = sign * b[i];
    if (art_col[i] >= 0) {
      tab[i][2 * v + p + art_col[i]] = 1.0;
      basis[i] = 2 * v + p + art_col[i];
    } else {
      basis[i] = 2 * v + i;
    }
  }

  if (n_art > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (int j = 2 * v + p; j < cols; ++j) phase1[j] = 1.0;
    detail::simplex_iterate(tab, basis, phase1);  // bounded below by 0
    double obj1 = 0.0;
    for (int i = 0; i < p; ++i)
      if (basis[i] >= 2 * v + p) obj1 += tab[i][cols];
    if (obj1 > 1e-9) return {LpStatus::Infeasible, Vector(), 0.0};

    // Pivot any degenerate artificial out of the basis, or drop its
    // (redundant) row entirely.
    for (std::size_t i = 0; i < tab.size();) {
      if (basis[i] < 2 * v + p) { ++i; continue; }
      int pivot_col = -1;
      for (int j = 0; j < 2 * v + p; ++j)
        if (std::abs(tab[i][j]) > detail::kSimplexTol) { pivot_col = j; break; }
      if (pivot_col < 0) {
        tab.erase(tab.begin() + static_cast<std::ptrdiff_t>(i));
        basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
      const double pv = tab[i][pivot_col];
      for (double& val : tab[i]) val /= pv;
      for (std::size_t r = 0; r < tab.size(); ++r) {
        if (r == i) continue;
        const double factor = tab[r][pivot_col];
        if (factor == 0.0) continue;
        for (int j = 0; j <= cols; ++j) tab[r][j] -= factor * tab[i][j];
      }
      basis[i] = pivot_col;
      ++i;
    }
  }

  std::vector<double> phase2(cols, 0.0);
  for (int j = 0; j < v; ++j) {
    phase2[j] = c[j];
    phase2[v + j] = -c[j];
  }
  // artificial columns priced out of play
  for (int j = 2 * v + p; j < cols; ++j) phase2[j] = 1e30;
  if (!detail::simplex_iterate(tab, basis, phase2))
    return {LpStatus::Unbounded, Vector(), 0.0};

  Vector x = Vector::Zero(v);
  for (std::size_t i = 0; i < tab.size(); ++i) {
    if (basis[i] < v) x[basis[i]] += tab[i][cols];
    else if (basis[i] < 2 * v) x[basis[i] - v] -= tab[i][cols];
  }
  return {LpStatus::Optimal, x, c.dot(x)};
}

// Phase 1 minimizes the maximum constraint violation; if it exceeds the
// 1e-9 slack the problem is reported infeasible. Phase 2 returns the
// feasible point of minimum infinity norm.
inline std::optional<Vector> solve_lp_feasible(const LinearFeasibilityProblem& prob) {
  const int v = static_cast<int>(prob.G.cols());
  const int p = static_cast<int>(prob.G.rows());

  {  // phase 1: min t  s.t.  G z - t <= g, t >= 0
    Matrix A(p + 1, v + 1);
    A.setZero();
    A.topLeftCorner(p, v) = prob.G;
    A.col(v).head(p).setConstant(-1.0);
    A(p, v) = -1.0;
    Vector b(p + 1);
    b.head(p) = prob.g;
    b[p] = 0.0;
    Vector c = Vector::Zero(v + 1);
    c[v] = 1.0;
    LpResult r = lp_minimize(c, A, b);
    if (r.status != LpStatus::Optimal || r.objective > 1e-9) return std::nullopt;
  }

  // phase 2: min s  s.t.  G z <= g, |z_i| <= s, s >= 0
  Matrix A(p + 2 * v + 1, v + 1);
  A.setZero();
  A.topLeftCorner(p, v) = prob.G;
  for (int i = 0; i < v; ++i) {
    A(p + 2 * i, i) = 1.0;
    A(p + 2 * i, v) = -1.0;
    A(p + 2 * i + 1, i) = -1.0;
    A(p + 2 * i + 1, v) = -1.0;
  }
  A(p + 2 * v, v) = -1.0;
  Vector b = Vector::Zero(p + 2 * v + 1);
  b.head(p) = prob.g;
  Vector c = Vector::Zero(v + 1);
  c[v] = 1.0;
  LpResult r = lp_minimize(c, A, b);
  if (r.status != LpStatus::Optimal) return std::nullopt;
  return r.x.head(v).eval();
}

}  // namespace safex
