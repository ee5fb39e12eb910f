#pragma once

#include <cstddef>
#include <vector>

#include "martrep/errors.hpp"
#include "martrep/scalar.hpp"

namespace martrep {

// Small dense matrices for the per-node linear algebra: rank certificates,
// nullspace bases, and weighted least-squares solves. Node systems have at
// most a handful of rows/columns, so plain Gaussian elimination is enough;
// the same kernel runs exactly over rationals and with pivot thresholds over
// doubles.
template <class S>
class Mat {
 public:
  Mat() : rows_(0), cols_(0) {}
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, S(0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  S& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<S> a_;
};

namespace detail {

template <class S>
S pivot_threshold(const Mat<S>& m) {
  if constexpr (scalar_traits<S>::exact) {
    return S(0);
  } else {
    S max_abs(0);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (abs_value(m(i, j)) > max_abs) max_abs = abs_value(m(i, j));
    S floor = S(1e-12);
    S scaled = max_abs * S(1e-10);
    return scaled > floor ? scaled : floor;
  }
}

// Row echelon reduction in place; returns the pivot column per pivot row.
// An optional right-hand side matrix receives the same row operations.
template <class S>
std::vector<std::size_t> echelon(Mat<S>& m, Mat<S>* rhs, const S& threshold) {
  std::vector<std::size_t> pivot_cols;
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols() && row < m.rows(); ++col) {
    std::size_t best = row;
    S best_abs = abs_value(m(row, col));
    for (std::size_t i = row + 1; i < m.rows(); ++i) {
      if (abs_value(m(i, col)) > best_abs) {
        best = i;
        best_abs = abs_value(m(i, col));
      }
    }
    if (!(best_abs > threshold)) continue;
    if (best != row) {
      for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(row, j), m(best, j));
      if (rhs)
        for (std::size_t j = 0; j < rhs->cols(); ++j) std::swap((*rhs)(row, j), (*rhs)(best, j));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == row) continue;
      if (abs_value(m(i, col)) > S(0)) {
        S factor = m(i, col) / m(row, col);
        for (std::size_t j = col; j < m.cols(); ++j) m(i, j) -= factor * m(row, j);
        m(i, col) = S(0);
        if (rhs)
          for (std::size_t j = 0; j < rhs->cols(); ++j) (*rhs)(i, j) -= factor * (*rhs)(row, j);
      }
    }
    pivot_cols.push_back(col);
    ++row;
  }
  return pivot_cols;
}

}  // namespace detail

template <class S>
std::size_t rank(Mat<S> m) {
  S threshold = detail::pivot_threshold(m);
  return detail::echelon(m, static_cast<Mat<S>*>(nullptr), threshold).size();
}

// Basis of the right nullspace, one vector per column of the result.
template <class S>
Mat<S> nullspace(Mat<S> m) {
  const std::size_t n = m.cols();
  S threshold = detail::pivot_threshold(m);
  std::vector<std::size_t> pivots = detail::echelon(m, static_cast<Mat<S>*>(nullptr), threshold);
  std::vector<bool> is_pivot(n, false);
  for (std::size_t c : pivots) is_pivot[c] = true;
  std::vector<std::size_t> free_cols;
  for (std::size_t j = 0; j < n; ++j)
    if (!is_pivot[j]) free_cols.push_back(j);

  Mat<S> basis(n, free_cols.size());
  for (std::size_t fi = 0; fi < free_cols.size(); ++fi) {
    std::size_t fc = free_cols[fi];
    basis(fc, fi) = S(1);
    for (std::size_t pr = pivots.size(); pr-- > 0;) {
      std::size_t pc = pivots[pr];
      S acc(0);
      for (std::size_t j = pc + 1; j < n; ++j) acc += m(pr, j) * basis(j, fi);
      basis(pc, fi) = -acc / m(pr, pc);
    }
  }
  return basis;
}

// Any solution of A x = b (free variables set to zero). Throws if the system
// is inconsistent beyond the pivot threshold.
template <class S>
std::vector<S> solve(Mat<S> a, std::vector<S> b) {
  if (a.rows() != b.size()) throw ContractError("solve: dimension mismatch");
  Mat<S> rhs(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) rhs(i, 0) = b[i];
  S threshold = detail::pivot_threshold(a);
  std::vector<std::size_t> pivots = detail::echelon(a, &rhs, threshold);
  for (std::size_t i = pivots.size(); i < a.rows(); ++i) {
    if (abs_value(rhs(i, 0)) > threshold)
      throw ContractError("solve: inconsistent system");
  }
  std::vector<S> x(a.cols(), S(0));
  for (std::size_t pr = pivots.size(); pr-- > 0;) {
    std::size_t pc = pivots[pr];
    S acc = rhs(pr, 0);
    for (std::size_t j = pc + 1; j < a.cols(); ++j) acc -= a(pr, j) * x[j];
    x[pc] = acc / a(pr, pc);
  }
  return x;
}

// Minimum-norm solution of the (consistent) normal equations G xi = b with G
// symmetric positive semidefinite: solve G^2 z = b, xi = G z. The residual of
// the underlying least-squares problem does not depend on the choice made
// here; the minimum-norm rule only pins down xi on degenerate nodes.
template <class S>
std::vector<S> solve_min_norm_psd(const Mat<S>& g, const std::vector<S>& b) {
  const std::size_t n = g.rows();
  Mat<S> g2(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      S acc(0);
      for (std::size_t k = 0; k < n; ++k) acc += g(i, k) * g(k, j);
      g2(i, j) = acc;
    }
  std::vector<S> z = solve(g2, b);
  std::vector<S> xi(n, S(0));
  for (std::size_t i = 0; i < n; ++i) {
    S acc(0);
    for (std::size_t k = 0; k < n; ++k) acc += g(i, k) * z[k];
    xi[i] = acc;
  }
  return xi;
}

}  // namespace martrep
