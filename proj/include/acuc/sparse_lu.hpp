#pragma once

#include <utility>
#include <vector>

namespace acuc {

// Sparse columns: list of (row, value) pairs per column.
using SparseColumn = std::vector<std::pair<int, double>>;
using SparseColumns = std::vector<SparseColumn>;

// Left-looking sparse LU with threshold partial pivoting, used as the basis
// factorization of the simplex solver and for the interior-point KKT systems.
// Columns are processed in a sparsity-driven order; pivot rows are chosen by
// magnitude with a relative threshold so fill stays modest on the banded-ish
// matrices produced by scheduling and network problems.
class SparseLU {
 public:
  // Factor the n x n matrix given by columns. Returns false when a pivot
  // cannot be found (structurally or numerically singular). col_order, when
  // given, overrides the sparsity-driven processing order.
  bool factor(const SparseColumns& cols, double pivot_tol = 1e-11,
              const std::vector<int>* col_order = nullptr);

  // Reverse Cuthill-McKee order of the symmetrized pattern; a good static
  // column order for repeated factorizations of network-shaped systems.
  static std::vector<int> rcm_order(const SparseColumns& cols);

  int dim() const { return n_; }

  // Solve A x = b. b is indexed by row, x by original column.
  void solve(std::vector<double>& x) const;
  // Solve A^T y = c. c is indexed by original column, y by row.
  void solve_transpose(std::vector<double>& y) const;

  // Total stored nonzeros in L and U (diagnostics).
  size_t fill() const;

 private:
  int n_ = 0;
  // Step s eliminates basis column col_order_[s] with pivot row pivot_row_[s].
  std::vector<int> col_order_;
  std::vector<int> order_pos_;  // row -> position in the provided order
  std::vector<int> pivot_row_;
  std::vector<int> row_step_;  // original row -> elimination step
  std::vector<int> col_step_;  // original column -> elimination step
  // L columns: entries in not-yet-pivotal rows, divided by the pivot.
  SparseColumns lcols_;
  // U columns: entries in pivotal rows keyed by their step index.
  SparseColumns ucols_;
  std::vector<double> diag_;
};

}  // namespace acuc
