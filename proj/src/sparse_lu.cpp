#include "acuc/sparse_lu.hpp"

#include <algorithm>
#include <cmath>

namespace acuc {

bool SparseLU::factor(const SparseColumns& cols, double pivot_tol,
                      const std::vector<int>* col_order) {
  n_ = static_cast<int>(cols.size());
  col_order_.resize(n_);
  pivot_row_.assign(n_, -1);
  row_step_.assign(n_, -1);
  col_step_.assign(n_, -1);
  lcols_.assign(n_, {});
  ucols_.assign(n_, {});
  diag_.assign(n_, 0.0);

  if (col_order) {
    col_order_ = *col_order;
    order_pos_.assign((size_t)n_, 0);
    for (int s = 0; s < n_; ++s) order_pos_[(size_t)col_order_[(size_t)s]] = s;
  } else {
    // Process columns by increasing nonzero count; cheap fill heuristic.
    for (int j = 0; j < n_; ++j) col_order_[j] = j;
    std::stable_sort(col_order_.begin(), col_order_.end(),
                     [&cols](int a, int b) {
                       return cols[(size_t)a].size() < cols[(size_t)b].size();
                     });
  }

  std::vector<double> work(n_, 0.0);
  std::vector<int> pattern;      // touched rows in work
  std::vector<int> reach;        // elimination steps to apply
  std::vector<char> step_seen(n_, 0);
  std::vector<int> stack;
  pattern.reserve(64);
  reach.reserve(64);

  for (int s = 0; s < n_; ++s) {
    const int j = col_order_[(size_t)s];
    col_step_[(size_t)j] = s;
    pattern.clear();
    reach.clear();

    for (const auto& [r, v] : cols[(size_t)j]) {
      if (work[(size_t)r] == 0.0) pattern.push_back(r);
      work[(size_t)r] += v;
    }
    // Collect the steps whose L-columns can touch this pattern (DFS over
    // the dependency graph), then apply them in increasing step order.
    stack.clear();
    for (const auto& [r, v] : cols[(size_t)j]) {
      int st = row_step_[(size_t)r];
      if (st >= 0 && !step_seen[(size_t)st]) {
        step_seen[(size_t)st] = 1;
        stack.push_back(st);
      }
    }
    while (!stack.empty()) {
      int st = stack.back();
      stack.pop_back();
      reach.push_back(st);
      for (const auto& [r, v] : lcols_[(size_t)st]) {
        int st2 = row_step_[(size_t)r];
        if (st2 >= 0 && !step_seen[(size_t)st2]) {
          step_seen[(size_t)st2] = 1;
          stack.push_back(st2);
        }
      }
    }
    std::sort(reach.begin(), reach.end());
    for (int st : reach) {
      step_seen[(size_t)st] = 0;
      const double piv = work[(size_t)pivot_row_[(size_t)st]];
      if (piv == 0.0) continue;
      for (const auto& [r, l] : lcols_[(size_t)st]) {
        if (work[(size_t)r] == 0.0) pattern.push_back(r);
        work[(size_t)r] -= piv * l;
      }
    }

    // Pivot: largest magnitude among non-pivotal rows, lowest row id on ties.
    int best = -1;
    double best_abs = 0.0;
    for (int r : pattern) {
      if (row_step_[(size_t)r] >= 0) continue;
      double a = std::fabs(work[(size_t)r]);
      if (a > best_abs || (a == best_abs && best >= 0 && r < best)) {
        best = r;
        best_abs = a;
      }
    }
    if (best < 0 || best_abs <= pivot_tol) {
      for (int r : pattern) work[(size_t)r] = 0.0;
      return false;
    }
    if (col_order) {
      // Threshold pivoting: among acceptably large entries take the row
      // scheduled soonest, which keeps fill near the provided ordering.
      int best_pos = order_pos_[(size_t)best];
      for (int r : pattern) {
        if (row_step_[(size_t)r] >= 0) continue;
        double a = std::fabs(work[(size_t)r]);
        if (a >= 0.1 * best_abs && order_pos_[(size_t)r] < best_pos) {
          best = r;
          best_pos = order_pos_[(size_t)r];
        }
      }
    }

    const double piv = work[(size_t)best];
    diag_[(size_t)s] = piv;
    pivot_row_[(size_t)s] = best;
    row_step_[(size_t)best] = s;
    auto& lcol = lcols_[(size_t)s];
    auto& ucol = ucols_[(size_t)s];
    for (int r : pattern) {
      double v = work[(size_t)r];
      work[(size_t)r] = 0.0;
      if (r == best || v == 0.0) continue;
      int st = row_step_[(size_t)r];
      if (st >= 0 && st < s)
        ucol.emplace_back(st, v);  // above the diagonal, keyed by step
      else if (st < 0)
        lcol.emplace_back(r, v / piv);
    }
  }
  return true;
}

void SparseLU::solve(std::vector<double>& x) const {
  // Forward: y = L^{-1} b, in place over original row indices.
  for (int s = 0; s < n_; ++s) {
    const double t = x[(size_t)pivot_row_[(size_t)s]];
    if (t == 0.0) continue;
    for (const auto& [r, l] : lcols_[(size_t)s]) x[(size_t)r] -= t * l;
  }
  // Backward: U z = y; z lives in step space, scattered to columns at the end.
  std::vector<double> z((size_t)n_);
  for (int s = n_ - 1; s >= 0; --s) {
    double t = x[(size_t)pivot_row_[(size_t)s]] / diag_[(size_t)s];
    z[(size_t)s] = t;
    if (t == 0.0) continue;
    for (const auto& [st, u] : ucols_[(size_t)s])
      x[(size_t)pivot_row_[(size_t)st]] -= t * u;
  }
  for (int s = 0; s < n_; ++s) x[(size_t)col_order_[(size_t)s]] = z[(size_t)s];
}

void SparseLU::solve_transpose(std::vector<double>& y) const {
  // U^T w = c (ascending steps), then L^T applied backwards.
  std::vector<double> w((size_t)n_);
  for (int s = 0; s < n_; ++s) {
    double acc = y[(size_t)col_order_[(size_t)s]];
    for (const auto& [st, u] : ucols_[(size_t)s]) acc -= u * w[(size_t)st];
    w[(size_t)s] = acc / diag_[(size_t)s];
  }
  std::vector<double> out((size_t)n_, 0.0);
  for (int s = n_ - 1; s >= 0; --s) {
    double acc = w[(size_t)s];
    for (const auto& [r, l] : lcols_[(size_t)s]) acc -= l * out[(size_t)r];
    out[(size_t)pivot_row_[(size_t)s]] = acc;
  }
  y.swap(out);
}

size_t SparseLU::fill() const {
  size_t nnz = (size_t)n_;
  for (const auto& col : lcols_) nnz += col.size();
  for (const auto& col : ucols_) nnz += col.size();
  return nnz;
}

std::vector<int> SparseLU::rcm_order(const SparseColumns& cols) {
  const int n = static_cast<int>(cols.size());
  std::vector<std::vector<int>> adj((size_t)n);
  for (int j = 0; j < n; ++j) {
    for (const auto& [r, v] : cols[(size_t)j]) {
      if (r == j || v == 0.0) continue;
      adj[(size_t)j].push_back(r);
      adj[(size_t)r].push_back(j);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  std::vector<int> degree((size_t)n);
  for (int j = 0; j < n; ++j) degree[(size_t)j] = (int)adj[(size_t)j].size();

  std::vector<int> order;
  order.reserve((size_t)n);
  std::vector<char> seen((size_t)n, 0);
  std::vector<int> queue;
  for (int pass = 0; (int)order.size() < n; ++pass) {
    // Start each component from a minimum-degree node.
    int start = -1;
    for (int j = 0; j < n; ++j) {
      if (seen[(size_t)j]) continue;
      if (start < 0 || degree[(size_t)j] < degree[(size_t)start]) start = j;
    }
    queue.clear();
    queue.push_back(start);
    seen[(size_t)start] = 1;
    for (size_t head = 0; head < queue.size(); ++head) {
      int u = queue[head];
      order.push_back(u);
      std::vector<int> next;
      for (int w : adj[(size_t)u])
        if (!seen[(size_t)w]) next.push_back(w);
      std::sort(next.begin(), next.end(), [&degree](int a, int b) {
        if (degree[(size_t)a] != degree[(size_t)b])
          return degree[(size_t)a] < degree[(size_t)b];
        return a < b;
      });
      for (int w : next) {
        seen[(size_t)w] = 1;
        queue.push_back(w);
      }
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace acuc
