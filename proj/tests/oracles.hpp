#pragma once

// Independent test oracles. Everything here is deliberately brute force and
// shares no code with the solver paths it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "acuc/lp.hpp"
#include "acuc/model.hpp"

namespace oracle {

// Bit-reproducible uniform helpers on top of the fully specified mt19937_64.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}
inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Exact LP optimum by vertex enumeration. Only valid for bounded feasible
// polytopes with at most ~6 variables. Returns nullopt when no feasible
// vertex exists.
inline std::optional<double> lp_vertex_enumeration(const acuc::LinearProgram& lp) {
  const int n = lp.num_vars;
  struct Plane {
    std::vector<double> a;
    double b;
  };
  std::vector<Plane> planes;
  for (const auto& row : lp.rows) {
    std::vector<double> a((size_t)n, 0.0);
    for (auto [j, v] : row.coeffs) a[(size_t)j] += v;
    if (row.lo > -acuc::kInf) planes.push_back({a, row.lo});
    if (row.hi < acuc::kInf) planes.push_back({a, row.hi});
  }
  for (int j = 0; j < n; ++j) {
    std::vector<double> a((size_t)n, 0.0);
    a[(size_t)j] = 1.0;
    if (lp.lo[(size_t)j] > -acuc::kInf) planes.push_back({a, lp.lo[(size_t)j]});
    if (lp.hi[(size_t)j] < acuc::kInf) planes.push_back({a, lp.hi[(size_t)j]});
  }
  const int P = static_cast<int>(planes.size());
  std::vector<int> pick((size_t)n);
  std::optional<double> best;

  std::vector<std::vector<double>> M;
  auto try_vertex = [&]() {
    // Solve the n x n system by Gaussian elimination with partial pivoting.
    M.assign((size_t)n, std::vector<double>((size_t)n + 1, 0.0));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) M[(size_t)r][(size_t)c] = planes[(size_t)pick[(size_t)r]].a[(size_t)c];
      M[(size_t)r][(size_t)n] = planes[(size_t)pick[(size_t)r]].b;
    }
    for (int c = 0; c < n; ++c) {
      int piv = -1;
      double mx = 1e-9;
      for (int r = c; r < n; ++r) {
        if (std::fabs(M[(size_t)r][(size_t)c]) > mx) {
          mx = std::fabs(M[(size_t)r][(size_t)c]);
          piv = r;
        }
      }
      if (piv < 0) return;  // singular subset
      std::swap(M[(size_t)c], M[(size_t)piv]);
      for (int r = 0; r < n; ++r) {
        if (r == c) continue;
        double f = M[(size_t)r][(size_t)c] / M[(size_t)c][(size_t)c];
        if (f == 0.0) continue;
        for (int cc = c; cc <= n; ++cc) M[(size_t)r][(size_t)cc] -= f * M[(size_t)c][(size_t)cc];
      }
    }
    std::vector<double> x((size_t)n);
    for (int c = 0; c < n; ++c) x[(size_t)c] = M[(size_t)c][(size_t)n] / M[(size_t)c][(size_t)c];
    // Feasibility.
    const double tol = 1e-7;
    for (int j = 0; j < n; ++j) {
      if (x[(size_t)j] < lp.lo[(size_t)j] - tol || x[(size_t)j] > lp.hi[(size_t)j] + tol) return;
    }
    for (const auto& row : lp.rows) {
      double v = 0.0;
      for (auto [j, a] : row.coeffs) v += a * x[(size_t)j];
      if (v < row.lo - tol || v > row.hi + tol) return;
    }
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += lp.obj[(size_t)j] * x[(size_t)j];
    if (!best || obj < *best) best = obj;
  };

  // Enumerate all n-subsets of planes.
  std::vector<int> idx((size_t)n);
  for (int i = 0; i < n; ++i) idx[(size_t)i] = i;
  if (P < n) return std::nullopt;
  while (true) {
    for (int i = 0; i < n; ++i) pick[(size_t)i] = idx[(size_t)i];
    try_vertex();
    int i = n - 1;
    while (i >= 0 && idx[(size_t)i] == P - n + i) --i;
    if (i < 0) break;
    ++idx[(size_t)i];
    for (int k = i + 1; k < n; ++k) idx[(size_t)k] = idx[(size_t)k - 1] + 1;
  }
  return best;
}

// Branch power flows from complex arithmetic: S = V . conj(Y V) on the
// standard pi model with the charging susceptance split across both ends.
struct ComplexFlows {
  double p_fr, q_fr, p_to, q_to;
};
inline ComplexFlows branch_flow_complex(const acuc::AcLine& line, double v_fr,
                                        double v_to, double th_fr, double th_to,
                                        bool u_on) {
  using C = std::complex<double>;
  if (!u_on || !line.in_service) return {0.0, 0.0, 0.0, 0.0};
  C y_sr(line.g_sr, line.b_sr);
  C y_fr_sh(line.g_fr, line.b_fr + line.b_ch / 2.0);
  C y_to_sh(line.g_to, line.b_to + line.b_ch / 2.0);
  C vf = std::polar(v_fr, th_fr);
  C vt = std::polar(v_to, th_to);
  C i_fr = (y_sr + y_fr_sh) * vf - y_sr * vt;
  C i_to = (y_sr + y_to_sh) * vt - y_sr * vf;
  C s_fr = vf * std::conj(i_fr);
  C s_to = vt * std::conj(i_to);
  return {s_fr.real(), s_fr.imag(), s_to.real(), s_to.imag()};
}

// Lossless two-bus power flow: find the angle spread delivering power `p`
// into the receiving bus over a line with series susceptance b_sr (< 0),
// both voltage magnitudes fixed. Solved by bisection on the monotone
// transfer function.
inline std::optional<double> two_bus_angle_bisection(double b_sr, double v1,
                                                     double v2, double p) {
  auto delivered = [&](double d) { return -v1 * v2 * b_sr * std::sin(d); };
  double lo = 0.0, hi = std::asin(1.0);  // [0, pi/2]
  if (delivered(hi) < p) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (delivered(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
