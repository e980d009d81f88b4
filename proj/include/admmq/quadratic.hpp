// Quantized least squares through the shared ADMM core: minimize
// f(w) = 0.5 w^T A w - b^T w over binary/ternary level sets. The proximal
// step is solved exactly (the augmented subproblem is the linear system
// (A + rho I) w = b + rho (q - u)) or by plain gradient descent; both routes
// minimize the same augmented Lagrangian as the network path.
#pragma once

#include <cmath>
#include <vector>

#include <admmq/admm.hpp>
#include <admmq/common.hpp>
#include <admmq/tensor.hpp>

namespace admmq {

struct QuadraticObjective {
  std::size_t n = 0;
  std::vector<double> A;  // n x n, symmetric positive definite, row-major
  std::vector<double> b;  // n

  double value(const Tensor& w) const {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * w[j];
      quad += w[i] * acc;
      lin += b[i] * w[i];
    }
    return 0.5 * quad - lin;
  }

  void gradient(const Tensor& w, Tensor& g) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * w[j];
      g[i] = acc - b[i];
    }
  }
};

// Gaussian elimination with partial pivoting; fine at the dimensions used
// here (n <= a few dozen).
inline std::vector<double> solve_linear(std::size_t n, std::vector<double> M,
                                        std::vector<double> rhs) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(M[r * n + col]) > std::fabs(M[piv * n + col])) piv = r;
    if (M[piv * n + col] == 0.0)
      throw DivergenceError("solve_linear: singular system");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(M[piv * n + c], M[col * n + c]);
      std::swap(rhs[piv], rhs[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = M[r * n + col] / M[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) M[r * n + c] -= f * M[col * n + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= M[i * n + j] * x[j];
    x[i] = acc / M[i * n + i];
  }
  return x;
}

// Exact proximal step: argmin_w 0.5 w^T A w - b^T w + rho/2 ||w - (q-u)||^2.
inline Tensor quadratic_proximal_exact(const QuadraticObjective& f, double rho,
                                       const Tensor& q, const Tensor& u) {
  std::vector<double> M = f.A;
  std::vector<double> rhs = f.b;
  for (std::size_t i = 0; i < f.n; ++i) {
    M[i * f.n + i] += rho;
    rhs[i] += rho * (q[i] - u[i]);
  }
  std::vector<double> x = solve_linear(f.n, std::move(M), std::move(rhs));
  Tensor w({f.n});
  for (std::size_t i = 0; i < f.n; ++i) w[i] = x[i];
  return w;
}

// Inexact proximal step: `steps` gradient-descent iterations on the same
// augmented objective. Exists to mirror the network path's first-order
// W-update on a problem with a checkable closed form.
inline void quadratic_proximal_gd(const QuadraticObjective& f, double rho,
                                  const Tensor& q, const Tensor& u, Tensor& w,
                                  int steps, double lr) {
  Tensor g({f.n});
  for (int s = 0; s < steps; ++s) {
    f.gradient(w, g);
    for (std::size_t i = 0; i < f.n; ++i)
      g[i] += rho * (w[i] - q[i] + u[i]);
    for (std::size_t i = 0; i < f.n; ++i) w[i] -= lr * g[i];
  }
}

enum class ProximalKind { exact, gradient_descent };

struct QuadraticAdmmResult {
  Tensor w;           // hard-projected, feasible
  double objective = 0.0;
  double alpha = 0.0;
  AdmmState state;
  std::vector<TraceRow> trace;
  bool converged = false;
  bool budget_exhausted = false;
};

inline QuadraticAdmmResult run_admm_quadratic(
    const QuadraticObjective& f, QuantMode mode, const Tensor& w0,
    const AdmmLoopConfig& cfg, ProximalKind kind = ProximalKind::exact,
    int gd_steps = 200, double gd_lr = 1e-2) {
  QuadraticAdmmResult out;
  out.w = w0;

  AdmmState st;
  AdmmLayerState ls;
  ls.layer_index = 0;
  ls.name = "w";
  ls.mode = mode;
  ls.q = project_optimal(out.w, mode);
  ls.u = Tensor(out.w.shape());
  st.layers.push_back(std::move(ls));

  AdmmHooks hooks;
  hooks.proximal = [&](int) {
    AdmmLayerState& l = st.layers[0];
    if (kind == ProximalKind::exact)
      out.w = quadratic_proximal_exact(f, l.rho, l.q.values, l.u);
    else
      quadratic_proximal_gd(f, l.rho, l.q.values, l.u, out.w, gd_steps, gd_lr);
    return f.value(out.w);
  };
  hooks.metric = [&]() { return f.value(st.layers[0].q.values); };

  AdmmLoopResult r = run_admm_loop({&out.w}, st, cfg, hooks);
  out.state = std::move(st);
  out.trace = std::move(r.trace);
  out.converged = r.converged;
  out.budget_exhausted = r.budget_exhausted;
  out.alpha = out.state.layers[0].q.alpha;
  out.objective = f.value(out.w);
  return out;
}

}  // namespace admmq
