#pragma once

// Reference computations used by the tests. Everything here works on raw
// arrays and deliberately avoids the library's recursion code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "invctl/forward_control.h"
#include "invctl/prob_core.h"

namespace oracle {

struct Instance {
  std::size_t xs = 0;
  std::size_t us = 0;
  int horizon = 1;
  std::vector<double> p0;
  std::vector<std::vector<double>> px;    // [k-1][(x*U + u)*X + x']
  std::vector<std::vector<double>> qx;
  std::vector<std::vector<double>> qu;    // [k-1][x*U + u]
  std::vector<std::vector<double>> cost;  // [k-1][x']
};

// Policies as raw arrays: [k-1][x*U + u].
using Policies = std::vector<std::vector<double>>;

inline std::vector<double> random_simplex_rows(std::size_t rows, std::size_t width,
                                               std::mt19937_64& rng,
                                               double zero_prob = 0.0) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      double v = gamma(rng) + 1e-3;
      if (coin(rng) < zero_prob) v = 0.0;
      out[r * width + i] = v;
      total += v;
    }
    if (total == 0.0) {
      out[r * width] = 1.0;
      total = 1.0;
    }
    for (std::size_t i = 0; i < width; ++i) out[r * width + i] /= total;
  }
  return out;
}

inline Instance random_instance(std::mt19937_64& rng, std::size_t max_x = 4,
                                std::size_t max_u = 3, int max_n = 3) {
  std::uniform_int_distribution<std::size_t> dx(2, max_x), du(2, max_u);
  std::uniform_int_distribution<int> dn(1, max_n);
  std::uniform_real_distribution<double> dc(-2.0, 2.0);
  Instance in;
  in.xs = dx(rng);
  in.us = du(rng);
  in.horizon = dn(rng);
  in.p0 = random_simplex_rows(1, in.xs, rng);
  for (int k = 0; k < in.horizon; ++k) {
    in.px.push_back(random_simplex_rows(in.xs * in.us, in.xs, rng));
    in.qx.push_back(random_simplex_rows(in.xs * in.us, in.xs, rng));
    in.qu.push_back(random_simplex_rows(in.xs, in.us, rng));
    std::vector<double> c(in.xs);
    for (double& v : c) v = dc(rng);
    in.cost.push_back(c);
  }
  return in;
}

inline invctl::ControlProblem to_problem(const Instance& in) {
  invctl::ControlProblem pr;
  pr.horizon = in.horizon;
  for (int k = 0; k < in.horizon; ++k) {
    pr.plant.push_back(std::make_shared<invctl::TransitionTable>(in.xs, in.us, in.px[k]));
    pr.reference_plant.push_back(
        std::make_shared<invctl::TransitionTable>(in.xs, in.us, in.qx[k]));
    pr.reference_policy.push_back(
        std::make_shared<invctl::PolicyTable>(in.xs, in.us, in.qu[k]));
  }
  pr.initial = invctl::Pmf(in.p0);
  pr.costs = in.cost;
  return pr;
}

inline std::vector<invctl::PolicyTable> to_tables(const Instance& in, const Policies& pi) {
  std::vector<invctl::PolicyTable> out;
  for (const auto& p : pi) out.emplace_back(in.xs, in.us, p);
  return out;
}

inline Policies random_policies(const Instance& in, std::mt19937_64& rng) {
  Policies pi;
  for (int k = 0; k < in.horizon; ++k) pi.push_back(random_simplex_rows(in.xs, in.us, rng));
  return pi;
}

inline double xlogy_ratio(double p, double q) {
  if (p == 0.0) return 0.0;
  if (q == 0.0) return INFINITY;
  return p * std::log(p / q);
}

// KL(p_{0:N} || q_{0:N}) + E_p[sum_k c_k(x_k)] by enumerating every trajectory
// (x_0, u_1, x_1, ..., u_N, x_N).
inline double brute_force_objective(const Instance& in, const Policies& pi) {
  const std::size_t X = in.xs, U = in.us;
  double total = 0.0;
  std::vector<std::size_t> xs(in.horizon + 1), us(in.horizon + 1);
  // Depth-first enumeration carrying p(traj), q(traj) and accumulated cost.
  auto recurse = [&](auto&& self, int k, double p, double q, double c) -> void {
    if (p == 0.0) return;
    if (k > in.horizon) {
      total += p * (std::log(p / q) + c);
      return;
    }
    const std::size_t x = xs[k - 1];
    for (std::size_t u = 0; u < U; ++u) {
      const double pu = pi[k - 1][x * U + u];
      const double qu = in.qu[k - 1][x * U + u];
      if (pu == 0.0) continue;
      if (qu == 0.0) {
        total = INFINITY;
        return;
      }
      for (std::size_t xn = 0; xn < X; ++xn) {
        const double pn = in.px[k - 1][(x * U + u) * X + xn];
        const double qn = in.qx[k - 1][(x * U + u) * X + xn];
        if (pn == 0.0) continue;
        if (qn == 0.0) {
          total = INFINITY;
          return;
        }
        xs[k] = xn;
        self(self, k + 1, p * pu * pn, q * qu * qn, c + in.cost[k - 1][xn]);
      }
    }
  };
  for (std::size_t x0 = 0; x0 < X; ++x0) {
    xs[0] = x0;
    recurse(recurse, 1, in.p0[x0], in.p0[x0], 0.0);
  }
  return total;
}

// Stage-wise evaluation J = sum_x p0(x) V_0(x) with
// V_{k-1}(x) = sum_u pi_k [ln(pi_k/q^u_k) + KL_k(x,u) + E_{p^x_k}[c_k + V_k]].
// Also returns dJ/dpi_k(u|x) = m_{k-1}(x) [ln(pi/q^u) + 1 + KL + E[c_k + V_k]].
struct ValueAndGradient {
  double value = 0.0;
  Policies grad;
  std::vector<std::vector<double>> marginals;  // m_0..m_{N-1}
};

inline ValueAndGradient decomposed_objective(const Instance& in, const Policies& pi) {
  const std::size_t X = in.xs, U = in.us;
  const int N = in.horizon;
  ValueAndGradient out;
  out.marginals.assign(N, std::vector<double>(X, 0.0));
  out.marginals[0] = in.p0;
  for (int k = 1; k < N; ++k) {
    for (std::size_t x = 0; x < X; ++x) {
      for (std::size_t u = 0; u < U; ++u) {
        const double w = out.marginals[k - 1][x] * pi[k - 1][x * U + u];
        for (std::size_t xn = 0; xn < X; ++xn) {
          out.marginals[k][xn] += w * in.px[k - 1][(x * U + u) * X + xn];
        }
      }
    }
  }
  std::vector<double> v(X, 0.0);  // V_N
  out.grad.assign(N, std::vector<double>(X * U, 0.0));
  for (int k = N; k >= 1; --k) {
    std::vector<double> v_prev(X, 0.0);
    for (std::size_t x = 0; x < X; ++x) {
      for (std::size_t u = 0; u < U; ++u) {
        double kl = 0.0, future = 0.0;
        for (std::size_t xn = 0; xn < X; ++xn) {
          const double p = in.px[k - 1][(x * U + u) * X + xn];
          kl += xlogy_ratio(p, in.qx[k - 1][(x * U + u) * X + xn]);
          future += p * (in.cost[k - 1][xn] + v[xn]);
        }
        const double a = pi[k - 1][x * U + u];
        const double q = in.qu[k - 1][x * U + u];
        const double inner = kl + future;
        v_prev[x] += xlogy_ratio(a, q) + a * inner;
        const double dlog = a > 0.0 ? std::log(a / q) + 1.0 : std::log(1e-300 / q);
        out.grad[k - 1][x * U + u] = out.marginals[k - 1][x] * (dlog + inner);
      }
    }
    v = v_prev;
  }
  for (std::size_t x = 0; x < X; ++x) out.value += in.p0[x] * v[x];
  return out;
}

// Euclidean projection of y onto {p : sum p = 1, p_i >= floor}.
inline std::vector<double> project_simplex(std::vector<double> y, double floor) {
  const std::size_t n = y.size();
  const double budget = 1.0 - floor * static_cast<double>(n);
  for (double& v : y) v -= floor;
  std::vector<double> s = y;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += s[i];
    const double t = (cum - budget) / static_cast<double>(i + 1);
    if (i + 1 == n || s[i + 1] <= t) {
      theta = t;
      if (s[i] > t) break;
    }
  }
  for (double& v : y) v = std::max(v - theta, 0.0) + floor;
  return y;
}

// Projected gradient descent on the policy rows with Armijo backtracking.
// Each row's gradient is divided by the state's marginal mass (a positive
// block scaling, still a descent direction) so rarely visited states do not
// stall the iteration.
inline double projected_gradient_minimum(const Instance& in, int max_iters = 20000) {
  const std::size_t X = in.xs, U = in.us;
  Policies pi(in.horizon, std::vector<double>(X * U, 1.0 / static_cast<double>(U)));
  auto cur = decomposed_objective(in, pi);
  double step = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    Policies dir(in.horizon, std::vector<double>(X * U, 0.0));
    for (int k = 0; k < in.horizon; ++k) {
      for (std::size_t x = 0; x < X; ++x) {
        const double m = std::max(cur.marginals[k][x], 1e-12);
        for (std::size_t u = 0; u < U; ++u) dir[k][x * U + u] = cur.grad[k][x * U + u] / m;
      }
    }
    bool moved = false;
    step = std::min(1.0, step * 4.0);
    while (step > 1e-16) {
      Policies trial = pi;
      double decrease = 0.0;
      for (int k = 0; k < in.horizon; ++k) {
        for (std::size_t x = 0; x < X; ++x) {
          std::vector<double> row(U);
          for (std::size_t u = 0; u < U; ++u) {
            row[u] = pi[k][x * U + u] - step * dir[k][x * U + u];
          }
          row = project_simplex(row, 1e-12);
          for (std::size_t u = 0; u < U; ++u) {
            trial[k][x * U + u] = row[u];
            decrease += cur.grad[k][x * U + u] * (pi[k][x * U + u] - row[u]);
          }
        }
      }
      const auto next = decomposed_objective(in, trial);
      if (next.value <= cur.value - 1e-4 * decrease && decrease > 0.0) {
        moved = cur.value - next.value > 1e-15;
        pi = std::move(trial);
        cur = next;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return cur.value;
}

}  // namespace oracle
