#include "invctl/pendulum.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "invctl/error.h"
#include "invctl/parallel.h"
#include "invctl/sysid.h"

namespace invctl {

void PendulumParams::validate() const {
  if (!(mass > 0.0) || !(length > 0.0) || !(dt > 0.0) || !(gravity >= 0.0)) {
    throw Error(ErrorCode::kParameter,
                "pendulum requires mass, length, dt > 0 and gravity >= 0");
  }
  if (!(sigma_theta >= 0.0) || !(sigma_omega >= 0.0)) {
    throw Error(ErrorCode::kParameter, "noise standard deviations must be >= 0");
  }
  if (!(torque_limit > 0.0) || !(omega_limit > 0.0)) {
    throw Error(ErrorCode::kParameter, "saturation limits must be positive");
  }
}

PendulumState deterministic_successor_unfolded(const PendulumState& s, double u,
                                               const PendulumParams& p) {
  const double torque = std::clamp(u, -p.torque_limit, p.torque_limit);
  const double accel = p.gravity / p.length * std::sin(s.theta) +
                       torque / (p.mass * p.length * p.length);
  return {s.theta + s.omega * p.dt, s.omega + accel * p.dt};
}

PendulumState step(const PendulumState& s, double u, const StepNoise& noise,
                   const PendulumParams& p) {
  if (std::isnan(s.theta) || std::isnan(s.omega) || std::isnan(u) ||
      std::isnan(noise.theta) || std::isnan(noise.omega)) {
    throw Error(ErrorCode::kInput, "pendulum step received NaN");
  }
  PendulumState next = deterministic_successor_unfolded(s, u, p);
  next.theta = wrap_angle(next.theta + p.sigma_theta * noise.theta);
  next.omega = std::clamp(next.omega + p.sigma_omega * noise.omega,
                          -p.omega_limit, p.omega_limit);
  return next;
}

double target_cost(const PendulumState& s) {
  return s.theta * s.theta + 0.01 * s.omega * s.omega;
}

std::array<double, kNumPendulumFeatures> features(const PendulumState& s) {
  return {std::abs(s.theta), std::abs(s.omega)};
}

void MPCConfig::validate() const {
  if (horizon < 1) throw Error(ErrorCode::kParameter, "MPC horizon must be >= 1");
  if (elites < 1 || population <= elites) {
    throw Error(ErrorCode::kParameter, "CEM requires population > elites >= 1");
  }
  if (iterations < 1 || !(initial_std > 0.0)) {
    throw Error(ErrorCode::kParameter, "CEM requires iterations >= 1, std > 0");
  }
}

double trajectory_cost(const PendulumState& s, std::span<const double> torques,
                       const PendulumParams& p, const MPCConfig& cfg) {
  const StepNoise no_noise;
  PendulumState x = s;
  double cost = 0.0;
  for (double u : torques) {
    cost += cfg.stage_theta * x.theta * x.theta + cfg.stage_omega * x.omega * x.omega;
    x = step(x, u, no_noise, p);
  }
  return cost + cfg.terminal_theta * x.theta * x.theta +
         cfg.terminal_omega * x.omega * x.omega;
}

MpcPlan mpc_plan(const PendulumState& s, const PendulumParams& p,
                 const MPCConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  const auto n_elite = static_cast<std::size_t>(cfg.elites);

  struct Candidate {
    std::vector<double> torques;
    double cost;
  };
  auto evaluate = [&](std::vector<double> torques) {
    const double cost = trajectory_cost(s, torques, p, cfg);
    return Candidate{std::move(torques), cost};
  };

  std::vector<double> mean(horizon, 0.0);
  std::vector<double> stddev(horizon, cfg.initial_std);
  std::vector<Candidate> elites;
  std::normal_distribution<double> normal(0.0, 1.0);
  MpcPlan plan;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<Candidate> pool = elites;
    pool.push_back(evaluate(mean));
    // Antithetic pairs: each draw z is used as mean + std z and mean - std z.
    for (int n = 0; n < cfg.population; n += 2) {
      std::vector<double> z(horizon);
      for (double& v : z) v = normal(rng);
      for (double sign : {1.0, -1.0}) {
        if (sign < 0.0 && n + 1 >= cfg.population) break;
        std::vector<double> torques(horizon);
        for (std::size_t t = 0; t < horizon; ++t) {
          torques[t] = std::clamp(mean[t] + sign * stddev[t] * z[t], -p.torque_limit,
                                  p.torque_limit);
        }
        pool.push_back(evaluate(std::move(torques)));
      }
    }
    // Stable ordering keeps ties deterministic.
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.cost < b.cost;
                     });
    pool.resize(n_elite);
    elites = std::move(pool);

    double elite_cost = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      double m = 0.0;
      for (const auto& e : elites) m += e.torques[t];
      m /= static_cast<double>(n_elite);
      double v = 0.0;
      for (const auto& e : elites) v += (e.torques[t] - m) * (e.torques[t] - m);
      mean[t] = m;
      stddev[t] = std::sqrt(v / static_cast<double>(n_elite));
    }
    for (const auto& e : elites) elite_cost += e.cost;
    plan.elite_mean_costs.push_back(elite_cost / static_cast<double>(n_elite));
  }

  plan.sequence = elites.front().torques;
  plan.cost = elites.front().cost;
  plan.action = plan.sequence.front();
  return plan;
}

std::vector<double> expert_mean_actions(const GridSpec& grid,
                                        const PendulumParams& source,
                                        const MPCConfig& cfg,
                                        std::uint64_t seed, int threads) {
  grid.validate();
  source.validate();
  cfg.validate();
  std::vector<double> actions(grid.num_states());
  const auto theta_bins = static_cast<std::size_t>(grid.theta.bins);
  const auto omega_bins = static_cast<std::size_t>(grid.omega.bins);
  parallel_for(actions.size(), threads, [&](std::size_t cell) {
    // A cell and its index mirror (theta, omega) -> (-theta, -omega) share a
    // planner seed; with antithetic sampling the two plans are then mirror
    // images whenever the grid is symmetric about the origin.
    const std::size_t mirror = (theta_bins - 1 - cell / omega_bins) * omega_bins +
                               (omega_bins - 1 - cell % omega_bins);
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(std::min(cell, mirror))};
    std::mt19937_64 rng(seq);
    const StateCenter c = decode_state(cell, grid);
    actions[cell] = mpc_plan({c.theta, c.omega}, source, cfg, rng).action;
  });
  return actions;
}

PolicyTable expert_policy_table(const GridSpec& grid,
                                const PendulumParams& source,
                                const MPCConfig& cfg, double sigma,
                                std::uint64_t seed, int threads) {
  const auto means = expert_mean_actions(grid, source, cfg, seed, threads);
  return estimate_reference_policy(means, sigma, grid);
}

Trajectory rollout(const PendulumState& s0, const PolicyTable& controller,
                   int steps, std::uint64_t seed, const PendulumParams& p,
                   const GridSpec& grid) {
  if (steps < 1) throw Error(ErrorCode::kParameter, "rollout needs steps >= 1");
  if (controller.num_states() != grid.num_states() ||
      controller.num_actions() != grid.num_actions()) {
    throw Error(ErrorCode::kDimension, "controller does not match the grid");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(steps));
  PendulumState x = s0;
  for (int k = 0; k < steps; ++k) {
    TrajectoryStep rec;
    rec.state = x;
    rec.state_cell = encode_state(x.theta, x.omega, grid);
    rec.action_cell = sample(controller.row(rec.state_cell), uniform(rng));
    rec.u = decode_action(rec.action_cell, grid);
    StepNoise noise;
    noise.theta = normal(rng);
    noise.omega = normal(rng);
    rec.next = step(x, rec.u, noise, p);
    x = rec.next;
    traj.push_back(rec);
  }
  return traj;
}

}  // namespace invctl
