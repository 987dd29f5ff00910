#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "invctl/grid.h"
#include "invctl/prob_core.h"

namespace invctl {

/// Forward-Euler pendulum with additive Gaussian noise, measured from the
/// upright position (theta = 0 is the unstable equilibrium).
struct PendulumParams {
  double mass = 1.0;         // kg
  double length = 0.6;       // m
  double gravity = 9.81;     // m/s^2
  double dt = 0.1;           // s
  double sigma_theta = 0.0;  // rad, per step
  double sigma_omega = 0.0;  // rad/s, per step
  double torque_limit = 2.5;  // N m
  double omega_limit = 5.0;   // rad/s

  void validate() const;
};

struct PendulumState {
  double theta = 0.0;  // rad, [-pi, pi)
  double omega = 0.0;  // rad/s, [-omega_limit, omega_limit]
};

struct StepNoise {
  double theta = 0.0;  // standard-normal draw
  double omega = 0.0;
};

PendulumState step(const PendulumState& s, double u, const StepNoise& noise,
                   const PendulumParams& p);

/// Noise-free successor before wrapping/clamping. Used by the discretized
/// model, which folds the Gaussian mass itself.
PendulumState deterministic_successor_unfolded(const PendulumState& s, double u,
                                               const PendulumParams& p);

/// Quadratic stage cost around the upright equilibrium.
double target_cost(const PendulumState& s);

inline constexpr std::size_t kNumPendulumFeatures = 2;
/// [|theta|, |omega|] distances from the upright equilibrium.
std::array<double, kNumPendulumFeatures> features(const PendulumState& s);

struct MPCConfig {
  int horizon = 20;
  double stage_theta = 1.0;
  double stage_omega = 0.1;
  double terminal_theta = 1.0;
  double terminal_omega = 0.5;
  int population = 64;
  int elites = 8;
  int iterations = 5;
  double initial_std = 1.0;

  void validate() const;
};

/// Cost of an open-loop torque sequence on the noise-free model, summing the
/// stage cost over the current and the next H-1 states plus a terminal cost.
double trajectory_cost(const PendulumState& s, std::span<const double> torques,
                       const PendulumParams& p, const MPCConfig& cfg);

struct MpcPlan {
  double action = 0.0;
  std::vector<double> sequence;  // best sequence found
  double cost = 0.0;             // its trajectory cost
  std::vector<double> elite_mean_costs;  // one entry per CEM iteration
};

/// Cross-entropy planning over H-step torque sequences. Elites persist across
/// iterations, so the mean elite cost never increases.
MpcPlan mpc_plan(const PendulumState& s, const PendulumParams& p,
                 const MPCConfig& cfg, std::mt19937_64& rng);

/// MPC action at each state-cell center, one independently seeded planner per
/// cell.
std::vector<double> expert_mean_actions(const GridSpec& grid,
                                        const PendulumParams& source,
                                        const MPCConfig& cfg,
                                        std::uint64_t seed, int threads = 1);

/// Reference policy: Normal(mpc action, sigma^2) discretized per cell.
PolicyTable expert_policy_table(const GridSpec& grid,
                                const PendulumParams& source,
                                const MPCConfig& cfg, double sigma,
                                std::uint64_t seed, int threads = 1);

struct TrajectoryStep {
  PendulumState state;       // x_{k-1}
  std::size_t state_cell;    // cell of x_{k-1}
  std::size_t action_cell;   // sampled action bin
  double u;                  // applied torque (bin center)
  PendulumState next;        // x_k
};

using Trajectory = std::vector<TrajectoryStep>;

/// Closed-loop simulation: encode, sample an action bin, decode it, step.
Trajectory rollout(const PendulumState& s0, const PolicyTable& controller,
                   int steps, std::uint64_t seed, const PendulumParams& p,
                   const GridSpec& grid);

}  // namespace invctl
