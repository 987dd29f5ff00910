#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "invctl/grid.h"
#include "invctl/pendulum.h"
#include "invctl/prob_core.h"

namespace invctl {

/// One observed transition (x_{k-1}, u_k) -> x_k.
struct TransitionRecord {
  int episode = 0;
  int step = 0;
  PendulumState x;
  double u = 0.0;
  PendulumState x_next;
};

struct Dataset {
  std::vector<TransitionRecord> records;
  std::uint64_t seed = 0;
};

/// Throws if a record is non-finite or an episode is not contiguous.
void validate_dataset(const Dataset& d);

/// JSON-lines: {"ep": int, "k": int, "x": [theta, omega], "u": real,
/// "xn": [theta, omega]} per line.
void write_dataset_jsonl(const Dataset& d, std::ostream& out);
Dataset read_dataset_jsonl(std::istream& in);

/// Episodes of uniformly random torques from uniformly random initial states.
Dataset collect_random_dataset(const PendulumParams& p, int episodes, int steps,
                               std::uint64_t seed);

struct TransitionEstimateOptions {
  double alpha = 1e-3;  // pseudo-count added to every next-state cell
  std::optional<PendulumParams> analytic_fallback;
  bool uniform_fallback = true;
};

struct TransitionEstimate {
  TransitionTable table;
  std::vector<std::uint8_t> seen;  // per (x, u) row: 1 if observed

  std::size_t unseen_rows() const;
};

/// Alpha-smoothed histogram of next-state cells per (state, action) cell.
TransitionEstimate estimate_transition_pmf(const Dataset& d, const GridSpec& grid,
                                           const TransitionEstimateOptions& opts);

/// First-principles row: the cell center pushed through the noise-free
/// dynamics, then spread by per-axis Gaussian CDF differences (theta mass
/// folded by wrapping, omega tails accumulated in the edge bins).
void discretize_row(const PendulumParams& p, const GridSpec& grid,
                    std::size_t state, std::size_t action, std::span<double> out);

TransitionTable discretize_dynamics(const PendulumParams& p, const GridSpec& grid);

/// Per-state Normal(mean_action[x], sigma^2) discretized over action bins,
/// tails absorbed by the edge bins.
PolicyTable estimate_reference_policy(std::span<const double> mean_action,
                                      double sigma, const GridSpec& grid);

/// Mass of a Normal(mean, sigma^2) distribution over each bin of `axis`.
/// Periodic axes fold the mass; bounded axes push the tails into the edge
/// bins. sigma == 0 yields a point mass.
std::vector<double> gaussian_bin_masses(const AxisSpec& axis, double mean,
                                        double sigma);

}  // namespace invctl
