#pragma once

#include <cstddef>

namespace invctl {

/// One uniformly binned axis. Bins are half-open [lo, hi) except the last,
/// which also owns `max`.
struct AxisSpec {
  double min = 0.0;
  double max = 1.0;
  int bins = 2;
  bool wrap = false;

  void validate() const;
  double width() const { return (max - min) / bins; }
  double center(std::size_t bin) const;
  double lower_edge(std::size_t bin) const;
  /// Wraps (periodic axes) or clamps the value into [min, max].
  double fold(double value) const;
  std::size_t bin_of(double value) const;
};

/// Discretization of the pendulum state (theta, omega) and torque.
struct GridSpec {
  AxisSpec theta;
  AxisSpec omega;
  AxisSpec action;

  /// 31 x 31 state cells over [-pi, pi) x [-5, 5], 21 torque bins on [-2.5, 2.5].
  static GridSpec pendulum_default();

  void validate() const;
  std::size_t num_states() const {
    return static_cast<std::size_t>(theta.bins) * static_cast<std::size_t>(omega.bins);
  }
  std::size_t num_actions() const { return static_cast<std::size_t>(action.bins); }
};

struct StateCenter {
  double theta;
  double omega;
};

std::size_t encode_state(double theta, double omega, const GridSpec& grid);
StateCenter decode_state(std::size_t cell, const GridSpec& grid);
std::size_t encode_action(double u, const GridSpec& grid);
double decode_action(std::size_t cell, const GridSpec& grid);

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);

}  // namespace invctl
