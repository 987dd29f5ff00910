#include "invctl/grid.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "invctl/error.h"

namespace invctl {

void AxisSpec::validate() const {
  if (!std::isfinite(min) || !std::isfinite(max) || !(min < max)) {
    throw Error(ErrorCode::kParameter, "axis requires finite min < max");
  }
  if (bins < 2) throw Error(ErrorCode::kParameter, "axis requires at least 2 bins");
}

double AxisSpec::center(std::size_t bin) const {
  return min + (static_cast<double>(bin) + 0.5) * width();
}

double AxisSpec::lower_edge(std::size_t bin) const {
  return min + static_cast<double>(bin) * width();
}

double AxisSpec::fold(double value) const {
  if (std::isnan(value)) throw Error(ErrorCode::kInput, "NaN coordinate");
  if (!wrap) return std::clamp(value, min, max);
  const double period = max - min;
  double shifted = std::fmod(value - min, period);
  if (shifted < 0.0) shifted += period;
  // fmod of a tiny negative number can round up to exactly `period`.
  if (shifted >= period) shifted = 0.0;
  return min + shifted;
}

std::size_t AxisSpec::bin_of(double value) const {
  const double folded = fold(value);
  const auto raw = static_cast<long long>(std::floor((folded - min) / width()));
  return static_cast<std::size_t>(std::clamp<long long>(raw, 0, bins - 1));
}

GridSpec GridSpec::pendulum_default() {
  constexpr double pi = std::numbers::pi;
  return GridSpec{AxisSpec{-pi, pi, 31, true}, AxisSpec{-5.0, 5.0, 31, false},
                  AxisSpec{-2.5, 2.5, 21, false}};
}

void GridSpec::validate() const {
  theta.validate();
  omega.validate();
  action.validate();
  if (action.wrap) throw Error(ErrorCode::kParameter, "action axis cannot wrap");
}

std::size_t encode_state(double theta, double omega, const GridSpec& grid) {
  return grid.theta.bin_of(theta) * static_cast<std::size_t>(grid.omega.bins) +
         grid.omega.bin_of(omega);
}

StateCenter decode_state(std::size_t cell, const GridSpec& grid) {
  if (cell >= grid.num_states()) {
    throw Error(ErrorCode::kIndex, "state cell " + std::to_string(cell) +
                                       " out of range");
  }
  const auto omega_bins = static_cast<std::size_t>(grid.omega.bins);
  return {grid.theta.center(cell / omega_bins),
          grid.omega.center(cell % omega_bins)};
}

std::size_t encode_action(double u, const GridSpec& grid) {
  return grid.action.bin_of(u);
}

double decode_action(std::size_t cell, const GridSpec& grid) {
  if (cell >= grid.num_actions()) {
    throw Error(ErrorCode::kIndex, "action cell " + std::to_string(cell) +
                                       " out of range");
  }
  return grid.action.center(cell);
}

double wrap_angle(double theta) {
  return AxisSpec{-std::numbers::pi, std::numbers::pi, 2, true}.fold(theta);
}

}  // namespace invctl
