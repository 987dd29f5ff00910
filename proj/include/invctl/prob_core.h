#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace invctl {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Tolerance on the total mass of a stored table row.
inline constexpr double kStoredMassTolerance = 1e-9;
/// Tolerance on the total mass of a freshly normalized vector.
inline constexpr double kFreshMassTolerance = 1e-12;

/// A nonnegative real that may also be +infinity (KL divergence between pmfs
/// with mismatched support).
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr explicit ExtendedReal(double value) : value_(value) {}
  static constexpr ExtendedReal infinity() { return ExtendedReal(kInfinity); }

  constexpr bool is_finite() const { return value_ != kInfinity; }
  constexpr double value() const { return value_; }

 private:
  double value_ = 0.0;
};

/// Probability mass function over outcomes 0..size()-1.
class Pmf {
 public:
  /// Validates: nonempty, entries >= 0, total mass within `tolerance` of 1.
  explicit Pmf(std::vector<double> probs,
               double tolerance = kStoredMassTolerance);

  static Pmf uniform(std::size_t size);
  static Pmf point_mass(std::size_t size, std::size_t index);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Conditional pmf p(x' | x, u), stored row-major over (x, u, x').
class TransitionTable {
 public:
  TransitionTable(std::size_t num_states, std::size_t num_actions,
                  std::vector<double> probs);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::span<const double> row(std::size_t state, std::size_t action) const;
  std::span<const double> data() const { return probs_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> probs_;
};

/// Conditional pmf pi(u | x), stored row-major over (x, u).
class PolicyTable {
 public:
  PolicyTable(std::size_t num_states, std::size_t num_actions,
              std::vector<double> probs);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::span<const double> row(std::size_t state) const;
  std::span<const double> data() const { return probs_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> probs_;
};

/// Scales nonnegative weights to unit mass.
Pmf normalize(std::span<const double> weights);

/// Materializes a pmf from log-weights (-infinity allowed, not all of them).
Pmf softmax(std::span<const double> log_weights);

/// D_KL(p || q) with 0 ln(0/q) = 0; +infinity where p > 0 and q = 0.
ExtendedReal kl_divergence(std::span<const double> p, std::span<const double> q);
ExtendedReal kl_divergence(const Pmf& p, const Pmf& q);

double expectation(std::span<const double> p, std::span<const double> values);
double expectation(const Pmf& p, std::span<const double> values);

/// Inverse-CDF draw: the smallest index whose cumulative mass exceeds u.
std::size_t sample(std::span<const double> p, double u);
std::size_t sample(const Pmf& p, double u);

/// ln sum exp(values), shifted by the maximum. -infinity entries contribute 0.
double log_sum_exp(std::span<const double> values);

/// Throws unless `row` is a pmf of the given size within `tolerance`.
void validate_pmf(std::span<const double> row, double tolerance);

}  // namespace invctl
