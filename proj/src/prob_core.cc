#include "invctl/prob_core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "invctl/error.h"

namespace invctl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidWeights: return "invalid weights";
    case ErrorCode::kDimension: return "dimension error";
    case ErrorCode::kInput: return "input error";
    case ErrorCode::kEmptySupport: return "empty support";
    case ErrorCode::kIndex: return "index error";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kDegenerateModel: return "degenerate model";
    case ErrorCode::kUnboundedProblem: return "unbounded problem";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kSolver: return "solver error";
  }
  return "error";
}

void validate_pmf(std::span<const double> row, double tolerance) {
  if (row.empty()) {
    throw Error(ErrorCode::kDimension, "pmf must have at least one outcome");
  }
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::kInvalidWeights,
                  "pmf entry " + std::to_string(p) + " is not a probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    throw Error(ErrorCode::kInvalidWeights,
                "pmf mass " + std::to_string(total) + " differs from 1");
  }
}

Pmf::Pmf(std::vector<double> probs, double tolerance) : probs_(std::move(probs)) {
  validate_pmf(probs_, tolerance);
}

Pmf Pmf::uniform(std::size_t size) {
  if (size == 0) throw Error(ErrorCode::kDimension, "uniform pmf of size 0");
  return Pmf(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

Pmf Pmf::point_mass(std::size_t size, std::size_t index) {
  if (index >= size) throw Error(ErrorCode::kIndex, "point mass out of range");
  std::vector<double> probs(size, 0.0);
  probs[index] = 1.0;
  return Pmf(std::move(probs));
}

namespace {

void validate_rows(std::span<const double> probs, std::size_t rows,
                   std::size_t row_size, const char* what) {
  if (rows == 0 || row_size == 0 || probs.size() != rows * row_size) {
    throw Error(ErrorCode::kDimension,
                std::string(what) + ": storage does not match declared shape");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    validate_pmf(probs.subspan(r * row_size, row_size), kStoredMassTolerance);
  }
}

}  // namespace

TransitionTable::TransitionTable(std::size_t num_states, std::size_t num_actions,
                                 std::vector<double> probs)
    : num_states_(num_states),
      num_actions_(num_actions),
      probs_(std::move(probs)) {
  validate_rows(probs_, num_states_ * num_actions_, num_states_,
                "transition table");
}

std::span<const double> TransitionTable::row(std::size_t state,
                                             std::size_t action) const {
  if (state >= num_states_ || action >= num_actions_) {
    throw Error(ErrorCode::kIndex, "transition row out of range");
  }
  return std::span<const double>(probs_).subspan(
      (state * num_actions_ + action) * num_states_, num_states_);
}

PolicyTable::PolicyTable(std::size_t num_states, std::size_t num_actions,
                         std::vector<double> probs)
    : num_states_(num_states),
      num_actions_(num_actions),
      probs_(std::move(probs)) {
  validate_rows(probs_, num_states_, num_actions_, "policy table");
}

std::span<const double> PolicyTable::row(std::size_t state) const {
  if (state >= num_states_) {
    throw Error(ErrorCode::kIndex, "policy row out of range");
  }
  return std::span<const double>(probs_).subspan(state * num_actions_,
                                                 num_actions_);
}

Pmf normalize(std::span<const double> weights) {
  if (weights.empty()) {
    throw Error(ErrorCode::kInvalidWeights, "no weights to normalize");
  }
  double total = 0.0;
  for (double w : weights) {
    if (std::isnan(w) || w < 0.0 || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidWeights,
                  "weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kInvalidWeights, "all weights are zero");
  }
  std::vector<double> probs(weights.begin(), weights.end());
  for (double& p : probs) p /= total;
  return Pmf(std::move(probs), kFreshMassTolerance);
}

Pmf softmax(std::span<const double> log_weights) {
  const double shift = log_sum_exp(log_weights);
  std::vector<double> probs(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs[i] = std::exp(log_weights[i] - shift);
    total += probs[i];
  }
  // Rounding in exp leaves the mass a few ulps away from 1.
  for (double& p : probs) p /= total;
  return Pmf(std::move(probs), kFreshMassTolerance);
}

ExtendedReal kl_divergence(std::span<const double> p,
                           std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kDimension, "kl_divergence: support sizes differ (" +
                                           std::to_string(p.size()) + " vs " +
                                           std::to_string(q.size()) + ")");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return ExtendedReal::infinity();
    total += p[i] * std::log(p[i] / q[i]);
  }
  // Cancellation can leave a tiny negative residue for p ~= q.
  return ExtendedReal(std::max(total, 0.0));
}

ExtendedReal kl_divergence(const Pmf& p, const Pmf& q) {
  return kl_divergence(p.probs(), q.probs());
}

double expectation(std::span<const double> p, std::span<const double> values) {
  if (p.size() != values.size()) {
    throw Error(ErrorCode::kDimension, "expectation: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0.0) total += p[i] * values[i];
  }
  return total;
}

double expectation(const Pmf& p, std::span<const double> values) {
  return expectation(p.probs(), values);
}

std::size_t sample(std::span<const double> p, double u) {
  if (!(u >= 0.0 && u < 1.0)) {
    throw Error(ErrorCode::kInput, "sample: u must lie in [0, 1)");
  }
  if (p.empty()) throw Error(ErrorCode::kDimension, "sample: empty pmf");
  double cumulative = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cumulative += p[i];
    if (cumulative > u) return i;
  }
  // Mass short of 1 by rounding: fall back to the last outcome with mass.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

std::size_t sample(const Pmf& p, double u) { return sample(p.probs(), u); }

double log_sum_exp(std::span<const double> values) {
  double max_value = -kInfinity;
  for (double v : values) {
    if (std::isnan(v)) throw Error(ErrorCode::kInput, "log_sum_exp: NaN input");
    max_value = std::max(max_value, v);
  }
  if (max_value == -kInfinity) {
    throw Error(ErrorCode::kEmptySupport,
                "log_sum_exp: every entry is -infinity");
  }
  if (max_value == kInfinity) return kInfinity;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

}  // namespace invctl
