#include "invctl/sysid.h"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "invctl/error.h"

namespace invctl {

namespace {

bool finite_state(const PendulumState& s) {
  return std::isfinite(s.theta) && std::isfinite(s.omega);
}

// P(lo <= Z < hi) for standard normal Z, accurate in both tails.
double standard_normal_mass(double lo, double hi) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  if (lo >= 0.0) {
    return 0.5 * (std::erfc(lo * inv_sqrt2) - std::erfc(hi * inv_sqrt2));
  }
  if (hi <= 0.0) {
    return 0.5 * (std::erfc(-hi * inv_sqrt2) - std::erfc(-lo * inv_sqrt2));
  }
  return 1.0 - 0.5 * std::erfc(hi * inv_sqrt2) - 0.5 * std::erfc(-lo * inv_sqrt2);
}

}  // namespace

void validate_dataset(const Dataset& d) {
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (!finite_state(r.x) || !finite_state(r.x_next) || !std::isfinite(r.u)) {
      throw Error(ErrorCode::kInput,
                  "record " + std::to_string(i) + " has non-finite values");
    }
    if (i > 0) {
      const auto& prev = d.records[i - 1];
      if (prev.episode == r.episode && (prev.x_next.theta != r.x.theta ||
                                        prev.x_next.omega != r.x.omega)) {
        throw Error(ErrorCode::kInput, "record " + std::to_string(i) +
                                           " breaks episode continuity");
      }
    }
  }
}

void write_dataset_jsonl(const Dataset& d, std::ostream& out) {
  for (const auto& r : d.records) {
    nlohmann::ordered_json line;
    line["ep"] = r.episode;
    line["k"] = r.step;
    line["x"] = {r.x.theta, r.x.omega};
    line["u"] = r.u;
    line["xn"] = {r.x_next.theta, r.x_next.omega};
    out << line.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing dataset");
}

Dataset read_dataset_jsonl(std::istream& in) {
  Dataset d;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      TransitionRecord r;
      r.episode = j.at("ep").get<int>();
      r.step = j.at("k").get<int>();
      r.x = {j.at("x").at(0).get<double>(), j.at("x").at(1).get<double>()};
      r.u = j.at("u").get<double>();
      r.x_next = {j.at("xn").at(0).get<double>(), j.at("xn").at(1).get<double>()};
      d.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse,
                  "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_dataset(d);
  return d;
}

Dataset collect_random_dataset(const PendulumParams& p, int episodes, int steps,
                               std::uint64_t seed) {
  p.validate();
  if (episodes < 0 || steps < 0) {
    throw Error(ErrorCode::kParameter, "episode and step counts must be >= 0");
  }
  Dataset d;
  d.seed = seed;
  d.records.reserve(static_cast<std::size_t>(episodes) *
                    static_cast<std::size_t>(steps));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> theta0(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> omega0(-p.omega_limit, p.omega_limit);
  std::uniform_real_distribution<double> torque(-p.torque_limit, p.torque_limit);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int ep = 0; ep < episodes; ++ep) {
    PendulumState x{wrap_angle(theta0(rng)), omega0(rng)};
    for (int k = 1; k <= steps; ++k) {
      const double u = torque(rng);
      StepNoise noise;
      noise.theta = normal(rng);
      noise.omega = normal(rng);
      const PendulumState next = step(x, u, noise, p);
      d.records.push_back({ep, k, x, u, next});
      x = next;
    }
  }
  return d;
}

std::size_t TransitionEstimate::unseen_rows() const {
  std::size_t n = 0;
  for (auto s : seen) n += (s == 0);
  return n;
}

std::vector<double> gaussian_bin_masses(const AxisSpec& axis, double mean,
                                        double sigma) {
  axis.validate();
  if (!std::isfinite(mean) || !(sigma >= 0.0)) {
    throw Error(ErrorCode::kParameter, "gaussian needs finite mean, sigma >= 0");
  }
  const auto bins = static_cast<std::size_t>(axis.bins);
  std::vector<double> mass(bins, 0.0);
  if (sigma == 0.0) {
    mass[axis.bin_of(mean)] = 1.0;
    return mass;
  }
  if (axis.wrap) {
    const double period = axis.max - axis.min;
    const double centered = axis.fold(mean);
    const int images = 1 + static_cast<int>(std::ceil(12.0 * sigma / period));
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = axis.lower_edge(b);
      const double hi = lo + axis.width();
      for (int k = -images; k <= images; ++k) {
        const double offset = k * period - centered;
        mass[b] += standard_normal_mass((lo + offset) / sigma, (hi + offset) / sigma);
      }
    }
  } else {
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = b == 0 ? -kInfinity : axis.lower_edge(b);
      const double hi = b + 1 == bins ? kInfinity : axis.lower_edge(b + 1);
      mass[b] = standard_normal_mass((lo - mean) / sigma, (hi - mean) / sigma);
    }
  }
  double total = 0.0;
  for (double m : mass) total += m;
  for (double& m : mass) m /= total;
  return mass;
}

void discretize_row(const PendulumParams& p, const GridSpec& grid,
                    std::size_t state, std::size_t action, std::span<double> out) {
  if (out.size() != grid.num_states()) {
    throw Error(ErrorCode::kDimension, "discretize_row: output size mismatch");
  }
  const StateCenter c = decode_state(state, grid);
  const PendulumState mean =
      deterministic_successor_unfolded({c.theta, c.omega}, decode_action(action, grid), p);
  const auto theta_mass = gaussian_bin_masses(grid.theta, mean.theta, p.sigma_theta);
  const auto omega_mass = gaussian_bin_masses(grid.omega, mean.omega, p.sigma_omega);
  // A Gaussian has full support; keep underflowed tail cells strictly
  // positive so two such rows never disagree on support.
  const double floor = (p.sigma_theta > 0.0 && p.sigma_omega > 0.0)
                           ? std::numeric_limits<double>::min()
                           : 0.0;
  const std::size_t omega_bins = omega_mass.size();
  double total = 0.0;
  for (std::size_t i = 0; i < theta_mass.size(); ++i) {
    for (std::size_t j = 0; j < omega_bins; ++j) {
      const double m = std::max(theta_mass[i] * omega_mass[j], floor);
      out[i * omega_bins + j] = m;
      total += m;
    }
  }
  for (double& m : out) m /= total;
}

TransitionTable discretize_dynamics(const PendulumParams& p, const GridSpec& grid) {
  p.validate();
  grid.validate();
  const std::size_t n_states = grid.num_states();
  const std::size_t n_actions = grid.num_actions();
  std::vector<double> probs(n_states * n_actions * n_states);
  for (std::size_t x = 0; x < n_states; ++x) {
    for (std::size_t u = 0; u < n_actions; ++u) {
      discretize_row(p, grid, x, u,
                     std::span<double>(probs).subspan((x * n_actions + u) * n_states,
                                                      n_states));
    }
  }
  return TransitionTable(n_states, n_actions, std::move(probs));
}

TransitionEstimate estimate_transition_pmf(const Dataset& d, const GridSpec& grid,
                                           const TransitionEstimateOptions& opts) {
  grid.validate();
  if (!(opts.alpha >= 0.0) || !std::isfinite(opts.alpha)) {
    throw Error(ErrorCode::kParameter, "smoothing alpha must be finite and >= 0");
  }
  if (opts.analytic_fallback) opts.analytic_fallback->validate();
  const std::size_t n_states = grid.num_states();
  const std::size_t n_actions = grid.num_actions();
  const std::size_t n_rows = n_states * n_actions;

  std::vector<double> counts(n_rows * n_states, 0.0);
  std::vector<double> totals(n_rows, 0.0);
  for (const auto& r : d.records) {
    const std::size_t x = encode_state(r.x.theta, r.x.omega, grid);
    const std::size_t u = encode_action(r.u, grid);
    const std::size_t xn = encode_state(r.x_next.theta, r.x_next.omega, grid);
    const std::size_t row = x * n_actions + u;
    counts[row * n_states + xn] += 1.0;
    totals[row] += 1.0;
  }

  std::vector<std::uint8_t> seen(n_rows, 0);
  const double background = opts.alpha * static_cast<double>(n_states);
  for (std::size_t row = 0; row < n_rows; ++row) {
    std::span<double> out =
        std::span<double>(counts).subspan(row * n_states, n_states);
    if (totals[row] > 0.0) {
      seen[row] = 1;
      const double denom = totals[row] + background;
      for (double& c : out) c = (c + opts.alpha) / denom;
    } else if (opts.analytic_fallback) {
      discretize_row(*opts.analytic_fallback, grid, row / n_actions,
                     row % n_actions, out);
    } else if (opts.uniform_fallback) {
      for (double& c : out) c = 1.0 / static_cast<double>(n_states);
    } else {
      throw Error(ErrorCode::kInsufficientData,
                  "no observations for state cell " + std::to_string(row / n_actions) +
                      ", action cell " + std::to_string(row % n_actions) +
                      " and no fallback model configured");
    }
  }
  return {TransitionTable(n_states, n_actions, std::move(counts)), std::move(seen)};
}

PolicyTable estimate_reference_policy(std::span<const double> mean_action,
                                      double sigma, const GridSpec& grid) {
  grid.validate();
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kParameter, "reference policy sigma must be > 0");
  }
  if (mean_action.size() != grid.num_states()) {
    throw Error(ErrorCode::kDimension, "one mean action per state cell required");
  }
  std::vector<double> probs;
  probs.reserve(grid.num_states() * grid.num_actions());
  for (double mean : mean_action) {
    const auto row = gaussian_bin_masses(grid.action, mean, sigma);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return PolicyTable(grid.num_states(), grid.num_actions(), std::move(probs));
}

}  // namespace invctl
