#include "invctl/inverse_estimation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "invctl/error.h"
#include "invctl/forward_control.h"

namespace invctl {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-30;
// Relative size of the rounding noise in a sum of many log-sum-exp terms.
constexpr double kNoiseBand = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> g) {
  double n = 0.0;
  for (double x : g) n = std::max(n, std::abs(x));
  return n;
}

void check_weights(std::span<const double> v, const LikelihoodData& data) {
  if (v.size() != data.num_features) {
    throw Error(ErrorCode::kDimension, "weight vector length " +
                                           std::to_string(v.size()) + " != " +
                                           std::to_string(data.num_features));
  }
}

// Log-policy a_u = ln q~(u) - phi(u)^T v for one observation.
std::vector<double> log_policy_scores(const LikelihoodTerm& term,
                                      std::span<const double> v,
                                      std::size_t num_features) {
  std::vector<double> a(term.log_modified_control.size());
  for (std::size_t u = 0; u < a.size(); ++u) {
    const double prior = term.log_modified_control[u];
    a[u] = prior == -kInfinity
               ? -kInfinity
               : prior - dot(std::span<const double>(term.expected_features)
                                 .subspan(u * num_features, num_features),
                             v);
  }
  return a;
}

LikelihoodData single_term(const LikelihoodData& data, std::size_t k) {
  LikelihoodData one;
  one.num_actions = data.num_actions;
  one.num_features = data.num_features;
  one.terms.push_back(data.terms[k]);
  return one;
}

}  // namespace

std::span<const double> FeatureMap::at(std::size_t state) const {
  if (state >= num_states()) {
    throw Error(ErrorCode::kIndex, "feature row out of range");
  }
  return std::span<const double>(values).subspan(state * num_features, num_features);
}

void FeatureMap::validate() const {
  if (num_features < 1 || values.empty() || values.size() % num_features != 0) {
    throw Error(ErrorCode::kDimension, "feature map needs f >= 1 and whole rows");
  }
  if (!names.empty() && names.size() != num_features) {
    throw Error(ErrorCode::kDimension, "one name per feature required");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInput, "feature value not finite");
  }
}

void SolverConfig::validate() const {
  if (!(grad_tol > 0.0) || max_iters < 1 || !(ridge >= 0.0)) {
    throw Error(ErrorCode::kParameter,
                "solver needs grad_tol > 0, max_iters >= 1, ridge >= 0");
  }
}

std::vector<double> modified_control(const ModelRefs& models, std::size_t state) {
  return modified_prior(models.reference_policy.row(state), models.plant,
                        models.reference_plant, state);
}

std::vector<double> expected_features(const TransitionTable& plant,
                                      const FeatureMap& features,
                                      std::size_t state, std::size_t action) {
  if (features.num_states() != plant.num_states()) {
    throw Error(ErrorCode::kDimension, "feature map does not match the plant");
  }
  const auto row = plant.row(state, action);
  std::vector<double> phi(features.num_features, 0.0);
  for (std::size_t xn = 0; xn < row.size(); ++xn) {
    if (row[xn] == 0.0) continue;
    const auto h = features.at(xn);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += row[xn] * h[i];
  }
  return phi;
}

LikelihoodData build_likelihood_data(const ObservationSeq& obs,
                                     const FeatureMap& features,
                                     const ModelRefs& models) {
  features.validate();
  if (obs.empty()) {
    throw Error(ErrorCode::kInsufficientData, "at least one observation required");
  }
  const std::size_t us = models.reference_policy.num_actions();
  const std::size_t xs = models.plant.num_states();
  LikelihoodData data;
  data.num_actions = us;
  data.num_features = features.num_features;
  data.terms.reserve(obs.size());
  for (const auto& o : obs) {
    if (o.state >= xs || o.action >= us) {
      throw Error(ErrorCode::kIndex, "observation outside the grid");
    }
    LikelihoodTerm term;
    term.log_modified_control = modified_control(models, o.state);
    term.expected_features.reserve(us * features.num_features);
    for (std::size_t u = 0; u < us; ++u) {
      const auto phi = expected_features(models.plant, features, o.state, u);
      term.expected_features.insert(term.expected_features.end(), phi.begin(), phi.end());
    }
    term.observed_action = o.action;
    data.terms.push_back(std::move(term));
  }
  return data;
}

double nll_stationary(std::span<const double> v, const LikelihoodData& data,
                      double ridge) {
  check_weights(v, data);
  const std::size_t f = data.num_features;
  double total = 0.0;
  for (const auto& term : data.terms) {
    const auto a = log_policy_scores(term, v, f);
    const auto observed = std::span<const double>(term.expected_features)
                              .subspan(term.observed_action * f, f);
    total += dot(observed, v) + log_sum_exp(a);
  }
  return total + ridge * dot(v, v);
}

std::vector<double> nll_gradient_stationary(std::span<const double> v,
                                            const LikelihoodData& data,
                                            double ridge) {
  check_weights(v, data);
  const std::size_t f = data.num_features;
  std::vector<double> grad(f, 0.0);
  for (const auto& term : data.terms) {
    const auto a = log_policy_scores(term, v, f);
    const double lse = log_sum_exp(a);
    const auto phi = std::span<const double>(term.expected_features);
    for (std::size_t i = 0; i < f; ++i) {
      grad[i] += phi[term.observed_action * f + i];
    }
    for (std::size_t u = 0; u < a.size(); ++u) {
      if (a[u] == -kInfinity) continue;
      const double p = std::exp(a[u] - lse);
      for (std::size_t i = 0; i < f; ++i) grad[i] -= p * phi[u * f + i];
    }
  }
  for (std::size_t i = 0; i < f; ++i) grad[i] += 2.0 * ridge * v[i];
  return grad;
}

FitResult fit_stationary(const LikelihoodData& data, const SolverConfig& cfg,
                         std::span<const double> initial) {
  cfg.validate();
  if (data.terms.empty()) {
    throw Error(ErrorCode::kInsufficientData, "at least one observation required");
  }
  FitResult r;
  r.weights = initial.empty() ? std::vector<double>(data.num_features, 0.0)
                              : std::vector<double>(initial.begin(), initial.end());
  check_weights(r.weights, data);

  double f = nll_stationary(r.weights, data, cfg.ridge);
  auto g = nll_gradient_stationary(r.weights, data, cfg.ridge);
  r.objective_history.push_back(f);

  std::vector<double> candidate(r.weights.size());
  double initial_step = 1.0;
  while (true) {
    r.final_grad_norm = inf_norm(g);
    if (r.final_grad_norm <= cfg.grad_tol) {
      r.converged = true;
      break;
    }
    if (r.iters >= cfg.max_iters) break;

    const double g2 = dot(g, g);
    double t = initial_step;
    bool accepted = false;
    std::vector<double> g_candidate;
    double f_candidate = f;
    while (t >= kMinStep) {
      for (std::size_t i = 0; i < candidate.size(); ++i) {
        candidate[i] = r.weights[i] - t * g[i];
      }
      f_candidate = nll_stationary(candidate, data, cfg.ridge);
      if (!std::isfinite(f_candidate)) {
        throw Error(ErrorCode::kSolver, "objective became non-finite at iteration " +
                                            std::to_string(r.iters) + ", step " +
                                            std::to_string(t));
      }
      if (f_candidate <= f - kArmijo * t * g2) {
        accepted = true;
      } else if (std::abs(f - f_candidate) <= kNoiseBand * (1.0 + std::abs(f))) {
        // The change is within the rounding noise of the summed objective.
        // By convexity, a non-positive slope along -g at the candidate means
        // the exact objective did decrease.
        g_candidate = nll_gradient_stationary(candidate, data, cfg.ridge);
        accepted = dot(g_candidate, g) >= 0.0;
        if (!accepted) g_candidate.clear();
      }
      if (accepted) break;
      t *= 0.5;
    }
    if (!accepted) break;  // line search stalled; reported as not converged
    auto g_next = g_candidate.empty()
                      ? nll_gradient_stationary(candidate, data, cfg.ridge)
                      : std::move(g_candidate);
    // Barzilai-Borwein trial step for the next line search: s's / s'y.
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      const double s = candidate[i] - r.weights[i];
      ss += s * s;
      sy += s * (g_next[i] - g[i]);
    }
    initial_step = (sy > 0.0 && ss > 0.0) ? std::clamp(ss / sy, 1e-10, 1e10) : 1.0;
    r.weights = candidate;
    f = f_candidate;
    g = std::move(g_next);
    ++r.iters;
    r.objective_history.push_back(f);
  }
  r.objective = f;
  return r;
}

FitResult fit_stationary(const ObservationSeq& obs, const ModelRefs& models,
                         const FeatureMap& features, const SolverConfig& cfg) {
  return fit_stationary(build_likelihood_data(obs, features, models), cfg);
}

std::vector<FitResult> fit_nonstationary(const LikelihoodData& data,
                                         const SolverConfig& cfg) {
  cfg.validate();
  if (!(cfg.ridge > 0.0)) {
    throw Error(ErrorCode::kParameter,
                "per-step fits need ridge > 0 (single-observation terms are "
                "unbounded below otherwise)");
  }
  if (data.terms.empty()) {
    throw Error(ErrorCode::kInsufficientData, "at least one observation required");
  }
  std::vector<FitResult> fits;
  fits.reserve(data.terms.size());
  for (std::size_t k = 0; k < data.terms.size(); ++k) {
    fits.push_back(fit_stationary(single_term(data, k), cfg));
  }
  return fits;
}

std::vector<FitResult> fit_nonstationary(const ObservationSeq& obs,
                                         const ModelRefs& models,
                                         const FeatureMap& features,
                                         const SolverConfig& cfg) {
  return fit_nonstationary(build_likelihood_data(obs, features, models), cfg);
}

std::vector<double> linear_cost(const FeatureMap& features,
                                std::span<const double> weights) {
  features.validate();
  if (weights.size() != features.num_features) {
    throw Error(ErrorCode::kDimension, "weights do not match the feature map");
  }
  std::vector<double> cost(features.num_states());
  for (std::size_t x = 0; x < cost.size(); ++x) cost[x] = dot(features.at(x), weights);
  return cost;
}

CostEstimate algorithm1(const ObservationSeq& obs, const FeatureMap& features,
                        const ModelRefs& models, const SolverConfig& cfg) {
  CostEstimate est;
  est.fit = fit_stationary(build_likelihood_data(obs, features, models), cfg);
  est.cost = linear_cost(features, est.fit.weights);
  return est;
}

}  // namespace invctl
