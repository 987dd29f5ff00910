#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "invctl/prob_core.h"

namespace invctl {

/// Feature vectors h(x) over state cells, stored row-major as [x * f + i].
struct FeatureMap {
  std::size_t num_features = 0;
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t num_states() const {
    return num_features == 0 ? 0 : values.size() / num_features;
  }
  std::span<const double> at(std::size_t state) const;
  void validate() const;
};

struct Observation {
  std::size_t state;   // observed x_{k-1}
  std::size_t action;  // observed u_k
};

using ObservationSeq = std::vector<Observation>;

/// The three models the estimator needs: p^x, q^x and q^u.
struct ModelRefs {
  const TransitionTable& plant;
  const TransitionTable& reference_plant;
  const PolicyTable& reference_policy;
};

struct SolverConfig {
  double grad_tol = 1e-6;  // infinity norm
  int max_iters = 10000;
  double ridge = 0.0;

  void validate() const;
};

/// Log of the modified control ln q^u(u|x) - KL(p^x || q^x) at one state.
std::vector<double> modified_control(const ModelRefs& models, std::size_t state);

/// E_{p^x(.|x,u)}[h].
std::vector<double> expected_features(const TransitionTable& plant,
                                      const FeatureMap& features,
                                      std::size_t state, std::size_t action);

/// Per-observation quantities that stay fixed while the weights are fitted.
struct LikelihoodTerm {
  std::vector<double> log_modified_control;  // |U|
  std::vector<double> expected_features;     // |U| x f, row-major
  std::size_t observed_action = 0;
};

struct LikelihoodData {
  std::size_t num_actions = 0;
  std::size_t num_features = 0;
  std::vector<LikelihoodTerm> terms;
};

LikelihoodData build_likelihood_data(const ObservationSeq& obs,
                                     const FeatureMap& features,
                                     const ModelRefs& models);

/// Negative log-likelihood of the observed actions under
/// pi_v(u|x) ~ q~(x,u) exp(-phi(x,u)^T v), dropping the v-independent
/// -ln q~(x,u_obs) term, plus ridge ||v||^2.
double nll_stationary(std::span<const double> v, const LikelihoodData& data,
                      double ridge);

std::vector<double> nll_gradient_stationary(std::span<const double> v,
                                            const LikelihoodData& data,
                                            double ridge);

struct FitResult {
  std::vector<double> weights;
  bool converged = false;
  int iters = 0;
  double final_grad_norm = 0.0;
  double objective = 0.0;
  std::vector<double> objective_history;  // one entry per accepted iterate
};

/// Gradient descent with Armijo backtracking (halving). The first trial step
/// is 1; later ones use the Barzilai-Borwein ratio of the previous iterate
/// pair. Steps are accepted on sufficient decrease, or, once the change in
/// the objective is lost in rounding noise, on a non-positive slope at the
/// new point (a true decrease, by convexity).
FitResult fit_stationary(const LikelihoodData& data, const SolverConfig& cfg,
                         std::span<const double> initial = {});
FitResult fit_stationary(const ObservationSeq& obs, const ModelRefs& models,
                         const FeatureMap& features, const SolverConfig& cfg);

/// Ridge used for per-step fits when the caller has no better choice.
inline constexpr double kDefaultNonstationaryRidge = 1e-3;

/// One weight vector per observation; the objective separates over k, so
/// each is a ridge-regularized single-observation fit. Requires ridge > 0.
std::vector<FitResult> fit_nonstationary(const LikelihoodData& data,
                                         const SolverConfig& cfg);
std::vector<FitResult> fit_nonstationary(const ObservationSeq& obs,
                                         const ModelRefs& models,
                                         const FeatureMap& features,
                                         const SolverConfig& cfg);

struct CostEstimate {
  FitResult fit;
  std::vector<double> cost;  // v*^T h(x) per state cell
};

/// Modified control at each observed state, expected features, stationary
/// maximum-likelihood fit, and the resulting cost table.
CostEstimate algorithm1(const ObservationSeq& obs, const FeatureMap& features,
                        const ModelRefs& models, const SolverConfig& cfg);

/// v^T h(x) for every state cell.
std::vector<double> linear_cost(const FeatureMap& features,
                                std::span<const double> weights);

}  // namespace invctl
