#include "invctl/forward_control.h"

#include <cmath>
#include <string>

#include "invctl/error.h"
#include "invctl/parallel.h"

namespace invctl {

namespace {

template <typename T>
const T& pick_step(const std::vector<std::shared_ptr<const T>>& tables, int k,
                   int horizon, const char* what) {
  if (k < 1 || k > horizon) {
    throw Error(ErrorCode::kIndex, std::string(what) + ": step out of range");
  }
  const auto& ptr = tables.size() == 1 ? tables.front()
                                       : tables.at(static_cast<std::size_t>(k - 1));
  if (!ptr) throw Error(ErrorCode::kInput, std::string(what) + ": missing table");
  return *ptr;
}

// Unnormalized log-policy over actions at one state: modified prior minus the
// expected effective cost of the successor.
void score_row(std::span<const double> reference_policy_row,
               const TransitionTable& plant, const TransitionTable& reference_plant,
               std::size_t state, std::span<const double> cbar,
               std::span<double> out) {
  const auto prior = modified_prior(reference_policy_row, plant, reference_plant, state);
  for (std::size_t u = 0; u < out.size(); ++u) {
    out[u] = prior[u] == -kInfinity
                 ? -kInfinity
                 : prior[u] - expectation(plant.row(state, u), cbar);
  }
}

}  // namespace

std::size_t ControlProblem::num_states() const { return initial.size(); }

std::size_t ControlProblem::num_actions() const {
  return reference_policy_at(1).num_actions();
}

const TransitionTable& ControlProblem::plant_at(int k) const {
  return pick_step(plant, k, horizon, "plant");
}

const TransitionTable& ControlProblem::reference_plant_at(int k) const {
  return pick_step(reference_plant, k, horizon, "reference plant");
}

const PolicyTable& ControlProblem::reference_policy_at(int k) const {
  return pick_step(reference_policy, k, horizon, "reference policy");
}

void ControlProblem::validate() const {
  if (horizon < 1) throw Error(ErrorCode::kParameter, "horizon must be >= 1");
  const auto n = static_cast<std::size_t>(horizon);
  auto check_count = [&](std::size_t count, const char* what) {
    if (count != 1 && count != n) {
      throw Error(ErrorCode::kDimension,
                  std::string(what) + ": expected 1 shared or N per-step tables");
    }
  };
  check_count(plant.size(), "plant");
  check_count(reference_plant.size(), "reference plant");
  check_count(reference_policy.size(), "reference policy");
  if (costs.size() != n) {
    throw Error(ErrorCode::kDimension, "one stage cost table per step required");
  }
  const std::size_t xs = num_states();
  const std::size_t us = num_actions();
  for (int k = 1; k <= horizon; ++k) {
    const auto& px = plant_at(k);
    const auto& qx = reference_plant_at(k);
    const auto& qu = reference_policy_at(k);
    if (px.num_states() != xs || qx.num_states() != xs || qu.num_states() != xs ||
        px.num_actions() != us || qx.num_actions() != us || qu.num_actions() != us) {
      throw Error(ErrorCode::kDimension,
                  "tables at step " + std::to_string(k) + " disagree on the grid");
    }
    const auto& c = costs[static_cast<std::size_t>(k - 1)];
    if (c.size() != xs) {
      throw Error(ErrorCode::kDimension,
                  "stage cost " + std::to_string(k) + " has the wrong size");
    }
    for (double v : c) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInput,
                    "stage cost " + std::to_string(k) + " is not finite");
      }
    }
  }
}

std::vector<double> modified_prior(std::span<const double> reference_policy_row,
                                   const TransitionTable& plant,
                                   const TransitionTable& reference_plant,
                                   std::size_t state) {
  const std::size_t n_actions = reference_policy_row.size();
  if (plant.num_actions() != n_actions || reference_plant.num_actions() != n_actions ||
      plant.num_states() != reference_plant.num_states()) {
    throw Error(ErrorCode::kDimension, "modified_prior: tables disagree on the grid");
  }
  std::vector<double> log_weights(n_actions, -kInfinity);
  bool any_finite = false;
  for (std::size_t u = 0; u < n_actions; ++u) {
    const double q = reference_policy_row[u];
    if (q <= 0.0) continue;
    const ExtendedReal kl =
        kl_divergence(plant.row(state, u), reference_plant.row(state, u));
    if (!kl.is_finite()) continue;
    log_weights[u] = std::log(q) - kl.value();
    any_finite = true;
  }
  if (!any_finite) {
    throw Error(ErrorCode::kDegenerateModel,
                "every action has zero modified prior at state " +
                    std::to_string(state));
  }
  return log_weights;
}

std::vector<double> modified_prior_table(const PolicyTable& reference_policy,
                                         const TransitionTable& plant,
                                         const TransitionTable& reference_plant,
                                         int threads) {
  const std::size_t xs = reference_policy.num_states();
  const std::size_t us = reference_policy.num_actions();
  std::vector<double> table(xs * us);
  parallel_for(xs, threads, [&](std::size_t x) {
    const auto row = modified_prior(reference_policy.row(x), plant, reference_plant, x);
    std::copy(row.begin(), row.end(), table.begin() + static_cast<std::ptrdiff_t>(x * us));
  });
  return table;
}

CostToGo backward_recursion(const ControlProblem& pr, int threads) {
  pr.validate();
  const int n = pr.horizon;
  const std::size_t xs = pr.num_states();
  const std::size_t us = pr.num_actions();

  CostToGo ctg;
  ctg.horizon = n;
  ctg.num_states = xs;
  ctg.num_actions = us;
  ctg.cbar.resize(static_cast<std::size_t>(n) + 1);
  ctg.chat.resize(static_cast<std::size_t>(n) + 1);
  ctg.scores.resize(static_cast<std::size_t>(n) + 1);

  const auto last = static_cast<std::size_t>(n);
  ctg.chat[last].assign(xs, 0.0);
  ctg.cbar[last] = pr.costs[last - 1];

  for (int k = n - 1; k >= 0; --k) {
    const auto next = static_cast<std::size_t>(k + 1);
    const auto& px = pr.plant_at(k + 1);
    const auto& qx = pr.reference_plant_at(k + 1);
    const auto& qu = pr.reference_policy_at(k + 1);
    auto& scores = ctg.scores[next];
    auto& chat = ctg.chat[static_cast<std::size_t>(k)];
    scores.assign(xs * us, 0.0);
    chat.assign(xs, 0.0);
    parallel_for(xs, threads, [&](std::size_t x) {
      std::span<double> row = std::span<double>(scores).subspan(x * us, us);
      score_row(qu.row(x), px, qx, x, ctg.cbar[next], row);
      chat[x] = log_sum_exp(row);
    });
    for (std::size_t x = 0; x < xs; ++x) {
      if (!std::isfinite(chat[x])) {
        throw Error(ErrorCode::kUnboundedProblem,
                    "non-finite log-partition at k=" + std::to_string(k) +
                        ", state " + std::to_string(x));
      }
    }
    if (k >= 1) {
      const auto& c = pr.costs[static_cast<std::size_t>(k - 1)];
      auto& cbar = ctg.cbar[static_cast<std::size_t>(k)];
      cbar.resize(xs);
      for (std::size_t x = 0; x < xs; ++x) cbar[x] = c[x] - chat[x];
    }
  }
  return ctg;
}

std::vector<PolicyTable> optimal_policy(const CostToGo& ctg,
                                        const ControlProblem& pr) {
  if (ctg.horizon != pr.horizon || ctg.num_states != pr.num_states() ||
      ctg.num_actions != pr.num_actions()) {
    throw Error(ErrorCode::kDimension, "cost-to-go does not match the problem");
  }
  const std::size_t xs = ctg.num_states;
  const std::size_t us = ctg.num_actions;
  std::vector<PolicyTable> policies;
  policies.reserve(static_cast<std::size_t>(ctg.horizon));
  for (int k = 1; k <= ctg.horizon; ++k) {
    const auto& scores = ctg.scores[static_cast<std::size_t>(k)];
    std::vector<double> probs(xs * us);
    for (std::size_t x = 0; x < xs; ++x) {
      const auto row = std::span<const double>(scores).subspan(x * us, us);
      const Pmf pmf = softmax(row);
      std::copy(pmf.probs().begin(), pmf.probs().end(),
                probs.begin() + static_cast<std::ptrdiff_t>(x * us));
    }
    policies.emplace_back(xs, us, std::move(probs));
  }
  return policies;
}

MarginalSequence propagate_marginals(const ControlProblem& pr,
                                     std::span<const PolicyTable> policies) {
  if (policies.size() != static_cast<std::size_t>(pr.horizon)) {
    throw Error(ErrorCode::kDimension, "one policy per step required");
  }
  const std::size_t xs = pr.num_states();
  const std::size_t us = pr.num_actions();
  MarginalSequence m;
  m.marginals.push_back(pr.initial);
  for (int k = 1; k <= pr.horizon; ++k) {
    const auto& pi = policies[static_cast<std::size_t>(k - 1)];
    if (pi.num_states() != xs || pi.num_actions() != us) {
      throw Error(ErrorCode::kDimension, "policy does not match the problem");
    }
    const auto& px = pr.plant_at(k);
    const Pmf& prev = m.marginals.back();
    std::vector<double> next(xs, 0.0);
    for (std::size_t x = 0; x < xs; ++x) {
      if (prev[x] == 0.0) continue;
      const auto action_probs = pi.row(x);
      for (std::size_t u = 0; u < us; ++u) {
        const double w = prev[x] * action_probs[u];
        if (w == 0.0) continue;
        const auto row = px.row(x, u);
        for (std::size_t xn = 0; xn < xs; ++xn) next[xn] += w * row[xn];
      }
    }
    m.marginals.emplace_back(std::move(next));
  }
  return m;
}

double optimal_value(const CostToGo& ctg, const MarginalSequence& m) {
  if (m.marginals.empty() || ctg.chat.empty()) {
    throw Error(ErrorCode::kDimension, "optimal_value: empty inputs");
  }
  return -expectation(m.marginals.front(), ctg.chat.front());
}

double evaluate_objective(const ControlProblem& pr,
                          std::span<const PolicyTable> policies) {
  pr.validate();
  const auto m = propagate_marginals(pr, policies);
  const std::size_t xs = pr.num_states();
  const std::size_t us = pr.num_actions();
  double total = 0.0;
  for (int k = 1; k <= pr.horizon; ++k) {
    const auto& pi = policies[static_cast<std::size_t>(k - 1)];
    const auto& px = pr.plant_at(k);
    const auto& qx = pr.reference_plant_at(k);
    const auto& qu = pr.reference_policy_at(k);
    const auto& cost = pr.costs[static_cast<std::size_t>(k - 1)];
    const Pmf& marginal = m.marginals[static_cast<std::size_t>(k - 1)];
    for (std::size_t x = 0; x < xs; ++x) {
      if (marginal[x] == 0.0) continue;
      const ExtendedReal policy_kl = kl_divergence(pi.row(x), qu.row(x));
      if (!policy_kl.is_finite()) return kInfinity;
      double stage = policy_kl.value();
      const auto action_probs = pi.row(x);
      for (std::size_t u = 0; u < us; ++u) {
        if (action_probs[u] == 0.0) continue;
        const ExtendedReal plant_kl = kl_divergence(px.row(x, u), qx.row(x, u));
        if (!plant_kl.is_finite()) return kInfinity;
        stage += action_probs[u] * (plant_kl.value() + expectation(px.row(x, u), cost));
      }
      total += marginal[x] * stage;
    }
  }
  return total;
}

Pmf greedy_controller(std::size_t state, std::span<const double> cost,
                      const TransitionTable& plant,
                      const TransitionTable& reference_plant,
                      const PolicyTable& reference_policy) {
  if (cost.size() != plant.num_states()) {
    throw Error(ErrorCode::kDimension, "greedy_controller: cost size mismatch");
  }
  std::vector<double> scores(reference_policy.num_actions());
  score_row(reference_policy.row(state), plant, reference_plant, state, cost, scores);
  return softmax(scores);
}

PolicyTable greedy_policy(std::span<const double> cost, const TransitionTable& plant,
                          const TransitionTable& reference_plant,
                          const PolicyTable& reference_policy, int threads) {
  const std::size_t xs = reference_policy.num_states();
  const std::size_t us = reference_policy.num_actions();
  std::vector<double> probs(xs * us);
  parallel_for(xs, threads, [&](std::size_t x) {
    const Pmf row = greedy_controller(x, cost, plant, reference_plant, reference_policy);
    std::copy(row.probs().begin(), row.probs().end(),
              probs.begin() + static_cast<std::ptrdiff_t>(x * us));
  });
  return PolicyTable(xs, us, std::move(probs));
}

}  // namespace invctl
