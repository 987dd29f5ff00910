#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "invctl/prob_core.h"

namespace invctl {

/// Finite-horizon KL-regularized control problem. Model vectors hold either
/// one table shared by every step or exactly `horizon` per-step tables
/// (entry k-1 drives the transition into step k).
struct ControlProblem {
  int horizon = 1;
  std::vector<std::shared_ptr<const TransitionTable>> plant;            // p^x
  std::vector<std::shared_ptr<const TransitionTable>> reference_plant;  // q^x
  std::vector<std::shared_ptr<const PolicyTable>> reference_policy;     // q^u
  Pmf initial = Pmf::uniform(1);
  /// costs[k-1] is the stage cost c_k over state cells, k = 1..N.
  std::vector<std::vector<double>> costs;

  std::size_t num_states() const;
  std::size_t num_actions() const;
  const TransitionTable& plant_at(int k) const;
  const TransitionTable& reference_plant_at(int k) const;
  const PolicyTable& reference_policy_at(int k) const;

  void validate() const;
};

/// Output of the backward recursion. Index vectors by time step directly:
/// cbar[k] for k = 1..N, chat[k] for k = 0..N, scores[k] for k = 1..N
/// (entry 0 of cbar and scores is empty).
struct CostToGo {
  int horizon = 0;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<std::vector<double>> cbar;
  std::vector<std::vector<double>> chat;
  /// scores[k][x * |U| + u] = ln q^u - KL(p^x || q^x) - E_{p^x}[cbar_k], the
  /// unnormalized log-policy at step k.
  std::vector<std::vector<double>> scores;
};

/// Marginals p_k over state cells, k = 0..N.
struct MarginalSequence {
  std::vector<Pmf> marginals;
};

/// ln q^u(u|x) - D_KL(p^x(.|x,u) || q^x(.|x,u)) for every action; -infinity
/// where either factor vanishes.
std::vector<double> modified_prior(std::span<const double> reference_policy_row,
                                   const TransitionTable& plant,
                                   const TransitionTable& reference_plant,
                                   std::size_t state);

/// modified_prior for every state, flattened as [x * |U| + u].
std::vector<double> modified_prior_table(const PolicyTable& reference_policy,
                                         const TransitionTable& plant,
                                         const TransitionTable& reference_plant,
                                         int threads = 1);

CostToGo backward_recursion(const ControlProblem& pr, int threads = 1);

/// Policies for k = 1..N (element k-1).
std::vector<PolicyTable> optimal_policy(const CostToGo& ctg,
                                        const ControlProblem& pr);

MarginalSequence propagate_marginals(const ControlProblem& pr,
                                     std::span<const PolicyTable> policies);

/// Minimum of the objective: -E_{p_0}[chat_0].
double optimal_value(const CostToGo& ctg, const MarginalSequence& m);

/// The KL-regularized objective evaluated directly for arbitrary policies via
/// the chain-rule decomposition. +infinity if a policy leaves the support of
/// q^u or reaches a transition row with infinite divergence.
double evaluate_objective(const ControlProblem& pr,
                          std::span<const PolicyTable> policies);

/// One-step (N = 1) optimal policy row at `state` for a stationary cost.
Pmf greedy_controller(std::size_t state, std::span<const double> cost,
                      const TransitionTable& plant,
                      const TransitionTable& reference_plant,
                      const PolicyTable& reference_policy);

/// greedy_controller for every state.
PolicyTable greedy_policy(std::span<const double> cost,
                          const TransitionTable& plant,
                          const TransitionTable& reference_plant,
                          const PolicyTable& reference_policy, int threads = 1);

}  // namespace invctl
