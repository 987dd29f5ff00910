#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "invctl/grid.h"
#include "invctl/inverse_estimation.h"
#include "invctl/prob_core.h"

namespace invctl {

/// Metadata stored alongside every serialized table.
struct TableHeader {
  std::string kind;  // "transition", "policy" or "values"
  int k = 0;         // time step the table belongs to; 0 if stationary
  std::size_t theta_bins = 0;
  std::size_t omega_bins = 0;
  std::size_t action_bins = 0;
  std::string config_hash;

  static TableHeader for_grid(std::string kind, int k, const GridSpec& grid,
                              std::string config_hash);
};

// Tables are JSON objects: the header fields, "shape", and a flat row-major
// "probs" (or "values") array written with shortest round-trip digits.
void write_transition_json(std::ostream& out, const TransitionTable& table,
                           const TableHeader& header);
void write_policy_json(std::ostream& out, const PolicyTable& table,
                       const TableHeader& header);
void write_values_json(std::ostream& out, std::span<const double> values,
                       const TableHeader& header);

TransitionTable read_transition_json(std::istream& in, TableHeader* header = nullptr);
PolicyTable read_policy_json(std::istream& in, TableHeader* header = nullptr);
std::vector<double> read_values_json(std::istream& in, TableHeader* header = nullptr);

/// {"features", "weights", "converged", "iters", "final_grad_norm"}.
void write_weights_json(std::ostream& out, const std::vector<std::string>& names,
                        const FitResult& fit);
struct WeightsFile {
  std::vector<std::string> features;
  std::vector<double> weights;
  bool converged = false;
  int iters = 0;
  double final_grad_norm = 0.0;
};
WeightsFile read_weights_json(std::istream& in);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace invctl
