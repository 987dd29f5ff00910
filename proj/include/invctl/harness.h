#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "invctl/config.h"
#include "invctl/error.h"
#include "invctl/inverse_estimation.h"
#include "invctl/pendulum.h"
#include "invctl/sysid.h"

namespace invctl {

enum class System { kTarget, kSource };

System parse_system(const std::string& name);
const char* system_name(System s);

/// Random-torque exploration data for one of the two pendulums.
Dataset generate_dataset(const ExperimentConfig& cfg, System system);

struct Models {
  TransitionTable plant;            // p^x, target
  TransitionTable reference_plant;  // q^x, source
  PolicyTable reference_policy;     // q^u, noisy MPC expert on the source
};

/// Histogram transition models (analytic fallback for unseen rows) and the
/// MPC expert table.
Models build_models(const ExperimentConfig& cfg, const Dataset& target_data,
                    const Dataset& source_data, int threads = 1);

/// [|theta|, |omega|] at every state-cell center.
FeatureMap pendulum_feature_map(const GridSpec& grid);

/// theta^2 + 0.01 omega^2 at every state-cell center.
std::vector<double> target_cost_table(const GridSpec& grid);

PolicyTable solve_policy(const std::vector<double>& cost, const Models& models,
                         int threads = 1);

struct RunSummary {
  int run_id = 0;
  double theta0 = 0.0;
  double omega0 = 0.0;
  double mean_abs_theta_final = 0.0;  // over the last eval.final_window states
  bool stabilized = false;
};

struct Evaluation {
  std::vector<Trajectory> runs;
  std::vector<RunSummary> summaries;

  int stabilized_count() const;
};

/// eval.runs closed-loop rollouts of the target pendulum. Run r is seeded by
/// eval.seed + r; theta_0 ~ U(-1, 1), omega_0 ~ U(-0.5, 0.5).
Evaluation evaluate_policy(const ExperimentConfig& cfg, const PolicyTable& policy,
                           int threads = 1);

/// Header `run_id,step,theta,omega,u`; row k = 1..steps holds x_k and the
/// torque u_k that produced it, with 17 significant digits.
void write_runs_csv(std::ostream& out, const std::vector<Trajectory>& runs);

struct Estimation {
  ObservationSeq observations;
  CostEstimate estimate;
};

/// One estimation.observations-step rollout of `policy` on the target,
/// followed by the maximum-likelihood cost fit.
Estimation estimate_cost(const ExperimentConfig& cfg, const Models& models,
                         const PolicyTable& policy);

struct RunReport {
  std::string config_hash;
  std::vector<RunSummary> fig1;
  std::vector<RunSummary> fig2;
  std::vector<std::string> feature_names;
  FitResult fit;
  int observations = 0;
};

nlohmann::ordered_json report_to_json(const RunReport& r);

/// Thrown by the pipeline; names the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Runs every stage in process and writes dataset_target.jsonl,
/// dataset_source.jsonl, fig1.csv, weights.json, fig2.csv and report.json to
/// `out_dir`. On failure a STALE file naming the stage is left behind.
RunReport full_experiment(const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir, int threads = 1);

/// Human-readable summary of a report file. Malformed input throws a parse
/// error carrying the line number.
void print_report(std::istream& in, std::ostream& out);

}  // namespace invctl
