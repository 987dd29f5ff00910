#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "invctl/grid.h"
#include "invctl/inverse_estimation.h"
#include "invctl/pendulum.h"

namespace invctl {

inline constexpr int kConfigSchemaVersion = 1;

enum class NoiseInterpretation { kVariance, kStddev };

/// The per-step noise levels N(0, theta) and N(0, omega) as written in the
/// experiment description, plus how to read the second parameter.
struct NoiseSpec {
  double theta = 0.05;
  double omega = 0.1;
  NoiseInterpretation interpretation = NoiseInterpretation::kVariance;

  double sigma_theta() const;
  double sigma_omega() const;
};

struct DatasetConfig {
  int episodes = 200;
  int steps = 100;
  double alpha = 1e-3;
  std::uint64_t seed_target = 1;
  std::uint64_t seed_source = 2;
};

struct EvalConfig {
  int runs = 20;
  int steps = 100;
  std::uint64_t seed = 1000;  // run r uses seed + r
  int final_window = 10;
  double stable_threshold = 0.3;  // rad, on mean |theta| over the window
};

struct EstimationConfig {
  int observations = 300;
  std::uint64_t seed = 2000;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  GridSpec grid = GridSpec::pendulum_default();
  PendulumParams target;  // sigma fields are filled from `noise`
  PendulumParams source{.mass = 0.5, .length = 0.5};
  NoiseSpec noise;
  MPCConfig mpc;
  double expert_sigma = 0.2;
  std::uint64_t expert_seed = 3;
  DatasetConfig dataset;
  EvalConfig eval;
  EstimationConfig estimation;
  SolverConfig solver;

  /// Target m = 1, l = 0.6; source m = 0.5, l = 0.5; dt = 0.1 for both.
  static ExperimentConfig defaults();

  /// Pendulum parameters with the noise standard deviations applied.
  PendulumParams target_params() const;
  PendulumParams source_params() const;

  void validate() const;
};

/// schema_version is required. Other missing keys keep their defaults;
/// unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets every stage seed from one value: target data s, source data s + 1,
/// expert s + 2, evaluation s + 1000, estimation s + 2000.
void override_seeds(ExperimentConfig& cfg, std::uint64_t seed);

/// FNV-1a 64-bit hash of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace invctl
