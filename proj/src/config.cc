#include "invctl/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "invctl/error.h"

namespace invctl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kParse, std::string(where) + " must be an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) {
      throw Error(ErrorCode::kParse,
                  "unknown key '" + item.key() + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

AxisSpec axis_from_json(const json& j, std::string_view where, AxisSpec axis) {
  check_keys(j, where, {"min", "max", "bins", "wrap"});
  read(j, "min", axis.min);
  read(j, "max", axis.max);
  read(j, "bins", axis.bins);
  read(j, "wrap", axis.wrap);
  return axis;
}

ordered_json axis_to_json(const AxisSpec& a) {
  return {{"min", a.min}, {"max", a.max}, {"bins", a.bins}, {"wrap", a.wrap}};
}

PendulumParams plant_from_json(const json& j, std::string_view where,
                               PendulumParams p) {
  check_keys(j, where,
             {"mass", "length", "gravity", "dt", "torque_limit", "omega_limit"});
  read(j, "mass", p.mass);
  read(j, "length", p.length);
  read(j, "gravity", p.gravity);
  read(j, "dt", p.dt);
  read(j, "torque_limit", p.torque_limit);
  read(j, "omega_limit", p.omega_limit);
  return p;
}

ordered_json plant_to_json(const PendulumParams& p) {
  return {{"mass", p.mass},
          {"length", p.length},
          {"gravity", p.gravity},
          {"dt", p.dt},
          {"torque_limit", p.torque_limit},
          {"omega_limit", p.omega_limit}};
}

const char* interpretation_name(NoiseInterpretation n) {
  return n == NoiseInterpretation::kVariance ? "variance" : "stddev";
}

}  // namespace

double NoiseSpec::sigma_theta() const {
  return interpretation == NoiseInterpretation::kVariance ? std::sqrt(theta) : theta;
}

double NoiseSpec::sigma_omega() const {
  return interpretation == NoiseInterpretation::kVariance ? std::sqrt(omega) : omega;
}

ExperimentConfig ExperimentConfig::defaults() { return {}; }

PendulumParams ExperimentConfig::target_params() const {
  PendulumParams p = target;
  p.sigma_theta = noise.sigma_theta();
  p.sigma_omega = noise.sigma_omega();
  return p;
}

PendulumParams ExperimentConfig::source_params() const {
  PendulumParams p = source;
  p.sigma_theta = noise.sigma_theta();
  p.sigma_omega = noise.sigma_omega();
  return p;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw Error(ErrorCode::kParameter,
                "unsupported schema_version " + std::to_string(schema_version));
  }
  grid.validate();
  if (!(noise.theta >= 0.0) || !(noise.omega >= 0.0)) {
    throw Error(ErrorCode::kParameter, "noise levels must be >= 0");
  }
  target_params().validate();
  source_params().validate();
  mpc.validate();
  solver.validate();
  if (!(expert_sigma > 0.0)) {
    throw Error(ErrorCode::kParameter, "expert_sigma must be > 0");
  }
  if (dataset.episodes < 0 || dataset.steps < 0 || !(dataset.alpha >= 0.0)) {
    throw Error(ErrorCode::kParameter, "dataset sizes and alpha must be >= 0");
  }
  if (eval.runs < 0 || eval.steps < 1 || eval.final_window < 1 ||
      eval.final_window > eval.steps) {
    throw Error(ErrorCode::kParameter,
                "eval needs runs >= 0 and 1 <= final_window <= steps");
  }
  if (estimation.observations < 1) {
    throw Error(ErrorCode::kParameter, "estimation needs at least one observation");
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  try {
    check_keys(j, "config",
               {"schema_version", "grid", "target", "source", "noise", "mpc",
                "expert_sigma", "expert_seed", "dataset", "eval", "estimation",
                "solver"});
    if (!j.contains("schema_version")) {
      throw Error(ErrorCode::kParse, "config is missing schema_version");
    }
    read(j, "schema_version", cfg.schema_version);
    if (cfg.schema_version != kConfigSchemaVersion) {
      throw Error(ErrorCode::kParse, "unsupported schema_version " +
                                         std::to_string(cfg.schema_version));
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      check_keys(g, "grid", {"theta", "omega", "action"});
      if (g.contains("theta")) cfg.grid.theta = axis_from_json(g["theta"], "grid.theta", cfg.grid.theta);
      if (g.contains("omega")) cfg.grid.omega = axis_from_json(g["omega"], "grid.omega", cfg.grid.omega);
      if (g.contains("action")) cfg.grid.action = axis_from_json(g["action"], "grid.action", cfg.grid.action);
    }
    if (j.contains("target")) cfg.target = plant_from_json(j["target"], "target", cfg.target);
    if (j.contains("source")) cfg.source = plant_from_json(j["source"], "source", cfg.source);
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      check_keys(n, "noise", {"theta", "omega", "interpretation"});
      read(n, "theta", cfg.noise.theta);
      read(n, "omega", cfg.noise.omega);
      if (n.contains("interpretation")) {
        const auto s = n.at("interpretation").get<std::string>();
        if (s == "variance") {
          cfg.noise.interpretation = NoiseInterpretation::kVariance;
        } else if (s == "stddev") {
          cfg.noise.interpretation = NoiseInterpretation::kStddev;
        } else {
          throw Error(ErrorCode::kParse,
                      "noise.interpretation must be 'variance' or 'stddev'");
        }
      }
    }
    if (j.contains("mpc")) {
      const auto& m = j.at("mpc");
      check_keys(m, "mpc",
                 {"horizon", "stage_theta", "stage_omega", "terminal_theta",
                  "terminal_omega", "population", "elites", "iterations",
                  "initial_std"});
      read(m, "horizon", cfg.mpc.horizon);
      read(m, "stage_theta", cfg.mpc.stage_theta);
      read(m, "stage_omega", cfg.mpc.stage_omega);
      read(m, "terminal_theta", cfg.mpc.terminal_theta);
      read(m, "terminal_omega", cfg.mpc.terminal_omega);
      read(m, "population", cfg.mpc.population);
      read(m, "elites", cfg.mpc.elites);
      read(m, "iterations", cfg.mpc.iterations);
      read(m, "initial_std", cfg.mpc.initial_std);
    }
    read(j, "expert_sigma", cfg.expert_sigma);
    read(j, "expert_seed", cfg.expert_seed);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, "dataset", {"episodes", "steps", "alpha", "seed_target", "seed_source"});
      read(d, "episodes", cfg.dataset.episodes);
      read(d, "steps", cfg.dataset.steps);
      read(d, "alpha", cfg.dataset.alpha);
      read(d, "seed_target", cfg.dataset.seed_target);
      read(d, "seed_source", cfg.dataset.seed_source);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, "eval", {"runs", "steps", "seed", "final_window", "stable_threshold"});
      read(e, "runs", cfg.eval.runs);
      read(e, "steps", cfg.eval.steps);
      read(e, "seed", cfg.eval.seed);
      read(e, "final_window", cfg.eval.final_window);
      read(e, "stable_threshold", cfg.eval.stable_threshold);
    }
    if (j.contains("estimation")) {
      const auto& e = j.at("estimation");
      check_keys(e, "estimation", {"observations", "seed"});
      read(e, "observations", cfg.estimation.observations);
      read(e, "seed", cfg.estimation.seed);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      check_keys(s, "solver", {"grad_tol", "max_iters", "ridge"});
      read(s, "grad_tol", cfg.solver.grad_tol);
      read(s, "max_iters", cfg.solver.max_iters);
      read(s, "ridge", cfg.solver.ridge);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["schema_version"] = cfg.schema_version;
  j["grid"] = {{"theta", axis_to_json(cfg.grid.theta)},
               {"omega", axis_to_json(cfg.grid.omega)},
               {"action", axis_to_json(cfg.grid.action)}};
  j["target"] = plant_to_json(cfg.target);
  j["source"] = plant_to_json(cfg.source);
  j["noise"] = {{"theta", cfg.noise.theta},
                {"omega", cfg.noise.omega},
                {"interpretation", interpretation_name(cfg.noise.interpretation)}};
  j["mpc"] = {{"horizon", cfg.mpc.horizon},
              {"stage_theta", cfg.mpc.stage_theta},
              {"stage_omega", cfg.mpc.stage_omega},
              {"terminal_theta", cfg.mpc.terminal_theta},
              {"terminal_omega", cfg.mpc.terminal_omega},
              {"population", cfg.mpc.population},
              {"elites", cfg.mpc.elites},
              {"iterations", cfg.mpc.iterations},
              {"initial_std", cfg.mpc.initial_std}};
  j["expert_sigma"] = cfg.expert_sigma;
  j["expert_seed"] = cfg.expert_seed;
  j["dataset"] = {{"episodes", cfg.dataset.episodes},
                  {"steps", cfg.dataset.steps},
                  {"alpha", cfg.dataset.alpha},
                  {"seed_target", cfg.dataset.seed_target},
                  {"seed_source", cfg.dataset.seed_source}};
  j["eval"] = {{"runs", cfg.eval.runs},
               {"steps", cfg.eval.steps},
               {"seed", cfg.eval.seed},
               {"final_window", cfg.eval.final_window},
               {"stable_threshold", cfg.eval.stable_threshold}};
  j["estimation"] = {{"observations", cfg.estimation.observations},
                     {"seed", cfg.estimation.seed}};
  j["solver"] = {{"grad_tol", cfg.solver.grad_tol},
                 {"max_iters", cfg.solver.max_iters},
                 {"ridge", cfg.solver.ridge}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void override_seeds(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.dataset.seed_target = seed;
  cfg.dataset.seed_source = seed + 1;
  cfg.expert_seed = seed + 2;
  cfg.eval.seed = seed + 1000;
  cfg.estimation.seed = seed + 2000;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace invctl
