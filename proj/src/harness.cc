#include "invctl/harness.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <algorithm>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "invctl/forward_control.h"
#include "invctl/parallel.h"
#include "invctl/table_io.h"

namespace invctl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

PendulumState draw_initial_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> theta(-1.0, 1.0);
  std::uniform_real_distribution<double> omega(-0.5, 0.5);
  PendulumState s;
  s.theta = theta(rng);
  s.omega = omega(rng);
  return s;
}

ordered_json runs_to_json(const std::vector<RunSummary>& runs) {
  ordered_json arr = ordered_json::array();
  int stabilized = 0;
  for (const auto& r : runs) {
    arr.push_back({{"run_id", r.run_id},
                   {"theta0", r.theta0},
                   {"omega0", r.omega0},
                   {"mean_abs_theta_final", r.mean_abs_theta_final},
                   {"stabilized", r.stabilized}});
    stabilized += r.stabilized;
  }
  return {{"stabilized", stabilized}, {"total", runs.size()}, {"runs", arr}};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

std::string fixed(double v, const char* fmt = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void print_runs(const json& section, const char* name, std::ostream& out) {
  out << name << " runs\n";
  out << "run_id  theta0  omega0  mean_abs_theta_final  stabilized\n";
  const auto& runs = section.at("runs");
  int stabilized = 0;
  for (const auto& r : runs) {
    const bool ok = r.at("stabilized").get<bool>();
    stabilized += ok;
    out << r.at("run_id").get<int>() << "  " << fixed(r.at("theta0").get<double>())
        << "  " << fixed(r.at("omega0").get<double>()) << "  "
        << fixed(r.at("mean_abs_theta_final").get<double>()) << "  "
        << (ok ? "yes" : "no") << '\n';
  }
  if (!runs.empty()) {
    out << "stabilized " << stabilized << '/' << runs.size() << '\n';
  }
}

}  // namespace

System parse_system(const std::string& name) {
  if (name == "target") return System::kTarget;
  if (name == "source") return System::kSource;
  throw Error(ErrorCode::kParameter, "system must be 'target' or 'source', got '" +
                                         name + "'");
}

const char* system_name(System s) {
  return s == System::kTarget ? "target" : "source";
}

Dataset generate_dataset(const ExperimentConfig& cfg, System system) {
  cfg.validate();
  const bool target = system == System::kTarget;
  return collect_random_dataset(target ? cfg.target_params() : cfg.source_params(),
                                cfg.dataset.episodes, cfg.dataset.steps,
                                target ? cfg.dataset.seed_target : cfg.dataset.seed_source);
}

Models build_models(const ExperimentConfig& cfg, const Dataset& target_data,
                    const Dataset& source_data, int threads) {
  cfg.validate();
  TransitionEstimateOptions opts;
  opts.alpha = cfg.dataset.alpha;
  opts.analytic_fallback = cfg.target_params();
  auto plant = estimate_transition_pmf(target_data, cfg.grid, opts).table;
  opts.analytic_fallback = cfg.source_params();
  auto reference_plant = estimate_transition_pmf(source_data, cfg.grid, opts).table;
  auto reference_policy =
      expert_policy_table(cfg.grid, cfg.source_params(), cfg.mpc, cfg.expert_sigma,
                          cfg.expert_seed, threads);
  return {std::move(plant), std::move(reference_plant), std::move(reference_policy)};
}

FeatureMap pendulum_feature_map(const GridSpec& grid) {
  FeatureMap f;
  f.num_features = kNumPendulumFeatures;
  f.names = {"abs_theta", "abs_omega"};
  f.values.reserve(grid.num_states() * kNumPendulumFeatures);
  for (std::size_t x = 0; x < grid.num_states(); ++x) {
    const StateCenter c = decode_state(x, grid);
    for (double h : features({c.theta, c.omega})) f.values.push_back(h);
  }
  return f;
}

std::vector<double> target_cost_table(const GridSpec& grid) {
  std::vector<double> cost(grid.num_states());
  for (std::size_t x = 0; x < cost.size(); ++x) {
    const StateCenter c = decode_state(x, grid);
    cost[x] = target_cost({c.theta, c.omega});
  }
  return cost;
}

PolicyTable solve_policy(const std::vector<double>& cost, const Models& models,
                         int threads) {
  return greedy_policy(cost, models.plant, models.reference_plant,
                       models.reference_policy, threads);
}

int Evaluation::stabilized_count() const {
  int n = 0;
  for (const auto& s : summaries) n += s.stabilized;
  return n;
}

Evaluation evaluate_policy(const ExperimentConfig& cfg, const PolicyTable& policy,
                           int threads) {
  cfg.validate();
  const auto runs = static_cast<std::size_t>(cfg.eval.runs);
  const PendulumParams plant = cfg.target_params();
  Evaluation ev;
  ev.runs.resize(runs);
  ev.summaries.resize(runs);
  parallel_for(runs, threads, [&](std::size_t r) {
    std::mt19937_64 rng(cfg.eval.seed + r);
    const PendulumState s0 = draw_initial_state(rng);
    const std::uint64_t rollout_seed = rng();
    ev.runs[r] = rollout(s0, policy, cfg.eval.steps, rollout_seed, plant, cfg.grid);

    RunSummary& s = ev.summaries[r];
    s.run_id = static_cast<int>(r);
    s.theta0 = s0.theta;
    s.omega0 = s0.omega;
    const auto& traj = ev.runs[r];
    const std::size_t window = static_cast<std::size_t>(cfg.eval.final_window);
    double sum = 0.0;
    for (std::size_t k = traj.size() - window; k < traj.size(); ++k) {
      sum += std::abs(traj[k].next.theta);
    }
    s.mean_abs_theta_final = sum / static_cast<double>(window);
    s.stabilized = s.mean_abs_theta_final < cfg.eval.stable_threshold;
  });
  return ev;
}

void write_runs_csv(std::ostream& out, const std::vector<Trajectory>& runs) {
  out << "run_id,step,theta,omega,u\n";
  char buf[128];
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (std::size_t k = 0; k < runs[r].size(); ++k) {
      const auto& st = runs[r][k];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g\n", r, k + 1,
                    st.next.theta, st.next.omega, st.u);
      out << buf;
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing run CSV");
}

Estimation estimate_cost(const ExperimentConfig& cfg, const Models& models,
                         const PolicyTable& policy) {
  cfg.validate();
  std::mt19937_64 rng(cfg.estimation.seed);
  const PendulumState s0 = draw_initial_state(rng);
  const auto traj = rollout(s0, policy, cfg.estimation.observations, rng(),
                            cfg.target_params(), cfg.grid);
  Estimation e;
  e.observations.reserve(traj.size());
  for (const auto& st : traj) e.observations.push_back({st.state_cell, st.action_cell});
  e.estimate = algorithm1(e.observations, pendulum_feature_map(cfg.grid),
                          ModelRefs{models.plant, models.reference_plant,
                                    models.reference_policy},
                          cfg.solver);
  return e;
}

ordered_json report_to_json(const RunReport& r) {
  ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["config_hash"] = r.config_hash;
  j["fig1"] = runs_to_json(r.fig1);
  j["fig2"] = runs_to_json(r.fig2);
  j["estimation"] = {{"observations", r.observations},
                     {"features", r.feature_names},
                     {"weights", r.fit.weights},
                     {"converged", r.fit.converged},
                     {"iters", r.fit.iters},
                     {"final_grad_norm", r.fit.final_grad_norm},
                     {"objective", r.fit.objective}};
  return j;
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage '" + stage + "' failed: " + cause.what()),
      stage_(std::move(stage)) {}

RunReport full_experiment(const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir, int threads) {
  std::filesystem::create_directories(out_dir);
  const auto stale = out_dir / "STALE";
  std::filesystem::remove(stale);

  std::string stage;
  auto run = [&](const char* name, const std::function<void()>& body) {
    stage = name;
    body();
  };

  RunReport report;
  try {
    run("config", [&] {
      cfg.validate();
      report.config_hash = config_hash(cfg);
    });
    Dataset target_data, source_data;
    run("datasets", [&] {
      target_data = generate_dataset(cfg, System::kTarget);
      source_data = generate_dataset(cfg, System::kSource);
      for (auto [data, name] : {std::pair{&target_data, "dataset_target.jsonl"},
                                std::pair{&source_data, "dataset_source.jsonl"}}) {
        auto out = open_output(out_dir / name);
        write_dataset_jsonl(*data, out);
        finish(out, out_dir / name);
      }
    });
    std::optional<Models> models;
    run("models", [&] { models = build_models(cfg, target_data, source_data, threads); });
    std::optional<PolicyTable> policy;
    run("policy", [&] { policy = solve_policy(target_cost_table(cfg.grid), *models, threads); });
    run("fig1", [&] {
      const auto ev = evaluate_policy(cfg, *policy, threads);
      report.fig1 = ev.summaries;
      auto out = open_output(out_dir / "fig1.csv");
      write_runs_csv(out, ev.runs);
      finish(out, out_dir / "fig1.csv");
    });
    std::optional<Estimation> est;
    run("estimation", [&] {
      est = estimate_cost(cfg, *models, *policy);
      report.feature_names = pendulum_feature_map(cfg.grid).names;
      report.fit = est->estimate.fit;
      report.observations = static_cast<int>(est->observations.size());
      auto out = open_output(out_dir / "weights.json");
      write_weights_json(out, report.feature_names, report.fit);
      finish(out, out_dir / "weights.json");
    });
    run("fig2", [&] {
      const auto resynthesized = solve_policy(est->estimate.cost, *models, threads);
      const auto ev = evaluate_policy(cfg, resynthesized, threads);
      report.fig2 = ev.summaries;
      auto out = open_output(out_dir / "fig2.csv");
      write_runs_csv(out, ev.runs);
      finish(out, out_dir / "fig2.csv");
    });
    run("report", [&] {
      auto out = open_output(out_dir / "report.json");
      out << report_to_json(report).dump(2) << '\n';
      finish(out, out_dir / "report.json");
    });
  } catch (...) {
    std::ofstream marker(stale);
    marker << "stage: " << stage << '\n';
    try {
      throw;
    } catch (const Error& e) {
      marker << e.what() << '\n';
      throw StageError(stage, e);
    } catch (const std::exception& e) {
      marker << e.what() << '\n';
      throw StageError(stage, Error(ErrorCode::kIo, e.what()));
    }
  }
  return report;
}

void print_report(std::istream& in, std::ostream& out) {
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw Error(ErrorCode::kParse, "report line " + std::to_string(line) + ": " + e.what());
  }
  try {
    out << "config_hash " << j.at("config_hash").get<std::string>() << "\n\n";
    print_runs(j.at("fig1"), "fig1", out);
    out << '\n';
    print_runs(j.at("fig2"), "fig2", out);
    out << "\nestimation\n";
    out << "feature  weight\n";
    if (j.contains("estimation")) {
      const auto& e = j.at("estimation");
      const auto names = e.at("features").get<std::vector<std::string>>();
      const auto weights = e.at("weights").get<std::vector<double>>();
      if (names.size() != weights.size()) {
        throw Error(ErrorCode::kParse, "report: one weight per feature required");
      }
      for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i] << "  " << fixed(weights[i]) << '\n';
      }
      if (e.contains("converged")) {
        out << "converged " << (e.at("converged").get<bool>() ? "yes" : "no")
            << "  iters " << e.at("iters").get<int>() << "  final_grad_norm "
            << fixed(e.at("final_grad_norm").get<double>(), "%.3e") << '\n';
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("report: ") + e.what());
  }
}

}  // namespace invctl
