#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "invctl/config.h"
#include "invctl/harness.h"
#include "invctl/table_io.h"

namespace fs = std::filesystem;
using namespace invctl;

namespace {

struct Globals {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg =
      g.config_path.empty() ? ExperimentConfig::defaults() : load_config(g.config_path);
  if (g.seed) override_seeds(cfg, *g.seed);
  cfg.validate();
  return cfg;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

Dataset load_dataset(const fs::path& path) {
  auto in = open_input(path);
  try {
    return read_dataset_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Models load_models(const fs::path& dir) {
  auto a = open_input(dir / "plant_target.json");
  auto b = open_input(dir / "plant_source.json");
  auto c = open_input(dir / "expert_policy.json");
  return {read_transition_json(a), read_transition_json(b), read_policy_json(c)};
}

PolicyTable load_policy(const fs::path& path) {
  auto in = open_input(path);
  return read_policy_json(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL-regularized control and inverse cost estimation for the pendulum"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "override every stage seed");
  app.add_option("--threads", g.threads, "worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-dataset", "write a random-torque JSON-lines dataset");
  std::string system = "target";
  gen->add_option("--system", system, "target or source")
      ->check(CLI::IsMember({"target", "source"}))
      ->capture_default_str();

  app.add_subcommand("build-models", "estimate p^x, q^x and the expert policy q^u");

  auto* solve = app.add_subcommand("solve-policy", "greedy KL-regularized policy");
  std::string cost_path;
  std::string policy_out = "policy.json";
  solve->add_option("--cost", cost_path, "weights.json; default is the true cost");
  solve->add_option("--output", policy_out, "file name inside --out")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "evaluation rollouts to CSV");
  std::string policy_in = "policy.json";
  std::string csv_name = "fig1.csv";
  sim->add_option("--policy", policy_in, "policy file inside --out")->capture_default_str();
  sim->add_option("--csv", csv_name, "CSV file inside --out")->capture_default_str();

  auto* est = app.add_subcommand("estimate-cost", "fit cost weights from one rollout");
  est->add_option("--policy", policy_in, "policy file inside --out")->capture_default_str();

  app.add_subcommand("full-experiment", "run every stage and write the report");

  auto* rep = app.add_subcommand("report", "summarize a report file");
  std::string report_path;
  rep->add_option("path", report_path, "report.json (default: <out>/report.json)");

  CLI11_PARSE(app, argc, argv);

  const fs::path out = g.out_dir;
  try {
    if (gen->parsed()) {
      const auto cfg = resolve_config(g);
      const System s = parse_system(system);
      const auto path = out / (std::string("dataset_") + system_name(s) + ".jsonl");
      auto file = open_output(path);
      write_dataset_jsonl(generate_dataset(cfg, s), file);
      std::cout << "wrote " << path.string() << '\n';
    } else if (app.got_subcommand("build-models")) {
      const auto cfg = resolve_config(g);
      const auto models = build_models(cfg, load_dataset(out / "dataset_target.jsonl"),
                                       load_dataset(out / "dataset_source.jsonl"),
                                       g.threads);
      const auto hash = config_hash(cfg);
      auto a = open_output(out / "plant_target.json");
      write_transition_json(a, models.plant, TableHeader::for_grid("transition", 0, cfg.grid, hash));
      auto b = open_output(out / "plant_source.json");
      write_transition_json(b, models.reference_plant,
                            TableHeader::for_grid("transition", 0, cfg.grid, hash));
      auto c = open_output(out / "expert_policy.json");
      write_policy_json(c, models.reference_policy,
                        TableHeader::for_grid("policy", 0, cfg.grid, hash));
      std::cout << "wrote models to " << out.string() << '\n';
    } else if (solve->parsed()) {
      const auto cfg = resolve_config(g);
      const auto models = load_models(out);
      std::vector<double> cost;
      if (cost_path.empty()) {
        cost = target_cost_table(cfg.grid);
      } else {
        auto in = open_input(cost_path);
        cost = linear_cost(pendulum_feature_map(cfg.grid), read_weights_json(in).weights);
      }
      const auto policy = solve_policy(cost, models, g.threads);
      auto file = open_output(out / policy_out);
      write_policy_json(file, policy, TableHeader::for_grid("policy", 1, cfg.grid, config_hash(cfg)));
      std::cout << "wrote " << (out / policy_out).string() << '\n';
    } else if (sim->parsed()) {
      const auto cfg = resolve_config(g);
      const auto ev = evaluate_policy(cfg, load_policy(out / policy_in), g.threads);
      auto file = open_output(out / csv_name);
      write_runs_csv(file, ev.runs);
      std::cout << "stabilized " << ev.stabilized_count() << '/' << ev.runs.size()
                << "; wrote " << (out / csv_name).string() << '\n';
    } else if (est->parsed()) {
      const auto cfg = resolve_config(g);
      const auto e = estimate_cost(cfg, load_models(out), load_policy(out / policy_in));
      auto file = open_output(out / "weights.json");
      write_weights_json(file, pendulum_feature_map(cfg.grid).names, e.estimate.fit);
      std::cout << "weights [" << format_double(e.estimate.fit.weights[0]) << ", "
                << format_double(e.estimate.fit.weights[1]) << "] converged "
                << (e.estimate.fit.converged ? "yes" : "no") << '\n';
    } else if (app.got_subcommand("full-experiment")) {
      const auto cfg = resolve_config(g);
      const auto r = full_experiment(cfg, out, g.threads);
      int fig1 = 0, fig2 = 0;
      for (const auto& s : r.fig1) fig1 += s.stabilized;
      for (const auto& s : r.fig2) fig2 += s.stabilized;
      std::cout << "fig1 stabilized " << fig1 << '/' << r.fig1.size() << ", fig2 stabilized "
                << fig2 << '/' << r.fig2.size() << "; report in "
                << (out / "report.json").string() << '\n';
    } else if (rep->parsed()) {
      const fs::path path = report_path.empty() ? out / "report.json" : fs::path(report_path);
      auto in = open_input(path);
      print_report(in, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
