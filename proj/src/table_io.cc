#include "invctl/table_io.h"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "invctl/error.h"

namespace invctl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void write_table(std::ostream& out, const TableHeader& header,
                 std::initializer_list<std::size_t> shape, const char* key,
                 std::span<const double> data) {
  ordered_json j;
  j["kind"] = header.kind;
  j["k"] = header.k;
  j["grid"] = {{"theta_bins", header.theta_bins},
               {"omega_bins", header.omega_bins},
               {"action_bins", header.action_bins}};
  j["config_hash"] = header.config_hash;
  j["shape"] = shape;
  std::string head = j.dump();
  head.pop_back();  // reopen the object to stream the data array
  out << head << ",\"" << key << "\":[";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::kInput, "cannot serialize a non-finite table entry");
    }
    const auto res = std::to_chars(buf, buf + sizeof buf, data[i]);
    if (i > 0) out.put(',');
    out.write(buf, res.ptr - buf);
  }
  out << "]}\n";
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + header.kind + " table");
}

struct Parsed {
  TableHeader header;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

Parsed read_table(std::istream& in, const char* kind, const char* key) {
  Parsed p;
  try {
    const json j = json::parse(in);
    p.header.kind = j.at("kind").get<std::string>();
    if (p.header.kind != kind) {
      throw Error(ErrorCode::kParse, std::string("expected a ") + kind +
                                         " table, found " + p.header.kind);
    }
    p.header.k = j.at("k").get<int>();
    const auto& g = j.at("grid");
    p.header.theta_bins = g.at("theta_bins").get<std::size_t>();
    p.header.omega_bins = g.at("omega_bins").get<std::size_t>();
    p.header.action_bins = g.at("action_bins").get<std::size_t>();
    p.header.config_hash = j.at("config_hash").get<std::string>();
    p.shape = j.at("shape").get<std::vector<std::size_t>>();
    p.data = j.at(key).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(kind) + " table: " + e.what());
  }
  std::size_t expected = 1;
  for (auto s : p.shape) expected *= s;
  if (p.shape.empty() || expected != p.data.size()) {
    throw Error(ErrorCode::kParse, std::string(kind) + " table: shape does not match data");
  }
  return p;
}

}  // namespace

TableHeader TableHeader::for_grid(std::string kind, int k, const GridSpec& grid,
                                  std::string config_hash) {
  return {std::move(kind), k, static_cast<std::size_t>(grid.theta.bins),
          static_cast<std::size_t>(grid.omega.bins), grid.num_actions(),
          std::move(config_hash)};
}

void write_transition_json(std::ostream& out, const TransitionTable& table,
                           const TableHeader& header) {
  write_table(out, header,
              {table.num_states(), table.num_actions(), table.num_states()}, "probs",
              table.data());
}

void write_policy_json(std::ostream& out, const PolicyTable& table,
                       const TableHeader& header) {
  write_table(out, header, {table.num_states(), table.num_actions()}, "probs",
              table.data());
}

void write_values_json(std::ostream& out, std::span<const double> values,
                       const TableHeader& header) {
  write_table(out, header, {values.size()}, "values", values);
}

TransitionTable read_transition_json(std::istream& in, TableHeader* header) {
  auto p = read_table(in, "transition", "probs");
  if (p.shape.size() != 3 || p.shape[0] != p.shape[2]) {
    throw Error(ErrorCode::kParse, "transition table needs shape [X, U, X]");
  }
  if (header) *header = p.header;
  return TransitionTable(p.shape[0], p.shape[1], std::move(p.data));
}

PolicyTable read_policy_json(std::istream& in, TableHeader* header) {
  auto p = read_table(in, "policy", "probs");
  if (p.shape.size() != 2) throw Error(ErrorCode::kParse, "policy table needs shape [X, U]");
  if (header) *header = p.header;
  return PolicyTable(p.shape[0], p.shape[1], std::move(p.data));
}

std::vector<double> read_values_json(std::istream& in, TableHeader* header) {
  auto p = read_table(in, "values", "values");
  if (p.shape.size() != 1) throw Error(ErrorCode::kParse, "value table needs shape [X]");
  if (header) *header = p.header;
  return std::move(p.data);
}

void write_weights_json(std::ostream& out, const std::vector<std::string>& names,
                        const FitResult& fit) {
  ordered_json j;
  j["features"] = names;
  j["weights"] = fit.weights;
  j["converged"] = fit.converged;
  j["iters"] = fit.iters;
  j["final_grad_norm"] = fit.final_grad_norm;
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing weights");
}

WeightsFile read_weights_json(std::istream& in) {
  WeightsFile w;
  try {
    const json j = json::parse(in);
    w.features = j.at("features").get<std::vector<std::string>>();
    w.weights = j.at("weights").get<std::vector<double>>();
    w.converged = j.at("converged").get<bool>();
    w.iters = j.at("iters").get<int>();
    w.final_grad_norm = j.at("final_grad_norm").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("weights: ") + e.what());
  }
  if (w.features.size() != w.weights.size()) {
    throw Error(ErrorCode::kParse, "weights: one weight per feature required");
  }
  return w;
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace invctl
