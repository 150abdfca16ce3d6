#include "preacc/json_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace preacc {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what, const std::string& detail) {
  throw std::invalid_argument(what + ": " + detail);
}

void reject_unknown_fields(const json& j, std::initializer_list<const char*> allowed,
                           const char* what) {
  if (!j.is_object()) fail(what, "expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* name : allowed) {
      if (item.key() == name) {
        known = true;
        break;
      }
    }
    if (!known) fail(what, "unknown field '" + item.key() + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* name, T& out, const char* what) {
  if (auto it = j.find(name); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(what, std::string("field '") + name + "': " + e.what());
    }
  }
}

}  // namespace

void SweepConfig::validate() const {
  workload.validate();
  if (strategies.empty()) throw std::invalid_argument("SweepConfig: strategies must be non-empty");
  if (worker_counts.empty())
    throw std::invalid_argument("SweepConfig: worker_counts must be non-empty");
  for (std::uint32_t t : worker_counts)
    if (t == 0) throw std::invalid_argument("SweepConfig: worker_counts entries must be >= 1");
  if (repetitions < 1) throw std::invalid_argument("SweepConfig: repetitions must be >= 1");
}

json to_json(const WorkloadSpec& spec) {
  json mix = json::object();
  for (OpKind op : kAllOps) mix[to_string(op)] = spec.op_mix[op];
  return json{{"T", spec.workers},
              {"regions_per_worker", spec.regions_per_worker},
              {"chain_length", spec.chain_length},
              {"n_inputs", spec.n_inputs},
              {"m_outputs", spec.m_outputs},
              {"shared_inputs", spec.shared_inputs},
              {"op_mix", mix},
              {"seed", spec.seed},
              {"padding_statements", spec.padding_statements}};
}

WorkloadSpec workload_spec_from_json(const json& j) {
  const char* what = "WorkloadSpec";
  reject_unknown_fields(j,
                        {"T", "regions_per_worker", "chain_length", "n_inputs", "m_outputs",
                         "shared_inputs", "op_mix", "seed", "padding_statements"},
                        what);
  WorkloadSpec spec;
  read_field(j, "T", spec.workers, what);
  read_field(j, "regions_per_worker", spec.regions_per_worker, what);
  read_field(j, "chain_length", spec.chain_length, what);
  read_field(j, "n_inputs", spec.n_inputs, what);
  read_field(j, "m_outputs", spec.m_outputs, what);
  read_field(j, "shared_inputs", spec.shared_inputs, what);
  read_field(j, "seed", spec.seed, what);
  read_field(j, "padding_statements", spec.padding_statements, what);
  if (auto it = j.find("op_mix"); it != j.end()) {
    if (!it->is_object()) fail(what, "op_mix must be an object of op name -> weight");
    for (const auto& item : it->items()) {
      OpKind op;
      try {
        op = op_from_string(item.key());
      } catch (const std::invalid_argument&) {
        fail(what, "op_mix: unknown op '" + item.key() + "'");
      }
      if (!item.value().is_number()) fail(what, "op_mix: weight of '" + item.key() + "' must be a number");
      spec.op_mix[op] = item.value().get<double>();
    }
  }
  spec.validate();
  return spec;
}

json to_json(const SweepConfig& config) {
  json strategies = json::array();
  for (Strategy s : config.strategies) strategies.push_back(to_string(s));
  return json{{"workload", to_json(config.workload)},
              {"strategies", strategies},
              {"worker_counts", config.worker_counts},
              {"repetitions", config.repetitions}};
}

SweepConfig sweep_config_from_json(const json& j) {
  const char* what = "SweepConfig";
  reject_unknown_fields(j, {"workload", "strategies", "worker_counts", "repetitions"}, what);
  SweepConfig config;
  if (auto it = j.find("workload"); it != j.end()) config.workload = workload_spec_from_json(*it);
  if (auto it = j.find("strategies"); it != j.end()) {
    if (!it->is_array()) fail(what, "strategies must be an array of strategy names");
    config.strategies.clear();
    for (const auto& entry : *it) {
      if (!entry.is_string()) fail(what, "strategies entries must be strings");
      try {
        config.strategies.push_back(strategy_from_string(entry.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        fail(what, e.what());
      }
    }
  }
  read_field(j, "worker_counts", config.worker_counts, what);
  read_field(j, "repetitions", config.repetitions, what);
  config.validate();
  return config;
}

namespace {

json parse_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) fail(what, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(what, "parse error in '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace

WorkloadSpec load_workload_spec(const std::string& path) {
  return workload_spec_from_json(parse_file(path, "WorkloadSpec"));
}

SweepConfig load_sweep_config(const std::string& path) {
  return sweep_config_from_json(parse_file(path, "SweepConfig"));
}

}  // namespace preacc
