#pragma once

#include <cstdint>
#include <iterator>
#include <string>
#include <vector>

#include <json.hpp>

#include "preacc/region.hpp"
#include "preacc/workload.hpp"

namespace preacc {

// A benchmark sweep: one workload shape swept over strategies and worker
// counts, each cell measured `repetitions` times.
struct SweepConfig {
  WorkloadSpec workload;
  std::vector<Strategy> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::vector<std::uint32_t> worker_counts{1, 2, 4, 8};
  int repetitions = 5;

  void validate() const;  // throws std::invalid_argument
};

// JSON layout of WorkloadSpec:
//   {"T":8,"regions_per_worker":4,"chain_length":64,"n_inputs":4,"m_outputs":2,
//    "shared_inputs":2,"op_mix":{"add":1.0,...},"seed":42,"padding_statements":0}
// All fields are optional (defaults apply); unknown fields are rejected.
// op_mix lists weights per op name; ops not listed keep their default weight.
nlohmann::json to_json(const WorkloadSpec& spec);
WorkloadSpec workload_spec_from_json(const nlohmann::json& j);

// JSON layout of SweepConfig:
//   {"workload":{...},"strategies":["full_vector",...],"worker_counts":[1,2,4,8],
//    "repetitions":5}
nlohmann::json to_json(const SweepConfig& config);
SweepConfig sweep_config_from_json(const nlohmann::json& j);

WorkloadSpec load_workload_spec(const std::string& path);
SweepConfig load_sweep_config(const std::string& path);

}  // namespace preacc
