#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "preacc/json_io.hpp"
#include "preacc/tape.hpp"
#include "preacc/workload.hpp"

namespace preacc {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// A generated program recorded on its own tape/counter pair, with the inputs
// registered first so [body_start, tape->size()) holds only the body.
struct StandaloneProgram {
  std::unique_ptr<IdentifierCounter> ids;
  std::unique_ptr<Tape> tape;
  std::vector<Identifier> input_ids;
  std::vector<Identifier> output_ids;
  std::vector<double> input_values;
  TapePosition body_start = 0;
};

StandaloneProgram record_standalone(const RegionBlueprint& blueprint,
                                    std::span<const double> values);

// Row-major Jacobian d out / d in over [begin, end) by one reverse sweep per
// output against a dense local store. Reference path for the checks below.
std::vector<double> sweep_jacobian(const Tape& tape, TapePosition begin, TapePosition end,
                                   std::span<const Identifier> in_ids,
                                   std::span<const Identifier> out_ids, Identifier i_max);

// Row-major central difference quotients of the blueprint's primal function.
std::vector<double> fd_jacobian(const RegionBlueprint& blueprint, std::span<const double> values,
                                double rel_step = 1e-6);

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
double max_rel_gap(std::span<const double> a, std::span<const double> b);

// Workload shape the verify checks default to when no config is given.
SweepConfig default_verify_config();

// Deterministic self-checks (fixed internal seeds): difference-quotient
// agreement, cross-strategy agreement, repeated-run determinism, the race
// simulator's contamination findings, and adjoint clearing on sweeps.
std::vector<CheckResult> run_verify(const SweepConfig& config);

}  // namespace preacc
