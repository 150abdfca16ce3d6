#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "preacc/region.hpp"
#include "preacc/rng.hpp"

namespace preacc {

enum class RaceStepKind : std::uint8_t { seed, sweep_statement, harvest, reset };

struct RaceStep {
  int region;
  RaceStepKind kind;
  std::size_t index;  // statement index within the sweep, or input index for harvests
};

struct RaceOutcome {
  std::array<std::vector<double>, 2> harvested;  // Jacobian rows as observed
  std::array<std::vector<double>, 2> expected;   // rows from clean standalone runs
  // Value the first harvest touching the shared input saw in its store.
  double shared_cell_at_first_harvest = 0.0;
  bool contaminated = false;
};

struct RaceTrace {
  std::vector<int> schedule;
  std::vector<RaceStep> steps;
  std::vector<std::string> step_log;
  RaceOutcome outcome;
};

// Self-contained copy of a closed single-output region, so simulator runs can
// replay (and, for the remap strategies, edit) the statements without
// touching the recorded tape.
struct RegionSnapshot {
  std::vector<Statement> statements;  // arg_begin rebased onto args below
  std::vector<TapeArg> args;
  std::vector<Identifier> inputs;
  Identifier output = 0;
  Identifier min_id = 0;
  Identifier max_id = 0;

  static RegionSnapshot from(const PreaccRegion& region);
};

// Deterministic cooperative interleaving of two preaccumulations that share
// an input. A thread's preaccumulation is broken into atomic steps (seed the
// output adjoint, sweep one statement, harvest one input entry, reset) and a
// schedule decides which region advances next. Running really recorded
// statements against the real stores reproduces exactly the contamination a
// preemptive scheduler can produce, but reproducibly.
class RaceSimulator {
 public:
  // Regions must be closed, single-output, and both declare shared_input.
  RaceSimulator(const PreaccRegion& region0, const PreaccRegion& region1,
                Identifier shared_input);

  std::size_t steps_of(int region) const;
  std::size_t total_steps() const { return steps_of(0) + steps_of(1); }

  // Replays the schedule (region index per step) under the given storage
  // strategy: shared strategies run both regions against one vector, local
  // strategies give each region its own store.
  RaceTrace run(Strategy strategy, const std::vector<int>& schedule) const;

  // Uniformly random interleaving drawn by weighted merge.
  std::vector<int> schedule_from_seed(std::uint64_t seed) const;

  // Every interleaving of the two step sequences (binomial(n0+n1, n0) many).
  std::vector<std::vector<int>> all_interleavings() const;

  // Both regions sweep before either harvests: the canonical schedule on
  // which plain shared storage sums unrelated Jacobian entries.
  std::vector<int> canonical_overlapped_schedule() const;

  Identifier shared_input() const { return shared_input_; }
  const RegionSnapshot& snapshot(int region) const { return snapshots_[region]; }

  // Correct Jacobian row of one region, from a clean standalone sweep.
  std::vector<double> expected_row(int region) const;

 private:
  std::array<RegionSnapshot, 2> snapshots_;
  Identifier shared_input_;
};

// The minimal two-region race: one shared input u = 1, region t records
// w_t = c_t * u. With c = (2, 5) the contaminated shared-store entry is 7.
struct RaceDemoSetup {
  std::unique_ptr<IdentifierCounter> ids;
  std::unique_ptr<Tape> setup_tape;
  std::unique_ptr<Tape> tape0;
  std::unique_ptr<Tape> tape1;
  std::vector<PreaccRegion> regions;  // exactly two
  Identifier shared_input = 0;
};

RaceDemoSetup make_race_demo(double c0 = 2.0, double c1 = 5.0);

const char* to_string(RaceStepKind k);

}  // namespace preacc
