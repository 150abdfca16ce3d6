#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "preacc/region.hpp"
#include "preacc/rng.hpp"
#include "preacc/tape.hpp"

namespace preacc {

enum class OpKind : std::uint8_t { add, sub, mul, div, sin, cos, exp, log, copy };
inline constexpr std::size_t kOpCount = 9;
inline constexpr OpKind kAllOps[] = {OpKind::add, OpKind::sub, OpKind::mul,
                                     OpKind::div, OpKind::sin, OpKind::cos,
                                     OpKind::exp, OpKind::log, OpKind::copy};

const char* to_string(OpKind op);
OpKind op_from_string(std::string_view name);
bool op_is_binary(OpKind op);

// Relative sampling weights for the elementary operations; uniform by
// default. Weights must be non-negative with a positive sum.
struct OpMix {
  std::array<double, kOpCount> weights;

  OpMix() { weights.fill(1.0); }
  double& operator[](OpKind k) { return weights[static_cast<std::size_t>(k)]; }
  double operator[](OpKind k) const { return weights[static_cast<std::size_t>(k)]; }
  bool operator==(const OpMix&) const = default;
};

// Shape of a generated parallel workload. Serializes to/from JSON with
// exactly these fields ("T", "regions_per_worker", "chain_length",
// "n_inputs", "m_outputs", "shared_inputs", "op_mix", "seed",
// "padding_statements"); unknown fields are rejected.
struct WorkloadSpec {
  std::uint32_t workers = 4;
  std::uint32_t regions_per_worker = 1;
  std::uint32_t chain_length = 64;
  std::uint32_t n_inputs = 1;
  std::uint32_t m_outputs = 1;
  std::uint32_t shared_inputs = 0;
  OpMix op_mix;
  std::uint64_t seed = 0;
  std::uint64_t padding_statements = 0;

  void validate() const;  // throws std::invalid_argument
  bool operator==(const WorkloadSpec&) const = default;
};

// One operation of a region blueprint. Operand slots below n_inputs refer to
// the region inputs, slot n_inputs + k to the result of step k.
struct BlueprintStep {
  OpKind op;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
};

// Structure of one region, shared verbatim by every worker so that regions
// are isomorphic across workers; only the input values differ. Generation
// keeps a value interval per slot and only admits operations whose result
// stays inside a fixed magnitude band with denominators and log arguments
// bounded away from zero, falling back to sin otherwise. That keeps every
// generated program finite and well conditioned for difference quotients.
struct RegionBlueprint {
  std::uint32_t n_inputs = 0;
  std::uint32_t m_outputs = 0;
  std::vector<BlueprintStep> steps;
  std::vector<std::uint32_t> output_slots;  // slots of the last m_outputs steps

  static RegionBlueprint generate(std::uint32_t n_inputs, std::uint32_t m_outputs,
                                  std::uint32_t length, const OpMix& mix, SplitMix64& rng);

  // Pure primal evaluation of the output values; independent of any tape
  // machinery, which makes it the oracle path for difference quotients.
  std::vector<double> eval_primal(std::span<const double> inputs) const;

  // Records all steps on the tape against the given input handles and
  // returns one handle per step result.
  std::vector<ActiveValue> record(Tape& tape, std::span<const ActiveValue> inputs) const;
};

// Sampling interval for generated input values.
inline constexpr double kInputLo = 0.5;
inline constexpr double kInputHi = 1.5;

// A fully recorded workload: a setup tape holding padding and input
// registrations, one tape per worker holding that worker's closed regions.
// Consumed by run_simultaneous (regions are finished in place); regenerate
// from the spec for another run.
struct Workload {
  WorkloadSpec spec;
  RegionBlueprint blueprint;
  std::unique_ptr<IdentifierCounter> ids;
  std::unique_ptr<Tape> setup_tape;
  std::vector<std::unique_ptr<Tape>> worker_tapes;
  std::vector<std::vector<PreaccRegion>> regions;        // [worker][region]
  std::vector<Identifier> shared_input_ids;
  std::vector<std::vector<Identifier>> region_input_ids;  // [worker], shared first
  std::vector<std::vector<double>> region_input_values;   // [worker], shared first
  std::int64_t record_ns = 0;

  bool consumed() const;
  // All registered input ids, shared first, then each worker's private ones.
  std::vector<Identifier> all_input_ids() const;
};

Workload generate_workload(const WorkloadSpec& spec);

struct RunOptions {
  Strategy strategy = Strategy::hash_map;
  SweepMode mode = SweepMode::automatic;
  bool parallel = true;           // false: every worker runs on the calling thread
  bool counting = true;           // false: instrumentation compiled out (timing pass)
  bool compare_reference = true;  // regenerate the workload and compare to a serial run
  bool validate_regions = false;
  bool reuse_map_stores = false;
};

struct HarnessResult {
  Strategy strategy = Strategy::hash_map;
  std::vector<std::vector<JacobianBlock>> jacobians;  // [worker][region]
  std::vector<StoreMemoryReport> worker_reports;      // local-store accounting per worker
  StoreMemoryReport shared_report;                    // shared vector, zeros for local runs
  StoreMemoryReport totals;                           // workers + shared, concurrent merge
  std::vector<double> input_adjoints;  // after the global sweep, aligned with all_input_ids()
  std::int64_t record_ns = 0;
  std::int64_t preacc_ns = 0;
  std::int64_t eval_ns = 0;
  bool compared_reference = false;
  bool matches_serial_reference = true;
  std::vector<std::string> mismatches;
};

// Finishes every region (one thread per worker when parallel), each worker
// walking its own regions in descending start order, then runs one serial
// reverse sweep over the preaccumulated tapes with unit seeds on all region
// outputs. Reference mismatches are reported in the result, never thrown:
// with shared storage and shared inputs they are the expected outcome.
HarnessResult run_simultaneous(Workload& workload, const RunOptions& opts);

struct TimingStat {
  std::int64_t mean_ns = 0;
  std::int64_t min_ns = 0;
  std::int64_t max_ns = 0;
};

struct MeasureResult {
  WorkloadSpec spec;
  Strategy strategy = Strategy::hash_map;
  int repetitions = 0;
  TimingStat record;
  TimingStat preacc;
  TimingStat eval;
  HarnessResult counted;  // the single instrumented pass
};

// Two-pass measurement: one discarded warm-up, `repetitions` timed runs with
// instrumentation compiled out, then one instrumented run for the counters.
MeasureResult measure(const WorkloadSpec& spec, Strategy strategy, int repetitions,
                      const RunOptions& base = {});

}  // namespace preacc
