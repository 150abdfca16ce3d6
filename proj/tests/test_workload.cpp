#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "preacc/rng.hpp"
#include "preacc/workload.hpp"

using namespace preacc;

TEST_CASE("workload spec validation rejects inconsistent shapes") {
  WorkloadSpec spec;
  spec.workers = 2;
  spec.chain_length = 8;
  spec.n_inputs = 3;
  spec.m_outputs = 2;
  CHECK_NOTHROW(spec.validate());

  WorkloadSpec bad = spec;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.m_outputs = 9;  // more outputs than chain steps
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.shared_inputs = 4;  // more shared than total inputs
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.op_mix[OpKind::mul] = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.op_mix.weights.fill(0.0);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("generated programs stay inside the admissible band") {
  // A mix leaning hard on division and logarithm stresses the guards.
  OpMix mix;
  mix[OpKind::div] = 8.0;
  mix[OpKind::log] = 8.0;
  mix[OpKind::exp] = 4.0;
  SplitMix64 rng(321);
  RegionBlueprint bp = RegionBlueprint::generate(3, 2, 200, mix, rng);
  REQUIRE_EQ(bp.steps.size(), 200);

  SplitMix64 vals(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{vals.next_in(kInputLo, kInputHi), vals.next_in(kInputLo, kInputHi),
                          vals.next_in(kInputLo, kInputHi)};
    // Evaluate all intermediate slots, not only the outputs.
    std::vector<double> slots(x.begin(), x.end());
    for (const BlueprintStep& s : bp.steps) {
      double v = 0.0;
      switch (s.op) {
        case OpKind::add: v = slots[s.a] + slots[s.b]; break;
        case OpKind::sub: v = slots[s.a] - slots[s.b]; break;
        case OpKind::mul: v = slots[s.a] * slots[s.b]; break;
        case OpKind::div: v = slots[s.a] / slots[s.b]; break;
        case OpKind::sin: v = std::sin(slots[s.a]); break;
        case OpKind::cos: v = std::cos(slots[s.a]); break;
        case OpKind::exp: v = std::exp(slots[s.a]); break;
        case OpKind::log: v = std::log(slots[s.a]); break;
        case OpKind::copy: v = slots[s.a]; break;
      }
      CHECK(std::isfinite(v));
      CHECK_LE(std::fabs(v), 32.0);
      slots.push_back(v);
    }
  }
}

TEST_CASE("recording a blueprint reproduces its primal values exactly") {
  SplitMix64 rng(7);
  RegionBlueprint bp = RegionBlueprint::generate(4, 3, 60, OpMix{}, rng);
  std::vector<double> x{0.6, 1.4, 0.9, 1.1};
  const std::vector<double> primal = bp.eval_primal(x);

  IdentifierCounter ids;
  Tape tape(ids);
  std::vector<ActiveValue> inputs;
  for (double v : x) inputs.push_back(tape.register_input(v));
  std::vector<ActiveValue> results = bp.record(tape, inputs);
  REQUIRE_EQ(results.size(), 60);
  for (std::size_t j = 0; j < bp.output_slots.size(); ++j)
    CHECK_EQ(results[bp.output_slots[j] - 4].value(), primal[j]);
}

TEST_CASE("a length-5 chain over one input touches six distinct identifiers") {
  WorkloadSpec spec;
  spec.workers = 1;
  spec.regions_per_worker = 1;
  spec.chain_length = 5;
  spec.n_inputs = 1;
  spec.m_outputs = 1;
  spec.seed = 5;
  Workload w = generate_workload(spec);
  const PreaccRegion& region = w.regions[0][0];
  const IdentifierScan scan =
      scan_identifiers(*w.worker_tapes[0], region.start(), region.end(), region.inputs());
  CHECK_EQ(scan.distinct_count, 6);
  CHECK_EQ(scan.max_id - scan.min_id + 1, 6);  // consecutive here: no padding, one worker
}

TEST_CASE("workers share the declared shared inputs and own the rest") {
  WorkloadSpec spec;
  spec.workers = 3;
  spec.regions_per_worker = 2;
  spec.chain_length = 12;
  spec.n_inputs = 4;
  spec.m_outputs = 2;
  spec.shared_inputs = 2;
  spec.seed = 11;
  Workload w = generate_workload(spec);

  REQUIRE_EQ(w.shared_input_ids.size(), 2);
  REQUIRE_EQ(w.region_input_ids.size(), 3);
  for (std::uint32_t t = 0; t < 3; ++t) {
    REQUIRE_EQ(w.region_input_ids[t].size(), 4);
    CHECK_EQ(w.region_input_ids[t][0], w.shared_input_ids[0]);
    CHECK_EQ(w.region_input_ids[t][1], w.shared_input_ids[1]);
    for (double v : w.region_input_values[t]) {
      CHECK_GE(v, kInputLo);
      CHECK_LE(v, kInputHi);
    }
  }
  // Private ids are pairwise distinct across workers.
  CHECK_NE(w.region_input_ids[0][2], w.region_input_ids[1][2]);
  CHECK_NE(w.region_input_ids[1][3], w.region_input_ids[2][3]);

  const std::vector<Identifier> all = w.all_input_ids();
  REQUIRE_EQ(all.size(), 2 + 3 * 2);
  CHECK_EQ(all[0], w.shared_input_ids[0]);
  CHECK_EQ(all[2], w.region_input_ids[0][2]);

  // Every worker records the same blueprint: identical statement shapes.
  for (std::uint32_t t = 1; t < 3; ++t) {
    const PreaccRegion& a = w.regions[0][0];
    const PreaccRegion& b = w.regions[t][0];
    REQUIRE_EQ(a.statement_count(), b.statement_count());
    for (TapePosition k = 0; k < a.statement_count(); ++k) {
      const Statement& sa = w.worker_tapes[0]->statement(a.start() + k);
      const Statement& sb = w.worker_tapes[t]->statement(b.start() + k);
      CHECK_EQ(w.worker_tapes[0]->args(sa).size(), w.worker_tapes[t]->args(sb).size());
    }
  }
}

TEST_CASE("fully shared inputs make all workers' Jacobians bit-identical") {
  WorkloadSpec spec;
  spec.workers = 3;
  spec.regions_per_worker = 1;
  spec.chain_length = 24;
  spec.n_inputs = 2;
  spec.m_outputs = 2;
  spec.shared_inputs = 2;  // no private inputs at all
  spec.seed = 17;
  Workload w = generate_workload(spec);
  RunOptions opts;
  opts.strategy = Strategy::hash_map;
  opts.parallel = false;
  opts.compare_reference = false;
  HarnessResult r = run_simultaneous(w, opts);
  // Output ids differ per worker, so compare the entries themselves.
  const JacobianBlock& first = r.jacobians[0][0];
  for (std::uint32_t t = 1; t < 3; ++t) {
    const JacobianBlock& other = r.jacobians[t][0];
    REQUIRE_EQ(other.rows(), first.rows());
    REQUIRE_EQ(other.cols(), first.cols());
    for (std::size_t i = 0; i < first.rows(); ++i)
      for (std::size_t j = 0; j < first.cols(); ++j)
        CHECK_EQ(std::bit_cast<std::uint64_t>(first.at(i, j)),
                 std::bit_cast<std::uint64_t>(other.at(i, j)));
  }
}

TEST_CASE("padding inflates the identifier range but not map footprints") {
  WorkloadSpec spec;
  spec.workers = 2;
  spec.regions_per_worker = 1;
  spec.chain_length = 20;
  spec.n_inputs = 3;
  spec.m_outputs = 1;
  spec.shared_inputs = 1;
  spec.seed = 23;

  WorkloadSpec padded = spec;
  padded.padding_statements = 5000;

  Workload small = generate_workload(spec);
  Workload large = generate_workload(padded);
  CHECK_GE(large.ids->max_assigned(), small.ids->max_assigned() + 5000);
  CHECK_EQ(large.regions[0][0].statement_count(), small.regions[0][0].statement_count());

  RunOptions opts;
  opts.strategy = Strategy::hash_map;
  opts.parallel = false;
  opts.compare_reference = false;
  HarnessResult rs = run_simultaneous(small, opts);
  HarnessResult rl = run_simultaneous(large, opts);
  CHECK_EQ(rs.totals.peak_slots, rl.totals.peak_slots);  // maps never see the padding

  Workload small2 = generate_workload(spec);
  Workload large2 = generate_workload(padded);
  opts.strategy = Strategy::full_vector;
  HarnessResult fs = run_simultaneous(small2, opts);
  HarnessResult fl = run_simultaneous(large2, opts);
  CHECK_GE(fl.totals.peak_slots, fs.totals.peak_slots + 2 * 5000);  // one full vector per worker
}

TEST_CASE("regeneration is bit-identical") {
  WorkloadSpec spec;
  spec.workers = 2;
  spec.regions_per_worker = 2;
  spec.chain_length = 30;
  spec.n_inputs = 3;
  spec.m_outputs = 2;
  spec.shared_inputs = 1;
  spec.seed = 42;

  Workload a = generate_workload(spec);
  Workload b = generate_workload(spec);
  CHECK_EQ(a.setup_tape->dump(0, a.setup_tape->size()), b.setup_tape->dump(0, b.setup_tape->size()));
  for (int t = 0; t < 2; ++t)
    CHECK_EQ(a.worker_tapes[t]->dump(0, a.worker_tapes[t]->size()),
             b.worker_tapes[t]->dump(0, b.worker_tapes[t]->size()));
}

TEST_CASE("parallel local-strategy runs match the serial reference") {
  WorkloadSpec spec;
  spec.workers = 4;
  spec.regions_per_worker = 2;
  spec.chain_length = 40;
  spec.n_inputs = 4;
  spec.m_outputs = 2;
  spec.shared_inputs = 2;
  spec.seed = 3;

  for (Strategy s : kAllStrategies) {
    if (!is_local(s)) continue;
    CAPTURE(to_string(s));
    Workload w = generate_workload(spec);
    RunOptions opts;
    opts.strategy = s;
    HarnessResult r = run_simultaneous(w, opts);
    CHECK(r.compared_reference);
    CHECK(r.matches_serial_reference);
    CHECK(r.mismatches.empty());
    CHECK_EQ(r.input_adjoints.size(), 2 + 4 * 2);
  }
}

TEST_CASE("shared storage is safe without shared inputs") {
  WorkloadSpec spec;
  spec.workers = 4;
  spec.regions_per_worker = 2;
  spec.chain_length = 40;
  spec.n_inputs = 3;
  spec.m_outputs = 1;
  spec.shared_inputs = 0;  // disjoint identifier ranges per worker
  spec.seed = 29;
  for (Strategy s : {Strategy::shared_global, Strategy::shared_global_atomic}) {
    CAPTURE(to_string(s));
    Workload w = generate_workload(spec);
    RunOptions opts;
    opts.strategy = s;
    HarnessResult r = run_simultaneous(w, opts);
    CHECK(r.matches_serial_reference);
    CHECK_GE(r.shared_report.lock_acquisitions, 8u);  // every finish locked
  }
}

TEST_CASE("the tiny workload's global sweep harvests the fused entry") {
  WorkloadSpec spec;
  spec.workers = 1;
  spec.regions_per_worker = 1;
  spec.chain_length = 1;
  spec.n_inputs = 1;
  spec.m_outputs = 1;
  spec.shared_inputs = 1;
  spec.seed = 13;
  Workload w = generate_workload(spec);
  RunOptions opts;
  opts.strategy = Strategy::hash_map;
  opts.parallel = false;
  opts.compare_reference = false;
  HarnessResult r = run_simultaneous(w, opts);
  REQUIRE_EQ(r.input_adjoints.size(), 1);
  CHECK_EQ(r.input_adjoints[0], r.jacobians[0][0].at(0, 0));
}

TEST_CASE("a consumed workload refuses to run again") {
  WorkloadSpec spec;
  spec.workers = 1;
  spec.regions_per_worker = 1;
  spec.chain_length = 4;
  spec.n_inputs = 1;
  spec.m_outputs = 1;
  Workload w = generate_workload(spec);
  CHECK_FALSE(w.consumed());
  RunOptions opts;
  opts.strategy = Strategy::hash_map;
  opts.parallel = false;
  opts.compare_reference = false;
  (void)run_simultaneous(w, opts);
  CHECK(w.consumed());
  CHECK_THROWS_AS(run_simultaneous(w, opts), std::invalid_argument);
}

TEST_CASE("counting gates the counters, not the results") {
  WorkloadSpec spec;
  spec.workers = 2;
  spec.regions_per_worker = 1;
  spec.chain_length = 16;
  spec.n_inputs = 2;
  spec.m_outputs = 1;
  spec.shared_inputs = 1;
  spec.seed = 8;

  Workload counted_w = generate_workload(spec);
  Workload timed_w = generate_workload(spec);
  RunOptions opts;
  opts.strategy = Strategy::ordered_map;
  opts.parallel = false;
  opts.compare_reference = false;
  opts.counting = true;
  HarnessResult counted = run_simultaneous(counted_w, opts);
  opts.counting = false;
  HarnessResult timed = run_simultaneous(timed_w, opts);

  CHECK_GT(counted.totals.access_count, 0u);
  CHECK_GT(counted.totals.map_ops, 0u);
  CHECK_EQ(timed.totals.access_count, 0u);
  CHECK_EQ(timed.totals.map_ops, 0u);
  CHECK_EQ(timed.totals.peak_slots, counted.totals.peak_slots);  // footprint is identical
  for (std::size_t t = 0; t < 2; ++t)
    CHECK(counted.jacobians[t][0].same_bits(timed.jacobians[t][0]));
}

TEST_CASE("measure aggregates repetitions and keeps counters deterministic") {
  WorkloadSpec spec;
  spec.workers = 2;
  spec.regions_per_worker = 2;
  spec.chain_length = 24;
  spec.n_inputs = 3;
  spec.m_outputs = 2;
  spec.shared_inputs = 1;
  spec.seed = 31;

  MeasureResult a = measure(spec, Strategy::hash_map, 3);
  CHECK_EQ(a.repetitions, 3);
  CHECK_EQ(a.spec, spec);
  CHECK_LE(a.preacc.min_ns, a.preacc.mean_ns);
  CHECK_LE(a.preacc.mean_ns, a.preacc.max_ns);
  CHECK_GT(a.counted.totals.access_count, 0u);

  MeasureResult b = measure(spec, Strategy::hash_map, 3);
  CHECK_EQ(a.counted.totals.access_count, b.counted.totals.access_count);
  CHECK_EQ(a.counted.totals.map_ops, b.counted.totals.map_ops);
  CHECK_EQ(a.counted.totals.allocation_events, b.counted.totals.allocation_events);
  CHECK_EQ(a.counted.totals.peak_slots, b.counted.totals.peak_slots);
  CHECK_EQ(a.counted.input_adjoints, b.counted.input_adjoints);
}
