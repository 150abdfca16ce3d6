#include "preacc/verify.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <iterator>
#include <limits>
#include <optional>
#include <stdexcept>

#include "preacc/eval.hpp"
#include "preacc/race.hpp"
#include "preacc/region.hpp"
#include "preacc/rng.hpp"
#include "preacc/stores.hpp"

namespace preacc {

StandaloneProgram record_standalone(const RegionBlueprint& blueprint,
                                    std::span<const double> values) {
  if (values.size() != blueprint.n_inputs)
    throw std::invalid_argument("record_standalone: one value per blueprint input required");
  StandaloneProgram p;
  p.ids = std::make_unique<IdentifierCounter>();
  p.tape = std::make_unique<Tape>(*p.ids);
  p.input_values.assign(values.begin(), values.end());
  std::vector<ActiveValue> inputs;
  inputs.reserve(values.size());
  for (double v : values) {
    inputs.push_back(p.tape->register_input(v));
    p.input_ids.push_back(inputs.back().id());
  }
  p.body_start = p.tape->size();
  std::vector<ActiveValue> results = blueprint.record(*p.tape, inputs);
  for (std::uint32_t slot : blueprint.output_slots) {
    const ActiveValue& out =
        slot < blueprint.n_inputs ? inputs[slot] : results[slot - blueprint.n_inputs];
    p.output_ids.push_back(out.id());
  }
  return p;
}

std::vector<double> sweep_jacobian(const Tape& tape, TapePosition begin, TapePosition end,
                                   std::span<const Identifier> in_ids,
                                   std::span<const Identifier> out_ids, Identifier i_max) {
  FullLocalVector<false> store;
  store.ensure_size(i_max);
  std::vector<double> rows(out_ids.size() * in_ids.size(), 0.0);
  for (std::size_t j = 0; j < out_ids.size(); ++j) {
    store.set(out_ids[j], 1.0);
    evaluate_reverse(tape, begin, end, store);
    for (std::size_t i = 0; i < in_ids.size(); ++i) {
      rows[j * in_ids.size() + i] = store.get(in_ids[i]);
      store.set(in_ids[i], 0.0);
    }
    store.set(out_ids[j], 0.0);  // seed survives only if the output is an input
  }
  return rows;
}

std::vector<double> fd_jacobian(const RegionBlueprint& blueprint, std::span<const double> values,
                                double rel_step) {
  const std::size_t n = blueprint.n_inputs;
  const std::size_t m = blueprint.m_outputs;
  std::vector<double> rows(m * n, 0.0);
  std::vector<double> x(values.begin(), values.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::fabs(x[i]));
    const double saved = x[i];
    x[i] = saved + h;
    std::vector<double> up = blueprint.eval_primal(x);
    x[i] = saved - h;
    std::vector<double> down = blueprint.eval_primal(x);
    x[i] = saved;
    for (std::size_t j = 0; j < m; ++j) rows[j * n + i] = (up[j] - down[j]) / (2.0 * h);
  }
  return rows;
}

double max_rel_gap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

SweepConfig default_verify_config() {
  SweepConfig config;
  config.workload.workers = 4;
  config.workload.regions_per_worker = 2;
  config.workload.chain_length = 48;
  config.workload.n_inputs = 4;
  config.workload.m_outputs = 2;
  config.workload.shared_inputs = 2;
  config.workload.seed = 1234;
  config.worker_counts = {1, 2, 4};
  config.repetitions = 3;
  return config;
}

namespace {

std::string format(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

CheckResult check_gradient() {
  constexpr int kPrograms = 25;
  constexpr double kTol = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < kPrograms; ++k) {
    SplitMix64 rng(0xC0FFEE00u + static_cast<std::uint64_t>(k));
    const auto n = static_cast<std::uint32_t>(1 + rng.next_below(5));
    const auto m = static_cast<std::uint32_t>(1 + rng.next_below(3));
    const auto length = m + static_cast<std::uint32_t>(rng.next_below(200 - m + 1));
    RegionBlueprint blueprint = RegionBlueprint::generate(n, m, length, OpMix{}, rng);
    std::vector<double> values(n);
    for (double& v : values) v = rng.next_in(kInputLo, kInputHi);
    StandaloneProgram program = record_standalone(blueprint, values);
    std::vector<double> ad =
        sweep_jacobian(*program.tape, program.body_start, program.tape->size(),
                       program.input_ids, program.output_ids, program.ids->max_assigned());
    std::vector<double> fd = fd_jacobian(blueprint, values);
    worst = std::max(worst, max_rel_gap(ad, fd));
  }
  return {"gradient", worst < kTol,
          format("%d programs vs difference quotients, max rel gap %.3g (tol %.0e)", kPrograms,
                 worst, kTol)};
}

// One generated region embedded in a larger tape: pre-region statements feed
// the region inputs, post-region statements consume its outputs.
struct EmbeddedProgram {
  std::unique_ptr<IdentifierCounter> ids;
  std::unique_ptr<Tape> tape;
  std::vector<Identifier> x_ids;
  Identifier y_id = kPassiveId;
  TapePosition after_registration = 0;
  std::optional<PreaccRegion> region;
};

EmbeddedProgram build_embedded(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto n = static_cast<std::uint32_t>(1 + rng.next_below(4));
  const auto m = static_cast<std::uint32_t>(1 + rng.next_below(3));
  const auto length = m + static_cast<std::uint32_t>(rng.next_below(40));
  RegionBlueprint blueprint = RegionBlueprint::generate(n, m, length, OpMix{}, rng);

  EmbeddedProgram p;
  p.ids = std::make_unique<IdentifierCounter>();
  p.tape = std::make_unique<Tape>(*p.ids);
  std::vector<ActiveValue> x;
  for (std::uint32_t i = 0; i < n; ++i) {
    x.push_back(p.tape->register_input(rng.next_in(kInputLo, kInputHi)));
    p.x_ids.push_back(x.back().id());
  }
  p.after_registration = p.tape->size();
  std::vector<ActiveValue> u;
  for (std::uint32_t i = 0; i < n; ++i) u.push_back(sin(x[i]));

  p.region.emplace(PreaccRegion::begin(*p.tape));
  for (const ActiveValue& v : u) p.region->add_input(v);
  std::vector<ActiveValue> results = blueprint.record(*p.tape, u);
  std::vector<ActiveValue> outs;
  for (std::uint32_t slot : blueprint.output_slots) {
    outs.push_back(slot < n ? u[slot] : results[slot - n]);
    p.region->add_output(outs.back());
  }
  p.region->close();

  ActiveValue acc = outs[0];
  for (std::size_t j = 1; j < outs.size(); ++j) acc = acc + outs[j];
  ActiveValue y = sin(acc);
  p.y_id = y.id();
  return p;
}

std::vector<double> whole_gradient(const EmbeddedProgram& p) {
  const Identifier y = p.y_id;
  return sweep_jacobian(*p.tape, p.after_registration, p.tape->size(), p.x_ids, {&y, 1},
                        p.ids->max_assigned());
}

CheckResult check_strategy_agreement(const std::vector<Strategy>& strategies) {
  constexpr int kPrograms = 8;
  constexpr double kTol = 1e-12;
  double worst = 0.0;
  for (int k = 0; k < kPrograms; ++k) {
    const std::uint64_t seed = 0xA11CE000u + static_cast<std::uint64_t>(k);
    std::optional<JacobianBlock> first;
    for (Strategy s : strategies) {
      EmbeddedProgram p = build_embedded(seed);
      std::vector<double> before = whole_gradient(p);
      PreaccContext<false> ctx(*p.ids);
      SharedAdjointVector<false> shared(s == Strategy::shared_global_atomic);
      if (!is_local(s)) ctx.attach_shared(&shared);
      JacobianBlock block = finish(*p.region, PreaccOptions{.strategy = s}, ctx);
      std::vector<double> after = whole_gradient(p);
      worst = std::max(worst, max_rel_gap(before, after));
      if (!first) {
        first = std::move(block);
      } else if (!first->same_bits(block)) {
        return {"strategy-agreement", false,
                format("program %d: %s disagrees bitwise with %s", k, to_string(s),
                       to_string(strategies.front()))};
      }
    }
  }
  return {"strategy-agreement", worst < kTol,
          format("%d programs x %zu strategies bit-identical; rewrite shifts the whole-tape "
                 "gradient by at most %.3g (tol %.0e)",
                 kPrograms, strategies.size(), worst, kTol)};
}

CheckResult check_determinism(const SweepConfig& config) {
  constexpr int kRuns = 3;
  std::vector<Strategy> locals;
  for (Strategy s : config.strategies)
    if (is_local(s)) locals.push_back(s);
  if (locals.empty())
    for (Strategy s : kAllStrategies)
      if (is_local(s)) locals.push_back(s);

  for (Strategy s : locals) {
    std::optional<HarnessResult> first;
    for (int r = 0; r < kRuns; ++r) {
      Workload w = generate_workload(config.workload);
      RunOptions opts;
      opts.strategy = s;
      opts.counting = false;
      HarnessResult h = run_simultaneous(w, opts);
      if (!h.matches_serial_reference)
        return {"determinism", false,
                format("%s run %d diverged from the serial reference: %s", to_string(s), r,
                       h.mismatches.empty() ? "(no detail)" : h.mismatches.front().c_str())};
      if (!first) {
        first = std::move(h);
        continue;
      }
      if (h.input_adjoints != first->input_adjoints)
        return {"determinism", false,
                format("%s run %d: global input adjoints changed bitwise", to_string(s), r)};
      for (std::size_t wkr = 0; wkr < h.jacobians.size(); ++wkr)
        for (std::size_t reg = 0; reg < h.jacobians[wkr].size(); ++reg)
          if (!h.jacobians[wkr][reg].same_bits(first->jacobians[wkr][reg]))
            return {"determinism", false,
                    format("%s run %d: Jacobian of worker %zu region %zu changed bitwise",
                           to_string(s), r, wkr, reg)};
    }
  }
  return {"determinism", true,
          format("%zu local strategies x %d parallel runs bit-identical and equal to the serial "
                 "reference (T=%u, shared=%u)",
                 locals.size(), kRuns, config.workload.workers, config.workload.shared_inputs)};
}

CheckResult check_race_simulator() {
  RaceDemoSetup demo = make_race_demo();
  RaceSimulator sim(demo.regions[0], demo.regions[1], demo.shared_input);
  const auto schedules = sim.all_interleavings();

  std::size_t shared_bad = 0, atomic_bad = 0;
  for (const auto& schedule : schedules) {
    if (sim.run(Strategy::shared_global, schedule).outcome.contaminated) ++shared_bad;
    if (sim.run(Strategy::shared_global_atomic, schedule).outcome.contaminated) ++atomic_bad;
    for (Strategy s : kAllStrategies) {
      if (!is_local(s)) continue;
      RaceTrace t = sim.run(s, schedule);
      if (t.outcome.contaminated)
        return {"race-simulator", false,
                format("local strategy %s contaminated under one of %zu interleavings",
                       to_string(s), schedules.size())};
    }
  }
  RaceTrace canonical = sim.run(Strategy::shared_global, sim.canonical_overlapped_schedule());
  const bool merged = canonical.outcome.shared_cell_at_first_harvest == 7.0;
  const bool ok = shared_bad > 0 && atomic_bad > 0 && canonical.outcome.contaminated && merged;
  return {"race-simulator", ok,
          format("%zu interleavings: shared contaminated in %zu (atomic adds: %zu), local "
                 "strategies in 0; overlapped schedule merges 2+5 into %.1f",
                 schedules.size(), shared_bad, atomic_bad,
                 canonical.outcome.shared_cell_at_first_harvest)};
}

CheckResult check_adjoint_reset() {
  IdentifierCounter ids;
  Tape tape(ids);
  ActiveValue x = tape.register_input(0.7);
  const TapePosition body = tape.size();
  ActiveValue z = x;
  for (int k = 0; k < 12; ++k) z = k % 2 == 0 ? sin(z) : exp(z);
  const Identifier y = z.id();
  const Identifier xid = x.id();

  FullLocalVector<false> store;
  store.ensure_size(ids.max_assigned());
  store.set(y, 1.0);
  evaluate_reverse(tape, body, tape.size(), store);
  const double g1 = store.get(xid);
  double leftover = 0.0;
  for (const Statement& s : tape.statements(body, tape.size()))
    leftover = std::max(leftover, std::fabs(store.get(s.lhs)));

  store.set(xid, 0.0);
  store.set(y, 1.0);
  evaluate_reverse(tape, body, tape.size(), store);
  const double g2 = store.get(xid);

  const bool ok = leftover == 0.0 && g1 == g2 && g1 != 0.0;
  return {"adjoint-reset", ok,
          format("consumed adjoints read %.3g after the sweep; repeated sweep: %.12g vs %.12g",
                 leftover, g1, g2)};
}

}  // namespace

std::vector<CheckResult> run_verify(const SweepConfig& config) {
  std::vector<Strategy> strategies = config.strategies;
  if (strategies.empty()) strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  std::vector<CheckResult> results;
  results.push_back(check_gradient());
  results.push_back(check_strategy_agreement(strategies));
  results.push_back(check_determinism(config));
  results.push_back(check_race_simulator());
  results.push_back(check_adjoint_reset());
  return results;
}

}  // namespace preacc
