#include "preacc/race.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <variant>

namespace preacc {

const char* to_string(RaceStepKind k) {
  switch (k) {
    case RaceStepKind::seed: return "seed";
    case RaceStepKind::sweep_statement: return "sweep";
    case RaceStepKind::harvest: return "harvest";
    case RaceStepKind::reset: return "reset";
  }
  return "?";
}

RegionSnapshot RegionSnapshot::from(const PreaccRegion& region) {
  if (!region.closed()) throw RecordingError("race snapshot: region not closed");
  if (region.finished()) throw RecordingError("race snapshot: region already finished");
  if (region.outputs().size() != 1)
    throw std::invalid_argument("race snapshot: exactly one output supported");
  RegionSnapshot snap;
  const Tape& tape = region.tape();
  for (const Statement& s : tape.statements(region.start(), region.end())) {
    Statement copy = s;
    copy.arg_begin = snap.args.size();
    for (const TapeArg& a : tape.args(s)) snap.args.push_back(a);
    snap.statements.push_back(copy);
  }
  snap.inputs = region.inputs();
  snap.output = region.outputs()[0];
  const IdentifierScan scan =
      scan_identifiers(tape, region.start(), region.end(), region.inputs());
  snap.min_id = scan.min_id;
  snap.max_id = scan.max_id;
  return snap;
}

namespace {

// Rewrites a snapshot's identifiers to the contiguous range 1..k, mirroring
// what the remap strategies do on the real tape.
RegionSnapshot remapped(const RegionSnapshot& snap, MapKind kind) {
  RegionSnapshot out = snap;
  Identifier next = 1;
  auto rewrite = [&](auto& map) {
    auto map_id = [&](Identifier id) {
      auto [it, inserted] = map.try_emplace(id, next);
      if (inserted) ++next;
      return it->second;
    };
    for (Identifier& id : out.inputs) id = map_id(id);
    for (Statement& s : out.statements) {
      for (std::uint32_t i = 0; i < s.arg_count; ++i)
        out.args[s.arg_begin + i].rhs = map_id(out.args[s.arg_begin + i].rhs);
      s.lhs = map_id(s.lhs);
    }
    out.output = map_id(out.output);
  };
  if (kind == MapKind::ordered) {
    std::map<Identifier, Identifier> m;
    rewrite(m);
  } else {
    std::unordered_map<Identifier, Identifier> m;
    rewrite(m);
  }
  out.min_id = 1;
  out.max_id = next - 1;
  return out;
}

// Value-semantic handle so two variant slots can address one shared vector.
struct SharedRef {
  SharedAdjointVector<true>* target;
  double get(Identifier id) const { return target->get(id); }
  double take(Identifier id) { return target->take(id); }
  void set(Identifier id, double v) { target->set(id, v); }
  void add(Identifier id, double v) { target->add(id, v); }
};

using SimStore = std::variant<SharedRef, FullLocalVector<true>, OffsetLocalVector<true>,
                              OrderedMapAdjoints<true>, HashMapAdjoints<true>>;

SimStore make_sim_store(Strategy strategy, const RegionSnapshot& snap,
                        SharedAdjointVector<true>* shared) {
  switch (strategy) {
    case Strategy::shared_global:
    case Strategy::shared_global_atomic: return SharedRef{shared};
    case Strategy::full_vector: {
      FullLocalVector<true> v;
      v.ensure_size(snap.max_id);
      return v;
    }
    case Strategy::offset_vector: return OffsetLocalVector<true>(snap.min_id, snap.max_id);
    case Strategy::ordered_map: return OrderedMapAdjoints<true>();
    case Strategy::hash_map: return HashMapAdjoints<true>();
    case Strategy::remap_ordered:
    case Strategy::remap_hashed: return OffsetLocalVector<true>(0, snap.max_id);
  }
  throw std::invalid_argument("race: unknown strategy");
}

struct RegionProgress {
  std::size_t sweeps_done = 0;
  std::size_t harvests_done = 0;
};

}  // namespace

RaceSimulator::RaceSimulator(const PreaccRegion& region0, const PreaccRegion& region1,
                             Identifier shared_input)
    : snapshots_{RegionSnapshot::from(region0), RegionSnapshot::from(region1)},
      shared_input_(shared_input) {
  for (const RegionSnapshot& s : snapshots_) {
    if (std::find(s.inputs.begin(), s.inputs.end(), shared_input) == s.inputs.end())
      throw std::invalid_argument("race: both regions must declare the shared input");
  }
}

std::size_t RaceSimulator::steps_of(int region) const {
  const RegionSnapshot& s = snapshots_[region];
  return 1 + s.statements.size() + s.inputs.size() + 1;
}

std::vector<int> RaceSimulator::schedule_from_seed(std::uint64_t seed) const {
  SplitMix64 rng(seed);
  std::size_t remaining[2] = {steps_of(0), steps_of(1)};
  std::vector<int> schedule;
  schedule.reserve(remaining[0] + remaining[1]);
  while (remaining[0] + remaining[1] > 0) {
    const std::uint64_t pick = rng.next_below(remaining[0] + remaining[1]);
    const int r = pick < remaining[0] ? 0 : 1;
    schedule.push_back(r);
    --remaining[r];
  }
  return schedule;
}

std::vector<std::vector<int>> RaceSimulator::all_interleavings() const {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  const std::size_t n0 = steps_of(0);
  const std::size_t n1 = steps_of(1);
  auto rec = [&](auto&& self, std::size_t used0, std::size_t used1) -> void {
    if (used0 == n0 && used1 == n1) {
      out.push_back(prefix);
      return;
    }
    if (used0 < n0) {
      prefix.push_back(0);
      self(self, used0 + 1, used1);
      prefix.pop_back();
    }
    if (used1 < n1) {
      prefix.push_back(1);
      self(self, used0, used1 + 1);
      prefix.pop_back();
    }
  };
  rec(rec, 0, 0);
  return out;
}

std::vector<int> RaceSimulator::canonical_overlapped_schedule() const {
  std::vector<int> schedule;
  schedule.insert(schedule.end(), {0, 1});  // both seeds
  schedule.insert(schedule.end(), snapshots_[0].statements.size(), 0);
  schedule.insert(schedule.end(), snapshots_[1].statements.size(), 1);
  schedule.insert(schedule.end(), snapshots_[0].inputs.size(), 0);
  schedule.insert(schedule.end(), snapshots_[1].inputs.size(), 1);
  schedule.insert(schedule.end(), {0, 1});  // both resets
  return schedule;
}

RaceTrace RaceSimulator::run(Strategy strategy, const std::vector<int>& schedule) const {
  std::size_t expected_steps[2] = {steps_of(0), steps_of(1)};
  {
    std::size_t seen[2] = {0, 0};
    for (int r : schedule) {
      if (r != 0 && r != 1) throw std::invalid_argument("race: schedule entries must be 0 or 1");
      ++seen[r];
    }
    if (seen[0] != expected_steps[0] || seen[1] != expected_steps[1])
      throw std::invalid_argument("race: schedule length does not match the step counts");
  }

  const bool uses_remap =
      strategy == Strategy::remap_ordered || strategy == Strategy::remap_hashed;
  std::array<RegionSnapshot, 2> regions = snapshots_;
  if (uses_remap) {
    const MapKind kind =
        strategy == Strategy::remap_ordered ? MapKind::ordered : MapKind::hashed;
    regions = {remapped(snapshots_[0], kind), remapped(snapshots_[1], kind)};
  }

  SharedAdjointVector<true> shared(strategy == Strategy::shared_global_atomic);
  if (!is_local(strategy))
    shared.ensure_size(std::max(snapshots_[0].max_id, snapshots_[1].max_id));

  std::array<SimStore, 2> stores = {make_sim_store(strategy, regions[0], &shared),
                                    make_sim_store(strategy, regions[1], &shared)};

  RaceTrace trace;
  trace.schedule = schedule;
  trace.outcome.expected = {expected_row(0), expected_row(1)};
  trace.outcome.harvested = {std::vector<double>(regions[0].inputs.size(), 0.0),
                             std::vector<double>(regions[1].inputs.size(), 0.0)};

  RegionProgress progress[2];
  std::size_t phase[2] = {0, 0};  // next step index within the region's own sequence
  bool shared_seen = false;

  for (int r : schedule) {
    const RegionSnapshot& region = regions[r];
    const std::size_t local_step = phase[r]++;
    RaceStep step{r, RaceStepKind::seed, 0};
    std::ostringstream log;
    log << "region " << r << ": ";

    std::visit(
        [&](auto& store) {
          if (local_step == 0) {
            step.kind = RaceStepKind::seed;
            store.set(region.output, 1.0);
            log << "seed output adjoint (id " << region.output << ") = 1";
          } else if (local_step <= region.statements.size()) {
            step.kind = RaceStepKind::sweep_statement;
            step.index = local_step - 1;  // newest statement first
            const Statement& s =
                region.statements[region.statements.size() - 1 - step.index];
            const double a = store.take(s.lhs);
            log << "sweep statement (lhs id " << s.lhs << "): took " << a;
            for (std::uint32_t i = 0; i < s.arg_count; ++i) {
              const TapeArg& arg = region.args[s.arg_begin + i];
              store.add(arg.rhs, arg.partial * a);
              log << ", id " << arg.rhs << " += " << arg.partial * a;
            }
            ++progress[r].sweeps_done;
          } else if (local_step <= region.statements.size() + region.inputs.size()) {
            step.kind = RaceStepKind::harvest;
            step.index = local_step - 1 - region.statements.size();
            const Identifier input = region.inputs[step.index];
            const double v = store.get(input);
            trace.outcome.harvested[r][step.index] = v;
            // Map the harvest back to the original input for shared-cell
            // observation (remap rewrites ids but preserves positions).
            const Identifier original = snapshots_[r].inputs[step.index];
            if (!shared_seen && original == shared_input_) {
              shared_seen = true;
              trace.outcome.shared_cell_at_first_harvest = v;
            }
            log << "harvest input id " << original << " -> " << v;
            ++progress[r].harvests_done;
          } else {
            step.kind = RaceStepKind::reset;
            for (auto it = region.statements.rbegin(); it != region.statements.rend(); ++it) {
              store.set(it->lhs, 0.0);
              for (std::uint32_t i = 0; i < it->arg_count; ++i)
                store.set(region.args[it->arg_begin + i].rhs, 0.0);
            }
            store.set(region.output, 0.0);
            log << "reset region identifiers";
          }
        },
        stores[r]);

    trace.steps.push_back(step);
    trace.step_log.push_back(log.str());
  }

  for (int r = 0; r < 2; ++r) {
    for (std::size_t i = 0; i < trace.outcome.harvested[r].size(); ++i) {
      if (trace.outcome.harvested[r][i] != trace.outcome.expected[r][i])
        trace.outcome.contaminated = true;
    }
  }
  return trace;
}

std::vector<double> RaceSimulator::expected_row(int region) const {
  const RegionSnapshot& snap = snapshots_[region];
  HashMapAdjoints<true> store;
  store.set(snap.output, 1.0);
  for (auto it = snap.statements.rbegin(); it != snap.statements.rend(); ++it) {
    const double a = store.take(it->lhs);
    for (std::uint32_t i = 0; i < it->arg_count; ++i) {
      const TapeArg& arg = snap.args[it->arg_begin + i];
      store.add(arg.rhs, arg.partial * a);
    }
  }
  std::vector<double> row;
  row.reserve(snap.inputs.size());
  for (Identifier id : snap.inputs) row.push_back(store.get(id));
  return row;
}

RaceDemoSetup make_race_demo(double c0, double c1) {
  RaceDemoSetup demo;
  demo.ids = std::make_unique<IdentifierCounter>();
  demo.setup_tape = std::make_unique<Tape>(*demo.ids, -1);
  demo.tape0 = std::make_unique<Tape>(*demo.ids, 0);
  demo.tape1 = std::make_unique<Tape>(*demo.ids, 1);

  ActiveValue u = demo.setup_tape->register_input(1.0);
  demo.shared_input = u.id();

  const double factors[2] = {c0, c1};
  Tape* tapes[2] = {demo.tape0.get(), demo.tape1.get()};
  for (int t = 0; t < 2; ++t) {
    PreaccRegion region = PreaccRegion::begin(*tapes[t]);
    region.add_input(u);
    ActiveValue w = tapes[t]->mul(u, ActiveValue(factors[t]));
    region.add_output(w);
    region.close();
    demo.regions.push_back(std::move(region));
  }
  return demo;
}

}  // namespace preacc
