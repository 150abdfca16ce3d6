#include "preacc/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace preacc {

const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::sin: return "sin";
    case OpKind::cos: return "cos";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::copy: return "copy";
  }
  return "?";
}

OpKind op_from_string(std::string_view name) {
  for (OpKind op : kAllOps) {
    if (name == to_string(op)) return op;
  }
  throw std::invalid_argument("unknown operation: " + std::string(name));
}

bool op_is_binary(OpKind op) {
  switch (op) {
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul:
    case OpKind::div: return true;
    default: return false;
  }
}

void WorkloadSpec::validate() const {
  if (workers < 1) throw std::invalid_argument("workload: T must be at least 1");
  if (regions_per_worker < 1)
    throw std::invalid_argument("workload: regions_per_worker must be at least 1");
  if (chain_length < 1) throw std::invalid_argument("workload: chain_length must be at least 1");
  if (n_inputs < 1) throw std::invalid_argument("workload: n_inputs must be at least 1");
  if (m_outputs < 1) throw std::invalid_argument("workload: m_outputs must be at least 1");
  if (m_outputs > chain_length)
    throw std::invalid_argument("workload: m_outputs cannot exceed chain_length");
  if (shared_inputs > n_inputs)
    throw std::invalid_argument("workload: shared_inputs cannot exceed n_inputs");
  double sum = 0.0;
  for (double w : op_mix.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("workload: op_mix weights must be >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("workload: op_mix weights sum to zero");
}

namespace {

struct Interval {
  double lo;
  double hi;
};

constexpr double kBand = 32.0;      // admissible |value| bound for every slot
constexpr double kLowGuard = 0.25;  // denominator / log-argument lower bound

bool within_band(const Interval& v) { return v.lo >= -kBand && v.hi <= kBand; }

// Interval image of op over the operand intervals; nullopt when the guards
// fail. Conservative (interval arithmetic), which is all the generator needs.
std::optional<Interval> op_interval(OpKind op, const Interval& a, const Interval& b) {
  switch (op) {
    case OpKind::add: {
      Interval r{a.lo + b.lo, a.hi + b.hi};
      if (within_band(r)) return r;
      return std::nullopt;
    }
    case OpKind::sub: {
      Interval r{a.lo - b.hi, a.hi - b.lo};
      if (within_band(r)) return r;
      return std::nullopt;
    }
    case OpKind::mul: {
      const double c[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
      Interval r{std::min({c[0], c[1], c[2], c[3]}), std::max({c[0], c[1], c[2], c[3]})};
      if (within_band(r)) return r;
      return std::nullopt;
    }
    case OpKind::div: {
      if (!(b.lo >= kLowGuard || b.hi <= -kLowGuard)) return std::nullopt;
      const double c[] = {a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi};
      Interval r{std::min({c[0], c[1], c[2], c[3]}), std::max({c[0], c[1], c[2], c[3]})};
      if (within_band(r)) return r;
      return std::nullopt;
    }
    case OpKind::sin:
    case OpKind::cos: return Interval{-1.0, 1.0};
    case OpKind::exp: {
      if (a.hi > std::log(kBand)) return std::nullopt;
      return Interval{std::exp(a.lo), std::exp(a.hi)};
    }
    case OpKind::log: {
      if (a.lo < kLowGuard) return std::nullopt;
      return Interval{std::log(a.lo), std::log(a.hi)};
    }
    case OpKind::copy: return a;
  }
  return std::nullopt;
}

// Ops tried in order when the sampled one is inadmissible; sin always works.
constexpr OpKind kFallbackOps[] = {OpKind::sin, OpKind::cos, OpKind::add,
                                   OpKind::mul, OpKind::sub, OpKind::copy};

OpKind sample_op(const OpMix& mix, SplitMix64& rng) {
  double total = 0.0;
  for (double w : mix.weights) total += w;
  double pick = rng.next_double() * total;
  for (std::size_t i = 0; i < kOpCount; ++i) {
    pick -= mix.weights[i];
    if (pick < 0.0) return static_cast<OpKind>(i);
  }
  return OpKind::copy;
}

double apply_op(OpKind op, double a, double b) {
  switch (op) {
    case OpKind::add: return a + b;
    case OpKind::sub: return a - b;
    case OpKind::mul: return a * b;
    case OpKind::div: return a / b;
    case OpKind::sin: return std::sin(a);
    case OpKind::cos: return std::cos(a);
    case OpKind::exp: return std::exp(a);
    case OpKind::log: return std::log(a);
    case OpKind::copy: return a;
  }
  return 0.0;
}

}  // namespace

RegionBlueprint RegionBlueprint::generate(std::uint32_t n_inputs, std::uint32_t m_outputs,
                                          std::uint32_t length, const OpMix& mix,
                                          SplitMix64& rng) {
  if (n_inputs < 1 || m_outputs < 1 || m_outputs > length)
    throw std::invalid_argument("blueprint: need n >= 1 and 1 <= m <= length");
  RegionBlueprint bp;
  bp.n_inputs = n_inputs;
  bp.m_outputs = m_outputs;
  bp.steps.reserve(length);

  std::vector<Interval> slots(n_inputs, Interval{kInputLo, kInputHi});
  for (std::uint32_t k = 0; k < length; ++k) {
    BlueprintStep step;
    step.a = static_cast<std::uint32_t>(rng.next_below(slots.size()));
    step.b = static_cast<std::uint32_t>(rng.next_below(slots.size()));
    step.op = sample_op(mix, rng);
    std::optional<Interval> result = op_interval(step.op, slots[step.a], slots[step.b]);
    for (std::size_t f = 0; !result && f < std::size(kFallbackOps); ++f) {
      step.op = kFallbackOps[f];
      result = op_interval(step.op, slots[step.a], slots[step.b]);
    }
    slots.push_back(*result);
    bp.steps.push_back(step);
  }
  for (std::uint32_t j = 0; j < m_outputs; ++j) {
    bp.output_slots.push_back(n_inputs + length - m_outputs + j);
  }
  return bp;
}

std::vector<double> RegionBlueprint::eval_primal(std::span<const double> inputs) const {
  if (inputs.size() != n_inputs) throw std::invalid_argument("eval_primal: wrong input count");
  std::vector<double> slots(inputs.begin(), inputs.end());
  slots.reserve(n_inputs + steps.size());
  for (const BlueprintStep& s : steps) slots.push_back(apply_op(s.op, slots[s.a], slots[s.b]));
  std::vector<double> out;
  out.reserve(output_slots.size());
  for (std::uint32_t slot : output_slots) out.push_back(slots[slot]);
  return out;
}

std::vector<ActiveValue> RegionBlueprint::record(Tape& tape,
                                                 std::span<const ActiveValue> inputs) const {
  if (inputs.size() != n_inputs) throw std::invalid_argument("record: wrong input count");
  std::vector<ActiveValue> slots(inputs.begin(), inputs.end());
  slots.reserve(n_inputs + steps.size());
  for (const BlueprintStep& s : steps) {
    const ActiveValue& a = slots[s.a];
    const ActiveValue& b = slots[s.b];
    switch (s.op) {
      case OpKind::add: slots.push_back(tape.add(a, b)); break;
      case OpKind::sub: slots.push_back(tape.sub(a, b)); break;
      case OpKind::mul: slots.push_back(tape.mul(a, b)); break;
      case OpKind::div: slots.push_back(tape.div(a, b)); break;
      case OpKind::sin: slots.push_back(tape.sin(a)); break;
      case OpKind::cos: slots.push_back(tape.cos(a)); break;
      case OpKind::exp: slots.push_back(tape.exp(a)); break;
      case OpKind::log: slots.push_back(tape.log(a)); break;
      case OpKind::copy: slots.push_back(tape.copy(a)); break;
    }
  }
  return {slots.begin() + n_inputs, slots.end()};
}

bool Workload::consumed() const {
  for (const auto& worker : regions) {
    for (const auto& r : worker) {
      if (r.finished()) return true;
    }
  }
  return false;
}

std::vector<Identifier> Workload::all_input_ids() const {
  std::vector<Identifier> out(shared_input_ids);
  for (std::size_t t = 0; t < region_input_ids.size(); ++t) {
    out.insert(out.end(), region_input_ids[t].begin() + shared_input_ids.size(),
               region_input_ids[t].end());
  }
  return out;
}

Workload generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();

  Workload w;
  w.spec = spec;
  w.ids = std::make_unique<IdentifierCounter>();
  w.setup_tape = std::make_unique<Tape>(*w.ids, /*owner=*/-1);

  SplitMix64 rng(spec.seed);

  // Padding models program parts recorded before the regions: it only
  // inflates the identifier range.
  for (std::uint64_t i = 0; i < spec.padding_statements; ++i)
    (void)w.setup_tape->register_input(0.0);

  std::vector<ActiveValue> shared_inputs;
  for (std::uint32_t i = 0; i < spec.shared_inputs; ++i) {
    ActiveValue v = w.setup_tape->register_input(rng.next_in(kInputLo, kInputHi));
    w.shared_input_ids.push_back(v.id());
    shared_inputs.push_back(v);
  }

  // Private inputs, (n - s) per worker, registered on the setup tape as well;
  // each worker's regions all read that worker's inputs.
  const std::uint32_t private_count = spec.n_inputs - spec.shared_inputs;
  std::vector<std::vector<ActiveValue>> worker_inputs(spec.workers);
  w.region_input_ids.resize(spec.workers);
  w.region_input_values.resize(spec.workers);
  for (std::uint32_t t = 0; t < spec.workers; ++t) {
    worker_inputs[t] = shared_inputs;
    for (std::uint32_t i = 0; i < private_count; ++i)
      worker_inputs[t].push_back(w.setup_tape->register_input(rng.next_in(kInputLo, kInputHi)));
    for (const ActiveValue& v : worker_inputs[t]) {
      w.region_input_ids[t].push_back(v.id());
      w.region_input_values[t].push_back(v.value());
    }
  }

  w.blueprint = RegionBlueprint::generate(spec.n_inputs, spec.m_outputs, spec.chain_length,
                                          spec.op_mix, rng);

  w.worker_tapes.reserve(spec.workers);
  w.regions.resize(spec.workers);
  for (std::uint32_t t = 0; t < spec.workers; ++t) {
    w.worker_tapes.push_back(std::make_unique<Tape>(*w.ids, static_cast<int>(t)));
    Tape& tape = *w.worker_tapes.back();
    for (std::uint32_t r = 0; r < spec.regions_per_worker; ++r) {
      PreaccRegion region = PreaccRegion::begin(tape);
      for (const ActiveValue& v : worker_inputs[t]) region.add_input(v);
      const std::vector<ActiveValue> results = w.blueprint.record(tape, worker_inputs[t]);
      for (std::uint32_t slot : w.blueprint.output_slots)
        region.add_output(results[slot - spec.n_inputs]);
      region.close();
      w.regions[t].push_back(std::move(region));
    }
  }

  w.record_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
          .count();
  return w;
}

namespace {

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              t0)
      .count();
}

template <bool Counting>
void run_pass(Workload& w, const RunOptions& opts, HarnessResult& out) {
  const std::uint32_t T = w.spec.workers;
  const MemoryCostModel model{};

  std::optional<SharedAdjointVector<Counting>> shared;
  if (!is_local(opts.strategy))
    shared.emplace(opts.strategy == Strategy::shared_global_atomic, model);

  std::vector<PreaccContext<Counting>> contexts;
  contexts.reserve(T);
  for (std::uint32_t t = 0; t < T; ++t) {
    contexts.emplace_back(*w.ids, model);
    if (shared) contexts.back().attach_shared(&*shared);
  }

  out.jacobians.assign(T, {});
  for (std::uint32_t t = 0; t < T; ++t) out.jacobians[t].resize(w.regions[t].size());

  PreaccOptions popts;
  popts.strategy = opts.strategy;
  popts.mode = opts.mode;
  popts.validate = opts.validate_regions;
  popts.reuse_map_stores = opts.reuse_map_stores;

  std::vector<std::exception_ptr> errors(T);
  auto worker_body = [&](std::uint32_t t) {
    try {
      auto& regs = w.regions[t];
      // Descending start order so splicing never shifts an unfinished region.
      for (std::size_t k = regs.size(); k-- > 0;)
        out.jacobians[t][k] = finish(regs[k], popts, contexts[t]);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  if (opts.parallel && T > 1) {
    std::vector<std::thread> threads;
    threads.reserve(T);
    for (std::uint32_t t = 0; t < T; ++t) threads.emplace_back(worker_body, t);
    for (auto& th : threads) th.join();
  } else {
    for (std::uint32_t t = 0; t < T; ++t) worker_body(t);
  }
  out.preacc_ns = elapsed_ns(t0);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  out.worker_reports.clear();
  for (std::uint32_t t = 0; t < T; ++t) out.worker_reports.push_back(contexts[t].final_report());
  if (shared) out.shared_report = shared->memory_report();
  out.totals = StoreMemoryReport{};
  for (const auto& r : out.worker_reports) out.totals.merge_concurrent(r);
  if (shared) out.totals.merge_concurrent(out.shared_report);

  // Global evaluation of the preaccumulated program: unit seed on every
  // region output, one serial reverse sweep per worker tape (they only
  // reference the setup tape's inputs, which are harvested, not swept).
  const auto t1 = std::chrono::steady_clock::now();
  FullLocalVector<Counting> global;
  global.ensure_size(w.ids->max_assigned());
  for (std::uint32_t t = 0; t < T; ++t) {
    for (const auto& block : out.jacobians[t]) {
      for (Identifier id : block.output_ids()) global.set(id, 1.0);
    }
  }
  for (std::uint32_t t = 0; t < T; ++t)
    evaluate_reverse(*w.worker_tapes[t], 0, w.worker_tapes[t]->size(), global);
  const std::vector<Identifier> input_ids = w.all_input_ids();
  out.input_adjoints.clear();
  out.input_adjoints.reserve(input_ids.size());
  for (Identifier id : input_ids) out.input_adjoints.push_back(global.get(id));
  out.eval_ns = elapsed_ns(t1);
}

void compare_with_serial_reference(const Workload& w, const RunOptions& opts,
                                   HarnessResult& out) {
  Workload ref = generate_workload(w.spec);
  RunOptions ref_opts = opts;
  ref_opts.parallel = false;
  ref_opts.compare_reference = false;
  ref_opts.counting = false;
  HarnessResult ref_result = run_simultaneous(ref, ref_opts);

  out.compared_reference = true;
  for (std::size_t t = 0; t < out.jacobians.size(); ++t) {
    for (std::size_t r = 0; r < out.jacobians[t].size(); ++r) {
      if (!out.jacobians[t][r].same_bits(ref_result.jacobians[t][r])) {
        out.matches_serial_reference = false;
        std::ostringstream os;
        os << "worker " << t << " region " << r << ": differs from the serial reference";
        out.mismatches.push_back(os.str());
      }
    }
  }
}

}  // namespace

HarnessResult run_simultaneous(Workload& w, const RunOptions& opts) {
  if (w.consumed()) throw std::invalid_argument("run_simultaneous: workload already consumed");
  HarnessResult out;
  out.strategy = opts.strategy;
  out.record_ns = w.record_ns;
  if (opts.counting) {
    run_pass<true>(w, opts, out);
  } else {
    run_pass<false>(w, opts, out);
  }
  if (opts.compare_reference) compare_with_serial_reference(w, opts, out);
  return out;
}

MeasureResult measure(const WorkloadSpec& spec, Strategy strategy, int repetitions,
                      const RunOptions& base) {
  if (repetitions < 1) throw std::invalid_argument("measure: repetitions must be at least 1");
  MeasureResult result;
  result.spec = spec;
  result.strategy = strategy;
  result.repetitions = repetitions;

  RunOptions timing = base;
  timing.strategy = strategy;
  timing.counting = false;
  timing.compare_reference = false;

  {
    Workload warmup = generate_workload(spec);
    (void)run_simultaneous(warmup, timing);  // discarded
  }

  auto fold = [](TimingStat& stat, std::int64_t v, int i) {
    stat.mean_ns += v;
    stat.min_ns = i == 0 ? v : std::min(stat.min_ns, v);
    stat.max_ns = i == 0 ? v : std::max(stat.max_ns, v);
  };
  for (int i = 0; i < repetitions; ++i) {
    Workload w = generate_workload(spec);
    HarnessResult r = run_simultaneous(w, timing);
    fold(result.record, r.record_ns, i);
    fold(result.preacc, r.preacc_ns, i);
    fold(result.eval, r.eval_ns, i);
  }
  result.record.mean_ns /= repetitions;
  result.preacc.mean_ns /= repetitions;
  result.eval.mean_ns /= repetitions;

  RunOptions counted = base;
  counted.strategy = strategy;
  counted.counting = true;
  Workload w = generate_workload(spec);
  result.counted = run_simultaneous(w, counted);
  return result;
}

}  // namespace preacc
