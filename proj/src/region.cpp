#include "preacc/region.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace preacc {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::shared_global: return "shared_global";
    case Strategy::shared_global_atomic: return "shared_global_atomic";
    case Strategy::full_vector: return "full_vector";
    case Strategy::offset_vector: return "offset_vector";
    case Strategy::ordered_map: return "ordered_map";
    case Strategy::hash_map: return "hash_map";
    case Strategy::remap_ordered: return "remap_ordered";
    case Strategy::remap_hashed: return "remap_hashed";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown strategy: " + std::string(name));
}

bool is_local(Strategy s) {
  return s != Strategy::shared_global && s != Strategy::shared_global_atomic;
}

std::string RegionViolation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case RegionViolationKind::undeclared_external_read:
      os << "statement " << statement_index << " reads id " << id
         << " which is neither a declared input nor assigned in the region";
      break;
    case RegionViolationKind::intermediate_escape:
      os << "statement " << statement_index << " outside the region reads intermediate id " << id;
      break;
  }
  return os.str();
}

namespace {
std::string join_violations(const std::vector<RegionViolation>& vs) {
  std::ostringstream os;
  os << "region validation failed:";
  for (const auto& v : vs) os << "\n  " << v.describe();
  return os.str();
}
}  // namespace

RegionViolationError::RegionViolationError(std::vector<RegionViolation> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

std::optional<Identifier> RemapResult::lookup(Identifier original) const {
  for (const auto& [orig, mapped] : entries) {
    if (orig == original) return mapped;
  }
  return std::nullopt;
}

PreaccRegion::PreaccRegion(Tape& tape)
    : tape_(&tape), start_(tape.position()), first_region_id_(tape.ids().max_assigned() + 1) {}

PreaccRegion PreaccRegion::begin(Tape& tape) {
  if (!tape.recording()) throw RecordingError("PreaccRegion::begin: tape is not recording");
  tape.mark_region_open();  // throws if another region is open
  return PreaccRegion(tape);
}

PreaccRegion::PreaccRegion(PreaccRegion&& other) noexcept { *this = std::move(other); }

PreaccRegion& PreaccRegion::operator=(PreaccRegion&& other) noexcept {
  if (this != &other) {
    if (tape_ && !closed_) tape_->mark_region_closed();
    tape_ = std::exchange(other.tape_, nullptr);
    start_ = other.start_;
    end_ = other.end_;
    first_region_id_ = other.first_region_id_;
    closed_ = other.closed_;
    finished_ = other.finished_;
    edited_ = other.edited_;
    inputs_ = std::move(other.inputs_);
    outputs_ = std::move(other.outputs_);
    remapped_inputs_ = std::move(other.remapped_inputs_);
    remapped_outputs_ = std::move(other.remapped_outputs_);
    remapped_next_ = other.remapped_next_;
  }
  return *this;
}

PreaccRegion::~PreaccRegion() {
  if (tape_ && !closed_) tape_->mark_region_closed();
}

void PreaccRegion::add_input(const ActiveValue& v) {
  if (!tape_ || closed_) throw RecordingError("add_input: region is not open");
  if (!v.active()) throw std::invalid_argument("add_input: passive value");
  if (v.tape() == tape_ && v.id() >= first_region_id_)
    throw std::invalid_argument("add_input: value is recorded inside the region");
  if (std::find(inputs_.begin(), inputs_.end(), v.id()) != inputs_.end())
    throw std::invalid_argument("add_input: duplicate input declaration");
  inputs_.push_back(v.id());
}

void PreaccRegion::add_output(const ActiveValue& v) {
  if (!tape_ || closed_) throw RecordingError("add_output: region is not open");
  if (!v.active()) throw std::invalid_argument("add_output: passive value");
  const bool inside = v.tape() == tape_ && v.id() >= first_region_id_;
  const bool declared_input = std::find(inputs_.begin(), inputs_.end(), v.id()) != inputs_.end();
  if (!inside && !declared_input)
    throw std::invalid_argument(
        "add_output: value was defined before the region started and is not a declared input");
  if (std::find(outputs_.begin(), outputs_.end(), v.id()) != outputs_.end())
    throw std::invalid_argument("add_output: duplicate output declaration");
  outputs_.push_back(v.id());
}

void PreaccRegion::close() {
  if (!tape_ || closed_) throw RecordingError("close: region is not open");
  end_ = tape_->position();
  closed_ = true;
  tape_->mark_region_closed();
}

TapePosition PreaccRegion::end() const {
  if (!end_) throw RecordingError("region end: region is not closed yet");
  return *end_;
}

Identifier PreaccRegion::remapped_slot_count() const {
  if (!edited_) throw std::logic_error("remapped_slot_count: region has not been remapped");
  return remapped_next_;
}

std::vector<RegionViolation> validate_region(const PreaccRegion& region) {
  if (!region.closed()) throw RecordingError("validate_region: region not closed");
  const Tape& tape = region.tape();
  std::unordered_set<Identifier> assigned;
  for (const Statement& s : tape.statements(region.start(), region.end())) assigned.insert(s.lhs);
  const std::unordered_set<Identifier> declared_in(region.inputs().begin(),
                                                   region.inputs().end());
  const std::unordered_set<Identifier> declared_out(region.outputs().begin(),
                                                    region.outputs().end());

  std::vector<RegionViolation> out;
  for (TapePosition pos = region.start(); pos < region.end(); ++pos) {
    for (const TapeArg& a : tape.args(tape.statement(pos))) {
      if (!assigned.contains(a.rhs) && !declared_in.contains(a.rhs))
        out.push_back({RegionViolationKind::undeclared_external_read, a.rhs, pos});
    }
  }
  // Identifiers are monotone, so only statements after the region can read
  // region-assigned ids. Escape checking is scoped to the region's own tape.
  for (TapePosition pos = region.end(); pos < tape.size(); ++pos) {
    for (const TapeArg& a : tape.args(tape.statement(pos))) {
      if (assigned.contains(a.rhs) && !declared_out.contains(a.rhs))
        out.push_back({RegionViolationKind::intermediate_escape, a.rhs, pos});
    }
  }
  return out;
}

namespace {

struct RemapOutcome {
  RemapResult result;
  std::vector<Identifier> mapped_inputs;
  std::vector<Identifier> mapped_outputs;
};

template <class Map>
RemapOutcome remap_with(PreaccRegion& region, std::uint64_t entry_bytes,
                        StoreMemoryReport& stats) {
  Tape& tape = region.tape();
  Map map;
  RemapOutcome out;
  stats.allocation_events += 1;  // identifier-map construction
  auto map_id = [&](Identifier id) {
    stats.map_ops += 1;
    auto [it, inserted] = map.try_emplace(id, out.result.next);
    if (inserted) {
      stats.allocation_events += 1;
      out.result.entries.emplace_back(id, out.result.next);
      ++out.result.next;
    }
    return it->second;
  };

  out.mapped_inputs.reserve(region.inputs().size());
  for (Identifier id : region.inputs()) out.mapped_inputs.push_back(map_id(id));

  for (Statement& s : tape.statements_for_edit(region.start(), region.end())) {
    for (TapeArg& a : tape.args_for_edit(s)) a.rhs = map_id(a.rhs);
    s.lhs = map_id(s.lhs);
  }

  out.mapped_outputs.reserve(region.outputs().size());
  for (Identifier id : region.outputs()) out.mapped_outputs.push_back(map_id(id));

  stats.live_slots = std::max<std::uint64_t>(stats.live_slots, map.size());
  stats.peak_slots = std::max<std::uint64_t>(stats.peak_slots, map.size());
  stats.modeled_bytes = std::max<std::uint64_t>(stats.modeled_bytes, map.size() * entry_bytes);
  return out;
}

}  // namespace

RemapResult remap_and_edit(PreaccRegion& region, MapKind kind, StoreMemoryReport& stats) {
  if (!region.closed()) throw RecordingError("remap_and_edit: region not closed");
  if (region.finished()) throw RecordingError("remap_and_edit: region already finished");
  if (region.edited()) throw RecordingError("remap_and_edit: region already remapped");
  MemoryCostModel model;
  RemapOutcome out =
      kind == MapKind::ordered
          ? remap_with<std::map<Identifier, Identifier>>(region, model.ordered_map_entry_bytes,
                                                         stats)
          : remap_with<std::unordered_map<Identifier, Identifier>>(
                region, model.hash_map_entry_bytes, stats);
  region.remapped_inputs_ = std::move(out.mapped_inputs);
  region.remapped_outputs_ = std::move(out.mapped_outputs);
  region.remapped_next_ = out.result.next;
  region.edited_ = true;
  return std::move(out.result);
}

namespace {

// Builds the replacement statements: one per output, arguments are the
// original input ids carrying the Jacobian entries, exact zeros dropped.
void splice_replacement(PreaccRegion& region, const JacobianBlock& block) {
  std::vector<Statement> repl;
  std::vector<TapeArg> repl_args;
  repl.reserve(block.rows());
  for (std::size_t j = 0; j < block.rows(); ++j) {
    const std::size_t arg_begin = repl_args.size();
    for (std::size_t i = 0; i < block.cols(); ++i) {
      const double entry = block.at(j, i);
      if (entry != 0.0) repl_args.push_back({entry, region.inputs()[i]});
    }
    repl.push_back({region.outputs()[j], arg_begin,
                    static_cast<std::uint32_t>(repl_args.size() - arg_begin)});
  }
  region.tape().replace_range(region.start(), region.end(), std::move(repl),
                              std::move(repl_args));
  region.mark_finished();
}

}  // namespace

template <bool Counting>
JacobianBlock finish(PreaccRegion& region, const PreaccOptions& opts,
                     PreaccContext<Counting>& ctx) {
  if (!region.closed()) throw RecordingError("finish: region not closed");
  if (region.finished()) throw RecordingError("finish: region already finished");
  if (opts.validate) {
    auto violations = validate_region(region);
    if (!violations.empty()) throw RegionViolationError(std::move(violations));
  }

  JacobianBlock block;
  switch (opts.strategy) {
    case Strategy::shared_global:
    case Strategy::shared_global_atomic: {
      auto* shared = ctx.shared();
      if (!shared) throw std::logic_error("finish: no shared adjoint vector attached");
      shared->ensure_size(ctx.ids().max_assigned());
      block = compute_jacobian(region, *shared, opts.mode);
      break;
    }
    case Strategy::full_vector: {
      auto& store = ctx.full_vector();
      store.ensure_size(ctx.ids().max_assigned());
      block = compute_jacobian(region, store, opts.mode);
      break;
    }
    case Strategy::offset_vector: {
      const IdentifierScan scan =
          scan_identifiers(region.tape(), region.start(), region.end(), region.inputs());
      OffsetLocalVector<Counting> store(scan.min_id, scan.max_id, ctx.model());
      block = compute_jacobian(region, store, opts.mode);
      ctx.consume(store.memory_report());
      break;
    }
    case Strategy::ordered_map: {
      if (opts.reuse_map_stores) {
        auto& store = ctx.reusable_ordered();
        block = compute_jacobian(region, store, opts.mode);
        store.clear_for_reuse();
      } else {
        OrderedMapAdjoints<Counting> store(ctx.model());
        block = compute_jacobian(region, store, opts.mode);
        ctx.consume(store.memory_report());
      }
      break;
    }
    case Strategy::hash_map: {
      if (opts.reuse_map_stores) {
        auto& store = ctx.reusable_hashed();
        block = compute_jacobian(region, store, opts.mode);
        store.clear_for_reuse();
      } else {
        HashMapAdjoints<Counting> store(ctx.model());
        block = compute_jacobian(region, store, opts.mode);
        ctx.consume(store.memory_report());
      }
      break;
    }
    case Strategy::remap_ordered:
    case Strategy::remap_hashed: {
      StoreMemoryReport remap_stats;
      remap_and_edit(region,
                     opts.strategy == Strategy::remap_ordered ? MapKind::ordered : MapKind::hashed,
                     remap_stats);
      // The identifier map died inside remap_and_edit; only now allocate the
      // dense window over the contiguous ids.
      OffsetLocalVector<Counting> store(0, region.remapped_slot_count() - 1, ctx.model());
      block = compute_jacobian(region, store, opts.mode);
      remap_stats.merge_sequential(store.memory_report());
      ctx.consume(remap_stats);
      break;
    }
  }

  splice_replacement(region, block);
  return block;
}

template JacobianBlock finish<true>(PreaccRegion&, const PreaccOptions&, PreaccContext<true>&);
template JacobianBlock finish<false>(PreaccRegion&, const PreaccOptions&, PreaccContext<false>&);

}  // namespace preacc
