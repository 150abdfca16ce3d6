#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "preacc/eval.hpp"
#include "preacc/jacobian.hpp"
#include "preacc/stores.hpp"
#include "preacc/tape.hpp"

namespace preacc {

// Adjoint-storage strategies selectable per preaccumulation. The first two
// run against the process-wide shared vector (the second with atomic adds);
// the rest are worker-private. The remap strategies rewrite the region's
// identifiers to a contiguous range and edit the tape in place before
// sweeping over a minimal dense vector.
enum class Strategy {
  shared_global,
  shared_global_atomic,
  full_vector,
  offset_vector,
  ordered_map,
  hash_map,
  remap_ordered,
  remap_hashed,
};

inline constexpr Strategy kAllStrategies[] = {
    Strategy::shared_global, Strategy::shared_global_atomic, Strategy::full_vector,
    Strategy::offset_vector, Strategy::ordered_map,          Strategy::hash_map,
    Strategy::remap_ordered, Strategy::remap_hashed,
};

const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);
bool is_local(Strategy s);

enum class MapKind { ordered, hashed };

class PreaccRegion;

enum class RegionViolationKind { undeclared_external_read, intermediate_escape };

struct RegionViolation {
  RegionViolationKind kind;
  Identifier id;
  TapePosition statement_index;
  std::string describe() const;
};

class RegionViolationError : public std::runtime_error {
 public:
  explicit RegionViolationError(std::vector<RegionViolation> violations);
  const std::vector<RegionViolation>& violations() const { return violations_; }

 private:
  std::vector<RegionViolation> violations_;
};

struct RemapResult {
  // (original id, contiguous id) in first-encounter order; the contiguous ids
  // are exactly 1..entries.size().
  std::vector<std::pair<Identifier, Identifier>> entries;
  // One past the largest contiguous id handed out.
  Identifier next = 1;

  std::optional<Identifier> lookup(Identifier original) const;
};

// A marked range of one tape with declared inputs and outputs. Lifecycle:
// begin -> add_input/add_output/record -> close -> finish. A tape has at most
// one open (begun, not yet closed) region, but any number of closed ones.
class PreaccRegion {
 public:
  static PreaccRegion begin(Tape& tape);

  PreaccRegion(const PreaccRegion&) = delete;
  PreaccRegion& operator=(const PreaccRegion&) = delete;
  PreaccRegion(PreaccRegion&& other) noexcept;
  PreaccRegion& operator=(PreaccRegion&& other) noexcept;
  ~PreaccRegion();

  // Declares a value the region reads but does not define. Rejects passive
  // values, duplicates, and values recorded inside this region.
  void add_input(const ActiveValue& v);
  void add_input(Identifier) = delete;  // a bare id would convert to a passive constant

  // Declares a value the region exposes. Must be recorded inside this region,
  // or be a declared input (identity passthrough). Duplicates are rejected.
  void add_output(const ActiveValue& v);
  void add_output(Identifier) = delete;

  void close();

  bool closed() const { return closed_; }
  bool finished() const { return finished_; }
  bool edited() const { return edited_; }

  Tape& tape() const { return *tape_; }
  TapePosition start() const { return start_; }
  TapePosition end() const;  // valid once closed
  std::size_t statement_count() const { return end() - start_; }

  const std::vector<Identifier>& inputs() const { return inputs_; }
  const std::vector<Identifier>& outputs() const { return outputs_; }

  // Identifiers used to address adjoint storage: the originals, or the
  // contiguous ids once the region has been remapped and edited.
  const std::vector<Identifier>& storage_inputs() const {
    return edited_ ? remapped_inputs_ : inputs_;
  }
  const std::vector<Identifier>& storage_outputs() const {
    return edited_ ? remapped_outputs_ : outputs_;
  }

  // Size of a dense vector indexed by the contiguous ids (distinct count + 1,
  // slot 0 unused). Valid once edited.
  Identifier remapped_slot_count() const;

  void mark_finished() { finished_ = true; }

 private:
  explicit PreaccRegion(Tape& tape);
  friend RemapResult remap_and_edit(PreaccRegion& region, MapKind kind, StoreMemoryReport& stats);

  Tape* tape_ = nullptr;
  TapePosition start_ = 0;
  std::optional<TapePosition> end_;
  Identifier first_region_id_ = 0;  // counter snapshot at begin
  bool closed_ = false;
  bool finished_ = false;
  bool edited_ = false;
  std::vector<Identifier> inputs_;
  std::vector<Identifier> outputs_;
  std::vector<Identifier> remapped_inputs_;
  std::vector<Identifier> remapped_outputs_;
  Identifier remapped_next_ = 1;
};

// Structural checks on a closed region, scoped to the region's tape:
// - every argument read inside the region is a declared input or assigned in
//   the region (no undeclared external reads);
// - no statement after the region reads a region-assigned identifier other
//   than a declared output (no escaping intermediates).
std::vector<RegionViolation> validate_region(const PreaccRegion& region);

// Rewrites every identifier the region touches (declared inputs first, then
// statement arguments and lhs in tape order) to the contiguous range
// 1..distinct_count and edits the tape in place. The identifier map is built
// with an ordered or hashed map per kind; its cost lands in stats and the map
// itself is discarded on return, before any adjoint storage is allocated.
RemapResult remap_and_edit(PreaccRegion& region, MapKind kind, StoreMemoryReport& stats);

// Assembles the region's dense Jacobian with unit-seed sweeps against the
// given adjoint store. Reverse mode runs one sweep per output, forward one
// per input; automatic picks reverse when outputs <= inputs. The store must
// be clean (all relevant cells zero) on entry and is left clean on return:
// every sweep is followed by a range reset and an explicit seed clear.
template <AdjointStorage S>
JacobianBlock compute_jacobian(const PreaccRegion& region, S& store,
                               SweepMode mode = SweepMode::automatic) {
  if (!region.closed()) throw RecordingError("compute_jacobian: region not closed");
  const Tape& tape = region.tape();
  const auto& ins = region.storage_inputs();
  const auto& outs = region.storage_outputs();
  JacobianBlock block(region.inputs(), region.outputs());
  const SweepMode chosen = mode != SweepMode::automatic ? mode
                           : outs.size() <= ins.size() ? SweepMode::reverse
                                                       : SweepMode::forward;
  block.set_mode(chosen);
  if (chosen == SweepMode::reverse) {
    for (std::size_t j = 0; j < outs.size(); ++j) {
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        store.set(outs[j], 1.0);
      }
      evaluate_reverse(tape, region.start(), region.end(), store);
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        for (std::size_t i = 0; i < ins.size(); ++i) block.at(j, i) = store.get(ins[i]);
      }
      reset_range(tape, region.start(), region.end(), store);
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        store.set(outs[j], 0.0);
      }
    }
  } else {
    for (std::size_t i = 0; i < ins.size(); ++i) {
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        store.set(ins[i], 1.0);
      }
      evaluate_forward(tape, region.start(), region.end(), store);
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        for (std::size_t j = 0; j < outs.size(); ++j) block.at(j, i) = store.get(outs[j]);
      }
      reset_range(tape, region.start(), region.end(), store);
      {
        [[maybe_unused]] auto g = store.evaluation_guard();
        store.set(ins[i], 0.0);
      }
    }
  }
  return block;
}

struct PreaccOptions {
  Strategy strategy = Strategy::hash_map;
  SweepMode mode = SweepMode::automatic;
  // Run validate_region before sweeping and throw RegionViolationError on any
  // finding.
  bool validate = false;
  // Clear and reuse one map store per worker instead of building a fresh one
  // per region. Observable through allocation_events.
  bool reuse_map_stores = false;
};

// Per-worker state for preaccumulation: the identifier counter, the optional
// shared vector, the persistent full local vector, optional reusable map
// stores, and the memory accounting of stores that already died. One context
// per worker; contexts are not thread-safe.
template <bool Counting>
class PreaccContext {
 public:
  explicit PreaccContext(IdentifierCounter& ids, MemoryCostModel model = {})
      : ids_(&ids), model_(model) {}

  IdentifierCounter& ids() const { return *ids_; }
  const MemoryCostModel& model() const { return model_; }

  void attach_shared(SharedAdjointVector<Counting>* shared) { shared_ = shared; }
  SharedAdjointVector<Counting>* shared() const { return shared_; }

  FullLocalVector<Counting>& full_vector() {
    if (!full_) full_.emplace(model_);
    return *full_;
  }
  OrderedMapAdjoints<Counting>& reusable_ordered() {
    if (!reuse_ordered_) reuse_ordered_.emplace(model_);
    return *reuse_ordered_;
  }
  HashMapAdjoints<Counting>& reusable_hashed() {
    if (!reuse_hashed_) reuse_hashed_.emplace(model_);
    return *reuse_hashed_;
  }

  // Folds the final report of a store whose lifetime just ended into this
  // worker's accounting.
  void consume(const StoreMemoryReport& r) { consumed_.merge_sequential(r); }

  // Worker-level accounting: dead stores plus the persistent ones. Does not
  // include the shared vector, which is reported once per run.
  StoreMemoryReport final_report() const {
    StoreMemoryReport r = consumed_;
    if (full_) r.merge_sequential(full_->memory_report());
    if (reuse_ordered_) r.merge_sequential(reuse_ordered_->memory_report());
    if (reuse_hashed_) r.merge_sequential(reuse_hashed_->memory_report());
    return r;
  }

 private:
  IdentifierCounter* ids_;
  MemoryCostModel model_;
  SharedAdjointVector<Counting>* shared_ = nullptr;
  std::optional<FullLocalVector<Counting>> full_;
  std::optional<OrderedMapAdjoints<Counting>> reuse_ordered_;
  std::optional<HashMapAdjoints<Counting>> reuse_hashed_;
  StoreMemoryReport consumed_;
};

// Preaccumulates a closed region: assembles its Jacobian with the selected
// strategy, then splices the recording away and replaces it with one
// statement per output whose arguments are the declared inputs with the
// Jacobian entries as partials (exact zeros dropped). Positions of statements
// after the region shift; when several closed regions share a tape, finish
// them in descending start order.
template <bool Counting>
JacobianBlock finish(PreaccRegion& region, const PreaccOptions& opts, PreaccContext<Counting>& ctx);

extern template JacobianBlock finish<true>(PreaccRegion&, const PreaccOptions&,
                                           PreaccContext<true>&);
extern template JacobianBlock finish<false>(PreaccRegion&, const PreaccOptions&,
                                            PreaccContext<false>&);

}  // namespace preacc
