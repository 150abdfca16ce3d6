#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace preacc {

using Identifier = std::uint64_t;
using TapePosition = std::size_t;

// Identifier 0 marks passive data. It never appears as the lhs of a recorded
// statement and passive arguments are dropped at record time.
inline constexpr Identifier kPassiveId = 0;

class RecordingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Monotone identifier source shared by every tape of one recording
// environment. Identifiers act as virtual addresses into adjoint storage and
// are never reused.
class IdentifierCounter {
 public:
  IdentifierCounter() = default;
  IdentifierCounter(const IdentifierCounter&) = delete;
  IdentifierCounter& operator=(const IdentifierCounter&) = delete;

  Identifier acquire() { return next_.fetch_add(1, std::memory_order_relaxed); }

  // Largest identifier assigned so far across all tapes of the environment.
  Identifier max_assigned() const { return next_.load(std::memory_order_relaxed) - 1; }

 private:
  std::atomic<Identifier> next_{1};
};

struct TapeArg {
  double partial;
  Identifier rhs;
};

// One recorded assignment lhs = phi(args). Partials are precomputed at record
// time, so sweeps never revisit primal values. Arguments live in the owning
// tape's argument array, contiguous per statement.
struct Statement {
  Identifier lhs;
  std::size_t arg_begin;
  std::uint32_t arg_count;
};

class Tape;

// Pairs a primal value with the identifier of the statement that produced it.
// Copy construction is a plain handle copy; copy assignment records a copy
// statement, so the assigned-to value receives a fresh identifier.
class ActiveValue {
 public:
  ActiveValue() = default;
  ActiveValue(double v) : primal_(v) {}  // passive constant

  ActiveValue(const ActiveValue&) = default;
  ActiveValue(ActiveValue&&) = default;
  ActiveValue& operator=(const ActiveValue& rhs);
  ActiveValue& operator=(ActiveValue&&) = default;

  double value() const { return primal_; }
  Identifier id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool active() const { return id_ != kPassiveId; }

 private:
  friend class Tape;
  ActiveValue(double v, Identifier id, Tape* tape) : primal_(v), id_(id), tape_(tape) {}

  double primal_ = 0.0;
  Identifier id_ = kPassiveId;
  Tape* tape_ = nullptr;
};

class Tape {
 public:
  explicit Tape(IdentifierCounter& ids, int owner = 0) : ids_(&ids), owner_(owner) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  int owner() const { return owner_; }
  IdentifierCounter& ids() const { return *ids_; }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // Registers an input value. Records a zero-arity statement so the
  // identifier is owned by the tape; the value itself passes through
  // unchanged (non-finite values included).
  ActiveValue register_input(double value);

  // Records lhs = phi(inputs) with the given precomputed partials. Passive
  // inputs are dropped. Throws RecordingError when recording is disabled or a
  // partial of an active input is non-finite.
  ActiveValue record_statement(std::span<const ActiveValue> inputs, double primal,
                               std::span<const double> partials);

  // Elementary operations, recorded on this tape regardless of which tape the
  // operands were recorded on. Cross-tape references are how regions read
  // inputs owned by another tape.
  ActiveValue add(const ActiveValue& a, const ActiveValue& b);
  ActiveValue sub(const ActiveValue& a, const ActiveValue& b);
  ActiveValue mul(const ActiveValue& a, const ActiveValue& b);
  ActiveValue div(const ActiveValue& a, const ActiveValue& b);
  ActiveValue sin(const ActiveValue& u);
  ActiveValue cos(const ActiveValue& u);
  ActiveValue exp(const ActiveValue& u);
  ActiveValue log(const ActiveValue& u);
  ActiveValue copy(const ActiveValue& u);

  std::size_t size() const { return statements_.size(); }
  TapePosition position() const { return statements_.size(); }
  std::size_t argument_count() const { return args_.size(); }

  const Statement& statement(TapePosition i) const { return statements_[i]; }
  std::span<const Statement> statements(TapePosition begin, TapePosition end) const;
  std::span<const TapeArg> args(const Statement& s) const {
    return {args_.data() + s.arg_begin, s.arg_count};
  }

  // Recorded size of [begin, end) under this layout: statements plus argument
  // entries. Used by the memory-reduction checks.
  std::size_t recorded_bytes(TapePosition begin, TapePosition end) const;

  // Mutable access for identifier rewriting during preaccumulation.
  std::span<Statement> statements_for_edit(TapePosition begin, TapePosition end);
  std::span<TapeArg> args_for_edit(const Statement& s) {
    return {args_.data() + s.arg_begin, s.arg_count};
  }

  // Splices [begin, end) out of the tape and inserts the replacement
  // statements, whose arg_begin offsets must be relative to repl_args.
  void replace_range(TapePosition begin, TapePosition end, std::vector<Statement> repl,
                     std::vector<TapeArg> repl_args);

  // One statement per line: "lhs <- (partial,rhs) (partial,rhs) ...", partials
  // printed with 17 significant digits.
  void dump(std::ostream& os, TapePosition begin, TapePosition end) const;
  std::string dump(TapePosition begin, TapePosition end) const;

  // Region bookkeeping: at most one open region per tape.
  bool region_open() const { return region_open_; }
  void mark_region_open();
  void mark_region_closed();

 private:
  std::size_t arg_lower_bound(TapePosition pos) const;

  IdentifierCounter* ids_;
  std::vector<Statement> statements_;
  std::vector<TapeArg> args_;
  int owner_ = 0;
  bool recording_ = true;
  bool region_open_ = false;
};

// Operator sugar for single-tape code. All active operands must have been
// recorded on the same tape; mixed-tape expressions must use the Tape methods.
ActiveValue operator+(const ActiveValue& a, const ActiveValue& b);
ActiveValue operator-(const ActiveValue& a, const ActiveValue& b);
ActiveValue operator*(const ActiveValue& a, const ActiveValue& b);
ActiveValue operator/(const ActiveValue& a, const ActiveValue& b);
ActiveValue sin(const ActiveValue& u);
ActiveValue cos(const ActiveValue& u);
ActiveValue exp(const ActiveValue& u);
ActiveValue log(const ActiveValue& u);
ActiveValue copy_of(const ActiveValue& u);

struct IdentifierScan {
  Identifier min_id = 0;
  Identifier max_id = 0;
  std::size_t distinct_count = 0;
};

// Scans every identifier occurring in [begin, end) (lhs and rhs) plus the
// declared ids. Throws std::invalid_argument when both the range and the
// declared list are empty, since then no bounds exist.
IdentifierScan scan_identifiers(const Tape& tape, TapePosition begin, TapePosition end,
                                std::span<const Identifier> declared = {});

}  // namespace preacc
