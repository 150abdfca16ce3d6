#pragma once

#include <atomic>
#include <concepts>

#include "preacc/stores.hpp"
#include "preacc/tape.hpp"

namespace preacc {

// Anything indexed by identifier that supports read (get), read-and-zero
// (take), overwrite (set) and accumulate (add) can back a sweep. get and set
// count as one adjoint access, add as two (read + write), take as one
// (combined read-and-zero).
template <typename S>
concept AdjointStorage = requires(S s, const S cs, Identifier id, double v) {
  { cs.get(id) } -> std::convertible_to<double>;
  { s.take(id) } -> std::convertible_to<double>;
  { s.set(id, v) };
  { s.add(id, v) };
  { cs.evaluation_guard() };
  { cs.memory_report() } -> std::same_as<StoreMemoryReport>;
};

namespace testhooks {
// Disables the read-and-zero of the lhs adjoint during reverse sweeps.
// Exists only so tests can demonstrate that repeated evaluations break
// without that reset; never set this in production code.
inline std::atomic<bool> disable_lhs_reset{false};
}  // namespace testhooks

// Reverse sweep over [begin, end): processes statements newest-first; for
// each one takes the lhs adjoint (read-and-zero) and accumulates
// partial * lhs_adjoint into every argument's adjoint. The lhs reset makes
// repeated evaluations over the same store sound. Seeding and harvesting are
// the caller's business.
template <AdjointStorage S>
void evaluate_reverse(const Tape& tape, TapePosition begin, TapePosition end, S& adjoints) {
  [[maybe_unused]] auto guard = adjoints.evaluation_guard();
  const bool keep_lhs = testhooks::disable_lhs_reset.load(std::memory_order_relaxed);
  const auto stmts = tape.statements(begin, end);
  for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) {
    const double a = keep_lhs ? adjoints.get(it->lhs) : adjoints.take(it->lhs);
    for (const TapeArg& arg : tape.args(*it)) adjoints.add(arg.rhs, arg.partial * a);
  }
}

// Forward (tangent) sweep over [begin, end): processes statements oldest-
// first and overwrites each lhs tangent with the partial-weighted sum of its
// argument tangents. A zero-arity statement clears its lhs tangent.
template <AdjointStorage S>
void evaluate_forward(const Tape& tape, TapePosition begin, TapePosition end, S& tangents) {
  [[maybe_unused]] auto guard = tangents.evaluation_guard();
  for (const Statement& s : tape.statements(begin, end)) {
    double dot = 0.0;
    for (const TapeArg& arg : tape.args(s)) dot += arg.partial * tangents.get(arg.rhs);
    tangents.set(s.lhs, dot);
  }
}

// Zeroes every identifier occurring in [begin, end), lhs and rhs alike.
// Deterministic statement-order walk, no store iteration.
template <AdjointStorage S>
void reset_range(const Tape& tape, TapePosition begin, TapePosition end, S& adjoints) {
  [[maybe_unused]] auto guard = adjoints.evaluation_guard();
  for (const Statement& s : tape.statements(begin, end)) {
    adjoints.set(s.lhs, 0.0);
    for (const TapeArg& arg : tape.args(s)) adjoints.set(arg.rhs, 0.0);
  }
}

}  // namespace preacc
