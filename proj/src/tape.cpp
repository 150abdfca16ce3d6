#include "preacc/tape.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace preacc {

ActiveValue& ActiveValue::operator=(const ActiveValue& rhs) {
  if (rhs.active()) {
    *this = rhs.tape_->copy(rhs);  // move-assigns the freshly recorded handle
  } else {
    primal_ = rhs.primal_;
    id_ = kPassiveId;
    tape_ = nullptr;
  }
  return *this;
}

ActiveValue Tape::register_input(double value) {
  if (!recording_) throw RecordingError("tape is not recording");
  const Identifier id = ids_->acquire();
  statements_.push_back({id, args_.size(), 0});
  return ActiveValue(value, id, this);
}

ActiveValue Tape::record_statement(std::span<const ActiveValue> inputs, double primal,
                                   std::span<const double> partials) {
  if (!recording_) throw RecordingError("tape is not recording");
  if (inputs.size() != partials.size())
    throw std::invalid_argument("record_statement: inputs and partials differ in length");
  const std::size_t arg_begin = args_.size();
  std::uint32_t count = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].active()) continue;
    if (!std::isfinite(partials[i])) {
      args_.resize(arg_begin);
      throw RecordingError("record_statement: non-finite partial");
    }
    args_.push_back({partials[i], inputs[i].id()});
    ++count;
  }
  const Identifier lhs = ids_->acquire();
  for (std::size_t i = arg_begin; i < args_.size(); ++i) {
    if (args_[i].rhs >= lhs) {
      args_.resize(arg_begin);
      throw RecordingError("record_statement: argument id not older than lhs");
    }
  }
  statements_.push_back({lhs, arg_begin, count});
  return ActiveValue(primal, lhs, this);
}

namespace {

ActiveValue record_binary(Tape& t, const ActiveValue& a, const ActiveValue& b, double primal,
                          double da, double db) {
  const ActiveValue ins[2] = {a, b};
  const double parts[2] = {da, db};
  return t.record_statement(ins, primal, parts);
}

ActiveValue record_unary(Tape& t, const ActiveValue& u, double primal, double du) {
  const ActiveValue ins[1] = {u};
  const double parts[1] = {du};
  return t.record_statement(ins, primal, parts);
}

}  // namespace

ActiveValue Tape::add(const ActiveValue& a, const ActiveValue& b) {
  if (!a.active() && !b.active()) return ActiveValue(a.value() + b.value());
  return record_binary(*this, a, b, a.value() + b.value(), 1.0, 1.0);
}

ActiveValue Tape::sub(const ActiveValue& a, const ActiveValue& b) {
  if (!a.active() && !b.active()) return ActiveValue(a.value() - b.value());
  return record_binary(*this, a, b, a.value() - b.value(), 1.0, -1.0);
}

ActiveValue Tape::mul(const ActiveValue& a, const ActiveValue& b) {
  if (!a.active() && !b.active()) return ActiveValue(a.value() * b.value());
  return record_binary(*this, a, b, a.value() * b.value(), b.value(), a.value());
}

ActiveValue Tape::div(const ActiveValue& a, const ActiveValue& b) {
  if (!a.active() && !b.active()) return ActiveValue(a.value() / b.value());
  const double inv = 1.0 / b.value();
  return record_binary(*this, a, b, a.value() * inv, inv, -a.value() * inv * inv);
}

ActiveValue Tape::sin(const ActiveValue& u) {
  if (!u.active()) return ActiveValue(std::sin(u.value()));
  return record_unary(*this, u, std::sin(u.value()), std::cos(u.value()));
}

ActiveValue Tape::cos(const ActiveValue& u) {
  if (!u.active()) return ActiveValue(std::cos(u.value()));
  return record_unary(*this, u, std::cos(u.value()), -std::sin(u.value()));
}

ActiveValue Tape::exp(const ActiveValue& u) {
  if (!u.active()) return ActiveValue(std::exp(u.value()));
  const double e = std::exp(u.value());
  return record_unary(*this, u, e, e);
}

ActiveValue Tape::log(const ActiveValue& u) {
  if (!u.active()) return ActiveValue(std::log(u.value()));
  return record_unary(*this, u, std::log(u.value()), 1.0 / u.value());
}

ActiveValue Tape::copy(const ActiveValue& u) {
  if (!u.active()) return ActiveValue(u.value());
  return record_unary(*this, u, u.value(), 1.0);
}

namespace {

// Resolves the tape for operator sugar: all active operands must agree.
Tape* common_tape(const ActiveValue& a, const ActiveValue& b) {
  Tape* t = a.active() ? a.tape() : nullptr;
  if (b.active()) {
    if (t != nullptr && t != b.tape())
      throw RecordingError("operands recorded on different tapes; use the Tape methods");
    if (t == nullptr) t = b.tape();
  }
  return t;
}

}  // namespace

ActiveValue operator+(const ActiveValue& a, const ActiveValue& b) {
  Tape* t = common_tape(a, b);
  return t ? t->add(a, b) : ActiveValue(a.value() + b.value());
}

ActiveValue operator-(const ActiveValue& a, const ActiveValue& b) {
  Tape* t = common_tape(a, b);
  return t ? t->sub(a, b) : ActiveValue(a.value() - b.value());
}

ActiveValue operator*(const ActiveValue& a, const ActiveValue& b) {
  Tape* t = common_tape(a, b);
  return t ? t->mul(a, b) : ActiveValue(a.value() * b.value());
}

ActiveValue operator/(const ActiveValue& a, const ActiveValue& b) {
  Tape* t = common_tape(a, b);
  return t ? t->div(a, b) : ActiveValue(a.value() / b.value());
}

ActiveValue sin(const ActiveValue& u) {
  return u.active() ? u.tape()->sin(u) : ActiveValue(std::sin(u.value()));
}

ActiveValue cos(const ActiveValue& u) {
  return u.active() ? u.tape()->cos(u) : ActiveValue(std::cos(u.value()));
}

ActiveValue exp(const ActiveValue& u) {
  return u.active() ? u.tape()->exp(u) : ActiveValue(std::exp(u.value()));
}

ActiveValue log(const ActiveValue& u) {
  return u.active() ? u.tape()->log(u) : ActiveValue(std::log(u.value()));
}

ActiveValue copy_of(const ActiveValue& u) {
  return u.active() ? u.tape()->copy(u) : ActiveValue(u.value());
}

std::span<const Statement> Tape::statements(TapePosition begin, TapePosition end) const {
  if (begin > end || end > statements_.size())
    throw std::out_of_range("Tape::statements: bad range");
  return {statements_.data() + begin, end - begin};
}

std::span<Statement> Tape::statements_for_edit(TapePosition begin, TapePosition end) {
  if (begin > end || end > statements_.size())
    throw std::out_of_range("Tape::statements_for_edit: bad range");
  return {statements_.data() + begin, end - begin};
}

std::size_t Tape::recorded_bytes(TapePosition begin, TapePosition end) const {
  const std::size_t args_b = arg_lower_bound(begin);
  const std::size_t args_e = arg_lower_bound(end);
  return (end - begin) * sizeof(Statement) + (args_e - args_b) * sizeof(TapeArg);
}

std::size_t Tape::arg_lower_bound(TapePosition pos) const {
  if (pos > statements_.size()) throw std::out_of_range("Tape: position past the end");
  return pos == statements_.size() ? args_.size() : statements_[pos].arg_begin;
}

void Tape::replace_range(TapePosition begin, TapePosition end, std::vector<Statement> repl,
                         std::vector<TapeArg> repl_args) {
  if (begin > end || end > statements_.size())
    throw std::out_of_range("Tape::replace_range: bad range");
  const std::size_t args_b = arg_lower_bound(begin);
  const std::size_t args_e = arg_lower_bound(end);
  const std::size_t removed_args = args_e - args_b;

  for (auto& s : repl) {
    if (s.arg_begin + s.arg_count > repl_args.size())
      throw std::invalid_argument("Tape::replace_range: replacement args out of bounds");
    s.arg_begin += args_b;
  }
  for (std::size_t i = end; i < statements_.size(); ++i) {
    statements_[i].arg_begin = statements_[i].arg_begin - removed_args + repl_args.size();
  }

  args_.erase(args_.begin() + static_cast<std::ptrdiff_t>(args_b),
              args_.begin() + static_cast<std::ptrdiff_t>(args_e));
  args_.insert(args_.begin() + static_cast<std::ptrdiff_t>(args_b), repl_args.begin(),
               repl_args.end());
  statements_.erase(statements_.begin() + static_cast<std::ptrdiff_t>(begin),
                    statements_.begin() + static_cast<std::ptrdiff_t>(end));
  statements_.insert(statements_.begin() + static_cast<std::ptrdiff_t>(begin), repl.begin(),
                     repl.end());
}

void Tape::dump(std::ostream& os, TapePosition begin, TapePosition end) const {
  char buf[64];
  for (const Statement& s : statements(begin, end)) {
    os << s.lhs << " <-";
    for (const TapeArg& a : args(s)) {
      std::snprintf(buf, sizeof(buf), "%.17g", a.partial);
      os << " (" << buf << ',' << a.rhs << ')';
    }
    os << '\n';
  }
}

std::string Tape::dump(TapePosition begin, TapePosition end) const {
  std::ostringstream os;
  dump(os, begin, end);
  return os.str();
}

void Tape::mark_region_open() {
  if (region_open_) throw RecordingError("tape already has an open region");
  region_open_ = true;
}

void Tape::mark_region_closed() { region_open_ = false; }

IdentifierScan scan_identifiers(const Tape& tape, TapePosition begin, TapePosition end,
                                std::span<const Identifier> declared) {
  if (begin == end && declared.empty())
    throw std::invalid_argument("scan_identifiers: empty range and no declared ids");
  IdentifierScan out;
  std::unordered_set<Identifier> seen;
  auto visit = [&](Identifier id) {
    if (seen.insert(id).second) {
      if (out.distinct_count == 0 || id < out.min_id) out.min_id = id;
      if (out.distinct_count == 0 || id > out.max_id) out.max_id = id;
      ++out.distinct_count;
    }
  };
  for (Identifier id : declared) visit(id);
  for (const Statement& s : tape.statements(begin, end)) {
    visit(s.lhs);
    for (const TapeArg& a : tape.args(s)) visit(a.rhs);
  }
  return out;
}

}  // namespace preacc
