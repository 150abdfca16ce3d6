#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "preacc/tape.hpp"

namespace preacc {

enum class SweepMode { automatic, forward, reverse };

const char* to_string(SweepMode m);

// Dense m x n Jacobian of a region's outputs with respect to its declared
// inputs, in declaration order. Rows are outputs, columns inputs; the
// identifier lists keep the association with the recorded program.
class JacobianBlock {
 public:
  JacobianBlock() = default;
  JacobianBlock(std::vector<Identifier> input_ids, std::vector<Identifier> output_ids)
      : inputs_(std::move(input_ids)),
        outputs_(std::move(output_ids)),
        data_(inputs_.size() * outputs_.size(), 0.0) {}

  std::size_t rows() const { return outputs_.size(); }
  std::size_t cols() const { return inputs_.size(); }

  double at(std::size_t row, std::size_t col) const { return data_[row * cols() + col]; }
  double& at(std::size_t row, std::size_t col) { return data_[row * cols() + col]; }

  const std::vector<Identifier>& input_ids() const { return inputs_; }
  const std::vector<Identifier>& output_ids() const { return outputs_; }
  const std::vector<double>& entries() const { return data_; }

  SweepMode mode() const { return mode_; }
  void set_mode(SweepMode m) { mode_ = m; }

  // Bitwise equality of shapes, identifier lists and entries. This is the
  // determinism notion used throughout: no tolerance.
  bool same_bits(const JacobianBlock& other) const;

  // Largest |a - b| / max(1, |a|, |b|) over all entries; infinity on shape
  // mismatch.
  double max_rel_diff(const JacobianBlock& other) const;

  // CSV dump with header output_id,input_id,entry; entries at 17 significant
  // digits, rows in row-major order.
  void dump_csv(std::ostream& os) const;
  std::string dump_csv() const;

 private:
  std::vector<Identifier> inputs_;
  std::vector<Identifier> outputs_;
  std::vector<double> data_;
  SweepMode mode_ = SweepMode::automatic;
};

}  // namespace preacc
