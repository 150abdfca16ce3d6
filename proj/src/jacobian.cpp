#include "preacc/jacobian.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <ostream>
#include <sstream>

namespace preacc {

const char* to_string(SweepMode m) {
  switch (m) {
    case SweepMode::automatic: return "auto";
    case SweepMode::forward: return "forward";
    case SweepMode::reverse: return "reverse";
  }
  return "?";
}

bool JacobianBlock::same_bits(const JacobianBlock& other) const {
  if (inputs_ != other.inputs_ || outputs_ != other.outputs_) return false;
  if (data_.size() != other.data_.size()) return false;
  return data_.empty() ||
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

double JacobianBlock::max_rel_diff(const JacobianBlock& other) const {
  if (rows() != other.rows() || cols() != other.cols())
    return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) {
    const double a = data_[k];
    const double b = other.data_[k];
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    worst = std::max(worst, std::fabs(a - b) / scale);
  }
  return worst;
}

void JacobianBlock::dump_csv(std::ostream& os) const {
  os << "output_id,input_id,entry\n";
  char buf[64];
  for (std::size_t j = 0; j < rows(); ++j) {
    for (std::size_t i = 0; i < cols(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", at(j, i));
      os << outputs_[j] << ',' << inputs_[i] << ',' << buf << '\n';
    }
  }
}

std::string JacobianBlock::dump_csv() const {
  std::ostringstream os;
  dump_csv(os);
  return os.str();
}

}  // namespace preacc
