#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pcfss {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Thrown on contract violations (bad shapes, invalid arguments, parse errors).
class PcfssError : public std::runtime_error {
 public:
  explicit PcfssError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PcfssError(msg);
}

inline void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw PcfssError(what + ": non-finite entries");
}

}  // namespace pcfss
