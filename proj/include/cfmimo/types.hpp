#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfmimo {

using cdouble = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Raised when a numerical routine cannot produce a meaningful result
/// (singular system, non-finite objective, failed bracketing).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an object is used before a required field has been set.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised by the channel file reader.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major grid indexed by (AP, UE).
template <class T>
class PairGrid {
 public:
  PairGrid() = default;
  PairGrid(std::size_t rows, std::size_t cols, const T& init = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, init) {}

  T& operator()(std::size_t i, std::size_t k) { return data_[i * cols_ + k]; }
  const T& operator()(std::size_t i, std::size_t k) const {
    return data_[i * cols_ + k];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool operator==(const PairGrid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// D_{i,k}: number of streams AP i sends to UE k (zero for non-serving pairs).
using StreamCounts = PairGrid<int>;

/// Per-(AP, UE) transmit matrices P_{i,k} (M_i x D_{i,k}).  Non-serving pairs
/// hold an M_i x 0 block.
struct Beamformer {
  PairGrid<CMat> blocks;

  std::size_t num_aps() const { return blocks.rows(); }
  std::size_t num_ues() const { return blocks.cols(); }
  int streams(std::size_t i, std::size_t k) const {
    return static_cast<int>(blocks(i, k).cols());
  }
  StreamCounts stream_counts() const;
};

/// Low-dimension substitutions X_{i,k} (sum_k N_k x D_{i,k}) with
/// P_{i,k} = Hbar_i^H X_{i,k}.
struct LowDimBeamformer {
  PairGrid<CMat> blocks;

  std::size_t num_aps() const { return blocks.rows(); }
  std::size_t num_ues() const { return blocks.cols(); }
  int streams(std::size_t i, std::size_t k) const {
    return static_cast<int>(blocks(i, k).cols());
  }
  StreamCounts stream_counts() const;
};

/// Weights and per-AP budgets shared by every solver.
struct SystemParams {
  std::vector<double> weights;       // alpha_k
  std::vector<double> power_budget;  // P_max,i in watts
};

}  // namespace cfmimo
