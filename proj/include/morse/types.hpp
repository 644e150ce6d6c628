#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace morse {

using Scalar = double;
using Index = Eigen::Index;

// Row-major throughout: rows index entities / edges / queries, columns are
// feature slots. Complex-valued layouts interleave (re, im) pairs.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Error taxonomy; the CLI maps these onto exit codes (2/3/4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Violated internal precondition (caller bug, not bad input).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace morse
