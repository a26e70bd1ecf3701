#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeseed {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

// Row-major everywhere: a dataset row, a network batch row and a weight-matrix
// row all map onto contiguous memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Bad user-facing configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or numerically impossible requests (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated operation precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Worker count for parallel sections: TREESEED_THREADS if set, else the
/// hardware concurrency. Always at least 1.
int worker_count();

/// Runs fn(i) for i in [0, n). Work is split statically so the result does not
/// depend on scheduling; fn must only touch state owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int max_workers = 0);

}  // namespace treeseed
