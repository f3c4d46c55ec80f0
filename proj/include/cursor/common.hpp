#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cursor {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// Raised on precondition violations (bad dimensions, out-of-range parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation cannot proceed on otherwise valid arguments.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
  if (!m.allFinite()) throw InvalidArgument(what + ": non-finite value");
}

/// splitmix64 finalizer.
Seed mix64(Seed x);

/// Combines a base seed with an ordered list of indices into a child seed.
/// Child seeds depend only on the key, never on call order.
Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> keys);

/// Uniform permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions from fn
/// propagate to the caller after all workers have joined.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

/// Reads CURSOR_WORKERS, falling back to 1.
unsigned default_worker_count();

}  // namespace cursor
