#pragma once

#include <cstdint>
#include <random>
#include <variant>

#include "mousse/linalg.hpp"

namespace mousse {

/// Seeded generator used for every random quantity in the project.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniform doubles take the top 53 bits of one draw; normals use
/// the Box-Muller transform (both values of a pair are consumed in order).
/// No std::*_distribution is involved, since those are implementation
/// defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives an independent seed for sub-stream `stream` (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct Gaussian {};
struct Orthogonal {};
/// Singular values log-spaced from 1 down to 1/kappa.
struct Conditioned {
  double kappa = 1.0;
};
using MatrixKind = std::variant<Gaussian, Orthogonal, Conditioned>;

/// Deterministic random matrix. Gaussian entries are drawn in row-major
/// order. Orthogonal requires rows == cols.
Matrix rand_matrix(Index rows, Index cols, std::uint64_t seed, MatrixKind kind = Gaussian{});

/// i.i.d. N(0, 1) entries drawn from `rng` in row-major order.
Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);

/// Matrix with orthonormal columns (rows >= cols), from the QR factor of a
/// Gaussian matrix with the sign of diag(R) folded in.
Matrix orthonormal_columns(Index rows, Index cols, Rng& rng);

}  // namespace mousse
