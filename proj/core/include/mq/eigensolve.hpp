#pragma once

// Ground states by a two-pass Lanczos recursion on large spaces, with
// thick-restart Lanczos (full reorthogonalization) as the fallback and for
// several levels; full spectra by dense diagonalization for small dimensions.

#include "mq/hamiltonians.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace mq {

inline constexpr std::uint64_t kLanczosSeed = 0x6d71756e6368ULL;  // fixed, documented start-vector seed
inline constexpr std::size_t kDenseDimensionCap = std::size_t{1} << 14;

struct EigenPair {
  double value = 0.0;
  StateVector vector;
  double residual = 0.0;  // ||H v - E v||
};

/// Eigenpairs in ascending order. Vectors are stored column-wise.
class SpectrumTable {
 public:
  SpectrumTable() = default;
  SpectrumTable(BasisPtr basis, std::vector<double> energies, Eigen::MatrixXcd vectors, bool complete);

  std::size_t size() const { return energies_.size(); }
  bool complete() const { return complete_; }
  const BasisPtr& basis() const { return basis_; }
  const std::vector<double>& energies() const { return energies_; }
  const Eigen::MatrixXcd& vectors() const { return vectors_; }
  double energy(std::size_t n) const { return energies_.at(n); }
  StateVector vector(std::size_t n) const;
  EigenPair pair(std::size_t n) const { return {energy(n), vector(n), 0.0}; }

 private:
  BasisPtr basis_;
  std::vector<double> energies_;
  Eigen::MatrixXcd vectors_;
  bool complete_ = false;
};

/// In-place projection onto a symmetry subspace; applied to every Krylov vector.
using Projector = std::function<void(std::span<cplx>)>;

struct LanczosOptions {
  double tol = 1e-10;          // residual ||Hv - Ev||
  int max_iter = 20000;        // operator applications
  int krylov_dim = 80;         // basis size before a thick restart
  std::uint64_t seed = kLanczosSeed;
  Projector projector;         // optional
};

EigenPair ground_state(const LinearOperator& op, const LanczosOptions& options = {});
EigenPair ground_state(const LinearOperator& op, double tol, int max_iter);

/// The k lowest eigenpairs (default tol 1e-8). Members of a degenerate cluster
/// straddling position k are all returned, so size() may exceed k.
SpectrumTable lowest_k(const LinearOperator& op, int k, const LanczosOptions& options);
SpectrumTable lowest_k(const LinearOperator& op, int k, double tol = 1e-8);

/// Every eigenpair; dimension must not exceed kDenseDimensionCap.
SpectrumTable full_spectrum(const LinearOperator& op);

/// Keeps only amplitudes with (-1)^popcount == parity (+1 or -1).
Projector parity_projector(BasisPtr basis, int parity);

struct ParityGroundState {
  EigenPair pair;
  int parity = +1;
};

/// Lowest state among the two parity sectors; the result is an exact parity
/// eigenstate even when the doublet splitting is below the solver tolerance.
/// Ties go to the even sector.
ParityGroundState ground_state_with_parity(const LinearOperator& op, const LanczosOptions& options = {});

/// Eigenvalues of the symmetric tridiagonal matrix (alpha on the diagonal,
/// beta below it) with the squared first components of its eigenvectors:
/// the Gauss rule of the Lanczos recursion. O(m^2), nodes ascending.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};
GaussRule tridiagonal_gauss_rule(std::span<const double> alpha, std::span<const double> beta);

/// Gauge fix: rotate so the largest-magnitude amplitude is real and positive.
void fix_phase(std::span<cplx> v);

}  // namespace mq
