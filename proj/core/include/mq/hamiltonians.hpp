#pragma once

// Model descriptions and their matrix-free operators.
//
// Every model is first lowered to a TermList (a real-weighted sum of Pauli
// strings); LinearOperator then groups the strings by the bits they flip and
// applies them without storing a matrix. Units: J = 1 for the Ising models,
// J1 = 1 for the Kondo chain, hbar = 1.

#include "mq/statespace.hpp"

#include <Eigen/SparseCore>

#include <variant>
#include <vector>

namespace mq {

struct PauliFactor {
  Axis axis;
  int site;  // 1-based
  bool operator==(const PauliFactor&) const = default;
};

struct PauliTerm {
  double coefficient = 0.0;
  std::vector<PauliFactor> factors;  // sorted by site
  bool operator==(const PauliTerm&) const = default;
};

class TermList {
 public:
  explicit TermList(int n_sites = 1);

  /// Adds coefficient * prod(factors). Sites must be in range and distinct.
  void add(double coefficient, std::vector<PauliFactor> factors);
  void add_heisenberg(double coupling, int a, int b);  // coupling * sigma_a . sigma_b

  int n_sites() const { return n_sites_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<PauliTerm>& terms() const { return terms_; }

  /// Coupling of the two-site term axis_a axis_b on (a, b), 0 if absent.
  double coupling(Axis axis, int a, int b) const;

  bool operator==(const TermList&) const = default;

 private:
  int n_sites_;
  std::vector<PauliTerm> terms_;
};

enum class PairConvention { ordered, all };  // sum over i<j, or literal sum over i != j

struct LongRangeIsingSpec {
  int n_sites = 2;
  double alpha = 1.0;
  double b_over_j = 1.0;
  PairConvention pairs = PairConvention::ordered;
  bool operator==(const LongRangeIsingSpec&) const = default;
};

struct TficSpec {
  int n_sites = 3;
  double lambda = 1.0;
  bool operator==(const TficSpec&) const = default;
};

inline constexpr double kCriticalJ2OverJ1 = 0.2412;

struct KondoChainSpec {
  int n_sites = 4;
  double j_prime = 1.0;
  double j2_over_j1 = kCriticalJ2OverJ1;
  bool operator==(const KondoChainSpec&) const = default;
};

/// Arbitrary Pauli-string Hamiltonian (single-spin checks, user models).
struct CustomSpec {
  TermList terms;
  bool operator==(const CustomSpec&) const = default;
};

using HamiltonianSpec = std::variant<LongRangeIsingSpec, TficSpec, KondoChainSpec, CustomSpec>;

int n_sites_of(const HamiltonianSpec& spec);
void validate(const HamiltonianSpec& spec);

TermList long_range_ising_terms(const LongRangeIsingSpec& spec);
TermList tfic_terms(const TficSpec& spec);
TermList kondo_chain_terms(const KondoChainSpec& spec);
TermList terms_of(const HamiltonianSpec& spec);

/// Hermitian operator sum_t c_t P_t acting on a (possibly sector-restricted) basis.
/// Immutable; apply() is reentrant.
class LinearOperator {
 public:
  /// Throws ConfigError when the terms connect basis states to states outside the basis.
  LinearOperator(TermList terms, BasisPtr basis);

  std::size_t dimension() const { return basis_->size(); }
  const BasisPtr& basis() const { return basis_; }
  const TermList& terms() const { return terms_; }
  bool hermitian() const { return true; }
  bool is_real() const { return real_; }

  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  StateVector apply(const StateVector& psi) const;

  /// Re <psi|H|psi>.
  double expectation(const StateVector& psi) const;

  /// Upper bound on the spectral norm (sum of |coefficients|).
  double norm_bound() const { return norm_bound_; }

  Eigen::SparseMatrix<cplx, Eigen::RowMajor> assemble() const;

  /// Every string flips an even number of spins, so [H, prod_i sigma^z_i] = 0.
  bool conserves_parity() const;
  /// Nonzero matrix elements on this basis connect states of equal popcount ([H, S^z] = 0).
  bool conserves_magnetization() const;

  /// Same terms on another basis.
  LinearOperator restricted_to(BasisPtr basis) const { return LinearOperator(terms_, std::move(basis)); }

 private:
  struct Part {
    cplx coefficient;  // includes i^{#y}
    Bits sign_mask;    // y and z factors
  };
  struct Group {
    Bits flip;
    std::vector<Part> parts;
    bool sign_free = false;  // a single part without y/z factors
  };

  template <class Scalar>
  void apply_impl(std::span<const cplx> in, std::span<cplx> out) const;
  void check_closure() const;

  TermList terms_;
  BasisPtr basis_;
  std::vector<Group> groups_;       // off-diagonal, flip != 0
  std::vector<double> diagonal_;    // flip == 0 part, real for Hermitian input
  bool real_ = true;
  double norm_bound_ = 0.0;
};

/// Basis defaults to the full 2^N space.
LinearOperator build_long_range_ising(const LongRangeIsingSpec& spec, BasisPtr basis = nullptr);
LinearOperator build_tfic(const TficSpec& spec, BasisPtr basis = nullptr);
LinearOperator build_kondo_chain(const KondoChainSpec& spec, BasisPtr basis = nullptr);
LinearOperator build_operator(const HamiltonianSpec& spec, BasisPtr basis = nullptr);

/// P = prod_i sigma^z_i.
LinearOperator parity_operator(int n_sites, BasisPtr basis = nullptr);

/// Total S^z in units of sigma^z: sum_i sigma^z_i.
LinearOperator total_sz_operator(int n_sites, BasisPtr basis = nullptr);

}  // namespace mq
