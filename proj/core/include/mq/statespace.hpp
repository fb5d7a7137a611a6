#pragma once

// Computational basis, state vectors and single-site Pauli action.
//
// Encoding: site i (1-based everywhere in the public interface) lives in bit
// i-1 of a basis label; bit value 0 is sigma^z = +1 ("up").

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace mq {

using cplx = std::complex<double>;
using Bits = std::uint64_t;

enum class Axis { x, y, z };

char axis_name(Axis a);
Axis parse_axis(char c);

inline constexpr int kMaxSites = 40;

/// (-1)^popcount(s) as a bit: true when popcount(s) is odd.
inline bool odd_parity(Bits s) {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_parityll(s) != 0;
#else
  s ^= s >> 32;
  s ^= s >> 16;
  s ^= s >> 8;
  s ^= s >> 4;
  return (0x6996u >> (s & 0xfu)) & 1u;
#endif
}

/// Ordered list of basis states: either the full 2^N space or a union of
/// fixed-popcount (fixed S^z) sectors.
class SectorBasis {
 public:
  static std::shared_ptr<const SectorBasis> full(int n_sites);
  static std::shared_ptr<const SectorBasis> sectors(int n_sites, const std::set<int>& popcounts);

  int n_sites() const { return n_sites_; }
  std::size_t size() const { return size_; }
  bool is_full() const { return full_; }
  /// Popcounts spanned; {0..N} for the full basis.
  const std::set<int>& popcounts() const { return popcounts_; }

  Bits state(std::size_t position) const { return full_ ? Bits(position) : states_[position]; }
  std::optional<std::size_t> index_of(Bits bits) const;

  /// Unchecked lookup; returns npos when absent.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(Bits bits) const {
    if (full_) return bits < size_ ? std::size_t(bits) : npos;
    if (!table_.empty()) {
      if (bits >= table_.size()) return npos;
      auto v = table_[bits];
      return v < 0 ? npos : std::size_t(v);
    }
    return search(bits);
  }

  bool same_as(const SectorBasis& other) const;

 private:
  SectorBasis() = default;
  std::size_t search(Bits bits) const;

  int n_sites_ = 0;
  bool full_ = true;
  std::size_t size_ = 0;
  std::set<int> popcounts_;
  std::vector<Bits> states_;
  std::vector<std::int32_t> table_;  // dense bits -> position, only when 2^N is small
};

using BasisPtr = std::shared_ptr<const SectorBasis>;

/// Build a basis from the given set of popcounts (build_sector_basis).
BasisPtr build_sector_basis(int n_sites, const std::set<int>& popcounts);

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(BasisPtr basis);
  StateVector(BasisPtr basis, std::vector<cplx> amplitudes);

  /// Normalized computational basis state.
  static StateVector basis_state(BasisPtr basis, Bits bits);
  /// Deterministic pseudo-random normalized state.
  static StateVector random(BasisPtr basis, std::uint64_t seed);

  const BasisPtr& basis() const { return basis_; }
  int n_sites() const { return basis_ ? basis_->n_sites() : 0; }
  std::size_t dim() const { return amps_.size(); }

  std::span<cplx> amplitudes() { return amps_; }
  std::span<const cplx> amplitudes() const { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }

  double norm() const;
  /// Rescales to unit norm and returns the norm before rescaling.
  double normalize();

  /// Same state expressed in another basis that contains its support.
  StateVector embedded_in(BasisPtr target) const;

 private:
  BasisPtr basis_;
  std::vector<cplx> amps_;
};

cplx inner(std::span<const cplx> a, std::span<const cplx> b);  // <a|b>
cplx inner(const StateVector& a, const StateVector& b);
double distance(const StateVector& a, const StateVector& b);

/// sigma^axis_site |psi>. Throws when a nonzero amplitude is mapped outside the basis.
StateVector apply_pauli(Axis axis, int site, const StateVector& psi);

/// <psi|sigma^axis_site|psi>; only components inside the basis contribute,
/// which is exact for any vector supported on the basis.
double expectation(Axis axis, int site, const StateVector& psi);

// Bit helpers shared by the operator kernels.
inline Bits site_bit(int site) { return Bits{1} << (site - 1); }
void check_site(int site, int n_sites);

}  // namespace mq
