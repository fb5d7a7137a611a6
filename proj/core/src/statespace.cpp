#include "mq/statespace.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

namespace mq {

namespace {

constexpr int kDenseTableMaxSites = 24;

double unit_uniform(std::mt19937_64& rng) {
  // portable: 53 random mantissa bits mapped to [-1, 1)
  return double(rng() >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace

char axis_name(Axis a) {
  switch (a) {
    case Axis::x: return 'x';
    case Axis::y: return 'y';
    case Axis::z: return 'z';
  }
  return '?';
}

Axis parse_axis(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::x;
    case 'y': case 'Y': return Axis::y;
    case 'z': case 'Z': return Axis::z;
    default: throw ConfigError(std::string("unknown Pauli axis '") + c + "'");
  }
}

void check_site(int site, int n_sites) {
  if (site < 1 || site > n_sites)
    throw ConfigError("site " + std::to_string(site) + " out of range 1.." + std::to_string(n_sites));
}

// ---------------------------------------------------------------------------

std::shared_ptr<const SectorBasis> SectorBasis::full(int n_sites) {
  if (n_sites < 1 || n_sites > 30) throw ConfigError("full basis needs 1 <= N <= 30");
  auto b = std::shared_ptr<SectorBasis>(new SectorBasis());
  b->n_sites_ = n_sites;
  b->full_ = true;
  b->size_ = std::size_t{1} << n_sites;
  for (int k = 0; k <= n_sites; ++k) b->popcounts_.insert(k);
  return b;
}

std::shared_ptr<const SectorBasis> SectorBasis::sectors(int n_sites, const std::set<int>& popcounts) {
  if (popcounts.empty()) throw ConfigError("sector basis needs at least one popcount");
  if (n_sites < 1 || n_sites > kMaxSites) throw ConfigError("sector basis needs 1 <= N <= 40");
  for (int k : popcounts)
    if (k < 0 || k > n_sites) throw ConfigError("popcount " + std::to_string(k) + " outside 0..N");

  auto b = std::shared_ptr<SectorBasis>(new SectorBasis());
  b->n_sites_ = n_sites;
  b->full_ = false;
  b->popcounts_ = popcounts;

  // Enumerate each sector with Gosper's hack, then merge into one sorted list.
  for (int k : popcounts) {
    if (k == 0) {
      b->states_.push_back(0);
      continue;
    }
    const Bits limit = Bits{1} << n_sites;
    for (Bits v = (Bits{1} << k) - 1; v < limit;) {
      b->states_.push_back(v);
      const Bits c = v & (~v + 1);
      const Bits r = v + c;
      v = (((r ^ v) >> 2) / c) | r;
    }
  }
  std::sort(b->states_.begin(), b->states_.end());
  b->size_ = b->states_.size();

  if (n_sites <= kDenseTableMaxSites) {
    b->table_.assign(std::size_t{1} << n_sites, -1);
    for (std::size_t p = 0; p < b->states_.size(); ++p) b->table_[b->states_[p]] = std::int32_t(p);
  }
  return b;
}

std::size_t SectorBasis::search(Bits bits) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), bits);
  if (it == states_.end() || *it != bits) return npos;
  return std::size_t(it - states_.begin());
}

std::optional<std::size_t> SectorBasis::index_of(Bits bits) const {
  auto p = find(bits);
  if (p == npos) return std::nullopt;
  return p;
}

bool SectorBasis::same_as(const SectorBasis& other) const {
  return this == &other ||
         (n_sites_ == other.n_sites_ && full_ == other.full_ && popcounts_ == other.popcounts_);
}

BasisPtr build_sector_basis(int n_sites, const std::set<int>& popcounts) {
  return SectorBasis::sectors(n_sites, popcounts);
}

// ---------------------------------------------------------------------------

StateVector::StateVector(BasisPtr basis) : basis_(std::move(basis)), amps_(basis_->size()) {}

StateVector::StateVector(BasisPtr basis, std::vector<cplx> amplitudes)
    : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
  if (amps_.size() != basis_->size())
    throw ConfigError("amplitude count " + std::to_string(amps_.size()) + " does not match basis size " +
                      std::to_string(basis_->size()));
}

StateVector StateVector::basis_state(BasisPtr basis, Bits bits) {
  StateVector v(basis);
  auto p = basis->find(bits);
  if (p == SectorBasis::npos) throw ConfigError("basis state not contained in basis");
  v.amps_[p] = 1.0;
  return v;
}

StateVector StateVector::random(BasisPtr basis, std::uint64_t seed) {
  StateVector v(basis);
  std::mt19937_64 rng(seed);
  for (auto& a : v.amps_) {
    const double re = unit_uniform(rng);
    const double im = unit_uniform(rng);
    a = {re, im};
  }
  v.normalize();
  return v;
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

double StateVector::normalize() {
  const double n = norm();
  if (n == 0.0) throw NumericalError("cannot normalize the zero vector");
  const double inv = 1.0 / n;
  for (auto& a : amps_) a *= inv;
  return n;
}

StateVector StateVector::embedded_in(BasisPtr target) const {
  if (target->n_sites() != n_sites()) throw ConfigError("basis site counts differ");
  StateVector out(target);
  for (std::size_t p = 0; p < amps_.size(); ++p) {
    if (amps_[p] == cplx{}) continue;
    auto q = target->find(basis_->state(p));
    if (q == SectorBasis::npos) throw ConfigError("target basis does not contain the state's support");
    out.amps_[q] = amps_[p];
  }
  return out;
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

cplx inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("inner product of vectors with different dimension");
  return inner(a.amplitudes(), b.amplitudes());
}

double distance(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw ConfigError("distance between vectors with different dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

namespace {

// Matrix element of sigma^axis on one basis state: sigma|s> = phase |s ^ flip>.
inline cplx pauli_phase(Axis axis, Bits s, Bits bit) {
  const bool down = (s & bit) != 0;
  switch (axis) {
    case Axis::x: return 1.0;
    case Axis::y: return down ? cplx{0.0, -1.0} : cplx{0.0, 1.0};
    case Axis::z: return down ? -1.0 : 1.0;
  }
  return 0.0;
}

}  // namespace

StateVector apply_pauli(Axis axis, int site, const StateVector& psi) {
  check_site(site, psi.n_sites());
  const auto& basis = *psi.basis();
  const Bits bit = site_bit(site);
  const Bits flip = axis == Axis::z ? 0 : bit;
  StateVector out(psi.basis());
  for (std::size_t p = 0; p < psi.dim(); ++p) {
    const cplx a = psi[p];
    if (a == cplx{}) continue;
    const Bits s = basis.state(p);
    const auto q = basis.find(s ^ flip);
    if (q == SectorBasis::npos)
      throw ConfigError("apply_pauli: target basis does not contain the image sector");
    out[q] += pauli_phase(axis, s, bit) * a;
  }
  return out;
}

double expectation(Axis axis, int site, const StateVector& psi) {
  check_site(site, psi.n_sites());
  const auto& basis = *psi.basis();
  const Bits bit = site_bit(site);
  const Bits flip = axis == Axis::z ? 0 : bit;
  cplx acc{};
  for (std::size_t p = 0; p < psi.dim(); ++p) {
    const cplx a = psi[p];
    if (a == cplx{}) continue;
    const Bits s = basis.state(p);
    const auto q = basis.find(s ^ flip);
    if (q == SectorBasis::npos) continue;
    acc += std::conj(psi[q]) * pauli_phase(axis, s, bit) * a;
  }
  return acc.real();
}

}  // namespace mq
