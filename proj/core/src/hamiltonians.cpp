#include "mq/hamiltonians.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>

namespace mq {

TermList::TermList(int n_sites) : n_sites_(n_sites) {
  if (n_sites < 1 || n_sites > kMaxSites) throw ConfigError("term list needs 1 <= N <= 40");
}

void TermList::add(double coefficient, std::vector<PauliFactor> factors) {
  if (!std::isfinite(coefficient)) throw ConfigError("non-finite term coefficient");
  std::sort(factors.begin(), factors.end(),
            [](const PauliFactor& a, const PauliFactor& b) { return a.site < b.site; });
  for (std::size_t i = 0; i < factors.size(); ++i) {
    check_site(factors[i].site, n_sites_);
    // Distinct sites keep every string Hermitian.
    if (i > 0 && factors[i].site == factors[i - 1].site)
      throw ConfigError("term acts twice on site " + std::to_string(factors[i].site));
  }
  terms_.push_back({coefficient, std::move(factors)});
}

void TermList::add_heisenberg(double coupling, int a, int b) {
  for (Axis ax : {Axis::x, Axis::y, Axis::z}) add(coupling, {{ax, a}, {ax, b}});
}

double TermList::coupling(Axis axis, int a, int b) const {
  if (a > b) std::swap(a, b);
  double total = 0.0;
  for (const auto& t : terms_) {
    if (t.factors.size() == 2 && t.factors[0] == PauliFactor{axis, a} && t.factors[1] == PauliFactor{axis, b})
      total += t.coefficient;
  }
  return total;
}

// ---------------------------------------------------------------------------

int n_sites_of(const HamiltonianSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CustomSpec>)
          return s.terms.n_sites();
        else
          return s.n_sites;
      },
      spec);
}

void validate(const HamiltonianSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LongRangeIsingSpec>) {
          if (s.n_sites < 2) throw ConfigError("long-range Ising needs N >= 2");
          if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha)) throw ConfigError("long-range Ising needs alpha >= 0");
          if (!std::isfinite(s.b_over_j)) throw ConfigError("non-finite field");
        } else if constexpr (std::is_same_v<T, TficSpec>) {
          if (s.n_sites < 3) throw ConfigError("periodic TFIC needs N >= 3");
          if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda)) throw ConfigError("TFIC needs finite lambda >= 0");
        } else if constexpr (std::is_same_v<T, KondoChainSpec>) {
          if (s.n_sites < 4 || s.n_sites % 2 != 0) throw ConfigError("Kondo chain needs even N >= 4");
          if (!(s.j_prime > 0.0) || s.j_prime > 1.0) throw ConfigError("Kondo chain needs 0 < J' <= 1");
          if (!std::isfinite(s.j2_over_j1)) throw ConfigError("non-finite J2/J1");
        }
        if (n_sites_of(s) > kMaxSites) throw ConfigError("too many sites");
      },
      spec);
}

TermList long_range_ising_terms(const LongRangeIsingSpec& spec) {
  validate(spec);
  const int n = spec.n_sites;
  const double pair_factor = spec.pairs == PairConvention::all ? 2.0 : 1.0;
  TermList t(n);
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      t.add(pair_factor / std::pow(double(j - i), spec.alpha), {{Axis::x, i}, {Axis::x, j}});
  for (int i = 1; i <= n; ++i) t.add(spec.b_over_j, {{Axis::z, i}});
  return t;
}

TermList tfic_terms(const TficSpec& spec) {
  validate(spec);
  const int n = spec.n_sites;
  TermList t(n);
  for (int i = 1; i <= n; ++i) t.add(1.0, {{Axis::x, i}, {Axis::x, i % n + 1}});
  for (int i = 1; i <= n; ++i) t.add(spec.lambda, {{Axis::z, i}});
  return t;
}

TermList kondo_chain_terms(const KondoChainSpec& spec) {
  validate(spec);
  const int n = spec.n_sites;
  const double j1 = 1.0;
  const double j2 = spec.j2_over_j1;
  TermList t(n);
  t.add_heisenberg(spec.j_prime * j1, 1, 2);
  t.add_heisenberg(spec.j_prime * j2, 1, 3);
  for (int i = 2; i <= n - 1; ++i) t.add_heisenberg(j1, i, i + 1);
  for (int i = 2; i <= n - 2; ++i) t.add_heisenberg(j2, i, i + 2);
  return t;
}

TermList terms_of(const HamiltonianSpec& spec) {
  return std::visit(
      [](const auto& s) -> TermList {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LongRangeIsingSpec>)
          return long_range_ising_terms(s);
        else if constexpr (std::is_same_v<T, TficSpec>)
          return tfic_terms(s);
        else if constexpr (std::is_same_v<T, KondoChainSpec>)
          return kondo_chain_terms(s);
        else
          return s.terms;
      },
      spec);
}

// ---------------------------------------------------------------------------

namespace {

inline double parity_sign(Bits s) { return odd_parity(s) ? -1.0 : 1.0; }

}  // namespace

LinearOperator::LinearOperator(TermList terms, BasisPtr basis) : terms_(std::move(terms)), basis_(std::move(basis)) {
  if (!basis_) basis_ = SectorBasis::full(terms_.n_sites());
  if (basis_->n_sites() != terms_.n_sites()) throw ConfigError("operator and basis disagree on N");

  std::map<Bits, std::map<Bits, cplx>> by_flip;  // flip -> sign mask -> coefficient
  for (const auto& term : terms_.terms()) {
    Bits flip = 0, sign = 0;
    int n_y = 0;
    for (const auto& f : term.factors) {
      const Bits b = site_bit(f.site);
      if (f.axis != Axis::z) flip |= b;
      if (f.axis != Axis::x) sign |= b;
      if (f.axis == Axis::y) ++n_y;
    }
    static const cplx i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    by_flip[flip][sign] += term.coefficient * i_pow[n_y % 4];
    norm_bound_ += std::abs(term.coefficient);
  }

  diagonal_.assign(basis_->size(), 0.0);
  for (auto& [flip, parts] : by_flip) {
    if (flip == 0) {
      for (std::size_t p = 0; p < basis_->size(); ++p) {
        const Bits s = basis_->state(p);
        double d = 0.0;
        for (const auto& [mask, c] : parts) d += c.real() * parity_sign(s & mask);
        diagonal_[p] = d;
      }
      continue;
    }
    Group g{flip, {}};
    for (const auto& [mask, c] : parts) {
      if (c == cplx{}) continue;
      if (c.imag() != 0.0) real_ = false;
      g.parts.push_back({c, mask});
    }
    if (g.parts.empty()) continue;
    g.sign_free = g.parts.size() == 1 && g.parts.front().sign_mask == 0;
    groups_.push_back(std::move(g));
  }
  if (!basis_->is_full()) check_closure();
}

void LinearOperator::check_closure() const {
  for (std::size_t p = 0; p < basis_->size(); ++p) {
    const Bits s = basis_->state(p);
    for (const auto& g : groups_) {
      cplx f{};
      for (const auto& part : g.parts) f += part.coefficient * parity_sign(s & part.sign_mask);
      if (std::abs(f) == 0.0) continue;
      if (basis_->find(s ^ g.flip) == SectorBasis::npos)
        throw ConfigError("operator does not preserve the chosen sector basis");
    }
  }
}

template <class Scalar>
void LinearOperator::apply_impl(std::span<const cplx> in, std::span<cplx> out) const {
  const auto& basis = *basis_;
  const std::size_t dim = basis.size();
  const bool full = basis.is_full();
  for (std::size_t p = 0; p < dim; ++p) {
    const Bits s = basis.state(p);
    cplx acc = diagonal_[p] * in[p];
    for (const auto& g : groups_) {
      const Bits src = s ^ g.flip;
      // H[p, src] = sum_parts c * (-1)^{popcount(src & mask)}
      Scalar f{};
      if (g.sign_free) {
        if constexpr (std::is_same_v<Scalar, double>)
          f = g.parts.front().coefficient.real();
        else
          f = g.parts.front().coefficient;
      } else {
        for (const auto& part : g.parts) {
          if constexpr (std::is_same_v<Scalar, double>)
            f += part.coefficient.real() * parity_sign(src & part.sign_mask);
          else
            f += part.coefficient * parity_sign(src & part.sign_mask);
        }
        if (f == Scalar{}) continue;
      }
      const auto q = full ? std::size_t(src) : basis.find(src);
      if (q == SectorBasis::npos) continue;  // excluded by check_closure (Hermitian terms)
      acc += f * in[q];
    }
    out[p] = acc;
  }
}

void LinearOperator::apply(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != dimension() || out.size() != dimension())
    throw ConfigError("operator applied to a vector of the wrong dimension");
  if (real_)
    apply_impl<double>(in, out);
  else
    apply_impl<cplx>(in, out);
}

StateVector LinearOperator::apply(const StateVector& psi) const {
  if (!psi.basis()->same_as(*basis_)) throw ConfigError("state and operator live on different bases");
  StateVector out(basis_);
  apply(psi.amplitudes(), out.amplitudes());
  return out;
}

double LinearOperator::expectation(const StateVector& psi) const {
  return inner(psi, apply(psi)).real();
}

bool LinearOperator::conserves_parity() const {
  return std::all_of(groups_.begin(), groups_.end(), [](const Group& g) { return !odd_parity(g.flip); });
}

bool LinearOperator::conserves_magnetization() const {
  for (std::size_t p = 0; p < basis_->size(); ++p) {
    const Bits s = basis_->state(p);
    for (const auto& g : groups_) {
      if (std::popcount(s ^ g.flip) == std::popcount(s)) continue;
      cplx f{};
      for (const auto& part : g.parts) f += part.coefficient * parity_sign((s ^ g.flip) & part.sign_mask);
      if (f != cplx{}) return false;
    }
  }
  return true;
}

Eigen::SparseMatrix<cplx, Eigen::RowMajor> LinearOperator::assemble() const {
  const auto& basis = *basis_;
  const std::size_t dim = basis.size();
  std::vector<Eigen::Triplet<cplx, std::ptrdiff_t>> triplets;
  triplets.reserve(dim * (groups_.size() + 1));
  for (std::size_t p = 0; p < dim; ++p) {
    const Bits s = basis.state(p);
    if (diagonal_[p] != 0.0) triplets.emplace_back(p, p, diagonal_[p]);
    for (const auto& g : groups_) {
      const Bits src = s ^ g.flip;
      cplx f{};
      for (const auto& part : g.parts) f += part.coefficient * parity_sign(src & part.sign_mask);
      if (f == cplx{}) continue;
      const auto q = basis.find(src);
      if (q == SectorBasis::npos) continue;
      triplets.emplace_back(p, q, f);
    }
  }
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> m{static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)};
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

// ---------------------------------------------------------------------------

LinearOperator build_long_range_ising(const LongRangeIsingSpec& spec, BasisPtr basis) {
  return LinearOperator(long_range_ising_terms(spec), std::move(basis));
}

LinearOperator build_tfic(const TficSpec& spec, BasisPtr basis) {
  return LinearOperator(tfic_terms(spec), std::move(basis));
}

LinearOperator build_kondo_chain(const KondoChainSpec& spec, BasisPtr basis) {
  return LinearOperator(kondo_chain_terms(spec), std::move(basis));
}

LinearOperator build_operator(const HamiltonianSpec& spec, BasisPtr basis) {
  validate(spec);
  return LinearOperator(terms_of(spec), std::move(basis));
}

LinearOperator parity_operator(int n_sites, BasisPtr basis) {
  TermList t(n_sites);
  std::vector<PauliFactor> zs;
  for (int i = 1; i <= n_sites; ++i) zs.push_back({Axis::z, i});
  t.add(1.0, std::move(zs));
  return LinearOperator(std::move(t), std::move(basis));
}

LinearOperator total_sz_operator(int n_sites, BasisPtr basis) {
  TermList t(n_sites);
  for (int i = 1; i <= n_sites; ++i) t.add(1.0, {{Axis::z, i}});
  return LinearOperator(std::move(t), std::move(basis));
}

}  // namespace mq
