#pragma once

// Independent dense constructions for small systems: Kronecker products of
// 2x2 Pauli matrices, with site i acting on bit i-1 (site N is the leftmost
// Kronecker factor).

#include "mq/hamiltonians.hpp"

#include <Eigen/Dense>

#include <random>

namespace mq::oracle {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat pauli(Axis a) {
  Mat m = Mat::Zero(2, 2);
  const cplx i{0.0, 1.0};
  switch (a) {
    case Axis::x: m << 0, 1, 1, 0; break;
    case Axis::y: m << 0, -i, i, 0; break;
    case Axis::z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

/// prod of the given single-site operators; identity elsewhere.
inline Mat site_product(int n, const std::vector<PauliFactor>& factors) {
  Mat out = Mat::Identity(1, 1);
  for (int site = n; site >= 1; --site) {
    Mat f = Mat::Identity(2, 2);
    for (const auto& pf : factors)
      if (pf.site == site) f = pauli(pf.axis) * f;
    out = kron(out, f);
  }
  return out;
}

inline Mat single(int n, Axis a, int site) { return site_product(n, {{a, site}}); }

inline Mat dense(const TermList& t) {
  const Eigen::Index dim = Eigen::Index(1) << t.n_sites();
  Mat h = Mat::Zero(dim, dim);
  for (const auto& term : t.terms()) h += term.coefficient * site_product(t.n_sites(), term.factors);
  return h;
}

inline Mat parity(int n) {
  std::vector<PauliFactor> zs;
  for (int i = 1; i <= n; ++i) zs.push_back({Axis::z, i});
  return site_product(n, zs);
}

/// Columns: the full-space basis vectors of the sector states.
inline Mat isometry(const SectorBasis& b) {
  Mat v = Mat::Zero(Eigen::Index(1) << b.n_sites(), Eigen::Index(b.size()));
  for (std::size_t p = 0; p < b.size(); ++p) v(Eigen::Index(b.state(p)), Eigen::Index(p)) = 1.0;
  return v;
}

inline Vec to_full(const StateVector& psi) {
  return isometry(*psi.basis()) * Eigen::Map<const Vec>(psi.amplitudes().data(), Eigen::Index(psi.dim()));
}

inline Vec as_vec(const StateVector& psi) {
  return Eigen::Map<const Vec>(psi.amplitudes().data(), Eigen::Index(psi.dim()));
}

inline StateVector from_vec(const BasisPtr& basis, const Vec& v) {
  return StateVector(basis, std::vector<cplx>(v.data(), v.data() + v.size()));
}

inline Vec random_vec(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(dim);
  for (auto& x : v) x = cplx(g(rng), g(rng));
  return v.normalized();
}

/// Dense operator on the basis from the TermList: V^dag H V.
inline Mat dense_on(const TermList& t, const SectorBasis& b) {
  const Mat v = isometry(b);
  return v.adjoint() * dense(t) * v;
}

inline Mat projector_up(int n, Axis a, int site) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  return 0.5 * (Mat::Identity(dim, dim) + single(n, a, site));
}

}  // namespace mq::oracle
