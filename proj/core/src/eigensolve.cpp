#include "mq/eigensolve.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mq {

SpectrumTable::SpectrumTable(BasisPtr basis, std::vector<double> energies, Eigen::MatrixXcd vectors, bool complete)
    : basis_(std::move(basis)), energies_(std::move(energies)), vectors_(std::move(vectors)), complete_(complete) {}

StateVector SpectrumTable::vector(std::size_t n) const {
  if (n >= size()) throw ConfigError("eigenvector index out of range");
  std::vector<cplx> amps(vectors_.rows());
  for (Eigen::Index i = 0; i < vectors_.rows(); ++i) amps[i] = vectors_(i, Eigen::Index(n));
  return StateVector(basis_, std::move(amps));
}

void fix_phase(std::span<cplx> v) {
  double best = 0.0;
  for (const auto& a : v) best = std::max(best, std::abs(a));
  if (best == 0.0) return;
  for (const auto& a : v) {
    if (std::abs(a) >= best * (1.0 - 1e-10)) {
      const cplx rot = std::conj(a) / std::abs(a);
      for (auto& b : v) b *= rot;
      return;
    }
  }
}

Projector parity_projector(BasisPtr basis, int parity) {
  if (parity != 1 && parity != -1) throw ConfigError("parity must be +1 or -1");
  const int drop = parity == 1 ? 1 : 0;  // popcount parity to remove
  return [basis, drop](std::span<cplx> v) {
    for (std::size_t p = 0; p < v.size(); ++p)
      if (int(odd_parity(basis->state(p))) == drop) v[p] = 0.0;
  };
}

namespace {

using Vec = std::vector<cplx>;

void axpy(cplx a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double vec_norm(const Vec& v) {
  double s = 0.0;
  for (const auto& a : v) s += std::norm(a);
  return std::sqrt(s);
}

struct Ritz {
  double value;
  Vec vector;
  double residual;
};

// Thick-restart Lanczos for the nev lowest eigenpairs in the orthogonal
// complement of `locked`, with classical Gram-Schmidt applied twice.
class ThickRestartLanczos {
 public:
  ThickRestartLanczos(const LinearOperator& op, const LanczosOptions& opt, const std::vector<Vec>& locked)
      : op_(op), opt_(opt), locked_(locked), dim_(op.dimension()) {}

  std::vector<Ritz> solve(int nev, std::uint64_t seed);

 private:
  // Orthogonalizes w against the locked set, the symmetry projector and V[0..count).
  // Returns the overlaps with V.
  std::vector<cplx> orthogonalize(Vec& w, std::size_t count) const {
    std::vector<cplx> h(count, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      if (opt_.projector) opt_.projector(w);
      for (const auto& l : locked_) axpy(-inner(l, w), l, w);
      for (std::size_t i = 0; i < count; ++i) {
        const cplx c = inner(V_[i], w);
        h[i] += c;
        axpy(-c, V_[i], w);
      }
    }
    return h;
  }

  Vec random_vector(std::uint64_t seed) const {
    auto sv = StateVector::random(op_.basis(), seed);
    return Vec(sv.amplitudes().begin(), sv.amplitudes().end());
  }

  // Fresh direction orthogonal to everything seen so far; false when none exists.
  bool restart_direction(Vec& v, std::uint64_t& seed) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      v = random_vector(++seed);
      orthogonalize(v, V_.size());
      const double n = vec_norm(v);
      if (n > 1e-8) {
        for (auto& a : v) a /= n;
        return true;
      }
    }
    return false;
  }

  const LinearOperator& op_;
  const LanczosOptions& opt_;
  const std::vector<Vec>& locked_;
  std::size_t dim_;
  std::vector<Vec> V_;
};

std::vector<Ritz> ThickRestartLanczos::solve(int nev, std::uint64_t seed) {
  const std::size_t available = dim_ - std::min(dim_, locked_.size());
  if (available == 0) return {};
  const std::size_t m = std::min<std::size_t>(std::max<std::size_t>(opt_.krylov_dim, 2 * nev + 10), available);
  nev = int(std::min<std::size_t>(nev, m));

  Vec v;
  if (!restart_direction(v, seed)) return {};
  V_.clear();
  V_.push_back(std::move(v));

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
  Vec w(dim_);
  Vec residual;
  double beta_last = 0.0;
  bool exhausted = false;
  long matvecs = 0;

  for (;;) {
    // Extend the basis up to m vectors.
    for (std::size_t j = V_.size() - 1;; ++j) {
      op_.apply(V_[j], w);
      ++matvecs;
      const auto h = orthogonalize(w, j + 1);
      for (std::size_t i = 0; i <= j; ++i) T(Eigen::Index(i), Eigen::Index(j)) = T(Eigen::Index(j), Eigen::Index(i)) = h[i].real();
      const double beta = vec_norm(w);
      if (j + 1 == m) {
        residual = w;
        beta_last = beta;
        break;
      }
      const double scale = std::max(1.0, std::abs(T(Eigen::Index(j), Eigen::Index(j))));
      if (beta <= 1e-12 * scale) {
        // Invariant subspace: continue with a fresh orthogonal direction, or stop.
        Vec fresh;
        if (!restart_direction(fresh, seed)) {
          exhausted = true;
          beta_last = 0.0;
          break;
        }
        V_.push_back(std::move(fresh));
        continue;
      }
      for (auto& a : w) a /= beta;
      V_.push_back(w);
    }

    const auto n = Eigen::Index(V_.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T.topLeftCorner(n, n));
    const auto& theta = es.eigenvalues();
    const auto& Y = es.eigenvectors();

    const int want = int(std::min<Eigen::Index>(nev, n));
    double max_resid = 0.0;
    for (int i = 0; i < want; ++i) max_resid = std::max(max_resid, beta_last * std::abs(Y(n - 1, i)));

    const bool converged = max_resid <= opt_.tol || exhausted || std::size_t(n) == available;
    if (converged || matvecs >= opt_.max_iter) {
      std::vector<Ritz> out;
      for (int i = 0; i < want; ++i) {
        Vec x(dim_, 0.0);
        for (Eigen::Index l = 0; l < n; ++l) axpy(Y(l, i), V_[std::size_t(l)], x);
        const double nx = vec_norm(x);
        for (auto& a : x) a /= nx;
        Vec hx(dim_);
        op_.apply(x, hx);
        axpy(-theta(i), x, hx);
        out.push_back({theta(i), std::move(x), vec_norm(hx)});
      }
      if (!converged) {
        std::ostringstream msg;
        msg << "Lanczos did not converge within " << opt_.max_iter << " operator applications; residual "
            << max_resid << " > tol " << opt_.tol;
        throw NumericalError(msg.str());
      }
      return out;
    }

    // Thick restart: keep the lowest Ritz vectors, continue from the residual.
    const Eigen::Index keep = std::min<Eigen::Index>(n - 1, std::max<Eigen::Index>(want + 1, n / 2));
    std::vector<Vec> kept;
    kept.reserve(std::size_t(keep));
    for (Eigen::Index i = 0; i < keep; ++i) {
      Vec x(dim_, 0.0);
      for (Eigen::Index l = 0; l < n; ++l) axpy(Y(l, i), V_[std::size_t(l)], x);
      kept.push_back(std::move(x));
    }
    V_ = std::move(kept);
    T.setZero();
    for (Eigen::Index i = 0; i < keep; ++i) T(i, i) = theta(i);
    for (auto& a : residual) a /= beta_last;
    orthogonalize(residual, V_.size());
    const double rn = vec_norm(residual);
    for (auto& a : residual) a /= rn;
    V_.push_back(residual);
  }
}

// Lowest eigenpair from a plain three-term Lanczos recursion; the Ritz vector
// is rebuilt by replaying the (deterministic) recursion. nullopt when the
// estimate does not converge within max_iter applications.
std::optional<Ritz> two_pass_lowest(const LinearOperator& op, const LanczosOptions& opt) {
  const std::size_t dim = op.dimension();
  auto start_sv = StateVector::random(op.basis(), opt.seed + 1);
  Vec start(start_sv.amplitudes().begin(), start_sv.amplitudes().end());
  if (opt.projector) opt.projector(start);
  const double n0 = vec_norm(start);
  if (n0 < 1e-8) return std::nullopt;
  for (auto& a : start) a /= n0;

  const double breakdown_tol = 1e-13 * std::max(1.0, op.norm_bound());
  std::vector<double> alpha, beta;
  Vec v_prev(dim, 0.0), v = start, w(dim);

  // One recursion step: w = H v - alpha v - beta_prev v_prev, returns |w|.
  auto step = [&](std::size_t j) {
    op.apply(v, w);
    if (opt.projector) opt.projector(w);
    const double a = inner(v, w).real();
    const double b_prev = j == 0 ? 0.0 : beta[j - 1];
    double b2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      w[i] -= a * v[i] + b_prev * v_prev[i];
      b2 += std::norm(w[i]);
    }
    return std::pair{a, std::sqrt(b2)};
  };

  Eigen::VectorXd y;
  std::size_t next_check = 8;
  for (std::size_t j = 0;; ++j) {
    if (long(j) >= opt.max_iter) return std::nullopt;
    const auto [a, b] = step(j);
    alpha.push_back(a);
    const bool invariant = b <= breakdown_tol || j + 1 == dim;
    if (invariant || j + 1 >= next_check) {
      const auto n = Eigen::Index(alpha.size());
      Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(alpha.data(), n);
      Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(beta.data(), n - 1);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      if (es.info() != Eigen::Success) return std::nullopt;
      y = es.eigenvectors().col(0);
      if (invariant || b * std::abs(y(n - 1)) <= 0.1 * opt.tol) break;
      next_check = j + 1 + std::max<std::size_t>(8, (j + 1) / 8);
    }
    beta.push_back(b);
    for (std::size_t i = 0; i < dim; ++i) {
      v_prev[i] = v[i];
      v[i] = w[i] / b;
    }
  }

  // Replay.
  const std::size_t steps = alpha.size();
  Vec x(dim, 0.0);
  std::fill(v_prev.begin(), v_prev.end(), cplx{});
  v = start;
  for (std::size_t j = 0; j < steps; ++j) {
    axpy(y(Eigen::Index(j)), v, x);
    if (j + 1 == steps) break;
    step(j);
    for (std::size_t i = 0; i < dim; ++i) {
      v_prev[i] = v[i];
      v[i] = w[i] / beta[j];
    }
  }
  const double nx = vec_norm(x);
  if (!(nx > 0.0)) return std::nullopt;
  for (auto& a : x) a /= nx;
  Vec hx(dim);
  op.apply(x, hx);
  const double rq = inner(x, hx).real();
  axpy(-rq, x, hx);
  return Ritz{rq, std::move(x), vec_norm(hx)};
}

EigenPair to_pair(const Ritz& r, const BasisPtr& basis) {
  Vec v = r.vector;
  fix_phase(v);
  return {r.value, StateVector(basis, std::move(v)), r.residual};
}

}  // namespace

EigenPair ground_state(const LinearOperator& op, const LanczosOptions& options) {
  if (op.dimension() == 0) throw ConfigError("ground_state on an empty space");
  if (!(options.tol > 0.0)) throw ConfigError("ground_state needs tol > 0");
  // Large spaces: plain recursion first, thick restart as the fallback.
  if (op.dimension() > std::size_t(4 * options.krylov_dim)) {
    auto fast = two_pass_lowest(op, options);
    if (fast && fast->residual <= options.tol) return to_pair(*fast, op.basis());
  }
  const std::vector<Vec> none;
  ThickRestartLanczos solver(op, options, none);
  auto ritz = solver.solve(1, options.seed);
  if (ritz.empty()) throw NumericalError("ground_state: no admissible start vector");
  if (ritz.front().residual > options.tol * 10.0) {
    std::ostringstream msg;
    msg << "ground_state residual " << ritz.front().residual << " exceeds tolerance " << options.tol;
    throw NumericalError(msg.str());
  }
  return to_pair(ritz.front(), op.basis());
}

EigenPair ground_state(const LinearOperator& op, double tol, int max_iter) {
  LanczosOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return ground_state(op, o);
}

SpectrumTable lowest_k(const LinearOperator& op, int k, const LanczosOptions& options) {
  const std::size_t dim = op.dimension();
  if (k < 1 || std::size_t(k) > dim) throw ConfigError("lowest_k needs 1 <= k <= dim");
  const double cluster_tol = std::max(options.tol, 1e-10);

  std::vector<Ritz> found;
  std::vector<Vec> locked;
  std::uint64_t seed = options.seed;

  // Repeated solves in the complement of everything found so far recover
  // degenerate partners that a single Krylov sequence cannot see.
  for (int round = 0; round < k + 8; ++round) {
    ThickRestartLanczos solver(op, options, locked);
    auto batch = solver.solve(k, seed + std::uint64_t(round) * 7919);
    if (batch.empty()) break;
    const bool first = found.empty();
    const double kth = first ? INFINITY : found[std::min<std::size_t>(found.size(), std::size_t(k)) - 1].value;
    bool added = false;
    for (auto& r : batch) {
      if (first || r.value < kth + cluster_tol) {
        locked.push_back(r.vector);
        found.push_back(std::move(r));
        added = true;
      }
    }
    std::stable_sort(found.begin(), found.end(), [](const Ritz& a, const Ritz& b) { return a.value < b.value; });
    if (!first && !added) break;
    if (found.size() >= dim) break;
  }

  std::size_t take = std::min<std::size_t>(std::size_t(k), found.size());
  while (take < found.size() && found[take].value < found[take - 1].value + cluster_tol) ++take;
  for (std::size_t i = 0; i < take; ++i)
    if (found[i].residual > options.tol * 10.0) {
      std::ostringstream msg;
      msg << "lowest_k: eigenpair " << i << " residual " << found[i].residual << " exceeds " << options.tol;
      throw NumericalError(msg.str());
    }

  std::vector<double> energies(take);
  Eigen::MatrixXcd vectors{static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(take)};
  for (std::size_t i = 0; i < take; ++i) {
    energies[i] = found[i].value;
    fix_phase(found[i].vector);
    for (std::size_t r = 0; r < dim; ++r) vectors(Eigen::Index(r), Eigen::Index(i)) = found[i].vector[r];
  }
  return SpectrumTable(op.basis(), std::move(energies), std::move(vectors), take == dim);
}

SpectrumTable lowest_k(const LinearOperator& op, int k, double tol) {
  LanczosOptions o;
  o.tol = tol;
  return lowest_k(op, k, o);
}

SpectrumTable full_spectrum(const LinearOperator& op) {
  const std::size_t dim = op.dimension();
  if (dim == 0) throw ConfigError("full_spectrum on an empty space");
  if (dim > kDenseDimensionCap)
    throw ConfigError("full_spectrum: dimension " + std::to_string(dim) + " exceeds the dense cap " +
                      std::to_string(kDenseDimensionCap));
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(op.assemble());
  std::vector<double> energies(dim);
  Eigen::MatrixXcd vectors;
  if (op.is_real()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense.real());
    if (es.info() != Eigen::Success) throw NumericalError("dense diagonalization failed");
    vectors = es.eigenvectors().cast<cplx>();
    for (std::size_t i = 0; i < dim; ++i) energies[i] = es.eigenvalues()(Eigen::Index(i));
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
    if (es.info() != Eigen::Success) throw NumericalError("dense diagonalization failed");
    vectors = es.eigenvectors();
    for (std::size_t i = 0; i < dim; ++i) energies[i] = es.eigenvalues()(Eigen::Index(i));
  }
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) fix_phase(std::span<cplx>(vectors.col(c).data(), dim));
  return SpectrumTable(op.basis(), std::move(energies), std::move(vectors), true);
}

ParityGroundState ground_state_with_parity(const LinearOperator& op, const LanczosOptions& options) {
  ParityGroundState best;
  bool have = false;
  for (int parity : {+1, -1}) {
    LanczosOptions o = options;
    o.projector = parity_projector(op.basis(), parity);
    EigenPair gs;
    try {
      gs = ground_state(op, o);
    } catch (const NumericalError&) {
      if (parity == -1 && have) continue;  // sector may be empty (N = 1 edge cases)
      throw;
    }
    if (!have || gs.value < best.pair.value - options.tol) {
      best = {std::move(gs), parity};
      have = true;
    }
  }
  return best;
}

GaussRule tridiagonal_gauss_rule(std::span<const double> alpha, std::span<const double> beta) {
  const std::size_t n = alpha.size();
  if (n == 0) throw ConfigError("Gauss rule of an empty recursion");
  if (beta.size() + 1 != n) throw ConfigError("Gauss rule needs alpha.size() - 1 off-diagonal entries");
  std::vector<double> d(alpha.begin(), alpha.end());
  std::vector<double> e(n, 0.0);  // e[i] couples i and i+1
  std::copy(beta.begin(), beta.end(), e.begin());
  std::vector<double> z(n, 0.0);  // first row of the accumulated rotations
  z[0] = 1.0;

  // Implicit QL with Wilkinson-type shifts.
  constexpr int kMaxSweeps = 60;
  for (std::size_t l = 0; l < n; ++l) {
    int sweeps = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m == l) break;
      if (++sweeps > kMaxSweeps) throw NumericalError("Gauss rule: QL iteration did not converge");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (std::size_t i = m; i-- > l;) {
        const double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        const double zf = z[i + 1];
        z[i + 1] = s * z[i] + c * zf;
        z[i] = c * z[i] - s * zf;
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    } while (m != l);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  GaussRule rule;
  for (auto k : order) {
    rule.nodes.push_back(d[k]);
    rule.weights.push_back(z[k] * z[k]);
  }
  return rule;
}

}  // namespace mq
