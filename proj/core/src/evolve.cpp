#include "mq/evolve.hpp"

#include "mq/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mq {

std::size_t TimeGrid::count() const {
  validate();
  return std::size_t(std::floor(t_max / dt + 1e-9)) + 1;
}

void TimeGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time grid needs dt > 0");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw ConfigError("time grid needs t_max >= 0");
}

void PropagatorConfig::validate() const {
  if (krylov_dim < 2) throw ConfigError("krylov_dim must be >= 2");
  if (max_krylov_dim < krylov_dim) throw ConfigError("max_krylov_dim must be >= krylov_dim");
  if (!(step_tol > 0.0)) throw ConfigError("step_tol must be > 0");
  if (!(quadrature_tol > 0.0)) throw ConfigError("quadrature_tol must be > 0");
  if (max_quadrature_steps < 2) throw ConfigError("max_quadrature_steps must be >= 2");
}

namespace {

using Vec = std::vector<cplx>;

// Lanczos basis V_m and tridiagonal T_m with exp(-i H tau) psi ~ |psi| V exp(-i T tau) e_1.
class KrylovSubspace {
 public:
  KrylovSubspace(const LinearOperator& op, std::span<const cplx> psi, int m) {
    const std::size_t dim = psi.size();
    scale_ = std::sqrt(std::max(0.0, inner(psi, psi).real()));
    if (scale_ == 0.0) throw NumericalError("Krylov propagation of the zero vector");
    m = int(std::min<std::size_t>(std::size_t(m), dim));

    Vec v(psi.begin(), psi.end());
    for (auto& a : v) a /= scale_;
    V_.push_back(std::move(v));
    std::vector<double> alpha, beta;
    Vec w(dim);
    const double breakdown_tol = 1e-13 * std::max(1.0, op.norm_bound());
    for (int j = 0; j < m; ++j) {
      op.apply(V_[std::size_t(j)], w);
      ++applies_;
      const double a = inner(V_[std::size_t(j)], w).real();
      alpha.push_back(a);
      for (std::size_t i = 0; i < dim; ++i) w[i] -= a * V_[std::size_t(j)][i];
      if (j > 0)
        for (std::size_t i = 0; i < dim; ++i) w[i] -= beta.back() * V_[std::size_t(j - 1)][i];
      // full reorthogonalization
      for (const auto& u : V_) {
        const cplx c = inner(u, w);
        for (std::size_t i = 0; i < dim; ++i) w[i] -= c * u[i];
      }
      double b = 0.0;
      for (const auto& x : w) b += std::norm(x);
      b = std::sqrt(b);
      if (b <= breakdown_tol) {
        breakdown_ = true;
        beta_m_ = 0.0;
        break;
      }
      if (j + 1 == m) {
        beta_m_ = b;
        break;
      }
      beta.push_back(b);
      Vec next(dim);
      for (std::size_t i = 0; i < dim; ++i) next[i] = w[i] / b;
      V_.push_back(std::move(next));
    }

    const auto n = Eigen::Index(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      T(i, i) = alpha[std::size_t(i)];
      if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = beta[std::size_t(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    lambda_ = es.eigenvalues();
    Q_ = es.eigenvectors();
  }

  int size() const { return int(V_.size()); }
  int applies() const { return applies_; }
  const std::vector<Vec>& basis() const { return V_; }

  // exp(-i T tau) e_1
  Eigen::VectorXcd coefficients(double tau) const {
    const auto n = lambda_.size();
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const cplx phase = std::exp(cplx{0.0, -lambda_(k) * tau}) * Q_(0, k);
      for (Eigen::Index r = 0; r < n; ++r) c(r) += Q_(r, k) * phase;
    }
    return c;
  }

  // a-posteriori estimate beta_m |e_m^T exp(-i T tau) e_1|
  double error(double tau) const {
    if (breakdown_) return 0.0;
    const auto n = lambda_.size();
    cplx s{};
    for (Eigen::Index k = 0; k < n; ++k) s += Q_(n - 1, k) * Q_(0, k) * std::exp(cplx{0.0, -lambda_(k) * tau});
    return scale_ * beta_m_ * std::abs(s);
  }

  // Largest |tau| <= |cap| (same sign) whose estimate stays below tol on a fine scan; 0 if none.
  double safe_step(double cap, double tol) const {
    const double sign = cap < 0 ? -1.0 : 1.0;
    const double a = std::abs(cap);
    if (a == 0.0 || breakdown_) return cap;
    constexpr int kScan = 64;
    int first_bad = kScan + 1;
    for (int i = 1; i <= kScan; ++i) {
      if (error(sign * a * i / kScan) > tol) {
        first_bad = i;
        break;
      }
    }
    if (first_bad > kScan) return cap;
    if (first_bad > 1) return sign * a * (first_bad - 1) / kScan;
    double tau = a / kScan;
    while (error(sign * tau) > tol) {
      tau *= 0.5;
      if (tau < 1e-14 * std::max(1.0, a)) return 0.0;
    }
    return sign * tau;
  }

  void combine(const Eigen::VectorXcd& c, std::span<cplx> out) const {
    std::fill(out.begin(), out.end(), cplx{});
    for (std::size_t j = 0; j < V_.size(); ++j) {
      const cplx cj = c(Eigen::Index(j)) * scale_;
      const auto& v = V_[j];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += cj * v[i];
    }
  }

 private:
  std::vector<Vec> V_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd Q_;
  double scale_ = 1.0;
  double beta_m_ = 0.0;
  bool breakdown_ = false;
  int applies_ = 0;
};

// Builds a subspace whose admissible step is nonzero, growing the dimension if needed.
struct ChosenStep {
  std::unique_ptr<KrylovSubspace> subspace;
  double tau = 0.0;
};

ChosenStep choose_step(const LinearOperator& op, std::span<const cplx> psi, double cap,
                       const PropagatorConfig& config, double t_now) {
  for (int m = config.krylov_dim;; m *= 2) {
    m = std::min(m, config.max_krylov_dim);
    auto sub = std::make_unique<KrylovSubspace>(op, psi, m);
    const double tau = sub->safe_step(cap, config.step_tol);
    if (tau != 0.0) return {std::move(sub), tau};
    if (m >= config.max_krylov_dim) {
      std::ostringstream msg;
      msg << "Krylov step underflow at t = " << t_now << ": tolerance " << config.step_tol
          << " unreachable with krylov_dim " << m;
      throw NumericalError(msg.str());
    }
  }
}

// sigma^axis_site restricted to the basis (components leaving it are dropped).
void apply_pauli_in_basis(Axis axis, int site, const SectorBasis& basis, std::span<const cplx> in,
                          std::span<cplx> out) {
  const Bits bit = site_bit(site);
  const Bits flip = axis == Axis::z ? 0 : bit;
  std::fill(out.begin(), out.end(), cplx{});
  for (std::size_t p = 0; p < in.size(); ++p) {
    const Bits s = basis.state(p);
    const auto q = basis.find(s ^ flip);
    if (q == SectorBasis::npos) continue;
    const bool down = (s & bit) != 0;
    cplx phase = 1.0;
    if (axis == Axis::y) phase = down ? cplx{0.0, -1.0} : cplx{0.0, 1.0};
    if (axis == Axis::z) phase = down ? -1.0 : 1.0;
    out[q] += phase * in[p];
  }
}

}  // namespace

StateVector krylov_step(const LinearOperator& op, const StateVector& psi, double delta_t,
                        const PropagatorConfig& config, StepReport* report) {
  config.validate();
  if (!psi.basis()->same_as(*op.basis())) throw ConfigError("state and operator live on different bases");
  StateVector cur = psi;
  StepReport local;
  double done = 0.0;
  Vec buf(psi.dim());
  while (std::abs(delta_t - done) > 0.0) {
    const double remaining = delta_t - done;
    auto step = choose_step(op, cur.amplitudes(), remaining, config, done);
    local.operator_applies += step.subspace->applies();
    step.subspace->combine(step.subspace->coefficients(step.tau), cur.amplitudes());
    const double n = cur.normalize();
    local.norm_drift += std::abs(n - 1.0);
    ++local.substeps;
    done = (step.tau == remaining) ? delta_t : done + step.tau;
  }
  if (report) *report = local;
  return cur;
}

StateVector spectral_evolve(const SpectrumTable& spectrum, const StateVector& psi0, double t) {
  if (!spectrum.complete()) throw ConfigError("spectral_evolve needs a complete spectrum");
  if (!psi0.basis()->same_as(*spectrum.basis())) throw ConfigError("state and spectrum live on different bases");
  const auto& V = spectrum.vectors();
  const Eigen::Map<const Eigen::VectorXcd> x(psi0.amplitudes().data(), Eigen::Index(psi0.dim()));
  Eigen::VectorXcd c = V.adjoint() * x;
  for (Eigen::Index n = 0; n < c.size(); ++n) c(n) *= std::exp(cplx{0.0, -spectrum.energy(std::size_t(n)) * t});
  const Eigen::VectorXcd y = V * c;
  return StateVector(psi0.basis(), std::vector<cplx>(y.data(), y.data() + y.size()));
}

TimeSeries magnetization_series(const LinearOperator& op, const CollapseResult& collapsed, int site,
                                const TimeGrid& grid, const PropagatorConfig& config, Axis observable,
                                const SpectrumTable* spectrum) {
  config.validate();
  if (config.method == PropagationMethod::quadrature)
    throw ConfigError("quadrature propagation needs the pre-measurement eigenstate (quench_return_series)");
  const std::size_t count = grid.count();
  const StateVector& psi0 = collapsed.state;
  check_site(site, psi0.n_sites());
  if (!psi0.basis()->same_as(*op.basis())) throw ConfigError("collapsed state and operator live on different bases");

  TimeSeries out;
  out.grid = grid;
  out.values.resize(count);
  out.meta.site = site;
  out.meta.n_sites = psi0.n_sites();
  out.meta.observable = observable;

  if (config.method == PropagationMethod::spectral) {
    if (!spectrum) throw ConfigError("spectral propagation needs a complete spectrum table");
    for (std::size_t k = 0; k < count; ++k) {
      auto psi = spectral_evolve(*spectrum, psi0, grid.time(k));
      const double n = psi.normalize();
      out.max_norm_drift = std::max(out.max_norm_drift, std::abs(n - 1.0));
      out.values[k] = expectation(observable, site, psi);
    }
    return out;
  }

  const auto& basis = *psi0.basis();
  StateVector psi = psi0;
  out.values[0] = expectation(observable, site, psi);
  double t_now = 0.0;
  std::size_t next = 1;
  const double t_end = grid.time(count - 1);
  Vec xv(psi.dim());

  while (next < count) {
    ChosenStep step;
    try {
      step = choose_step(op, psi.amplitudes(), t_end - t_now, config, t_now);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << e.what() << " (sample t_k = " << grid.time(next) << ")";
      throw NumericalError(msg.str());
    }
    const auto& sub = *step.subspace;
    const double reach = t_now + step.tau;

    std::size_t last = next;
    while (last < count && grid.time(last) <= reach + 1e-12) ++last;

    if (last == next) {
      // Internal substep without a sample.
      sub.combine(sub.coefficients(step.tau), psi.amplitudes());
      const double n = psi.normalize();
      out.max_norm_drift = std::max(out.max_norm_drift, std::abs(n - 1.0));
      t_now = reach;
      continue;
    }

    // Observable projected on the subspace: M = V^dagger sigma V.
    const auto& V = sub.basis();
    const auto m = Eigen::Index(V.size());
    Eigen::MatrixXcd M(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      apply_pauli_in_basis(observable, site, basis, V[std::size_t(j)], xv);
      for (Eigen::Index i = 0; i <= j; ++i) {
        M(i, j) = inner(V[std::size_t(i)], xv);
        M(j, i) = std::conj(M(i, j));
      }
    }
    for (std::size_t k = next; k < last; ++k) {
      const Eigen::VectorXcd c = sub.coefficients(grid.time(k) - t_now);
      out.values[k] = (c.adjoint() * M * c)(0).real() / c.squaredNorm();
    }

    const double t_last = grid.time(last - 1);
    sub.combine(sub.coefficients(t_last - t_now), psi.amplitudes());
    const double n = psi.normalize();
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(n - 1.0));
    t_now = t_last;
    next = last;
  }
  return out;
}

namespace {

void require_symmetric_quench(const LinearOperator& op, const StateVector& ground, const MeasurementSpec& spec) {
  if (spec.axis == Axis::z) throw ConfigError("return-amplitude series needs an x or y measurement");
  const double g = expectation(spec.axis, spec.site, ground);
  if (std::abs(g) > kParityPreconditionTol) {
    std::ostringstream msg;
    msg << "return-amplitude series needs <E0|sigma|E0> = 0, got " << g;
    throw ConfigError(msg.str());
  }
  const auto& gb = *ground.basis();
  if (!gb.is_full() && gb.popcounts().size() == 1 && op.conserves_magnetization()) return;
  if (op.conserves_parity()) {
    double even = 0.0, odd = 0.0;
    for (std::size_t p = 0; p < ground.dim(); ++p)
      (odd_parity(gb.state(p)) ? odd : even) += std::norm(ground[p]);
    if (std::min(even, odd) <= kParityPreconditionTol) return;
  }
  throw ConfigError("return-amplitude series needs a conserved parity or S^z that the measured spin flips");
}

}  // namespace

TimeSeries quench_return_series(const LinearOperator& op, const EigenPair& ground, const MeasurementSpec& spec,
                                const TimeGrid& grid, const PropagatorConfig& config, QuadratureReport* report) {
  config.validate();
  const std::size_t count = grid.count();
  const StateVector& g0 = ground.vector;
  check_site(spec.site, g0.n_sites());
  if (std::abs(g0.norm() - 1.0) > kNormalizationSlack) throw ConfigError("return-amplitude series needs a normalized eigenstate");
  require_symmetric_quench(op, g0, spec);

  // p_up = p_down = 1/2; the down branch flips the sign of m(t).
  const Outcome outcome = select_outcome({0.5, 0.5}, spec);
  const double sign = outcome == Outcome::up ? 1.0 : -1.0;

  const StateVector g = g0.basis()->same_as(*op.basis()) ? g0 : g0.embedded_in(op.basis());
  Vec v(g.dim()), v_prev(g.dim(), cplx{}), w(g.dim());
  apply_pauli_in_basis(spec.axis, spec.site, *op.basis(), g.amplitudes(), v);
  const double phi_norm = std::sqrt(inner(v, v).real());
  if (std::abs(phi_norm - 1.0) > 1e-10) throw ConfigError("operator basis does not contain sigma|E0>");
  for (auto& a : v) a /= phi_norm;

  TimeSeries out;
  out.grid = grid;
  out.values.assign(count, 0.0);
  out.meta.site = spec.site;
  out.meta.n_sites = g.n_sites();
  out.meta.observable = spec.axis;

  const double e0 = ground.value;
  const double t_end = grid.time(count - 1);
  const double breakdown_tol = 1e-13 * std::max(1.0, op.norm_bound());
  std::vector<double> alpha, beta;
  std::vector<double> previous;
  double theta_min = e0, theta_max = e0;
  QuadratureReport local;

  auto evaluate = [&](std::vector<double>& values) {
    const auto rule = tridiagonal_gauss_rule(alpha, std::span<const double>(beta.data(), alpha.size() - 1));
    theta_min = rule.nodes.front();
    theta_max = rule.nodes.back();
    values.assign(count, 0.0);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double omega = rule.nodes[j] - e0;
      const double wj = rule.weights[j];
      // cos(omega t_k) by the angle-addition recurrence, reseeded every 64 samples
      double c = 1.0, sn = 0.0;
      const double cd = std::cos(omega * grid.dt), sd = std::sin(omega * grid.dt);
      for (std::size_t k = 0; k < count; ++k) {
        if (k % 64 == 0) {
          c = std::cos(omega * grid.time(k));
          sn = std::sin(omega * grid.time(k));
        }
        values[k] += wj * c;
        const double cn = c * cd - sn * sd;
        sn = sn * cd + c * sd;
        c = cn;
      }
    }
  };

  std::size_t target = 32;
  bool converged = false;
  while (!converged) {
    while (alpha.size() < target && !local.exact) {
      op.apply(v, w);
      const double a = inner(v, w).real();
      alpha.push_back(a);
      const double b_prev = beta.size() >= alpha.size() - 1 && alpha.size() > 1 ? beta[alpha.size() - 2] : 0.0;
      double b2 = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= a * v[i] + b_prev * v_prev[i];
        b2 += std::norm(w[i]);
      }
      const double b = std::sqrt(b2);
      if (b <= breakdown_tol) {
        local.exact = true;
        break;
      }
      beta.push_back(b);
      for (std::size_t i = 0; i < w.size(); ++i) {
        v_prev[i] = v[i];
        v[i] = w[i] / b;
      }
      if (int(alpha.size()) >= config.max_quadrature_steps) break;
    }
    std::vector<double> values;
    evaluate(values);
    if (local.exact) {
      out.values = std::move(values);
      local.last_change = 0.0;
      converged = true;
      break;
    }
    if (!previous.empty()) {
      double change = 0.0;
      for (std::size_t k = 0; k < count; ++k) change = std::max(change, std::abs(values[k] - previous[k]));
      local.last_change = change;
      if (change <= config.quadrature_tol) {
        out.values = std::move(values);
        converged = true;
        break;
      }
    }
    if (int(alpha.size()) >= config.max_quadrature_steps) {
      std::ostringstream msg;
      msg << "return-amplitude quadrature not converged after " << alpha.size() << " Lanczos steps (change "
          << local.last_change << ")";
      throw NumericalError(msg.str());
    }
    previous = std::move(values);
    // Degree needed for e^{-i omega t} on the spectral interval is about half-width * t_end.
    const double half_width = 0.5 * (theta_max - theta_min);
    const auto estimate = std::size_t(0.5 * half_width * t_end) + 24;
    target = std::max({alpha.size() + 16, alpha.size() + alpha.size() / 4, estimate});
    target = std::min<std::size_t>(target, std::size_t(config.max_quadrature_steps));
  }
  for (auto& x : out.values) x *= sign;
  local.lanczos_steps = int(alpha.size());
  if (report) *report = local;
  return out;
}

TransitionWeights transition_weights(const SpectrumTable& spectrum, int site, Axis axis) {
  if (!spectrum.complete()) throw ConfigError("transition weights need a complete spectrum");
  const auto& basis = *spectrum.basis();
  check_site(site, basis.n_sites());
  const auto& V = spectrum.vectors();
  const std::size_t dim = std::size_t(V.rows());

  const Vec e0(V.col(0).data(), V.col(0).data() + dim);
  Vec xe0(dim);
  apply_pauli_in_basis(axis, site, basis, e0, xe0);
  const Eigen::Map<const Eigen::VectorXcd> x(xe0.data(), Eigen::Index(dim));
  const Eigen::VectorXcd amp = V.adjoint() * x;

  TransitionWeights out;
  out.ground_expectation = inner(e0, xe0).real();
  const double e_ground = spectrum.energy(0);
  out.gaps.resize(spectrum.size());
  out.weights.resize(spectrum.size());
  for (std::size_t n = 0; n < spectrum.size(); ++n) {
    out.gaps[n] = spectrum.energy(n) - e_ground;
    out.weights[n] = std::norm(amp(Eigen::Index(n)));
  }
  return out;
}

SpectralSeries spectral_magnetization(const SpectrumTable& spectrum, int site, const TimeGrid& grid) {
  auto tw = transition_weights(spectrum, site, Axis::x);
  if (std::abs(tw.ground_expectation) > kParityPreconditionTol) {
    std::ostringstream msg;
    msg << "spectral_magnetization: <E0|sigma^x_" << site << "|E0> = " << tw.ground_expectation
        << " is nonzero; the ground state has no definite parity, use magnetization_series";
    throw ConfigError(msg.str());
  }
  SpectralSeries out;
  out.gaps = std::move(tw.gaps);
  out.weights = std::move(tw.weights);
  const std::size_t count = grid.count();
  out.series.grid = grid;
  out.series.values.assign(count, 0.0);
  out.series.meta.site = site;
  out.series.meta.n_sites = spectrum.basis()->n_sites();
  for (std::size_t k = 0; k < count; ++k) {
    const double t = grid.time(k);
    double s = 0.0;
    for (std::size_t n = 0; n < out.gaps.size(); ++n) s += out.weights[n] * std::cos(out.gaps[n] * t);
    out.series.values[k] = s;
  }
  return out;
}

double magnetization_difference(const TimeSeries& a, const TimeSeries& b, double t_window) {
  if (std::abs(a.grid.dt - b.grid.dt) > 1e-15 * std::max(1.0, a.grid.dt) || a.values.size() != b.values.size())
    throw ConfigError("magnetization_difference: series are sampled on different grids");
  const double dt = a.grid.dt;
  const double t_max = a.grid.time(a.values.size() - 1);
  if (t_window > t_max + 1e-12) throw ConfigError("magnetization_difference: window exceeds the series");
  if (t_window < 2.0 * dt - 1e-12) throw ConfigError("magnetization_difference: window shorter than two samples");

  auto diff = [&](std::size_t k) { return std::abs(a.values[k] - b.values[k]); };
  const std::size_t full = std::min(a.values.size() - 1, std::size_t(std::floor(t_window / dt + 1e-9)));
  double integral = 0.0;
  for (std::size_t k = 0; k < full; ++k) integral += 0.5 * dt * (diff(k) + diff(k + 1));
  const double rest = t_window - double(full) * dt;
  if (rest > 1e-12 && full + 1 < a.values.size()) {
    // partial interval, linear interpolation of the signed difference
    const double d0 = a.values[full] - b.values[full];
    const double d1 = a.values[full + 1] - b.values[full + 1];
    const double dr = d0 + (d1 - d0) * rest / dt;
    integral += 0.5 * rest * (std::abs(d0) + std::abs(dr));
  }
  return integral / t_window;
}

TimeSeries truncated(const TimeSeries& s, std::size_t count) {
  if (count == 0 || count > s.values.size()) throw ConfigError("truncated: invalid sample count");
  TimeSeries out = s;
  out.values.resize(count);
  out.grid.t_max = s.grid.time(count - 1);
  return out;
}

}  // namespace mq
