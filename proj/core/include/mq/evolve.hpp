#pragma once

// Real-time evolution of a collapsed state and the observable time series.

#include "mq/eigensolve.hpp"
#include "mq/quench.hpp"

#include <string>

namespace mq {

struct TimeGrid {
  double t_max = 0.0;
  double dt = 0.05;

  std::size_t count() const;
  double time(std::size_t k) const { return double(k) * dt; }
  void validate() const;
  bool operator==(const TimeGrid&) const = default;
};

struct SeriesMeta {
  std::string model;  // model description (JSON text)
  int site = 0;       // measured site
  int n_sites = 0;
  Axis observable = Axis::x;
};

struct TimeSeries {
  TimeGrid grid;
  std::vector<double> values;
  SeriesMeta meta;
  double max_norm_drift = 0.0;  // largest pre-renormalization drift seen
};

/// krylov: adaptive Lanczos substeps on the collapsed state.
/// spectral: dense eigenbasis (small systems).
/// quadrature: Gauss rule of the return amplitude (see quench_return_series).
enum class PropagationMethod { krylov, spectral, quadrature };

struct PropagatorConfig {
  PropagationMethod method = PropagationMethod::krylov;
  int krylov_dim = 30;
  int max_krylov_dim = 120;  // growth limit when even tiny steps miss step_tol
  double step_tol = 1e-10;
  double quadrature_tol = 1e-10;    // sup-norm change of m(t) accepted as converged
  int max_quadrature_steps = 20000;
  void validate() const;
};

struct StepReport {
  double norm_drift = 0.0;  // cumulative |norm - 1| before renormalization
  int substeps = 0;
  int operator_applies = 0;
};

/// exp(-i H delta_t) psi by adaptive Lanczos substeps. delta_t may be negative.
StateVector krylov_step(const LinearOperator& op, const StateVector& psi, double delta_t,
                        const PropagatorConfig& config = {}, StepReport* report = nullptr);

/// sum_n e^{-i E_n t} |E_n><E_n|psi0>; requires a complete spectrum.
StateVector spectral_evolve(const SpectrumTable& spectrum, const StateVector& psi0, double t);

/// m(t_k) = <psi(t_k)|sigma^observable_site|psi(t_k)> for the collapsed state.
/// With PropagationMethod::spectral the spectrum argument must be complete.
TimeSeries magnetization_series(const LinearOperator& op, const CollapseResult& collapsed, int site,
                                const TimeGrid& grid, const PropagatorConfig& config = {},
                                Axis observable = Axis::x, const SpectrumTable* spectrum = nullptr);

struct SpectralSeries {
  TimeSeries series;
  std::vector<double> gaps;     // E_n - E_0
  std::vector<double> weights;  // |<E_n|sigma^x_site|E_0>|^2
};

inline constexpr double kParityPreconditionTol = 1e-8;

struct TransitionWeights {
  std::vector<double> gaps;     // E_n - E_0
  std::vector<double> weights;  // |<E_n|sigma^axis_site|E_0>|^2
  double ground_expectation = 0.0;  // <E_0|sigma^axis_site|E_0>
};

TransitionWeights transition_weights(const SpectrumTable& spectrum, int site, Axis axis = Axis::x);

/// Closed form sum_n cos((E_n - E_0) t) |<E_n|sigma^x|E_0>|^2, valid only when
/// <E_0|sigma^x_site|E_0> vanishes (parity ground state); refuses otherwise.
SpectralSeries spectral_magnetization(const SpectrumTable& spectrum, int site, const TimeGrid& grid);

struct QuadratureReport {
  int lanczos_steps = 0;
  double last_change = 0.0;  // sup-norm change between the last two recursion lengths
  bool exact = false;        // recursion terminated on an invariant subspace
};

/// m(t) of the measured spin after a projective measurement of sigma on the
/// eigenstate |E0>, when a symmetry forces <E0|sigma|E0> = 0: then
///   m(t) = +-Re <phi| e^{-i(H - E0)t} |phi>,  phi = sigma|E0>,
/// evaluated from the Gauss rule of a Lanczos recursion started at phi. No
/// Krylov vectors are stored; the recursion grows until m(t) on the grid
/// changes by less than quadrature_tol. `op` acts on the basis reached by
/// the measurement (the union sector when |E0> lives in one S^z sector).
/// Requires either [H, S^z] = 0 with |E0> in a single popcount sector, or
/// [H, P] = 0 with |E0> a parity eigenstate; x or y axis only.
TimeSeries quench_return_series(const LinearOperator& op, const EigenPair& ground, const MeasurementSpec& spec,
                                const TimeGrid& grid, const PropagatorConfig& config = {},
                                QuadratureReport* report = nullptr);

/// (1/T) int_0^T |a(t) - b(t)| dt by the trapezoidal rule on the shared grid.
double magnetization_difference(const TimeSeries& a, const TimeSeries& b, double t_window);

/// First `count` samples of a series (same dt).
TimeSeries truncated(const TimeSeries& s, std::size_t count);

}  // namespace mq
