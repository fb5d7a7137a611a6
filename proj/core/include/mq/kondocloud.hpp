#pragma once

// Screening-cloud detection on the J1-J2 Kondo chain: the averaged
// magnetization difference between impurity and clean chains as a function
// of the measured site, its exponential tail and the xi_K(J') law.

#include "mq/evolve.hpp"
#include "mq/hamiltonians.hpp"

#include <optional>
#include <string>
#include <utility>

namespace mq {

struct CloudOptions {
  int margin = 2;      // sites excluded at the far end
  double dt = 0.005;   // sampling step for the window integral
  double j2_over_j1 = kCriticalJ2OverJ1;
  PropagatorConfig propagator{.method = PropagationMethod::quadrature};
  LanczosOptions lanczos;
  int jobs = 1;
};

struct CloudProfile {
  std::vector<int> j_values;
  std::vector<double> dm;
  double j_prime = 1.0;
  int n_sites = 0;
  double t_window = 1.0;  // T = 1/J'
  std::vector<std::string> failures;  // per-site errors, profile partial when non-empty
  bool partial() const { return !failures.empty(); }
};

/// Profiles for several J' sharing the clean-chain (J' = 1) reference runs.
std::vector<CloudProfile> cloud_profiles(int n_sites, std::span<const double> j_primes, const CloudOptions& options = {});
CloudProfile cloud_profile(int n_sites, double j_prime, const CloudOptions& options = {});

struct ScreeningFit {
  double xi = 0.0;
  int j_lo = 0;
  int j_hi = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;  // in ln(dm)
};

/// Least squares of ln dm_j against j over [tail_start, last site]; xi = -1/slope.
/// tail_start == nullopt selects auto_tail.
ScreeningFit fit_screening_length(const CloudProfile& profile, std::optional<int> tail_start = std::nullopt);

/// Smallest j_lo >= 3 whose decaying tail fit reaches r^2 >= 0.95, else the decaying
/// tail with the best r^2.
int auto_tail(const CloudProfile& profile);

struct KondoLawFit {
  double a_coefficient = 0.0;  // slope of ln xi against 1/J'
  double intercept = 0.0;
  double r_squared = 0.0;
};

KondoLawFit fit_kondo_law(std::span<const std::pair<double, double>> pairs);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LineFit least_squares_line(std::span<const double> x, std::span<const double> y);

}  // namespace mq
