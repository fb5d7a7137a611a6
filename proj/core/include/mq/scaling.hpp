#pragma once

// Finite-size data collapse of post-quench magnetization curves m(t/N, N/xi).

#include "mq/evolve.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace mq {

inline constexpr double kLambdaCritical = 1.0;

struct CollapseMember {
  TimeSeries series;
  int n_sites = 0;
  double control = 0.0;  // lambda (TFIC) or J' (Kondo)
  double xi = 0.0;       // length used for tuning, 0 when not applicable
};

struct CollapseFamily {
  std::vector<CollapseMember> members;
  double target_ratio = 0.0;  // N / xi held fixed
  void validate() const;
};

/// Abscissa-scaled curve; x = t / N.
struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

Curve rescale_time(const TimeSeries& series, int n_sites);
/// Inverse of rescale_time: x -> x * N.
Curve unrescale_time(const Curve& curve, int n_sites);

/// Centred moving average over `window_x` (t/N units), truncated at the ends.
TimeSeries low_pass(const TimeSeries& series, int n_sites, double window_x);

struct CollapseMetric {
  double value = 0.0;  // mean over member pairs of the RMS distance on the window
  double x_min = 0.0;
  double x_max = 0.0;
  std::optional<double> filter_window;
};

CollapseMetric collapse_distance(const CollapseFamily& family, double x_min, double x_max,
                                 std::optional<double> filter_window = std::nullopt);

/// lambda with N |lambda - 1|^nu = ratio, on the ordered side unless `paramagnetic`.
double tune_tfic_lambda(int n_sites, double ratio, double nu, bool paramagnetic = false);

/// Measured screening lengths (J', xi_K).
struct XiTable {
  std::vector<std::pair<double, double>> entries;
};

/// J' with xi_K(J') = N / ratio, by piecewise-linear interpolation of 1/J'
/// against ln xi_K over the table. Throws when the target is outside the table.
double tune_kondo_j_prime(int n_sites, double ratio, const XiTable& table);

/// xi_K at J' from the same interpolation (used to verify tuning).
double interpolate_xi(const XiTable& table, double j_prime);

struct NuScan {
  double nu_best = 0.0;
  std::vector<double> nu_grid;
  std::vector<double> metrics;
  std::vector<std::string> warnings;
};

using FamilyRunner = std::function<CollapseFamily(double nu)>;

NuScan estimate_nu(const FamilyRunner& runner, std::span<const double> nu_grid, double x_min, double x_max,
                   std::optional<double> filter_window);

struct ScalingWindow {
  double x_break = 0.5;
  double pre_metric = 0.0;   // on [0, x_break]
  double post_metric = 0.0;  // on [x_break, x_end]
  double ratio = 0.0;        // post / pre (infinite when pre is 0 and post is not)
};

/// Collapse quality inside and beyond the scaling window J1 t <~ N/2.
ScalingWindow kondo_scaling_window(const CollapseFamily& family, std::optional<double> filter_window = std::nullopt,
                                   double x_end = 1.0);

}  // namespace mq
