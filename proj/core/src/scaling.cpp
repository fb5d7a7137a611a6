#include "mq/scaling.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mq {

void CollapseFamily::validate() const {
  if (members.empty()) throw ConfigError("collapse family has no members");
  for (const auto& m : members) {
    if (m.n_sites < 1) throw ConfigError("collapse member with invalid N");
    if (m.series.values.size() < 2) throw ConfigError("collapse member with fewer than two samples");
  }
}

Curve rescale_time(const TimeSeries& series, int n_sites) {
  if (n_sites < 1) throw ConfigError("rescale_time needs N >= 1");
  Curve c;
  c.x.resize(series.values.size());
  c.y = series.values;
  for (std::size_t k = 0; k < c.x.size(); ++k) c.x[k] = series.grid.time(k) / double(n_sites);
  return c;
}

Curve unrescale_time(const Curve& curve, int n_sites) {
  Curve c = curve;
  for (auto& x : c.x) x *= double(n_sites);
  return c;
}

TimeSeries low_pass(const TimeSeries& series, int n_sites, double window_x) {
  const std::size_t n = series.values.size();
  const double samples = window_x * double(n_sites) / series.grid.dt;
  if (!(samples >= 3.0 - 1e-9)) throw ConfigError("low_pass window shorter than three samples");
  if (samples > double(n)) throw ConfigError("low_pass window exceeds the series length");
  const auto half = std::size_t(std::floor(samples / 2.0));

  // prefix sums keep this O(n)
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + series.values[k];
  TimeSeries out = series;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n - 1, k + half);
    out.values[k] = (prefix[hi + 1] - prefix[lo]) / double(hi - lo + 1);
  }
  return out;
}

namespace {

double interpolate(const Curve& c, double x) {
  if (x <= c.x.front()) return c.y.front();
  if (x >= c.x.back()) return c.y.back();
  const auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
  const std::size_t i = std::size_t(it - c.x.begin());
  const double x0 = c.x[i - 1], x1 = c.x[i];
  const double f = (x - x0) / (x1 - x0);
  return c.y[i - 1] + f * (c.y[i] - c.y[i - 1]);
}

}  // namespace

CollapseMetric collapse_distance(const CollapseFamily& family, double x_min, double x_max,
                                 std::optional<double> filter_window) {
  family.validate();
  if (!(x_max > x_min)) throw ConfigError("collapse window must have x_max > x_min");

  std::vector<Curve> curves;
  double lo = x_min, hi = x_max, step = std::numeric_limits<double>::infinity();
  for (const auto& m : family.members) {
    const TimeSeries s = filter_window ? low_pass(m.series, m.n_sites, *filter_window) : m.series;
    curves.push_back(rescale_time(s, m.n_sites));
    lo = std::max(lo, curves.back().x.front());
    hi = std::min(hi, curves.back().x.back());
    step = std::min(step, m.series.grid.dt / double(m.n_sites));
  }
  if (!(hi > lo)) throw ConfigError("collapse window has no overlap with the member curves");

  CollapseMetric metric;
  metric.x_min = lo;
  metric.x_max = hi;
  metric.filter_window = filter_window;
  if (curves.size() < 2) return metric;

  const auto points = std::size_t(std::ceil((hi - lo) / step)) + 1;
  const double h = (hi - lo) / double(points - 1);
  std::vector<std::vector<double>> sampled(curves.size(), std::vector<double>(points));
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t k = 0; k < points; ++k) sampled[c][k] = interpolate(curves[c], lo + double(k) * h);

  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < curves.size(); ++a) {
    for (std::size_t b = a + 1; b < curves.size(); ++b) {
      double integral = 0.0;
      for (std::size_t k = 0; k + 1 < points; ++k) {
        const double d0 = sampled[a][k] - sampled[b][k];
        const double d1 = sampled[a][k + 1] - sampled[b][k + 1];
        integral += 0.5 * h * (d0 * d0 + d1 * d1);
      }
      total += std::sqrt(integral / (hi - lo));
      ++pairs;
    }
  }
  metric.value = total / double(pairs);
  return metric;
}

double tune_tfic_lambda(int n_sites, double ratio, double nu, bool paramagnetic) {
  if (n_sites < 3) throw ConfigError("TFIC tuning needs N >= 3");
  if (!(ratio >= 0.0)) throw ConfigError("scaling ratio must be >= 0");
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  const double distance = std::pow(ratio / double(n_sites), 1.0 / nu);
  const double lambda = paramagnetic ? kLambdaCritical + distance : kLambdaCritical - distance;
  if (lambda < 0.0) throw ConfigError("ratio unreachable: tuned lambda would be negative");
  return lambda;
}

namespace {

// Table sorted by ln xi with strictly monotone xi(J'); returns (ln xi, 1/J') nodes.
std::vector<std::pair<double, double>> xi_nodes(const XiTable& table) {
  if (table.entries.empty()) throw ConfigError("empty screening-length table");
  std::vector<std::pair<double, double>> nodes;
  for (const auto& [jp, xi] : table.entries) {
    if (!(jp > 0.0) || !(xi > 0.0)) throw ConfigError("screening-length table needs J' > 0 and xi > 0");
    nodes.emplace_back(std::log(xi), 1.0 / jp);
  }
  std::sort(nodes.begin(), nodes.end());
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i].first > nodes[i - 1].first) || !(nodes[i].second > nodes[i - 1].second))
      throw ConfigError("screening-length table is not strictly monotone in J'");
  return nodes;
}

}  // namespace

double tune_kondo_j_prime(int n_sites, double ratio, const XiTable& table) {
  if (!(ratio > 0.0)) throw ConfigError("Kondo tuning needs ratio > 0");
  const auto nodes = xi_nodes(table);
  const double target = std::log(double(n_sites) / ratio);
  if (nodes.size() == 1) {
    if (std::abs(target - nodes[0].first) < 1e-12) return 1.0 / nodes[0].second;
    throw ConfigError("ratio unreachable: single-entry screening-length table");
  }
  if (target < nodes.front().first - 1e-12 || target > nodes.back().first + 1e-12)
    throw ConfigError("ratio unreachable: xi_K = " + std::to_string(double(n_sites) / ratio) +
                      " lies outside the measured table");
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (target <= nodes[i].first + 1e-12) {
      const auto& [l0, u0] = nodes[i - 1];
      const auto& [l1, u1] = nodes[i];
      const double f = (target - l0) / (l1 - l0);
      return 1.0 / (u0 + f * (u1 - u0));
    }
  }
  return 1.0 / nodes.back().second;
}

double interpolate_xi(const XiTable& table, double j_prime) {
  const auto nodes = xi_nodes(table);
  const double u = 1.0 / j_prime;
  if (nodes.size() == 1 || u <= nodes.front().second) return std::exp(nodes.front().first);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (u <= nodes[i].second) {
      const auto& [l0, u0] = nodes[i - 1];
      const auto& [l1, u1] = nodes[i];
      const double f = (u - u0) / (u1 - u0);
      return std::exp(l0 + f * (l1 - l0));
    }
  }
  return std::exp(nodes.back().first);
}

NuScan estimate_nu(const FamilyRunner& runner, std::span<const double> nu_grid, double x_min, double x_max,
                   std::optional<double> filter_window) {
  if (nu_grid.size() < 2) throw ConfigError("nu scan needs at least two grid points");
  NuScan scan;
  scan.nu_grid.assign(nu_grid.begin(), nu_grid.end());
  for (double nu : nu_grid) {
    const CollapseFamily family = runner(nu);
    if (family.members.size() < 3) throw ConfigError("nu estimation needs at least three system sizes");
    scan.metrics.push_back(collapse_distance(family, x_min, x_max, filter_window).value);
  }
  const auto best = std::min_element(scan.metrics.begin(), scan.metrics.end());
  scan.nu_best = scan.nu_grid[std::size_t(best - scan.metrics.begin())];

  const double hi = *std::max_element(scan.metrics.begin(), scan.metrics.end());
  if (hi - *best <= 1e-12 * std::max(1.0, hi)) {
    scan.warnings.push_back("collapse metric is flat over the nu grid");
    return scan;
  }
  // unimodal: non-increasing up to the minimum, non-decreasing after it
  const auto ib = std::size_t(best - scan.metrics.begin());
  bool unimodal = true;
  for (std::size_t i = 1; i <= ib; ++i) unimodal &= scan.metrics[i] <= scan.metrics[i - 1];
  for (std::size_t i = ib + 1; i < scan.metrics.size(); ++i) unimodal &= scan.metrics[i] >= scan.metrics[i - 1];
  if (!unimodal) scan.warnings.push_back("collapse metric is not unimodal in nu");
  return scan;
}

ScalingWindow kondo_scaling_window(const CollapseFamily& family, std::optional<double> filter_window, double x_end) {
  family.validate();
  ScalingWindow w;
  double reach = x_end;
  for (const auto& m : family.members) reach = std::min(reach, m.series.grid.t_max / double(m.n_sites));
  if (!(reach > w.x_break)) throw ConfigError("Kondo scaling window: series too short to extend past t = N/2");
  w.pre_metric = collapse_distance(family, 0.0, w.x_break, filter_window).value;
  w.post_metric = collapse_distance(family, w.x_break, reach, filter_window).value;
  w.ratio = w.pre_metric > 0.0 ? w.post_metric / w.pre_metric
                               : (w.post_metric > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return w;
}

}  // namespace mq
