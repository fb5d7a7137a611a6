#include "mq/kondocloud.hpp"

#include "mq/errors.hpp"
#include "mq/parallel.hpp"
#include "mq/quench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mq {

namespace {

TimeGrid window_grid(double t_window, double dt) {
  return {std::ceil(t_window / dt - 1e-9) * dt, dt};
}

struct Branch {
  LinearOperator op_union;
  EigenPair ground;  // in the S^z = 0 sector
};

Branch prepare_branch(int n, double j_prime, const CloudOptions& opt, const BasisPtr& sector,
                      const BasisPtr& union_basis) {
  const KondoChainSpec spec{n, j_prime, opt.j2_over_j1};
  return {build_kondo_chain(spec, union_basis), ground_state(build_kondo_chain(spec, sector), opt.lanczos)};
}

TimeSeries run_site(const Branch& b, const BasisPtr& union_basis, int site, const TimeGrid& grid,
                    const CloudOptions& opt) {
  MeasurementSpec m;
  m.site = site;
  if (opt.propagator.method == PropagationMethod::quadrature)
    return quench_return_series(b.op_union, b.ground, m, grid, opt.propagator);
  const auto collapsed = collapse(b.ground.vector, m, union_basis);
  return magnetization_series(b.op_union, collapsed, site, grid, opt.propagator);
}

}  // namespace

std::vector<CloudProfile> cloud_profiles(int n, std::span<const double> j_primes, const CloudOptions& opt) {
  if (n < 6 || n % 2 != 0) throw ConfigError("cloud profiles need an even chain with N >= 6");
  if (j_primes.empty()) throw ConfigError("cloud profiles need at least one J'");
  if (opt.margin < 0 || n - opt.margin < 2) throw ConfigError("cloud margin leaves no sites to measure");
  for (double jp : j_primes)
    if (!(jp > 0.0) || jp > 1.0) throw ConfigError("cloud profiles need 0 < J' <= 1");

  const auto sector = build_sector_basis(n, {n / 2});
  const auto union_basis = build_sector_basis(n, {n / 2 - 1, n / 2, n / 2 + 1});

  std::vector<int> sites;
  for (int j = 2; j <= n - opt.margin; ++j) sites.push_back(j);

  const Branch reference = prepare_branch(n, 1.0, opt, sector, union_basis);
  double t_longest = 0.0;
  for (double jp : j_primes) t_longest = std::max(t_longest, 1.0 / jp);
  const TimeGrid ref_grid = window_grid(t_longest, opt.dt);

  std::vector<TimeSeries> ref_series(sites.size());
  std::vector<std::string> ref_errors(sites.size());
  parallel_for(sites.size(), opt.jobs, [&](std::size_t i) {
    try {
      ref_series[i] = run_site(reference, union_basis, sites[i], ref_grid, opt);
    } catch (const std::exception& e) {
      ref_errors[i] = e.what();
    }
  });

  std::vector<CloudProfile> out;
  for (double jp : j_primes) {
    CloudProfile p;
    p.j_prime = jp;
    p.n_sites = n;
    p.t_window = 1.0 / jp;
    p.j_values = sites;
    p.dm.assign(sites.size(), 0.0);
    const TimeGrid grid = window_grid(p.t_window, opt.dt);
    const std::size_t count = grid.count();

    // J' = 1 is the reference Hamiltonian itself.
    const bool clean = jp == 1.0;
    std::optional<Branch> branch;
    if (!clean) branch = prepare_branch(n, jp, opt, sector, union_basis);

    std::vector<std::string> errors(sites.size());
    parallel_for(sites.size(), opt.jobs, [&](std::size_t i) {
      if (!ref_errors[i].empty()) {
        errors[i] = ref_errors[i];
        return;
      }
      try {
        const TimeSeries ref = truncated(ref_series[i], count);
        const TimeSeries imp = clean ? ref : run_site(*branch, union_basis, sites[i], grid, opt);
        p.dm[i] = magnetization_difference(imp, ref, p.t_window);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (!errors[i].empty()) p.failures.push_back("site " + std::to_string(sites[i]) + ": " + errors[i]);
    out.push_back(std::move(p));
  }
  return out;
}

CloudProfile cloud_profile(int n, double j_prime, const CloudOptions& options) {
  const double jp[] = {j_prime};
  return std::move(cloud_profiles(n, jp, options).front());
}

LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ConfigError("line fit needs at least two (x, y) pairs");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("line fit with degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

namespace {

// Tail [j_lo, last]; nullopt when it holds a non-positive value or too few points.
std::optional<ScreeningFit> tail_fit(const CloudProfile& p, int j_lo) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < p.j_values.size(); ++i) {
    if (p.j_values[i] < j_lo) continue;
    if (!(p.dm[i] > 0.0)) return std::nullopt;
    xs.push_back(double(p.j_values[i]));
    ys.push_back(std::log(p.dm[i]));
  }
  if (xs.size() < 4) return std::nullopt;
  const auto line = least_squares_line(xs, ys);
  ScreeningFit f;
  f.j_lo = int(xs.front());
  f.j_hi = int(xs.back());
  f.slope = line.slope;
  f.intercept = line.intercept;
  f.r_squared = line.r_squared;
  for (std::size_t i = 0; i < xs.size(); ++i) f.residuals.push_back(ys[i] - (line.intercept + line.slope * xs[i]));
  f.xi = line.slope < 0.0 ? -1.0 / line.slope : 0.0;
  return f;
}

}  // namespace

int auto_tail(const CloudProfile& p) {
  if (p.j_values.size() < 6) throw ConfigError("auto_tail needs a profile with at least 6 sites");
  const int j_hi = p.j_values.back();
  int best_j = -1;
  double best_r2 = -1.0;
  for (int j_lo = std::max(3, p.j_values.front()); j_lo <= j_hi - 3; ++j_lo) {
    const auto f = tail_fit(p, j_lo);
    if (!f || !(f->slope < 0.0)) continue;
    if (f->r_squared >= 0.95) return j_lo;
    if (f->r_squared > best_r2) {
      best_r2 = f->r_squared;
      best_j = j_lo;
    }
  }
  if (best_j < 0) throw NumericalError("auto_tail: no decaying, strictly positive tail of at least 4 sites");
  return best_j;
}

ScreeningFit fit_screening_length(const CloudProfile& profile, std::optional<int> tail_start) {
  const int j_lo = tail_start ? *tail_start : auto_tail(profile);
  std::size_t points = 0;
  for (std::size_t i = 0; i < profile.j_values.size(); ++i) {
    if (profile.j_values[i] < j_lo) continue;
    if (!(profile.dm[i] > 0.0))
      throw NumericalError("fit_screening_length: zero or negative value at site " +
                           std::to_string(profile.j_values[i]));
    ++points;
  }
  if (points < 4) throw ConfigError("fit_screening_length needs at least 4 tail points");
  auto f = tail_fit(profile, j_lo);
  if (!f) throw NumericalError("fit_screening_length: tail fit failed");
  if (!(f->slope < 0.0)) {
    std::ostringstream msg;
    msg << "fit_screening_length: non-negative slope " << f->slope << " (no decay away from the impurity)";
    throw NumericalError(msg.str());
  }
  return *f;
}

KondoLawFit fit_kondo_law(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw ConfigError("Kondo law fit needs at least 3 (J', xi) pairs");
  std::vector<double> x, y;
  for (const auto& [jp, xi] : pairs) {
    if (!(jp > 0.0) || !(xi > 0.0)) throw ConfigError("Kondo law fit needs J' > 0 and xi > 0");
    x.push_back(1.0 / jp);
    y.push_back(std::log(xi));
  }
  auto sorted = x;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("Kondo law fit needs distinct J' values");
  const auto line = least_squares_line(x, y);
  return {line.slope, line.intercept, line.r_squared};
}

}  // namespace mq
