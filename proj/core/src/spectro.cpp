#include "mq/spectro.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mq {

double Window::value(double t, double t_total) const {
  switch (kind) {
    case WindowKind::none: return 1.0;
    case WindowKind::hann:
      if (t_total <= 0.0) return 1.0;
      return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / t_total));
    case WindowKind::gaussian: {
      const double s = sigma_t > 0.0 ? sigma_t : t_total / 8.0;
      const double u = (t - 0.5 * t_total) / s;
      return std::exp(-0.5 * u * u);
    }
  }
  return 1.0;
}

std::vector<double> uniform_energy_grid(double e_min, double e_max, double step) {
  if (!(step > 0.0) || !(e_max > e_min)) throw ConfigError("energy grid needs e_max > e_min and step > 0");
  const auto n = std::size_t(std::floor((e_max - e_min) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = e_min + double(i) * step;
  return g;
}

namespace {

// (1/2pi) sum_k trapz_k w_k f_k e^{-i E t_k} dt
cplx windowed_transform(std::span<const double> weighted, double dt, double energy) {
  const cplx z = std::exp(cplx{0.0, -energy * dt});
  cplx phase = 1.0;
  cplx acc{};
  const std::size_t n = weighted.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double c = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
    acc += c * weighted[k] * phase;
    phase *= z;
    if ((k & 255) == 255) phase /= std::abs(phase);
  }
  return acc * dt / (2.0 * std::numbers::pi);
}

std::vector<double> window_samples(const Window& w, std::size_t n, double dt) {
  const double total = double(n - 1) * dt;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = w.value(double(k) * dt, total);
  return out;
}

}  // namespace

SpectrumReport fourier_transform(const TimeSeries& series, std::span<const double> e_grid, const Window& window) {
  const std::size_t n = series.values.size();
  if (n < 16) throw ConfigError("fourier_transform needs at least 16 samples");
  if (e_grid.empty()) throw ConfigError("fourier_transform needs a non-empty energy grid");
  const double dt = series.grid.dt;
  const double nyquist = std::numbers::pi / dt;
  for (std::size_t i = 0; i < e_grid.size(); ++i) {
    if (std::abs(e_grid[i]) > nyquist * (1.0 + 1e-12))
      throw ConfigError("energy grid exceeds the alias limit pi/dt");
    if (i > 0 && !(e_grid[i] > e_grid[i - 1])) throw ConfigError("energy grid must be strictly increasing");
  }

  const auto w = window_samples(window, n, dt);
  std::vector<double> weighted(n);
  for (std::size_t k = 0; k < n; ++k) weighted[k] = w[k] * series.values[k];

  SpectrumReport r;
  r.energies.assign(e_grid.begin(), e_grid.end());
  r.amplitude.resize(e_grid.size());
  for (std::size_t i = 0; i < e_grid.size(); ++i) r.amplitude[i] = std::abs(windowed_transform(weighted, dt, e_grid[i]));
  r.window = window;
  r.dt = dt;
  r.t_effective = double(n - 1) * dt;
  r.resolution = 2.0 * std::numbers::pi / r.t_effective;
  return r;
}

std::vector<SpectralPeak> extract_peaks(const SpectrumReport& report, double prominence_floor) {
  const auto& a = report.amplitude;
  const auto& e = report.energies;
  const std::size_t n = a.size();
  if (n == 0) throw ConfigError("extract_peaks on an empty report");
  const double top = *std::max_element(a.begin(), a.end());
  const double floor = prominence_floor * top;
  if (top <= 0.0) return {};

  const std::size_t count = std::size_t(std::llround(report.t_effective / report.dt)) + 1;
  const auto kernel_w = window_samples(report.window, count, report.dt);

  std::vector<SpectralPeak> peaks;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || a[i] > a[i - 1];
    const bool right_ok = i + 1 == n || a[i] >= a[i + 1];
    if (!left_ok || !right_ok || a[i] < floor || n < 2) continue;

    double energy = e[i];
    if (i > 0 && i + 1 < n) {
      const double denom = a[i - 1] - 2.0 * a[i] + a[i + 1];
      if (denom < 0.0) {
        const double delta = 0.5 * (a[i - 1] - a[i + 1]) / denom;
        const double step = delta < 0 ? e[i] - e[i - 1] : e[i + 1] - e[i];
        energy = e[i] + std::clamp(delta, -0.5, 0.5) * step;
      }
    }

    const std::size_t lo = i >= 3 ? i - 3 : 0;
    const std::size_t hi = std::min(n - 1, i + 3);
    double area = 0.0, kernel_area = 0.0;
    double prev_k = std::abs(windowed_transform(kernel_w, report.dt, e[lo] - energy));
    for (std::size_t j = lo; j < hi; ++j) {
      const double next_k = std::abs(windowed_transform(kernel_w, report.dt, e[j + 1] - energy));
      const double de = e[j + 1] - e[j];
      area += 0.5 * de * (a[j] + a[j + 1]);
      kernel_area += 0.5 * de * (prev_k + next_k);
      prev_k = next_k;
    }
    if (hi == lo) {
      area = a[i];
      kernel_area = std::abs(windowed_transform(kernel_w, report.dt, 0.0));
    }
    peaks.push_back({energy, kernel_area > 0.0 ? area / kernel_area : 0.0, a[i]});
  }
  return peaks;
}

MatchReport match_gaps(const std::vector<SpectralPeak>& peaks, const SpectrumTable& spectrum, int site,
                       double resolution, double weight_floor) {
  const auto tw = transition_weights(spectrum, site, Axis::x);
  std::vector<std::size_t> eligible;
  for (std::size_t n = 1; n < tw.gaps.size(); ++n)
    if (tw.weights[n] >= weight_floor) eligible.push_back(n);

  MatchReport r;
  r.resolution = resolution;
  r.weight_floor = weight_floor;
  std::vector<bool> hit(tw.gaps.size(), false);
  for (std::size_t p = 0; p < peaks.size(); ++p) {
    PeakMatch m;
    m.peak = p;
    double best = INFINITY;
    for (auto n : eligible) {
      const double err = peaks[p].energy - tw.gaps[n];
      if (std::abs(err) < best) {
        best = std::abs(err);
        m.level = n;
        m.gap = tw.gaps[n];
        m.error = err;
      }
    }
    m.matched = m.level.has_value() && best <= resolution;
    if (m.matched) {
      ++r.matched_count;
      // every eligible level inside the resolution cell is accounted for by this peak
      for (auto n : eligible)
        if (std::abs(peaks[p].energy - tw.gaps[n]) <= resolution) hit[n] = true;
    } else {
      ++r.orphan_count;
    }
    r.matches.push_back(m);
  }
  for (auto n : eligible)
    if (!hit[n]) r.unmatched_levels.push_back(n);
  return r;
}

}  // namespace mq
