#pragma once

// Quench spectroscopy: finite-time Fourier transform of m(t), peak
// extraction and assignment of peaks to exact gaps E_n - E_0.

#include "mq/evolve.hpp"

#include <optional>

namespace mq {

enum class WindowKind { hann, gaussian, none };

/// Taper applied over [0, T]. The Gaussian is centred at T/2 with width sigma_t.
struct Window {
  WindowKind kind = WindowKind::hann;
  double sigma_t = 0.0;  // gaussian only; 0 picks T/8
  double value(double t, double t_total) const;
};

struct SpectrumReport {
  std::vector<double> energies;   // strictly increasing
  std::vector<double> amplitude;  // |M(E)|
  Window window;
  double t_effective = 0.0;  // integration length T
  double resolution = 0.0;   // 2 pi / T
  double dt = 0.0;           // sampling step of the source series
};

struct SpectralPeak {
  double energy = 0.0;
  double weight = 0.0;     // a unit cosine gives 1/2
  double amplitude = 0.0;  // |M| at the grid maximum
};

std::vector<double> uniform_energy_grid(double e_min, double e_max, double step);

/// M(E) = (1/2pi) int_0^T w(t) m(t) e^{-iEt} dt by the trapezoidal rule.
SpectrumReport fourier_transform(const TimeSeries& series, std::span<const double> e_grid, const Window& window = {});

/// Local maxima above floor * max(amplitude); energies refined by parabolic
/// interpolation, weights from the amplitude integrated over +-3 bins and
/// normalized by the same integral of the window kernel.
std::vector<SpectralPeak> extract_peaks(const SpectrumReport& report, double prominence_floor = 0.02);

struct PeakMatch {
  std::size_t peak = 0;
  std::optional<std::size_t> level;  // eigenstate index n of the nearest eligible gap
  double gap = 0.0;
  double error = 0.0;  // peak energy - gap
  bool matched = false;
};

struct MatchReport {
  std::vector<PeakMatch> matches;
  std::vector<std::size_t> unmatched_levels;  // eligible levels without a peak within resolution
  std::size_t matched_count = 0;
  std::size_t orphan_count = 0;
  double resolution = 0.0;
  double weight_floor = 0.0;
};

/// Pairs every peak with the nearest gap E_n - E_0 (n >= 1) whose transition
/// weight |<E_n|sigma^x_site|E_0>|^2 is at least weight_floor.
MatchReport match_gaps(const std::vector<SpectralPeak>& peaks, const SpectrumTable& spectrum, int site,
                       double resolution, double weight_floor = 1e-3);

}  // namespace mq
