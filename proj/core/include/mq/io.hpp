#pragma once

// Artifact formats: run-config JSON fragments and the CSV/JSON files the
// command-line tool writes. Numbers are printed in shortest round-trip form.

#include "mq/kondocloud.hpp"
#include "mq/scaling.hpp"
#include "mq/spectro.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace mq {

using Json = nlohmann::ordered_json;

std::string format_double(double x);

/// Throws ConfigError naming the first key of obj outside allowed.
void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where);

Json to_json(const TermList& terms);
TermList term_list_from_json(const Json& j);

/// {"type": "long_range_ising" | "tfic" | "kondo" | "terms", ...}
Json to_json(const HamiltonianSpec& spec);
HamiltonianSpec hamiltonian_from_json(const Json& j);

Json to_json(const MeasurementSpec& spec);
MeasurementSpec measurement_from_json(const Json& j);

Json to_json(const TimeGrid& grid);
TimeGrid time_grid_from_json(const Json& j);

Json to_json(const PropagatorConfig& cfg);
PropagatorConfig propagator_from_json(const Json& j, const PropagatorConfig& defaults = {});

Json to_json(const Window& window);
Window window_from_json(const Json& j);

/// Compact single-line JSON text of the model, as stored in SeriesMeta::model.
std::string model_text(const HamiltonianSpec& spec);

// Time series: "# key: value" metadata lines, then "t,m_x".
void write_series_csv(std::ostream& os, const TimeSeries& series);
TimeSeries read_series_csv(std::istream& is);

// Spectrum: "E,amplitude".
void write_spectrum_csv(std::ostream& os, const SpectrumReport& report);
SpectrumReport read_spectrum_csv(std::istream& is);

Json match_report_json(const MatchReport& report, const std::vector<SpectralPeak>& peaks, const SpectrumTable& spectrum);

// Collapse: long format "x,m,N,control".
void write_collapse_csv(std::ostream& os, const CollapseFamily& family, double x_max,
                        std::optional<double> filter_window);

Json nu_scan_json(const NuScan& scan);

// Cloud profile: "j,dm,J_prime,N".
void write_profile_csv(std::ostream& os, const CloudProfile& profile);
CloudProfile read_profile_csv(std::istream& is);

/// {"xi", "window": [j_lo, j_hi], "r2", ...}
Json screening_fit_json(const ScreeningFit& fit);

}  // namespace mq
