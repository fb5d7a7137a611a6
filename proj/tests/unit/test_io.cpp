#include "mq/errors.hpp"
#include "mq/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace mq {
namespace {

std::string first_data_header(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return {};
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-17), "-2.5e-17");
  for (double x : {1.0 / 3.0, std::acos(-1.0), 6.02214076e23, -1e-300})
    EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(ModelJson, RoundTripsEveryFamily) {
  const std::vector<HamiltonianSpec> specs{LongRangeIsingSpec{6, 0.5, 1.2, PairConvention::all}, TficSpec{8, 0.95},
                                           KondoChainSpec{10, 0.4, 0.3}};
  for (const auto& spec : specs) {
    const auto back = hamiltonian_from_json(to_json(spec));
    EXPECT_EQ(to_json(back), to_json(spec));
    EXPECT_EQ(model_text(back), model_text(spec));
  }
  const auto tf = std::get<TficSpec>(hamiltonian_from_json(Json::parse(R"({"type":"tfic","n_sites":6})")));
  EXPECT_EQ(tf.lambda, TficSpec{}.lambda);
}

TEST(ModelJson, CustomTerms) {
  TermList t(3);
  t.add(0.5, {{Axis::x, 1}, {Axis::y, 3}});
  t.add(-1.0, {{Axis::z, 2}});
  const auto back = hamiltonian_from_json(to_json(HamiltonianSpec{CustomSpec{t}}));
  const auto& terms = std::get<CustomSpec>(back).terms;
  EXPECT_DOUBLE_EQ(terms.coupling(Axis::x, 1, 3), 0.0);
  EXPECT_EQ(to_json(terms), to_json(t));
}

TEST(ModelJson, Rejections) {
  EXPECT_THROW(hamiltonian_from_json(Json::parse(R"({"n_sites":4})")), ConfigError);
  EXPECT_THROW(hamiltonian_from_json(Json::parse(R"({"type":"heisenberg","n_sites":4})")), ConfigError);
  EXPECT_THROW(hamiltonian_from_json(Json::parse(R"({"type":"tfic","n_sites":4,"lamda":1})")), ConfigError);
  EXPECT_THROW(hamiltonian_from_json(Json::parse(R"({"type":"kondo","n_sites":5})")), ConfigError);
  EXPECT_THROW(hamiltonian_from_json(Json::parse(R"({"type":"long_range_ising","n_sites":4,"pairs":"some"})")),
               ConfigError);
}

TEST(MeasurementJson, RoundTripAndDefaults) {
  const MeasurementSpec m{3, Axis::y, OutcomePolicy::sampled, 42};
  const auto back = measurement_from_json(to_json(m));
  EXPECT_EQ(back.site, 3);
  EXPECT_EQ(back.axis, Axis::y);
  EXPECT_EQ(back.policy, OutcomePolicy::sampled);
  EXPECT_EQ(back.seed, 42u);
  const auto d = measurement_from_json(Json::object());
  EXPECT_EQ(d.site, 1);
  EXPECT_EQ(d.axis, Axis::x);
  EXPECT_EQ(d.policy, OutcomePolicy::forced_up);
  EXPECT_THROW(measurement_from_json(Json::parse(R"({"axis":"w"})")), ConfigError);
  EXPECT_THROW(measurement_from_json(Json::parse(R"({"outcome":"left"})")), ConfigError);
}

TEST(GridAndPropagatorJson, RoundTrip) {
  const TimeGrid g{12.5, 0.025};
  EXPECT_EQ(time_grid_from_json(to_json(g)), g);
  EXPECT_THROW(time_grid_from_json(Json::parse(R"({"dt":0.1})")), Json::exception);
  PropagatorConfig c;
  c.method = PropagationMethod::quadrature;
  c.krylov_dim = 40;
  c.quadrature_tol = 1e-9;
  const auto back = propagator_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  PropagatorConfig defaults;
  defaults.method = PropagationMethod::spectral;
  EXPECT_EQ(propagator_from_json(Json::object(), defaults).method, PropagationMethod::spectral);
  EXPECT_THROW(propagator_from_json(Json::parse(R"({"method":"euler"})")), ConfigError);
  EXPECT_THROW(propagator_from_json(Json::parse(R"({"krylov_dim":1})")), ConfigError);
}

TEST(WindowJson, StringAndObjectForms) {
  EXPECT_EQ(window_from_json(Json("hann")).kind, WindowKind::hann);
  const auto g = window_from_json(Json::parse(R"({"kind":"gaussian","sigma_t":3.5})"));
  EXPECT_EQ(g.kind, WindowKind::gaussian);
  EXPECT_EQ(g.sigma_t, 3.5);
  EXPECT_EQ(window_from_json(to_json(g)).sigma_t, 3.5);
  EXPECT_THROW(window_from_json(Json("blackman")), ConfigError);
  EXPECT_THROW(window_from_json(Json::parse(R"({"kind":"gaussian","sigma_t":-1})")), ConfigError);
}

TEST(UnknownKeys, NamesTheOffender) {
  try {
    reject_unknown_keys(Json::parse(R"({"a":1,"bogus":2})"), {"a"}, "analysis");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(reject_unknown_keys(Json::array(), {"a"}, "analysis"), ConfigError);
}

TimeSeries demo_series() {
  TimeSeries s;
  s.grid = {0.3, 0.1};
  s.values = {1.0, 0.9800665778412416, 0.9210609940028851, -1.0 / 3.0};
  s.meta = {model_text(TficSpec{6, 1.0}), 2, 6, Axis::x};
  s.max_norm_drift = 3.2e-15;
  return s;
}

TEST(SeriesCsv, ExactRoundTripAndSchema) {
  const auto s = demo_series();
  std::ostringstream os;
  write_series_csv(os, s);
  EXPECT_EQ(first_data_header(os.str()), "t,m_x");
  EXPECT_NE(os.str().find("# model: {\"type\":\"tfic\""), std::string::npos);
  std::istringstream is(os.str());
  const auto back = read_series_csv(is);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.grid, s.grid);
  EXPECT_EQ(back.meta.model, s.meta.model);
  EXPECT_EQ(back.meta.site, 2);
  EXPECT_EQ(back.meta.n_sites, 6);
  EXPECT_EQ(back.max_norm_drift, s.max_norm_drift);
  std::ostringstream again;
  write_series_csv(again, back);
  EXPECT_EQ(again.str(), os.str());
}

TEST(SeriesCsv, MalformedInput) {
  std::istringstream wrong_header("# model: {}\nt,m\n0,1\n");
  EXPECT_THROW(read_series_csv(wrong_header), ConfigError);
  std::ostringstream os;
  write_series_csv(os, demo_series());
  std::string text = os.str();
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  std::istringstream truncated_in(text);
  EXPECT_THROW(read_series_csv(truncated_in), ConfigError);
  std::istringstream bad_number("# model: {}\n# site: 1\n# n_sites: 1\n# t_max: 0\n# dt: 0.1\nt,m_x\n0,abc\n");
  EXPECT_THROW(read_series_csv(bad_number), ConfigError);
}

TEST(SpectrumCsv, RoundTrip) {
  SpectrumReport r;
  r.energies = {0.0, 0.5, 1.0};
  r.amplitude = {0.1, 2.0 / 3.0, 0.0};
  r.window = {WindowKind::gaussian, 4.0};
  r.t_effective = 100.0;
  r.resolution = 0.0628;
  r.dt = 0.05;
  std::ostringstream os;
  write_spectrum_csv(os, r);
  EXPECT_EQ(first_data_header(os.str()), "E,amplitude");
  std::istringstream is(os.str());
  const auto back = read_spectrum_csv(is);
  EXPECT_EQ(back.energies, r.energies);
  EXPECT_EQ(back.amplitude, r.amplitude);
  EXPECT_EQ(back.window.kind, WindowKind::gaussian);
  EXPECT_EQ(back.window.sigma_t, 4.0);
  EXPECT_EQ(back.resolution, r.resolution);
}

TEST(CollapseCsv, LongFormatSchema) {
  CollapseFamily fam;
  fam.target_ratio = 1.0;
  for (int n : {4, 8}) {
    CollapseMember m;
    m.n_sites = n;
    m.control = 0.75;
    m.series.grid = {8.0, 1.0};
    m.series.values.assign(9, 0.5);
    fam.members.push_back(m);
  }
  std::ostringstream os;
  write_collapse_csv(os, fam, 1.0, std::nullopt);
  EXPECT_EQ(first_data_header(os.str()), "x,m,N,control");
  std::istringstream in(os.str());
  std::string line;
  int rows4 = 0, rows8 = 0;
  while (std::getline(in, line)) {
    if (line.ends_with(",4,0.75")) ++rows4;
    if (line.ends_with(",8,0.75")) ++rows8;
  }
  EXPECT_EQ(rows4, 5);  // x = 0, 0.25, ..., 1
  EXPECT_EQ(rows8, 9);
  EXPECT_NE(os.str().find("# filter_window: none"), std::string::npos);
}

TEST(NuScanJson, Keys) {
  NuScan scan{1.0, {0.5, 1.0, 1.5}, {0.2, 0.1, 0.3}, {}};
  const auto j = nu_scan_json(scan);
  EXPECT_EQ(j.at("nu_best"), 1.0);
  EXPECT_EQ(j.at("nu_grid").size(), 3u);
  EXPECT_EQ(j.at("metrics")[1], 0.1);
  EXPECT_TRUE(j.at("warnings").is_array());
}

TEST(ProfileCsv, RoundTripAndMixedRows) {
  CloudProfile p;
  p.j_values = {2, 3, 4};
  p.dm = {0.125, 1e-5, 0.0};
  p.j_prime = 0.3;
  p.n_sites = 8;
  p.t_window = 1.0 / 0.3;
  std::ostringstream os;
  write_profile_csv(os, p);
  EXPECT_EQ(first_data_header(os.str()), "j,dm,J_prime,N");
  std::istringstream is(os.str());
  const auto back = read_profile_csv(is);
  EXPECT_EQ(back.j_values, p.j_values);
  EXPECT_EQ(back.dm, p.dm);
  EXPECT_EQ(back.j_prime, 0.3);
  EXPECT_EQ(back.t_window, p.t_window);
  std::istringstream mixed("j,dm,J_prime,N\n2,0.1,0.3,8\n3,0.1,0.4,8\n");
  EXPECT_THROW(read_profile_csv(mixed), ConfigError);
}

TEST(FitJson, Keys) {
  ScreeningFit f;
  f.xi = 4.5;
  f.j_lo = 3;
  f.j_hi = 10;
  f.r_squared = 0.97;
  f.residuals = {0.1, -0.1};
  const auto j = screening_fit_json(f);
  EXPECT_EQ(j.at("xi"), 4.5);
  EXPECT_EQ(j.at("window"), Json::parse("[3,10]"));
  EXPECT_EQ(j.at("r2"), 0.97);
  EXPECT_EQ(j.at("residuals").size(), 2u);
}

TEST(MatchJson, OrphansAndLevels) {
  const auto full = full_spectrum(build_tfic({4, 0.8}));
  const std::vector<SpectralPeak> peaks{{1000.0, 0.1, 0.1}};
  const auto report = match_gaps(peaks, full, 1, 0.05);
  const auto j = match_report_json(report, peaks, full);
  EXPECT_EQ(j.at("orphan_count"), 1);
  EXPECT_EQ(j.at("orphans"), Json::parse("[0]"));
  EXPECT_FALSE(j.at("peaks")[0].at("matched").get<bool>());
  EXPECT_FALSE(j.at("unmatched_levels").empty());
}

}  // namespace
}  // namespace mq
