#include "mqapp/app.hpp"

#include "mq/errors.hpp"
#include "mq/parallel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#ifndef MQ_VERSION
#define MQ_VERSION "0.0.0"
#endif

namespace mq::app {

namespace fs = std::filesystem;

std::string tool_version() { return MQ_VERSION; }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

int resolve_jobs(std::optional<int> flag, const Json& config) {
  int jobs = flag ? *flag : config.contains("jobs") ? config.at("jobs").get<int>() : default_jobs();
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  return jobs;
}

// ---------------------------------------------------------------- artifacts

ArtifactWriter::ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

namespace {

void atomic_write(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << content;
    if (!os.flush()) throw ConfigError("cannot write " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace

void ArtifactWriter::write(const std::string& name, const std::string& content) {
  atomic_write(dir_ / name, content);
  artifacts_.push_back({{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
}

void ArtifactWriter::write_json(const std::string& name, const Json& value) { write(name, value.dump(2) + "\n"); }

void ArtifactWriter::add_timing(const std::string& stage, double seconds) { timings_[stage] = seconds; }

void ArtifactWriter::write_manifest(const std::string& command, const Json& config, int exit_code) {
  Json m;
  m["tool"] = "mqsim";
  m["version"] = tool_version();
  m["command"] = command;
  m["config_sha256"] = sha256_hex(config.dump());
  m["exit_code"] = exit_code;
  m["artifacts"] = artifacts_;
  m["notices"] = notices_;
  m["timings_s"] = timings_;
  atomic_write(dir_ / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------- pipelines

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct Prepared {
  LinearOperator evolution;  // on the basis the measurement reaches
  EigenPair ground;
};

Prepared prepare(const HamiltonianSpec& model, const MeasurementSpec& measurement) {
  validate(model);
  const int n = n_sites_of(model);
  check_site(measurement.site, n);
  if (std::holds_alternative<KondoChainSpec>(model) && n % 2 == 0) {
    const auto sector = build_sector_basis(n, {n / 2});
    EigenPair g = ground_state(build_operator(model, sector));
    return {build_operator(model, post_measurement_sector(measurement, *sector)), std::move(g)};
  }
  LinearOperator op = build_operator(model);
  if (op.conserves_parity()) {
    auto pg = ground_state_with_parity(op);
    return {std::move(op), std::move(pg.pair)};
  }
  EigenPair g = ground_state(op);
  return {std::move(op), std::move(g)};
}

}  // namespace

TimeSeries quench_series(const HamiltonianSpec& model, const MeasurementSpec& measurement, const TimeGrid& grid,
                         const PropagatorConfig& propagator) {
  grid.validate();
  propagator.validate();
  const Prepared p = prepare(model, measurement);
  TimeSeries s;
  if (propagator.method == PropagationMethod::quadrature) {
    s = quench_return_series(p.evolution, p.ground, measurement, grid, propagator);
  } else {
    const CollapseResult c = collapse(p.ground.vector, measurement, p.evolution.basis());
    std::optional<SpectrumTable> full;
    if (propagator.method == PropagationMethod::spectral) full = full_spectrum(p.evolution);
    s = magnetization_series(p.evolution, c, measurement.site, grid, propagator, measurement.axis,
                             full ? &*full : nullptr);
  }
  s.meta.model = model_text(model);
  return s;
}

// ---------------------------------------------------------------- config

namespace {

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

const Json& section(const Json& config, const char* key) {
  static const Json empty = Json::object();
  if (!config.contains(key)) return empty;
  const Json& s = config.at(key);
  if (!s.is_object()) throw ConfigError(std::string(key) + " must be an object");
  return s;
}

std::vector<double> number_list(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

std::vector<int> int_list(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of integers");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

std::optional<double> filter_of(const Json& analysis, double fallback) {
  if (!analysis.contains("filter_window")) return fallback;
  const Json& f = analysis.at("filter_window");
  if (f.is_null()) return std::nullopt;
  const double w = f.get<double>();
  if (!(w > 0.0)) throw ConfigError("filter_window must be positive or null");
  return w;
}

std::string csv_text(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

}  // namespace

Json effective_config(const std::string& command, Json config, const RunOptions& options) {
  if (config.is_null()) config = Json::object();
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
    throw ConfigError("unknown command '" + command + "'");
  if (command == "quench")
    reject_unknown_keys(config, {"model", "measurement", "grid", "propagator", "jobs", "seed"}, "config");
  else if (command == "spectroscopy")
    reject_unknown_keys(config, {"model", "measurement", "grid", "propagator", "analysis", "jobs", "seed"}, "config");
  else if (command == "collapse" || command == "cloud")
    reject_unknown_keys(config, {"measurement", "propagator", "analysis", "jobs", "seed"}, "config");
  else
    reject_unknown_keys(config, {"jobs", "seed"}, "config");
  if (options.seed) config["seed"] = *options.seed;
  // job count never changes artifacts
  config.erase("jobs");
  return config;
}

namespace {

MeasurementSpec measurement_of(const Json& config) {
  MeasurementSpec m = measurement_from_json(section(config, "measurement"));
  if (config.contains("seed")) m.seed = config.at("seed").get<std::uint64_t>();
  return m;
}

// ---------------------------------------------------------------- quench

void cmd_quench(const Json& config, ArtifactWriter& out) {
  if (!config.contains("model")) throw ConfigError("quench needs a model");
  if (!config.contains("grid")) throw ConfigError("quench needs a grid");
  const HamiltonianSpec model = hamiltonian_from_json(config.at("model"));
  const MeasurementSpec m = measurement_of(config);
  const TimeGrid grid = time_grid_from_json(config.at("grid"));
  const PropagatorConfig prop = propagator_from_json(section(config, "propagator"));
  Stopwatch sw;
  const TimeSeries s = quench_series(model, m, grid, prop);
  out.add_timing("evolution", sw.seconds());
  out.write("series.csv", csv_text([&](std::ostream& os) { write_series_csv(os, s); }));
}

// ---------------------------------------------------------------- spectroscopy

void cmd_spectroscopy(const Json& config, ArtifactWriter& out) {
  if (!config.contains("model")) throw ConfigError("spectroscopy needs a model");
  const HamiltonianSpec model = hamiltonian_from_json(config.at("model"));
  const MeasurementSpec m = measurement_of(config);
  const TimeGrid grid = config.contains("grid") ? time_grid_from_json(config.at("grid")) : TimeGrid{300.0, 0.05};
  PropagatorConfig prop_defaults;
  prop_defaults.method = PropagationMethod::quadrature;
  const PropagatorConfig prop = propagator_from_json(section(config, "propagator"), prop_defaults);

  const Json& a = section(config, "analysis");
  reject_unknown_keys(a, {"window", "e_min", "e_max", "e_step", "prominence_floor", "weight_floor", "match"},
                      "analysis");
  Window window;
  window.kind = WindowKind::gaussian;
  if (a.contains("window")) window = window_from_json(a.at("window"));
  const double floor = value_or(a, "prominence_floor", 0.02);
  const double weight_floor = value_or(a, "weight_floor", 1e-3);
  const auto match = value_or<std::string>(a, "match", "auto");
  if (match != "auto" && match != "always" && match != "never")
    throw ConfigError("analysis.match must be 'auto', 'always' or 'never'");

  Stopwatch sw;
  const TimeSeries s = quench_series(model, m, grid, prop);
  out.add_timing("evolution", sw.seconds());
  out.write("series.csv", csv_text([&](std::ostream& os) { write_series_csv(os, s); }));

  const LinearOperator full_op = build_operator(model);
  const double resolution = 2.0 * M_PI / grid.time(grid.count() - 1);
  const double e_min = value_or(a, "e_min", 0.0);
  // every gap lies below 2 ||H||; the default grid stops at the alias limit
  const double e_max = value_or(a, "e_max", std::min(2.0 * full_op.norm_bound(), M_PI / grid.dt));
  const double e_step = value_or(a, "e_step", resolution / 8.0);
  sw = {};
  const SpectrumReport report = fourier_transform(s, uniform_energy_grid(e_min, e_max, e_step), window);
  const auto peaks = extract_peaks(report, floor);
  out.add_timing("transform", sw.seconds());
  out.write("spectrum.csv", csv_text([&](std::ostream& os) { write_spectrum_csv(os, report); }));

  Json pj = Json::array();
  double total = 0.0;
  for (const auto& p : peaks) {
    pj.push_back({{"energy", p.energy}, {"weight", p.weight}, {"amplitude", p.amplitude}});
    total += p.weight;
  }
  out.write_json("peaks.json", {{"resolution", report.resolution}, {"total_weight", total}, {"peaks", pj}});

  const bool small = full_op.dimension() <= kDenseDimensionCap;
  if (match == "always" && !small) throw ConfigError("gap matching needs dim <= 2^14");
  if (match == "never") return;
  if (!small) {
    out.add_notice("gap matching skipped: dimension " + std::to_string(full_op.dimension()) + " exceeds 2^14");
    return;
  }
  sw = {};
  const SpectrumTable spectrum = full_spectrum(full_op);
  const MatchReport mr = match_gaps(peaks, spectrum, m.site, report.resolution, weight_floor);
  out.add_timing("dense_oracle", sw.seconds());
  out.write_json("match.json", match_report_json(mr, peaks, spectrum));
}

// ---------------------------------------------------------------- collapse

struct CollapseSetup {
  std::string family;
  std::vector<int> sizes;
  double target_ratio = 1.0;
  std::optional<double> fixed_control;  // same control for every size
  bool paramagnetic = false;
  double dt = 0.05;
  double t_max_over_n = 2.0;
  double x_min = 0.0;
  double x_max = 2.0;
  std::optional<double> filter;
  double j2_over_j1 = kCriticalJ2OverJ1;
  XiTable xi_table;
};

XiTable xi_table_of(const Json& a) {
  XiTable t;
  if (a.contains("xi_table")) {
    for (const auto& e : a.at("xi_table")) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("xi_table entries must be [J', xi] pairs");
      t.entries.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
  } else if (a.contains("xi_table_file")) {
    const auto path = a.at("xi_table_file").get<std::string>();
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read xi_table_file " + path);
    Json fits;
    try {
      is >> fits;
    } catch (const Json::exception& e) {
      throw ConfigError("xi_table_file is not valid JSON: " + std::string(e.what()));
    }
    if (!fits.contains("xi_table")) throw ConfigError("xi_table_file has no xi_table");
    for (const auto& e : fits.at("xi_table")) t.entries.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return t;
}

CollapseSetup collapse_setup(const Json& a) {
  reject_unknown_keys(a,
                      {"family", "sizes", "target_ratio", "nu", "nu_grid", "control", "side", "dt", "t_max_over_n",
                       "x_window", "filter_window", "j2_over_j1", "xi_table", "xi_table_file"},
                      "analysis");
  CollapseSetup c;
  c.family = value_or<std::string>(a, "family", "tfic");
  if (c.family != "tfic" && c.family != "kondo") throw ConfigError("analysis.family must be 'tfic' or 'kondo'");
  const bool kondo = c.family == "kondo";
  c.sizes = a.contains("sizes") ? int_list(a.at("sizes"), "sizes")
                                : (kondo ? std::vector<int>{12, 16, 20} : std::vector<int>{10, 14, 18});
  if (c.sizes.size() < 2) throw ConfigError("collapse needs at least two sizes");
  c.target_ratio = value_or(a, "target_ratio", kondo ? 2.0 : 1.0);
  if (a.contains("control")) c.fixed_control = a.at("control").get<double>();
  const auto side = value_or<std::string>(a, "side", "ordered");
  if (side != "ordered" && side != "paramagnetic") throw ConfigError("analysis.side must be 'ordered' or 'paramagnetic'");
  c.paramagnetic = side == "paramagnetic";
  c.dt = value_or(a, "dt", 0.05);
  c.t_max_over_n = value_or(a, "t_max_over_n", kondo ? 1.0 : 2.0);
  const std::vector<double> xw =
      a.contains("x_window") ? number_list(a.at("x_window"), "x_window") : std::vector<double>{0.0, kondo ? 1.0 : 2.0};
  if (xw.size() != 2 || !(xw[1] > xw[0])) throw ConfigError("x_window must be [x_min, x_max] with x_max > x_min");
  c.x_min = xw[0];
  c.x_max = xw[1];
  c.filter = filter_of(a, 0.2);
  c.j2_over_j1 = value_or(a, "j2_over_j1", kCriticalJ2OverJ1);
  if (kondo) {
    c.xi_table = xi_table_of(a);
    if (!c.fixed_control && c.xi_table.entries.empty())
      throw ConfigError("kondo collapse needs xi_table, xi_table_file or a fixed control");
  }
  return c;
}

// Members keyed by (N, control); runs are shared across nu values.
class MemberCache {
 public:
  MemberCache(const CollapseSetup& setup, const MeasurementSpec& m, const PropagatorConfig& prop, int jobs)
      : setup_(setup), m_(m), prop_(prop), jobs_(jobs) {}

  void run(const std::vector<std::pair<int, double>>& keys) {
    std::vector<std::pair<int, double>> todo;
    for (const auto& k : keys)
      if (!series_.count(k) && std::find(todo.begin(), todo.end(), k) == todo.end()) todo.push_back(k);
    std::vector<TimeSeries> results(todo.size());
    std::vector<std::string> errors(todo.size());
    parallel_for(todo.size(), jobs_, [&](std::size_t i) {
      try {
        results[i] = run_one(todo[i].first, todo[i].second);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (!errors[i].empty()) {
        failures_.push_back("N=" + std::to_string(todo[i].first) + " control=" + format_double(todo[i].second) +
                            ": " + errors[i]);
        continue;
      }
      series_[todo[i]] = std::move(results[i]);
    }
  }

  bool has(const std::pair<int, double>& k) const { return series_.count(k) > 0; }
  const TimeSeries& at(const std::pair<int, double>& k) const { return series_.at(k); }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  TimeSeries run_one(int n, double control) const {
    const TimeGrid grid{setup_.t_max_over_n * n, setup_.dt};
    HamiltonianSpec model;
    if (setup_.family == "tfic")
      model = TficSpec{n, control};
    else
      model = KondoChainSpec{n, control, setup_.j2_over_j1};
    return quench_series(model, m_, grid, prop_);
  }

  const CollapseSetup& setup_;
  MeasurementSpec m_;
  PropagatorConfig prop_;
  int jobs_;
  std::map<std::pair<int, double>, TimeSeries> series_;
  std::vector<std::string> failures_;
};

double control_for(const CollapseSetup& c, int n, double nu) {
  if (c.fixed_control) return *c.fixed_control;
  if (c.family == "tfic") return tune_tfic_lambda(n, c.target_ratio, nu, c.paramagnetic);
  return tune_kondo_j_prime(n, c.target_ratio, c.xi_table);
}

void cmd_collapse(const Json& config, ArtifactWriter& out, int jobs) {
  const Json& a = section(config, "analysis");
  const CollapseSetup c = collapse_setup(a);
  const MeasurementSpec m = measurement_of(config);
  PropagatorConfig prop_defaults;
  prop_defaults.method = PropagationMethod::quadrature;
  const PropagatorConfig prop = propagator_from_json(section(config, "propagator"), prop_defaults);
  const double nu = value_or(a, "nu", 1.0);
  std::vector<double> nu_grid;
  if (a.contains("nu_grid")) {
    if (c.family != "tfic" || c.fixed_control) throw ConfigError("nu_grid applies to a tuned tfic family only");
    nu_grid = number_list(a.at("nu_grid"), "nu_grid");
  }

  std::vector<std::pair<int, double>> keys;
  for (int n : c.sizes) keys.emplace_back(n, control_for(c, n, nu));
  for (double v : nu_grid)
    for (int n : c.sizes) keys.emplace_back(n, control_for(c, n, v));

  MemberCache cache(c, m, prop, jobs);
  Stopwatch sw;
  cache.run(keys);
  out.add_timing("members", sw.seconds());

  auto family_at = [&](double v) {
    CollapseFamily f;
    f.target_ratio = c.fixed_control ? 0.0 : c.target_ratio;
    for (int n : c.sizes) {
      const auto key = std::make_pair(n, control_for(c, n, v));
      if (!cache.has(key)) continue;
      double xi = 0.0;
      if (c.family == "kondo" && !c.xi_table.entries.empty() && !c.fixed_control)
        xi = interpolate_xi(c.xi_table, key.second);
      f.members.push_back({cache.at(key), n, key.second, xi});
    }
    return f;
  };

  const CollapseFamily family = family_at(nu);
  if (!family.members.empty()) {
    out.write("collapse.csv",
              csv_text([&](std::ostream& os) { write_collapse_csv(os, family, c.x_max, std::nullopt); }));
    if (c.filter)
      out.write("collapse_filtered.csv",
                csv_text([&](std::ostream& os) { write_collapse_csv(os, family, c.x_max, c.filter); }));
  }
  if (!cache.failures().empty()) {
    out.write_json("failures.json", {{"failures", cache.failures()}});
    throw PartialError("collapse members failed: " + cache.failures().front());
  }

  Json j;
  j["family"] = c.family;
  j["sizes"] = c.sizes;
  Json controls = Json::array();
  for (const auto& mem : family.members) controls.push_back(mem.control);
  j["controls"] = controls;
  if (c.fixed_control)
    j["control"] = *c.fixed_control;
  else
    j["target_ratio"] = c.target_ratio;
  if (c.family == "tfic" && !c.fixed_control) j["nu"] = nu;
  j["window"] = {c.x_min, c.x_max};
  j["filter_window"] = c.filter ? Json(*c.filter) : Json(nullptr);
  j["metric_raw"] = collapse_distance(family, c.x_min, c.x_max).value;
  if (c.filter) j["metric_filtered"] = collapse_distance(family, c.x_min, c.x_max, c.filter).value;
  if (c.family == "kondo") {
    const ScalingWindow w = kondo_scaling_window(family, c.filter, c.x_max);
    j["scaling_window"] = {{"x_break", w.x_break}, {"pre_metric", w.pre_metric}, {"post_metric", w.post_metric},
                           {"ratio", std::isfinite(w.ratio) ? Json(w.ratio) : Json(nullptr)}};
  }
  if (!nu_grid.empty()) {
    const NuScan scan = estimate_nu(family_at, nu_grid, c.x_min, c.x_max, c.filter);
    j["nu_scan"] = nu_scan_json(scan);
  }
  out.write_json("metric.json", j);
}

// ---------------------------------------------------------------- cloud

void cmd_cloud(const Json& config, ArtifactWriter& out, int jobs) {
  const Json& a = section(config, "analysis");
  reject_unknown_keys(a, {"n_sites", "j_primes", "margin", "dt", "j2_over_j1", "tail_start"}, "analysis");
  if (config.contains("measurement")) throw ConfigError("cloud measures every site; measurement is not configurable");
  const int n = value_or(a, "n_sites", 20);
  const std::vector<double> jps =
      a.contains("j_primes") ? number_list(a.at("j_primes"), "j_primes") : std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.7};
  {
    std::set<double> seen(jps.begin(), jps.end());
    if (seen.size() != jps.size()) throw ConfigError("j_primes must be distinct");
  }
  CloudOptions opt;
  opt.margin = value_or(a, "margin", opt.margin);
  opt.dt = value_or(a, "dt", opt.dt);
  opt.j2_over_j1 = value_or(a, "j2_over_j1", opt.j2_over_j1);
  opt.propagator = propagator_from_json(section(config, "propagator"), opt.propagator);
  opt.jobs = jobs;
  std::optional<int> tail_start;
  if (a.contains("tail_start") && !(a.at("tail_start").is_string() && a.at("tail_start") == "auto"))
    tail_start = a.at("tail_start").get<int>();

  Stopwatch sw;
  const auto profiles = cloud_profiles(n, jps, opt);
  out.add_timing("profiles", sw.seconds());

  Json fits = Json::array();
  Json excluded = Json::array();
  Json table = Json::array();
  std::vector<std::pair<double, double>> pairs;
  bool partial = false;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    out.write("profile_" + std::to_string(i) + ".csv", csv_text([&](std::ostream& os) { write_profile_csv(os, p); }));
    if (p.partial()) {
      partial = true;
      fits.push_back({{"j_prime", p.j_prime}, {"error", p.failures.front()}});
      continue;
    }
    if (p.j_prime == 1.0) {
      excluded.push_back(p.j_prime);
      continue;
    }
    try {
      const ScreeningFit f = fit_screening_length(p, tail_start);
      Json fj = screening_fit_json(f);
      fj["j_prime"] = p.j_prime;
      fits.push_back(fj);
      pairs.emplace_back(p.j_prime, f.xi);
      table.push_back({p.j_prime, f.xi});
    } catch (const NumericalError& e) {
      partial = true;
      fits.push_back({{"j_prime", p.j_prime}, {"error", e.what()}});
    }
  }
  Json j;
  j["n_sites"] = n;
  j["fits"] = fits;
  j["excluded"] = excluded;
  j["xi_table"] = table;
  if (pairs.size() >= 3) {
    const KondoLawFit law = fit_kondo_law(pairs);
    j["law"] = {{"A", law.a_coefficient}, {"intercept", law.intercept}, {"r2", law.r_squared}};
  } else {
    j["law"] = nullptr;
    partial = partial || jps.size() - excluded.size() >= 3;
  }
  out.write_json("fits.json", j);
  if (partial) throw PartialError("some J' profiles or fits failed; see fits.json");
}

// ---------------------------------------------------------------- selftest

void cmd_selftest(ArtifactWriter& out) {
  Json checks = Json::array();
  bool ok = true;
  auto record = [&](const std::string& name, double error, double tol) {
    const bool pass = error <= tol;
    ok = ok && pass;
    checks.push_back({{"name", name}, {"error", error}, {"tol", tol}, {"pass", pass}});
  };

  {
    // H = sigma^z on one spin: m(t) = cos 2t
    TermList t(1);
    t.add(1.0, {{Axis::z, 1}});
    const TimeSeries s = quench_series(CustomSpec{t}, {}, {5.0, 0.05}, {});
    double err = 0.0;
    for (std::size_t k = 0; k < s.values.size(); ++k)
      err = std::max(err, std::abs(s.values[k] - std::cos(2.0 * s.grid.time(k))));
    record("single_spin_cos2t", err, 1e-10);
  }
  {
    const TficSpec spec{6, 0.8};
    const TimeGrid grid{10.0, 0.05};
    PropagatorConfig spectral;
    spectral.method = PropagationMethod::spectral;
    PropagatorConfig quad;
    quad.method = PropagationMethod::quadrature;
    const TimeSeries a = quench_series(spec, {}, grid, {});
    const TimeSeries b = quench_series(spec, {}, grid, spectral);
    const TimeSeries c = quench_series(spec, {}, grid, quad);
    double ab = 0.0, ac = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
      ab = std::max(ab, std::abs(a.values[k] - b.values[k]));
      ac = std::max(ac, std::abs(a.values[k] - c.values[k]));
    }
    record("tfic6_krylov_vs_spectral", ab, 1e-8);
    record("tfic6_krylov_vs_quadrature", ac, 1e-8);
  }
  {
    const KondoChainSpec spec{8, 0.5, kCriticalJ2OverJ1};
    const TimeSeries s = quench_series(spec, {}, {1.0, 0.05}, {});
    record("kondo8_initial_magnetization", std::abs(s.values.front() - 1.0), 1e-10);
  }
  out.write_json("selftest.json", {{"pass", ok}, {"checks", checks}});
  if (!ok) throw NumericalError("selftest failed; see selftest.json");
}

Json error_json(int code, const char* kind, const std::string& message) {
  return {{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
}

}  // namespace

int run_command(const std::string& command, const Json& config_in, const RunOptions& options, std::ostream& err) {
  int code = kExitOk;
  std::string kind, message;
  std::optional<ArtifactWriter> out;
  Json config;
  try {
    config = effective_config(command, config_in, options);
    const int jobs = resolve_jobs(options.jobs, config_in.is_object() ? config_in : Json::object());
    out.emplace(options.out);
    Stopwatch total;
    if (command == "quench")
      cmd_quench(config, *out);
    else if (command == "spectroscopy")
      cmd_spectroscopy(config, *out);
    else if (command == "collapse")
      cmd_collapse(config, *out, jobs);
    else if (command == "cloud")
      cmd_cloud(config, *out, jobs);
    else
      cmd_selftest(*out);
    out->add_timing("total", total.seconds());
  } catch (const ConfigError& e) {
    code = kExitConfig, kind = "config", message = e.what();
  } catch (const Json::exception& e) {
    code = kExitConfig, kind = "config", message = e.what();
  } catch (const PartialError& e) {
    code = kExitPartial, kind = "partial", message = e.what();
  } catch (const NumericalError& e) {
    code = kExitNumerical, kind = "numerical", message = e.what();
  } catch (const std::exception& e) {
    code = kExitNumerical, kind = "internal", message = e.what();
  }
  if (out) {
    try {
      out->write_manifest(command, config, code);
    } catch (const std::exception& e) {
      if (code == kExitOk) code = kExitConfig, kind = "config", message = e.what();
    }
  }
  if (code != kExitOk) err << error_json(code, kind.c_str(), message).dump() << '\n';
  return code;
}

}  // namespace mq::app
