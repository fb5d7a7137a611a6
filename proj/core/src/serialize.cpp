#include "mq/io.hpp"

#include "mq/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace mq {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view s, std::string_view what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("cannot parse number '" + std::string(s) + "' in " + std::string(what));
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

// Comment lines "# key: value" before the header, then rows.
struct CsvDoc {
  std::map<std::string, std::string, std::less<>> meta;
  std::string header;
  std::vector<std::vector<double>> rows;
};

CsvDoc read_csv(std::istream& is, std::string_view expected_header, std::string_view what) {
  CsvDoc doc;
  std::string line;
  bool have_header = false;
  const std::size_t columns = split(expected_header, ',').size();
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(1, colon - 1);
        key.erase(0, key.find_first_not_of(' '));
        std::string value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(' '));
        doc.meta[key] = value;
      }
      continue;
    }
    if (!have_header) {
      if (line != expected_header)
        throw ConfigError(std::string(what) + ": expected header '" + std::string(expected_header) + "', got '" +
                          line + "'");
      doc.header = line;
      have_header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != columns) throw ConfigError(std::string(what) + ": wrong column count in '" + line + "'");
    std::vector<double> row;
    for (auto c : cells) row.push_back(parse_double(c, what));
    doc.rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError(std::string(what) + ": missing header");
  return doc;
}

const std::string& meta_value(const CsvDoc& doc, std::string_view key, std::string_view what) {
  const auto it = doc.meta.find(key);
  if (it == doc.meta.end()) throw ConfigError(std::string(what) + ": missing metadata '" + std::string(key) + "'");
  return it->second;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

Json number_array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Axis axis_from_json(const Json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw ConfigError("axis must be one of x, y, z; got '" + s + "'");
  return parse_axis(s[0]);
}

}  // namespace

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
}

Json to_json(const TermList& terms) {
  Json list = Json::array();
  for (const auto& t : terms.terms()) {
    std::string ops;
    Json sites = Json::array();
    for (const auto& f : t.factors) {
      ops.push_back(axis_name(f.axis));
      sites.push_back(f.site);
    }
    list.push_back({{"coefficient", t.coefficient}, {"ops", ops}, {"sites", sites}});
  }
  return {{"type", "terms"}, {"n_sites", terms.n_sites()}, {"terms", list}};
}

TermList term_list_from_json(const Json& j) {
  reject_unknown_keys(j, {"type", "n_sites", "terms"}, "model");
  TermList terms(j.at("n_sites").get<int>());
  for (const auto& t : j.at("terms")) {
    reject_unknown_keys(t, {"coefficient", "ops", "sites"}, "term");
    const auto ops = t.at("ops").get<std::string>();
    const auto sites = t.at("sites").get<std::vector<int>>();
    if (ops.size() != sites.size()) throw ConfigError("term 'ops' and 'sites' differ in length");
    std::vector<PauliFactor> factors;
    for (std::size_t k = 0; k < ops.size(); ++k) factors.push_back({parse_axis(ops[k]), sites[k]});
    terms.add(t.at("coefficient").get<double>(), std::move(factors));
  }
  return terms;
}

Json to_json(const HamiltonianSpec& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LongRangeIsingSpec>) {
          return {{"type", "long_range_ising"},
                  {"n_sites", s.n_sites},
                  {"alpha", s.alpha},
                  {"b_over_j", s.b_over_j},
                  {"pairs", s.pairs == PairConvention::ordered ? "ordered" : "all"}};
        } else if constexpr (std::is_same_v<S, TficSpec>) {
          return {{"type", "tfic"}, {"n_sites", s.n_sites}, {"lambda", s.lambda}};
        } else if constexpr (std::is_same_v<S, KondoChainSpec>) {
          return {{"type", "kondo"}, {"n_sites", s.n_sites}, {"j_prime", s.j_prime}, {"j2_over_j1", s.j2_over_j1}};
        } else {
          return to_json(s.terms);
        }
      },
      spec);
}

HamiltonianSpec hamiltonian_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("model needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  HamiltonianSpec spec;
  if (type == "long_range_ising") {
    reject_unknown_keys(j, {"type", "n_sites", "alpha", "b_over_j", "pairs"}, "model");
    LongRangeIsingSpec s;
    s.n_sites = j.at("n_sites").get<int>();
    s.alpha = get_or(j, "alpha", s.alpha);
    s.b_over_j = get_or(j, "b_over_j", s.b_over_j);
    const auto pairs = get_or<std::string>(j, "pairs", "ordered");
    if (pairs == "ordered")
      s.pairs = PairConvention::ordered;
    else if (pairs == "all")
      s.pairs = PairConvention::all;
    else
      throw ConfigError("model.pairs must be 'ordered' or 'all'");
    spec = s;
  } else if (type == "tfic") {
    reject_unknown_keys(j, {"type", "n_sites", "lambda"}, "model");
    TficSpec s;
    s.n_sites = j.at("n_sites").get<int>();
    s.lambda = get_or(j, "lambda", s.lambda);
    spec = s;
  } else if (type == "kondo") {
    reject_unknown_keys(j, {"type", "n_sites", "j_prime", "j2_over_j1"}, "model");
    KondoChainSpec s;
    s.n_sites = j.at("n_sites").get<int>();
    s.j_prime = get_or(j, "j_prime", s.j_prime);
    s.j2_over_j1 = get_or(j, "j2_over_j1", s.j2_over_j1);
    spec = s;
  } else if (type == "terms") {
    spec = CustomSpec{term_list_from_json(j)};
  } else {
    throw ConfigError("unknown model type '" + type + "'");
  }
  validate(spec);
  return spec;
}

Json to_json(const MeasurementSpec& spec) {
  const char* policy = spec.policy == OutcomePolicy::forced_up     ? "up"
                       : spec.policy == OutcomePolicy::forced_down ? "down"
                                                                   : "sampled";
  return {{"site", spec.site}, {"axis", std::string(1, axis_name(spec.axis))}, {"outcome", policy}, {"seed", spec.seed}};
}

MeasurementSpec measurement_from_json(const Json& j) {
  reject_unknown_keys(j, {"site", "axis", "outcome", "seed"}, "measurement");
  MeasurementSpec m;
  m.site = get_or(j, "site", m.site);
  if (j.contains("axis")) m.axis = axis_from_json(j.at("axis"));
  const auto policy = get_or<std::string>(j, "outcome", "up");
  if (policy == "up")
    m.policy = OutcomePolicy::forced_up;
  else if (policy == "down")
    m.policy = OutcomePolicy::forced_down;
  else if (policy == "sampled")
    m.policy = OutcomePolicy::sampled;
  else
    throw ConfigError("measurement.outcome must be 'up', 'down' or 'sampled'");
  m.seed = get_or<std::uint64_t>(j, "seed", m.seed);
  return m;
}

Json to_json(const TimeGrid& grid) { return {{"t_max", grid.t_max}, {"dt", grid.dt}}; }

TimeGrid time_grid_from_json(const Json& j) {
  reject_unknown_keys(j, {"t_max", "dt"}, "time");
  TimeGrid g;
  g.t_max = j.at("t_max").get<double>();
  g.dt = get_or(j, "dt", g.dt);
  g.validate();
  return g;
}

namespace {

const char* method_name(PropagationMethod m) {
  switch (m) {
    case PropagationMethod::krylov: return "krylov";
    case PropagationMethod::spectral: return "spectral";
    case PropagationMethod::quadrature: return "quadrature";
  }
  return "krylov";
}

}  // namespace

Json to_json(const PropagatorConfig& cfg) {
  return {{"method", method_name(cfg.method)},
          {"krylov_dim", cfg.krylov_dim},
          {"max_krylov_dim", cfg.max_krylov_dim},
          {"step_tol", cfg.step_tol},
          {"quadrature_tol", cfg.quadrature_tol},
          {"max_quadrature_steps", cfg.max_quadrature_steps}};
}

PropagatorConfig propagator_from_json(const Json& j, const PropagatorConfig& defaults) {
  reject_unknown_keys(j,
                      {"method", "krylov_dim", "max_krylov_dim", "step_tol", "quadrature_tol", "max_quadrature_steps"},
                      "propagator");
  PropagatorConfig c = defaults;
  const auto method = get_or<std::string>(j, "method", method_name(defaults.method));
  if (method == "krylov")
    c.method = PropagationMethod::krylov;
  else if (method == "spectral")
    c.method = PropagationMethod::spectral;
  else if (method == "quadrature")
    c.method = PropagationMethod::quadrature;
  else
    throw ConfigError("propagator.method must be 'krylov', 'spectral' or 'quadrature'");
  c.krylov_dim = get_or(j, "krylov_dim", c.krylov_dim);
  c.max_krylov_dim = get_or(j, "max_krylov_dim", std::max(c.max_krylov_dim, c.krylov_dim));
  c.step_tol = get_or(j, "step_tol", c.step_tol);
  c.quadrature_tol = get_or(j, "quadrature_tol", c.quadrature_tol);
  c.max_quadrature_steps = get_or(j, "max_quadrature_steps", c.max_quadrature_steps);
  c.validate();
  return c;
}

Json to_json(const Window& w) {
  const char* kind = w.kind == WindowKind::hann ? "hann" : w.kind == WindowKind::gaussian ? "gaussian" : "none";
  Json j = {{"kind", kind}};
  if (w.kind == WindowKind::gaussian) j["sigma_t"] = w.sigma_t;
  return j;
}

Window window_from_json(const Json& j) {
  Window w;
  if (j.is_string()) {
    const auto k = j.get<std::string>();
    if (k == "hann") w.kind = WindowKind::hann;
    else if (k == "gaussian") w.kind = WindowKind::gaussian;
    else if (k == "none") w.kind = WindowKind::none;
    else throw ConfigError("window must be 'hann', 'gaussian' or 'none'");
    return w;
  }
  reject_unknown_keys(j, {"kind", "sigma_t"}, "window");
  w = window_from_json(j.at("kind"));
  w.sigma_t = get_or(j, "sigma_t", 0.0);
  if (w.sigma_t < 0.0) throw ConfigError("window.sigma_t must be >= 0");
  return w;
}

std::string model_text(const HamiltonianSpec& spec) { return to_json(spec).dump(); }

void write_series_csv(std::ostream& os, const TimeSeries& s) {
  os << "# model: " << s.meta.model << '\n'
     << "# site: " << s.meta.site << '\n'
     << "# n_sites: " << s.meta.n_sites << '\n'
     << "# observable: " << axis_name(s.meta.observable) << '\n'
     << "# t_max: " << format_double(s.grid.t_max) << '\n'
     << "# dt: " << format_double(s.grid.dt) << '\n'
     << "# max_norm_drift: " << format_double(s.max_norm_drift) << '\n'
     << "t,m_" << axis_name(s.meta.observable) << '\n';
  for (std::size_t k = 0; k < s.values.size(); ++k)
    os << format_double(s.grid.time(k)) << ',' << format_double(s.values[k]) << '\n';
}

TimeSeries read_series_csv(std::istream& is) {
  std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  char axis = 'x';
  if (const auto pos = all.find("\nt,m_"); pos != std::string::npos && pos + 5 < all.size()) axis = all[pos + 5];
  std::istringstream in(all);
  const std::string header = std::string("t,m_") + axis;
  const auto doc = read_csv(in, header, "series csv");
  if (doc.rows.empty()) throw ConfigError("series csv: no samples");
  TimeSeries s;
  s.meta.model = meta_value(doc, "model", "series csv");
  s.meta.site = int(parse_double(meta_value(doc, "site", "series csv"), "site"));
  s.meta.n_sites = int(parse_double(meta_value(doc, "n_sites", "series csv"), "n_sites"));
  s.meta.observable = parse_axis(axis);
  s.grid.t_max = parse_double(meta_value(doc, "t_max", "series csv"), "t_max");
  s.grid.dt = parse_double(meta_value(doc, "dt", "series csv"), "dt");
  if (auto it = doc.meta.find("max_norm_drift"); it != doc.meta.end())
    s.max_norm_drift = parse_double(it->second, "max_norm_drift");
  for (const auto& r : doc.rows) s.values.push_back(r[1]);
  if (s.values.size() != s.grid.count()) throw ConfigError("series csv: sample count disagrees with t_max/dt");
  return s;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& r) {
  os << "# window: " << to_json(r.window).dump() << '\n'
     << "# t_effective: " << format_double(r.t_effective) << '\n'
     << "# resolution: " << format_double(r.resolution) << '\n'
     << "# dt: " << format_double(r.dt) << '\n'
     << "E,amplitude\n";
  for (std::size_t k = 0; k < r.energies.size(); ++k)
    os << format_double(r.energies[k]) << ',' << format_double(r.amplitude[k]) << '\n';
}

SpectrumReport read_spectrum_csv(std::istream& is) {
  const auto doc = read_csv(is, "E,amplitude", "spectrum csv");
  if (doc.rows.empty()) throw ConfigError("spectrum csv: no rows");
  SpectrumReport r;
  r.window = window_from_json(Json::parse(meta_value(doc, "window", "spectrum csv")));
  r.t_effective = parse_double(meta_value(doc, "t_effective", "spectrum csv"), "t_effective");
  r.resolution = parse_double(meta_value(doc, "resolution", "spectrum csv"), "resolution");
  r.dt = parse_double(meta_value(doc, "dt", "spectrum csv"), "dt");
  for (const auto& row : doc.rows) {
    r.energies.push_back(row[0]);
    r.amplitude.push_back(row[1]);
  }
  return r;
}

Json match_report_json(const MatchReport& report, const std::vector<SpectralPeak>& peaks,
                       const SpectrumTable& spectrum) {
  Json jp = Json::array();
  for (const auto& m : report.matches) {
    const auto& p = peaks.at(m.peak);
    Json e = {{"energy", p.energy}, {"weight", p.weight}, {"amplitude", p.amplitude}, {"matched", m.matched}};
    if (m.level) {
      e["level"] = *m.level;
      e["gap"] = m.gap;
      e["error"] = m.error;
    } else {
      e["level"] = nullptr;
    }
    jp.push_back(e);
  }
  Json orphans = Json::array();
  for (std::size_t k = 0; k < report.matches.size(); ++k)
    if (!report.matches[k].matched) orphans.push_back(k);
  Json unmatched = Json::array();
  for (auto n : report.unmatched_levels)
    unmatched.push_back({{"level", n}, {"gap", spectrum.energy(n) - spectrum.energy(0)}});
  return {{"resolution", report.resolution},
          {"weight_floor", report.weight_floor},
          {"matched_count", report.matched_count},
          {"orphan_count", report.orphan_count},
          {"peaks", jp},
          {"orphans", orphans},
          {"unmatched_levels", unmatched}};
}

void write_collapse_csv(std::ostream& os, const CollapseFamily& family, double x_max,
                        std::optional<double> filter_window) {
  os << "# target_ratio: " << format_double(family.target_ratio) << '\n'
     << "# filter_window: " << (filter_window ? format_double(*filter_window) : std::string("none")) << '\n'
     << "x,m,N,control\n";
  for (const auto& m : family.members) {
    const TimeSeries s = filter_window ? low_pass(m.series, m.n_sites, *filter_window) : m.series;
    const Curve c = rescale_time(s, m.n_sites);
    const std::string tail = "," + std::to_string(m.n_sites) + "," + format_double(m.control) + "\n";
    for (std::size_t k = 0; k < c.x.size(); ++k) {
      if (c.x[k] > x_max * (1.0 + 1e-12)) break;
      os << format_double(c.x[k]) << ',' << format_double(c.y[k]) << tail;
    }
  }
}

Json nu_scan_json(const NuScan& scan) {
  return {{"nu_grid", number_array(scan.nu_grid)},
          {"metrics", number_array(scan.metrics)},
          {"nu_best", scan.nu_best},
          {"warnings", scan.warnings}};
}

void write_profile_csv(std::ostream& os, const CloudProfile& p) {
  os << "# t_window: " << format_double(p.t_window) << '\n';
  for (const auto& f : p.failures) os << "# failure: " << f << '\n';
  os << "j,dm,J_prime,N\n";
  for (std::size_t i = 0; i < p.j_values.size(); ++i)
    os << p.j_values[i] << ',' << format_double(p.dm[i]) << ',' << format_double(p.j_prime) << ',' << p.n_sites
       << '\n';
}

CloudProfile read_profile_csv(std::istream& is) {
  const auto doc = read_csv(is, "j,dm,J_prime,N", "profile csv");
  if (doc.rows.empty()) throw ConfigError("profile csv: no rows");
  CloudProfile p;
  p.j_prime = doc.rows.front()[2];
  p.n_sites = int(doc.rows.front()[3]);
  p.t_window = 1.0 / p.j_prime;
  if (auto it = doc.meta.find("t_window"); it != doc.meta.end()) p.t_window = parse_double(it->second, "t_window");
  for (const auto& r : doc.rows) {
    if (r[2] != p.j_prime || int(r[3]) != p.n_sites) throw ConfigError("profile csv mixes J' or N values");
    p.j_values.push_back(int(r[0]));
    p.dm.push_back(r[1]);
  }
  return p;
}

Json screening_fit_json(const ScreeningFit& f) {
  return {{"xi", f.xi},
          {"window", {f.j_lo, f.j_hi}},
          {"r2", f.r_squared},
          {"slope", f.slope},
          {"intercept", f.intercept},
          {"residuals", number_array(f.residuals)}};
}

}  // namespace mq
