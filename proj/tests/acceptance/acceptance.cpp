// Acceptance suite: one PASS/FAIL line per criterion, each bounded by its
// runtime limit. A criterion that throws is a FAIL with the error as detail.
// Exit status is nonzero only with --strict and at least one FAIL.

#include "mq/errors.hpp"
#include "mqapp/app.hpp"
#include "support/dense_oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace {

using namespace mq;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Verdict()> run;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

fs::path g_out;

// Runs a subcommand into g_out/<sub>; throws on a nonzero exit with the error line.
fs::path run_app(const std::string& command, const Json& config, const std::string& sub, int jobs = 1) {
  app::RunOptions o;
  o.out = g_out / sub;
  o.jobs = jobs;
  fs::remove_all(o.out);
  std::ostringstream err;
  const int code = app::run_command(command, config, o, err);
  if (code != app::kExitOk) {
    auto msg = err.str();
    while (!msg.empty() && std::isspace(static_cast<unsigned char>(msg.back()))) msg.pop_back();
    throw std::runtime_error(command + " exited " + std::to_string(code) + ": " + msg);
  }
  return o.out;
}

Json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("missing " + p.string());
  return Json::parse(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Verdict post_collapse_normalization() {
  double m0_err = 0.0, p_err = 0.0;
  auto check = [&](const LinearOperator& evolve_op, const StateVector& ground, BasisPtr target) {
    for (int site = 1; site <= 8; ++site) {
      const MeasurementSpec m{site};
      p_err = std::max(p_err, std::abs(outcome_probability(ground, m).up - 0.5));
      const auto c = collapse(ground, m, target);
      const auto s = magnetization_series(evolve_op, c, site, {0.0, 0.05});
      m0_err = std::max(m0_err, std::abs(s.values.front() - 1.0));
    }
  };
  for (const HamiltonianSpec& spec : {HamiltonianSpec{TficSpec{8, 1.0}}, HamiltonianSpec{LongRangeIsingSpec{8, 3.0, 1.0}}}) {
    const auto op = build_operator(spec);
    const auto g = ground_state_with_parity(op);
    if (g.parity != +1) throw std::runtime_error("expected a parity-even ground state");
    check(op, g.pair.vector, nullptr);
  }
  const KondoChainSpec kondo{8, 0.5};
  const auto sector = build_sector_basis(8, {4});
  const auto un = post_measurement_sector({}, *sector);
  check(build_kondo_chain(kondo, un), ground_state(build_kondo_chain(kondo, sector)).vector, un);
  return {m0_err <= 1e-10 && p_err <= 1e-10, "max|m(0)-1| = " + fmt(m0_err) + ", max|p_up-1/2| = " + fmt(p_err)};
}

// ---------------------------------------------------------------- 2

Verdict propagator_cross_validation() {
  double dist = 0.0, drift = 0.0;
  for (int n : {8, 10}) {
    const auto op = build_tfic({n, 1.0});
    const auto full = full_spectrum(op);
    const auto g = ground_state_with_parity(op);
    const auto psi0 = collapse(g.pair.vector, {}).state;
    const double e0 = op.expectation(psi0);
    StateVector psi = psi0;
    for (int k = 1; k <= 40; ++k) {
      psi = krylov_step(op, psi, 0.5);
      dist = std::max(dist, distance(psi, spectral_evolve(full, psi0, 0.5 * k)));
      drift = std::max(drift, std::abs(op.expectation(psi) - e0));
    }
  }
  return {dist <= 1e-8 && drift <= 1e-8, "max state distance = " + fmt(dist) + ", max energy drift = " + fmt(drift)};
}

// ---------------------------------------------------------------- 3

Verdict spectral_identity() {
  double err = 0.0;
  const TimeGrid grid{20.0, 0.05};
  for (const HamiltonianSpec& spec : {HamiltonianSpec{TficSpec{8, 1.0}}, HamiltonianSpec{LongRangeIsingSpec{8, 0.5, 1.0}},
                                      HamiltonianSpec{LongRangeIsingSpec{8, 3.0, 1.0}}}) {
    const auto op = build_operator(spec);
    const auto sm = spectral_magnetization(full_spectrum(op), 1, grid);
    const auto c = collapse(ground_state_with_parity(op).pair.vector, {});
    const auto direct = magnetization_series(op, c, 1, grid);
    for (std::size_t k = 0; k < direct.values.size(); ++k)
      err = std::max(err, std::abs(direct.values[k] - sm.series.values[k]));
  }
  return {err <= 1e-8, "max pointwise difference = " + fmt(err)};
}

// ---------------------------------------------------------------- 4

Verdict spectroscopy() {
  struct Outcome {
    int matched = 0, orphans = 0;
    double weight = 0.0;
  };
  auto run = [](double alpha, const std::string& sub) {
    Json cfg = {{"model", {{"type", "long_range_ising"}, {"n_sites", 10}, {"alpha", alpha}, {"b_over_j", 1.0}}}};
    const auto dir = run_app("spectroscopy", cfg, sub);
    const auto match = read_json(dir / "match.json");
    Outcome o;
    o.matched = match.at("matched_count").get<int>();
    o.orphans = match.at("orphan_count").get<int>();
    const auto peaks = read_json(dir / "peaks.json");
    for (const auto& p : peaks.at("peaks"))
      if (p.at("energy").get<double>() > 0.0) o.weight += p.at("weight").get<double>();
    return o;
  };
  const Outcome a3 = run(3.0, "spectro_alpha3");
  const Outcome a05 = run(0.5, "spectro_alpha05");
  const bool pass = a3.orphans == 0 && a05.orphans == 0 && std::abs(a3.weight - 0.5) <= 0.025 &&
                    std::abs(a05.weight - 0.5) <= 0.025 && a3.matched > a05.matched;
  return {pass, "alpha=3: " + std::to_string(a3.matched) + " matched, " + std::to_string(a3.orphans) +
                    " orphans, weight " + fmt(a3.weight) + "; alpha=0.5: " + std::to_string(a05.matched) +
                    " matched, " + std::to_string(a05.orphans) + " orphans, weight " + fmt(a05.weight)};
}

// ---------------------------------------------------------------- 5

Verdict tfic_collapse() {
  Json scan_cfg = {{"analysis", {{"family", "tfic"}, {"sizes", {10, 14, 18}}, {"target_ratio", 1.0}, {"nu", 1.0}}}};
  std::vector<double> grid;
  for (int i = 0; i <= 15; ++i) grid.push_back(0.5 + 0.1 * i);
  scan_cfg["analysis"]["nu_grid"] = grid;
  const auto metric = read_json(run_app("collapse", scan_cfg, "tfic_scan") / "metric.json");
  const auto& scan = metric.at("nu_scan");
  auto at_nu = [&](double nu) {
    for (std::size_t i = 0; i < scan.at("nu_grid").size(); ++i)
      if (std::abs(scan.at("nu_grid")[i].get<double>() - nu) < 1e-9) return scan.at("metrics")[i].get<double>();
    throw std::runtime_error("nu not on the scan grid");
  };
  const double m1 = metric.at("metric_filtered").get<double>();
  const double m05 = at_nu(0.5), m2 = at_nu(2.0);
  const double nu_best = scan.at("nu_best").get<double>();

  auto raw_at = [&](double lambda, const std::string& sub) {
    Json cfg = {{"analysis", {{"family", "tfic"}, {"sizes", {10, 14, 18}}, {"control", lambda}}}};
    return read_json(run_app("collapse", cfg, sub) / "metric.json").at("metric_raw").get<double>();
  };
  const double critical = raw_at(1.0, "tfic_critical");
  const double control = raw_at(0.9, "tfic_control");

  const bool ratio_ok = 2.0 * m1 <= m05 && 2.0 * m1 <= m2;
  const bool nu_ok = nu_best >= 0.8 - 1e-9 && nu_best <= 1.2 + 1e-9;
  const bool critical_ok = critical < control;
  return {ratio_ok && nu_ok && critical_ok,
          "filtered metric nu=0.5/1/2: " + fmt(m05) + "/" + fmt(m1) + "/" + fmt(m2) + (ratio_ok ? " ok" : " (need 2x)") +
              "; nu_best = " + fmt(nu_best) + (nu_ok ? " ok" : " (outside [0.8, 1.2])") +
              "; raw metric lambda_c " + fmt(critical) + " vs lambda=0.9 " + fmt(control) +
              (critical_ok ? " ok" : " (not below)")};
}

// ---------------------------------------------------------------- 7

const std::vector<double> kJPrimes{0.3, 0.4, 0.5, 0.6, 0.7};

fs::path cloud_dir() { return g_out / "cloud20"; }

Verdict kondo_cloud() {
  Json cfg = {{"analysis", {{"n_sites", 20}}}};
  auto jps = kJPrimes;
  jps.push_back(1.0);
  cfg["analysis"]["j_primes"] = jps;
  app::RunOptions o;
  o.out = cloud_dir();
  o.jobs = 1;
  std::ostringstream err;
  const int code = app::run_command("cloud", cfg, o, err);
  if (code != app::kExitOk && code != app::kExitPartial)
    throw std::runtime_error("cloud exited " + std::to_string(code) + ": " + err.str());
  const auto fits = read_json(cloud_dir() / "fits.json");

  std::istringstream clean_csv(slurp(cloud_dir() / ("profile_" + std::to_string(jps.size() - 1) + ".csv")));
  bool clean_zero = true;
  for (double v : read_profile_csv(clean_csv).dm) clean_zero = clean_zero && v == 0.0;

  std::string xis, r2s;
  bool fits_ok = true, decreasing = true;
  double prev = INFINITY, min_r2 = 1.0;
  for (const auto& f : fits.at("fits")) {
    if (f.contains("error")) {
      fits_ok = false;
      xis += " J'=" + fmt(f.at("j_prime").get<double>()) + ":error";
      continue;
    }
    const double xi = f.at("xi").get<double>();
    const double r2 = f.at("r2").get<double>();
    min_r2 = std::min(min_r2, r2);
    fits_ok = fits_ok && r2 >= 0.9;
    decreasing = decreasing && xi < prev;
    prev = xi;
    xis += " " + fmt(xi);
  }
  bool law_ok = false;
  std::string law = "no law fit";
  if (!fits.at("law").is_null()) {
    const double a = fits.at("law").at("A").get<double>();
    const double r2 = fits.at("law").at("r2").get<double>();
    law_ok = r2 >= 0.9 && a >= 0.09 && a <= 0.27;
    law = "A = " + fmt(a) + ", law r2 = " + fmt(r2);
  }
  return {clean_zero && fits_ok && decreasing && law_ok,
          std::string("J'=1 profile ") + (clean_zero ? "zero" : "NONZERO") + "; xi(J'=0.3..0.7) =" + xis +
              (decreasing ? "" : " (not decreasing)") + "; min tail r2 = " + fmt(min_r2) + "; " + law};
}

// ---------------------------------------------------------------- 6

Verdict kondo_collapse() {
  if (!fs::exists(cloud_dir() / "fits.json")) kondo_cloud();
  auto run = [](const Json& table_source, const std::string& sub) {
    Json cfg = {{"analysis", {{"family", "kondo"}, {"sizes", {12, 16, 20}}, {"target_ratio", 2.0}}}};
    cfg["analysis"].update(table_source);
    const auto metric = read_json(run_app("collapse", cfg, sub) / "metric.json");
    const auto& w = metric.at("scaling_window");
    std::string controls;
    for (const auto& c : metric.at("controls")) controls += " " + fmt(c.get<double>());
    const double pre = w.at("pre_metric").get<double>();
    const double post = w.at("post_metric").get<double>();
    return Verdict{pre < post, "J' =" + controls + "; filtered metric x<1/2: " + fmt(pre) + ", x>1/2: " + fmt(post)};
  };
  try {
    return run({{"xi_table_file", (cloud_dir() / "fits.json").string()}}, "kondo_collapse");
  } catch (const std::exception& e) {
    // Not a pass: the measured table is required. The fitted law only shows
    // whether the scaling window itself holds.
    Verdict v{false, std::string("measured table unusable: ") + e.what()};
    const auto law = read_json(cloud_dir() / "fits.json").at("law");
    if (law.is_null()) return v;
    Json table = Json::array();
    for (int i = 1; i <= 20; ++i) {
      const double jp = 0.05 * i;
      table.push_back({jp, std::exp(law.at("A").get<double>() / jp + law.at("intercept").get<double>())});
    }
    try {
      v.detail += "; diagnostic with the fitted law: " + run({{"xi_table", table}}, "kondo_collapse_law").detail;
    } catch (const std::exception& e2) {
      v.detail += "; diagnostic with the fitted law failed: " + std::string(e2.what());
    }
    return v;
  }
}

// ---------------------------------------------------------------- 8

Verdict oracle_equivalence() {
  std::mt19937_64 rng(2024);
  double err = 0.0;
  for (int n = 2; n <= 6; ++n) {
    std::vector<HamiltonianSpec> specs{LongRangeIsingSpec{n, 0.5, 1.0}, LongRangeIsingSpec{n, 3.0, 0.7},
                                       LongRangeIsingSpec{n, 1.0, 1.0, PairConvention::all}};
    if (n >= 3) specs.push_back(TficSpec{n, 0.9});
    if (n >= 4 && n % 2 == 0) specs.push_back(KondoChainSpec{n, 0.5});
    const auto basis = SectorBasis::full(n);
    std::vector<oracle::Mat> dense_h;
    std::vector<LinearOperator> ops;
    for (const auto& s : specs) {
      dense_h.push_back(oracle::dense(terms_of(s)));
      ops.push_back(build_operator(s));
    }
    for (int trial = 0; trial < 100; ++trial) {
      const oracle::Vec v = oracle::random_vec(basis->size(), rng);
      const auto psi = oracle::from_vec(basis, v);
      for (std::size_t k = 0; k < ops.size(); ++k)
        err = std::max(err, (oracle::as_vec(ops[k].apply(psi)) - dense_h[k] * v).cwiseAbs().maxCoeff());
      for (Axis a : {Axis::x, Axis::y, Axis::z})
        for (int site = 1; site <= n; ++site) {
          const double expect = v.dot(oracle::single(n, a, site) * v).real();
          err = std::max(err, std::abs(expectation(a, site, psi) - expect));
          const oracle::Mat proj = oracle::projector_up(n, a, site);
          const double p = v.dot(proj * v).real();
          if (p < 1e-6) continue;
          const auto c = collapse(psi, {site, a});
          err = std::max(err, (oracle::as_vec(c.state) - proj * v / std::sqrt(p)).cwiseAbs().maxCoeff());
        }
    }
  }
  return {err <= 1e-10, "max deviation from dense Kronecker constructions = " + fmt(err)};
}

// ---------------------------------------------------------------- 9

Verdict determinism() {
  const std::vector<std::pair<std::string, Json>> runs{
      {"quench", Json::parse(R"({"model": {"type": "tfic", "n_sites": 8, "lambda": 0.9}, "grid": {"t_max": 20}})")},
      {"spectroscopy",
       Json::parse(R"({"model": {"type": "long_range_ising", "n_sites": 8, "alpha": 3}, "grid": {"t_max": 100}})")},
      {"collapse", Json::parse(R"({"analysis": {"sizes": [6, 8, 10], "nu_grid": [0.5, 1, 2]}})")},
      {"cloud", Json::parse(R"({"analysis": {"n_sites": 10, "j_primes": [0.4, 0.5, 0.6, 1.0]}})")},
      {"selftest", Json::object()}};
  std::string detail;
  bool pass = true;
  for (const auto& [cmd, cfg] : runs) {
    const auto a = run_app(cmd, cfg, "det_" + cmd + "_a", 1);
    const auto b = run_app(cmd, cfg, "det_" + cmd + "_b", 1);
    const auto c = run_app(cmd, cfg, "det_" + cmd + "_c", 2);
    auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json"), mc = read_json(c / "manifest.json");
    bool same = ma.at("artifacts") == mb.at("artifacts") && ma.at("config_sha256") == mb.at("config_sha256");
    bool same_parallel = ma.at("artifacts") == mc.at("artifacts");
    for (const auto& art : ma.at("artifacts")) {
      const auto name = art.at("file").get<std::string>();
      const auto body = slurp(a / name);
      same = same && body == slurp(b / name);
      same_parallel = same_parallel && body == slurp(c / name);
    }
    pass = pass && same && same_parallel;
    detail += cmd + (same ? (same_parallel ? " identical" : " identical serially, differs with --jobs 2") : " DIFFERS") + "; ";
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"acceptance criteria"};
  int only = 0;
  bool strict = false;
  std::string out = "acceptance_out";
  cli.add_option("--only", only, "run a single criterion (1-9)");
  cli.add_flag("--strict", strict, "exit nonzero when a criterion fails");
  cli.add_option("--out", out, "artifact directory");
  CLI11_PARSE(cli, argc, argv);
  g_out = out;

  const std::vector<Criterion> criteria{
      {1, "post-collapse normalization", 10, post_collapse_normalization},
      {2, "propagator cross-validation", 60, propagator_cross_validation},
      {3, "spectral identity", INFINITY, spectral_identity},
      {4, "spectroscopy", 300, spectroscopy},
      {5, "TFIC collapse", 900, tfic_collapse},
      {6, "Kondo collapse", 1200, kondo_collapse},
      {7, "Kondo cloud", 1800, kondo_cloud},
      {8, "oracle equivalence", INFINITY, oracle_equivalence},
      {9, "determinism", INFINITY, determinism},
  };

  bool any_fail = false;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = v.pass && in_time;
    any_fail = any_fail || !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " (" << fmt(secs)
              << " s" << (std::isfinite(c.limit_s) ? ", limit " + fmt(c.limit_s) + " s" : std::string()) << ")"
              << std::endl;
  }
  return strict && any_fail ? 1 : 0;
}
