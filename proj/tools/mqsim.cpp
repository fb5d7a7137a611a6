// mqsim: measurement-quench simulations from a JSON run config.

#include "mqapp/app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::string out = "mq_out";
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "run config (JSON)");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--jobs", f.jobs, "worker threads (default: config, then MQ_JOBS, then 1)");
  sub->add_option("--seed", f.seed, "measurement seed for sampled outcomes");
}

}  // namespace

int main(int argc, char** argv) {
  using mq::Json;
  CLI::App app{"Measurement-quench simulations: quench, spectroscopy, collapse, cloud, selftest"};
  app.set_version_flag("--version", mq::app::tool_version());
  app.require_subcommand(1);
  Flags flags;
  const std::map<std::string, std::string> help{
      {"quench", "ground state, measurement and m(t) series"},
      {"spectroscopy", "spectrum of m(t), peaks and exact-gap matching"},
      {"collapse", "finite-size collapse of TFIC or Kondo families"},
      {"cloud", "Kondo screening-cloud profiles and fits"},
      {"selftest", "quick internal consistency checks"}};
  for (const auto& name : mq::app::command_names()) add_common(app.add_subcommand(name, help.at(name)), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << Json{{"error", {{"code", 2}, {"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return mq::app::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Json config = Json::object();
  if (!flags.config.empty()) {
    std::ifstream is(flags.config);
    if (!is) {
      std::cerr << Json{{"error", {{"code", 2}, {"kind", "config"}, {"message", "cannot read " + flags.config}}}}.dump()
                << '\n';
      return mq::app::kExitConfig;
    }
    try {
      is >> config;
    } catch (const Json::exception& e) {
      std::cerr << Json{{"error", {{"code", 2}, {"kind", "config"}, {"message", e.what()}}}}.dump() << '\n';
      return mq::app::kExitConfig;
    }
  }
  mq::app::RunOptions options;
  options.out = flags.out;
  options.jobs = flags.jobs;
  options.seed = flags.seed;
  return mq::app::run_command(command, config, options, std::cerr);
}
