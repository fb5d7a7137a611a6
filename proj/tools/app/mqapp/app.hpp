#pragma once

// Subcommand drivers of the mqsim tool: config parsing, model pipelines and
// artifact output with a checksummed manifest.

#include "mq/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mq::app {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitPartial = 4 };

/// Some results were produced, others failed. Maps to exit code 4.
class PartialError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string tool_version();
std::string sha256_hex(std::string_view data);

/// flag > config "jobs" > MQ_JOBS > 1.
int resolve_jobs(std::optional<int> flag, const Json& config);

struct RunOptions {
  std::filesystem::path out = "mq_out";
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

/// Writes each artifact through a temporary file and rename, records its
/// checksum, and writes manifest.json last.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const Json& value);
  void add_timing(const std::string& stage, double seconds);
  void add_notice(std::string text) { notices_.push_back(std::move(text)); }
  const std::vector<std::string>& notices() const { return notices_; }
  void write_manifest(const std::string& command, const Json& config, int exit_code);

 private:
  std::filesystem::path dir_;
  Json artifacts_ = Json::array();
  Json timings_ = Json::object();
  std::vector<std::string> notices_;
};

/// Ground state and evolution of one measurement quench. Kondo chains use the
/// S^z = 0 sector and its measurement union; other models use the full basis
/// and a parity ground state when the model conserves parity.
TimeSeries quench_series(const HamiltonianSpec& model, const MeasurementSpec& measurement, const TimeGrid& grid,
                         const PropagatorConfig& propagator);

/// Config with flag overrides applied; keys not used by the command are rejected.
Json effective_config(const std::string& command, Json config, const RunOptions& options);

/// Runs a subcommand; returns the exit code and prints an error JSON line on `err` on failure.
int run_command(const std::string& command, const Json& config, const RunOptions& options, std::ostream& err);

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"quench", "spectroscopy", "collapse", "cloud", "selftest"};
  return names;
}

}  // namespace mq::app
