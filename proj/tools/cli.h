#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sdcert::cli {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunRequest {
  std::string command;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

/// Runs one subcommand and returns the process exit code. Progress and
/// errors go to log.
int run_command(const RunRequest& req, std::ostream& log);

/// Parses argv with the subcommands certify, simulate, mpc-closedform,
/// mpc-suboptimal, contour, example1 and sweep.
int main_entry(int argc, char** argv);

}  // namespace sdcert::cli
