#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ign/data.hpp"
#include "ign/trainer.hpp"

namespace ign::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Environment variable that overrides the output directory of every command.
constexpr const char* kOutputDirEnv = "IGN_OUTPUT_DIR";

/// Reads an INI-style file: `key = value` lines, optionally grouped under
/// `[section]` headers that only organize the file. Every key must be a
/// TrainConfig key and may appear once; anything else throws ConfigError.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Snapshot written next to a run before training starts and never rewritten.
struct RunManifest {
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string version;
  std::string dataset_kind;
  std::string dataset_path;
  DatasetFingerprint dataset;
  std::string started;
  std::vector<std::string> command;
  std::string resumed_from;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Build identifier compiled into the binary.
std::string version_string();

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Runs one command line (without the program name). Normal output goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ign::cli
