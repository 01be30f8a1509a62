#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace slotframes::cli {

struct Options {
  std::filesystem::path config;
  std::vector<std::filesystem::path> checkpoints;
  std::string split = "val_iid";
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool force = false;
  std::string suite = "all";  // verify
  std::size_t index = 0;      // visualize: scene index within the split
  std::size_t scale = 8;      // visualize: pixels per image pixel
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Each command returns an exit code; reports go to `out`, progress to `log`.
// ConfigError escapes as a usage error, anything else as a runtime failure.
int cmd_gen_data(const Options& o, std::ostream& out, std::ostream& log);
int cmd_train(const Options& o, std::ostream& out, std::ostream& log);
int cmd_eval(const Options& o, std::ostream& out, std::ostream& log);
int cmd_verify(const Options& o, std::ostream& out, std::ostream& log);
int cmd_visualize(const Options& o, std::ostream& out, std::ostream& log);

/// Runs `command` and maps exceptions to exit codes.
int run_command(const std::string& command, const Options& o, std::ostream& out, std::ostream& log);

}  // namespace slotframes::cli
