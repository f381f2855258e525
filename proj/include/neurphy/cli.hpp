#pragma once

// Command implementations behind the `neurphy` tool. Each returns a process
// exit code: 0 success, 2 usage/config, 3 IO, 4 numerical abort.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neurphy/config.hpp"
#include "neurphy/error.hpp"
#include "neurphy/eval.hpp"

namespace neurphy::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCode code) noexcept;
std::string tool_version();

/// Reads NEURPHY_SEED; empty when unset. Throws kConfig on a malformed value.
std::optional<std::uint64_t> env_seed();

/// Run directory layout.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.ini"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.nphy"; }
  std::filesystem::path metrics() const { return dir / "metrics.csv"; }
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
};

int cmd_generate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_train(const std::filesystem::path& data, const RunConfig& cfg, const std::filesystem::path& out_dir,
              std::ostream& log);

struct EvalOptions {
  std::vector<eval::Stage> stages{std::begin(eval::kAllStages), std::end(eval::kAllStages)};
  std::uint64_t eval_seed = 0;
  /// Overshoot horizon for the tables; 0 means the run's D.
  std::size_t overshoot = 0;
  /// Output directory; empty means the run directory.
  std::filesystem::path out_dir;
  /// Dataset override; empty means the one recorded in the manifest.
  std::filesystem::path data;
};
int cmd_eval(const std::filesystem::path& run_dir, const EvalOptions& options, std::ostream& log);

int cmd_rollout(const std::filesystem::path& run_dir, std::int64_t task_id, std::size_t start, std::size_t horizon,
                const std::filesystem::path& out, std::uint64_t eval_seed, std::ostream& log);
int cmd_manifold(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir, std::uint64_t eval_seed,
                 std::ostream& log);
int cmd_plot(const std::filesystem::path& in, const std::filesystem::path& out, const std::string& color_by,
             std::ostream& log);

/// Parses arguments and dispatches; used by the executable.
int main(int argc, char** argv);

}  // namespace neurphy::cli
