#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "escrowsim/bytes.hpp"
#include "escrowsim/version.hpp"
#include "escrowsim/wei.hpp"

namespace escrowsim::cli {

using escrowsim::kToolVersion;

/// Exit codes are a stable contract for CI harnesses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags or invalid config
inline constexpr int kExitRuntime = 2;  // I/O failures, malformed traces

/// Written next to the trace after a successful run. config_digest is the
/// digest of the canonicalized config JSON, so a manifest pins the exact
/// inputs that produced its trace.
struct RunManifest {
    Hash32 config_digest{};
    std::uint64_t seed = 0;
    std::string trace_path;
    Hash32 trace_sha256{};
    double started_sim_s = 0.0;
    double finished_sim_s = 0.0;
    std::string tool_version{kToolVersion};
};

std::string manifest_json(const RunManifest& m);

struct ReportOptions {
    Wei gas_price = gwei(1);
    double fiat_rate = 175.59;
    std::string format = "json";  // "json" or "csv"
    std::string out_dir = ".";
};

/// Verbosity from ESCROWSIM_LOG: 0/quiet (default), 1/info, 2/debug.
enum class LogLevel : int { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level_from_env();

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);

int cmd_run(const std::string& config_path, const std::string& out_dir, std::ostream& out,
            std::ostream& err);

int cmd_report(const std::string& trace_path, const ReportOptions& opts, std::ostream& out,
               std::ostream& err);

/// Full argument parsing + dispatch; main() is a thin wrapper so tests can
/// drive the CLI in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace escrowsim::cli
