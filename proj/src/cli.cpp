#include "escrowsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "escrowsim/digest.hpp"
#include "escrowsim/error.hpp"
#include "escrowsim/forensics.hpp"
#include "escrowsim/scenario.hpp"
#include "escrowsim/trace.hpp"

namespace escrowsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string manifest_json(const RunManifest& m) {
    json doc{
        {"config_digest", hash_hex(m.config_digest)},
        {"seed", m.seed},
        {"trace_path", m.trace_path},
        {"trace_sha256", hash_hex(m.trace_sha256)},
        {"started_sim_s", m.started_sim_s},
        {"finished_sim_s", m.finished_sim_s},
        {"tool_version", m.tool_version},
    };
    return doc.dump(2) + "\n";
}

LogLevel log_level_from_env() {
    const char* v = std::getenv("ESCROWSIM_LOG");
    if (!v) return LogLevel::Quiet;
    std::string s(v);
    if (s == "2" || s == "debug") return LogLevel::Debug;
    if (s == "1" || s == "info") return LogLevel::Info;
    return LogLevel::Quiet;
}

namespace {

void print_issues(const agents::ConfigLoadResult& loaded, const std::string& path,
                  std::ostream& err) {
    for (const auto& issue : loaded.errors)
        err << path << ": " << issue.field << ": " << issue.message << "\n";
}

void print_notices(const agents::ConfigLoadResult& loaded, std::ostream& out) {
    for (const auto& n : loaded.notices) out << "notice: " << n << "\n";
}

/// Writes content via a temp file + rename so a crash mid-write never
/// leaves a half-written file under the final name.
bool write_file_atomic(const fs::path& target, const std::string& content, std::ostream& err) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            err << "IoError: cannot open " << tmp.string() << " for writing\n";
            return false;
        }
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) {
            err << "IoError: write failed for " << tmp.string() << "\n";
            return false;
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        err << "IoError: cannot move " << tmp.string() << " into place: " << ec.message()
            << "\n";
        return false;
    }
    return true;
}

bool ensure_dir(const fs::path& dir, std::ostream& err) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        err << "IoError: cannot create directory " << dir.string() << ": " << ec.message()
            << "\n";
        return false;
    }
    return true;
}

std::string fiat_2dp(double v) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << v;
    return o.str();
}

bool at_least(LogLevel have, LogLevel want) {
    return static_cast<int>(have) >= static_cast<int>(want);
}

}  // namespace

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    agents::ConfigLoadResult loaded = agents::load_config_file(config_path);
    print_notices(loaded, out);
    if (!loaded.config) {
        print_issues(loaded, config_path, err);
        return kExitUsage;
    }
    out << "valid: " << config_path << "\n";
    out << "config_digest: " << hash_hex(agents::config_digest(*loaded.config)) << "\n";
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::ostream& out,
            std::ostream& err) {
    agents::ConfigLoadResult loaded = agents::load_config_file(config_path);
    print_notices(loaded, out);
    if (!loaded.config) {
        print_issues(loaded, config_path, err);
        return kExitUsage;
    }
    const agents::ScenarioConfig& cfg = *loaded.config;
    LogLevel log = log_level_from_env();

    fs::path dir(out_dir);
    if (!ensure_dir(dir, err)) return kExitRuntime;
    // A stale manifest must never outlive its trace; remove it up front so
    // a failed run leaves no manifest at all.
    std::error_code ec;
    fs::remove(dir / "manifest.json", ec);

    try {
        agents::Scenario scenario(cfg);
        scenario.run();
        const agents::RunStats& stats = scenario.stats();
        trace::Trace tr = scenario.take_trace();
        std::string ndjson = trace::to_ndjson(tr);

        fs::path trace_path = dir / "trace.ndjson";
        if (!write_file_atomic(trace_path, ndjson, err)) return kExitRuntime;

        RunManifest m;
        m.config_digest = agents::config_digest(cfg);
        m.seed = cfg.seed;
        m.trace_path = "trace.ndjson";
        m.trace_sha256 = sha256(ndjson);
        m.started_sim_s = 0.0;
        m.finished_sim_s = stats.sim_duration_s;
        if (!write_file_atomic(dir / "manifest.json", manifest_json(m), err))
            return kExitRuntime;

        out << "trace: " << trace_path.string() << "\n";
        out << "manifest: " << (dir / "manifest.json").string() << "\n";
        if (at_least(log, LogLevel::Info)) {
            out << "blocks: " << stats.blocks_mined << "\n";
            out << "victims: " << stats.victims_total << " recovered "
                << stats.victims_recovered << " abandoned " << stats.victims_abandoned
                << "\n";
            out << "sim_duration_s: " << stats.sim_duration_s << "\n";
        }
        if (at_least(log, LogLevel::Debug)) {
            out << "author_polls: " << stats.author_polls << " (active "
                << stats.author_active_polls << ")\n";
            out << "trace_bytes: " << ndjson.size() << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_report(const std::string& trace_path, const ReportOptions& opts, std::ostream& out,
               std::ostream& err) {
    if (opts.format != "json" && opts.format != "csv") {
        err << "unknown report format: " << opts.format << " (expected json or csv)\n";
        return kExitUsage;
    }
    try {
        trace::Trace tr = trace::load_ndjson_file(trace_path);
        forensics::TransactionGraph graph = forensics::build_graph(tr);
        forensics::CostReport cost =
            forensics::cost_report(graph, opts.gas_price, opts.fiat_rate);
        forensics::RevenueReport revenue = forensics::revenue_report(graph);
        std::vector<forensics::Finding> milestones = forensics::detect_milestones(tr);

        fs::path dir(opts.out_dir);
        if (!ensure_dir(dir, err)) return kExitRuntime;
        if (opts.format == "json") {
            std::string doc = forensics::report_json(graph, cost, revenue, milestones);
            if (!write_file_atomic(dir / "report.json", doc, err)) return kExitRuntime;
            out << "report: " << (dir / "report.json").string() << "\n";
        } else {
            if (!write_file_atomic(dir / "cost.csv", forensics::cost_csv(cost), err))
                return kExitRuntime;
            if (!write_file_atomic(dir / "revenue.csv", forensics::revenue_csv(revenue), err))
                return kExitRuntime;
            if (!write_file_atomic(dir / "milestones.csv",
                                   forensics::milestones_csv(milestones), err))
                return kExitRuntime;
            out << "report: " << (dir / "cost.csv").string() << ", "
                << (dir / "revenue.csv").string() << ", "
                << (dir / "milestones.csv").string() << "\n";
        }

        out << "rho=" << cost.rho << " delta=" << cost.delta << " mu=" << cost.mu << "\n";
        out << "total_gas=" << cost.total_gas << "\n";
        out << "total_fiat=" << fiat_2dp(cost.total_fiat) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"deterministic escrow-campaign simulator and trace analyzer", "escrowsim"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string run_out_dir = "out";
    auto* validate = app.add_subcommand("validate", "check a scenario config file");
    validate->add_option("config", config_path, "path to the scenario JSON config")
        ->required();

    auto* run = app.add_subcommand("run", "run a scenario and write its trace + manifest");
    run->add_option("config", config_path, "path to the scenario JSON config")->required();
    run->add_option("--out", run_out_dir, "output directory")->capture_default_str();

    std::string trace_path;
    std::string gas_price_str = gwei(1).to_string();
    ReportOptions ropts;
    auto* report = app.add_subcommand("report", "analyze a trace file");
    report->add_option("trace", trace_path, "path to a trace.ndjson file")->required();
    report->add_option("--gas-price", gas_price_str, "gas price in wei")
        ->capture_default_str();
    report->add_option("--fiat-rate", ropts.fiat_rate, "currency per ether")
        ->capture_default_str();
    report->add_option("--format", ropts.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    report->add_option("--out", ropts.out_dir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (validate->parsed()) return cmd_validate(config_path, out, err);
    if (run->parsed()) return cmd_run(config_path, run_out_dir, out, err);
    if (report->parsed()) {
        try {
            ropts.gas_price = Wei::from_string(gas_price_str);
        } catch (const Error& e) {
            err << "--gas-price: " << e.what() << "\n";
            return kExitUsage;
        }
        return cmd_report(trace_path, ropts, out, err);
    }
    return kExitUsage;
}

}  // namespace escrowsim::cli
