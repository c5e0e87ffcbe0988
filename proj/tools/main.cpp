#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fm/channel.hpp"
#include "fm/errors.hpp"
#include "fm/scenario.hpp"

namespace {

namespace fs = std::filesystem;

std::string write_report(const std::string& out_dir, const std::string& name,
                         const std::string& content) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw fm::validation_error("cannot create output directory " + out_dir + ": " +
                                   ec.message());
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw fm::validation_error("cannot open output file " + path);
    out << content;
    out.flush();
    if (!out) throw fm::validation_error("failed while writing " + path);
    return path;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moment hierarchy for fermionic maps induced by linear mode transformations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 12345;
    double tolerance = fm::kDefaultTol;
    app.add_option("--config", config_path, "Scenario config file (JSON)");
    app.add_option("--out-dir", out_dir, "Directory for output files (default: .)");
    app.add_option("--seed", seed, "Seed for the verify/benchmark random draws");
    app.add_option("--tolerance", tolerance,
                   "Admission tolerance for load-time constraint checks (default 1e-9)");

    CLI::App* cmd_run = app.add_subcommand("run", "Run the configured scenario and write CSV output");
    CLI::App* cmd_verify =
        app.add_subcommand("verify", "Cross-check every formula family against the brute-force oracle");
    CLI::App* cmd_bench = app.add_subcommand("benchmark", "Time transfer-matrix assembly and expm");
    CLI::App* cmd_sq =
        app.add_subcommand("secondquant", "Dilation / exterior-power / semigroup diagnostics");
    CLI::App* cmd_tm = app.add_subcommand("transfer-matrix", "Dump the moment transfer matrix as CSV");
    CLI::App* cmd_ps =
        app.add_subcommand("postselect", "Run the post-selected map (requires postselect dynamics)");
    for (CLI::App* sub : {cmd_run, cmd_verify, cmd_bench, cmd_sq, cmd_tm, cmd_ps})
        sub->fallthrough();

    std::vector<int> m_list = {10, 20, 40};
    int bench_k = 2;
    int repetitions = 1;
    cmd_bench->add_option("--m-list", m_list, "Mode counts to benchmark (default 10 20 40)");
    cmd_bench->add_option("--k", bench_k, "Order cap for the benchmarked hierarchy (default 2)");
    cmd_bench->add_option("--repetitions", repetitions,
                          "Timing repetitions per m; the minimum is reported (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    auto need_config = [&]() -> fm::ScenarioConfig {
        if (config_path.empty())
            throw fm::validation_error("this subcommand needs --config");
        return fm::load_config(config_path, tolerance);
    };

    try {
        if (cmd_run->parsed() || cmd_ps->parsed()) {
            const fm::ScenarioConfig cfg = need_config();
            if (cmd_ps->parsed() && cfg.dynamics.kind != fm::DynamicsSpec::Kind::postselect)
                throw fm::validation_error(
                    "postselect subcommand: the config must use dynamics of kind 'postselect'");
            const fm::RunResult result = fm::run_scenario(cfg, out_dir);
            for (const std::string& f : result.files_written) std::cout << "wrote " << f << "\n";
            return 0;
        }
        if (cmd_verify->parsed()) {
            const fm::ScenarioConfig cfg = need_config();
            const fm::VerifyReport report = fm::verify_scenario(cfg, seed);
            const std::string text = report.to_json();
            const std::string path = write_report(out_dir, "verify_report.json", text);
            std::cout << text;
            std::cout << "wrote " << path << "\n";
            return report.pass ? 0 : 2;
        }
        if (cmd_bench->parsed()) {
            const fm::BenchmarkReport report =
                fm::run_benchmark(m_list, bench_k, repetitions, seed);
            const std::string text = report.to_json();
            const std::string path = write_report(out_dir, "benchmark.json", text);
            std::cout << text;
            std::cout << "wrote " << path << "\n";
            return 0;
        }
        if (cmd_sq->parsed()) {
            const fm::ScenarioConfig cfg = need_config();
            const std::string text = fm::secondquant_report_json(cfg);
            const std::string path = write_report(out_dir, "secondquant_report.json", text);
            std::cout << text;
            std::cout << "wrote " << path << "\n";
            return 0;
        }
        if (cmd_tm->parsed()) {
            const fm::ScenarioConfig cfg = need_config();
            const fm::ChannelSpec spec = fm::build_channel_spec(cfg, false);
            const fm::MomentTransferMatrix T = fm::transfer_matrix(spec, cfg.k);
            const std::string path =
                write_report(out_dir, "transfer_matrix.csv", fm::transfer_matrix_csv(T));
            std::cout << "wrote " << path << "\n";
            return 0;
        }
        throw fm::validation_error("no subcommand given");
    } catch (const fm::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const fm::verification_error& e) {
        std::cerr << "verification error: " << e.what() << "\n";
        return 2;
    } catch (const fm::resource_error& e) {
        std::cerr << "resource guard: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
