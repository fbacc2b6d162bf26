#include "sgnoma/config.hpp"
#include "sgnoma/harness.hpp"
#include "sgnoma/selftest.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace sgnoma;

namespace {

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string out = "results";
    int threads = 0;
    std::string csi;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "key = value config file");
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--trials", c.trials, "trials per cell");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--threads", c.threads, "worker threads (default: hardware concurrency)");
    app->add_option("--csi", c.csi, "exact, estimated, or both (comma separated)");
    app->add_option("--set", c.overrides, "extra key=value override, repeatable");
}

SimulationConfig build_config(const Common& c, bool seed_given, bool trials_given) {
    SimulationConfig cfg = c.config_path.empty() ? SimulationConfig{} : load_config(c.config_path);
    if (seed_given) cfg.seed = c.seed;
    if (trials_given) cfg.trials = c.trials;
    if (!c.csi.empty()) set_config_value(cfg, "csi", c.csi);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + kv);
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

int thread_count(const Common& c) {
    if (c.threads > 0) return c.threads;
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-blind aerial/terrestrial NOMA link simulator"};
    app.require_subcommand(1);

    Common run_opts;
    bool resume = false;
    auto* run = app.add_subcommand("run", "Monte Carlo over the SNR x ATR grid; writes results.csv and results.json");
    add_common(run, run_opts);
    run->add_flag("--resume", resume, "extend an existing run with the same config hash");

    Common scan_opts;
    double scan_snr = 10.0, scan_atr = 0.0;
    std::uint64_t scan_trial = 0;
    auto* scan = app.add_subcommand("scan", "Dump the cycle spectrum and delay costs of one trial");
    add_common(scan, scan_opts);
    scan->add_option("--snr", scan_snr, "SNR in dB");
    scan->add_option("--atr", scan_atr, "ATR in dB");
    scan->add_option("--trial", scan_trial, "trial index");

    Common table_opts;
    std::string table_user = "au";
    std::vector<int> table_n = {1, 5, 10, 15, 20};
    auto* table = app.add_subcommand("table", "BER versus number of training blocks of one user");
    add_common(table, table_opts);
    table->add_option("--user", table_user, "au or tu")->check(CLI::IsMember({"au", "tu"}));
    table->add_option("--n-train", table_n, "training lengths");

    std::uint64_t selftest_seed = 1;
    auto* selftest = app.add_subcommand("selftest", "Structural invariant checks");
    selftest->add_option("--seed", selftest_seed, "seed for the random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const SimulationConfig cfg =
                build_config(run_opts, run->count("--seed") > 0, run->count("--trials") > 0);
            RunOptions opt;
            opt.threads = thread_count(run_opts);
            opt.out_dir = run_opts.out;
            opt.resume = resume;
            opt.quiet = false;
            const GridResult r = run_grid(cfg, opt);
            std::cout << format_csv(r);
            if (!r.failures.empty()) std::cerr << r.failures.size() << " estimation failures logged in results.json\n";
        } else if (*scan) {
            const SimulationConfig cfg =
                build_config(scan_opts, scan->count("--seed") > 0, scan->count("--trials") > 0);
            write_scan(Scenario(cfg), scan_snr, scan_atr, scan_trial, scan_opts.out);
            std::cout << "wrote " << scan_opts.out << "/cycle_spectrum.csv, delay_cost.csv, scan.json\n";
        } else if (*table) {
            SimulationConfig cfg =
                build_config(table_opts, table->count("--seed") > 0, table->count("--trials") > 0);
            RunOptions opt;
            opt.threads = thread_count(table_opts);
            opt.quiet = false;
            const TrainingTable t =
                run_training_table(cfg, table_user == "au" ? User::AU : User::TU, table_n, opt);
            const std::string text = format_training_table(t);
            std::filesystem::create_directories(table_opts.out);
            std::ofstream(std::filesystem::path(table_opts.out) / ("training_" + table_user + ".csv")) << text;
            std::cout << text;
        } else if (*selftest) {
            bool ok = true;
            for (const CheckResult& c : run_selftest(selftest_seed)) {
                std::printf("%s %-28s value=%.3e limit=%.3e %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                            c.limit, c.detail.c_str());
                ok = ok && c.pass;
            }
            return ok ? 0 : 1;
        }
    } catch (const HashMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
