#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cvqkd/errors.hpp"
#include "scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"squeezed-state CV-QKD key rate scenarios"};
    std::string config_path;
    std::string out_dir = ".";
    std::int64_t seed = -1;
    int threads = 0;
    app.add_option("--config", config_path, "scenario configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "directory for the CSV and sidecar (default: .)");
    app.add_option("--seed", seed, "override the configuration seed");
    app.add_option("--threads", threads, "override the configuration thread count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit cleanly, bad flags are config errors
    }

    try {
        std::ifstream in(config_path);
        nlohmann::json raw = nlohmann::json::parse(in);
        if (seed >= 0) raw["seed"] = seed;
        if (threads > 0) raw["threads"] = threads;

        const nlohmann::json resolved = cvqkd::tools::resolve_config(raw);
        const auto paths = cvqkd::tools::run_scenario(resolved, out_dir);
        std::cerr << "wrote " << paths.csv.string() << " (" << paths.rows << " rows) and "
                  << paths.sidecar.string() << "\n";
        return 0;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << config_path << ": " << e.what() << "\n";
        return 2;
    } catch (const cvqkd::tools::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cvqkd::NumericalFailureError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const cvqkd::BracketingFailureError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const cvqkd::EvaluationFailureError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const cvqkd::Error& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
