// Command-line driver: discover, classcount, validate.
//
// Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.
#include "scd/scd.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::vector<int> parse_counts(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw scd::ConfigError("--counts: '" + item + "' is not an integer");
        }
    }
    return out;
}

/// Loading the config or its data counts as a configuration error.
scd::ExperimentConfig load_checked(const std::string& path) {
    auto cfg = scd::load_config(path);
    scd::validate_against_data(cfg);
    return cfg;
}

int cmd_discover(const std::string& config_path, const std::string& mode, const std::string& out_dir) {
    scd::ExperimentConfig cfg;
    try {
        cfg = load_checked(config_path);
        fs::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        const auto t0 = std::chrono::steady_clock::now();
        scd::DiscoveryState state = mode == "static" ? scd::run_static(cfg).state : scd::run_dynamic(cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        scd::write_text(fs::path(out_dir) / "report.json", scd::report_to_json(state, mode, secs).dump(2) + "\n");
        scd::write_text(fs::path(out_dir) / "curves.csv", scd::curves_csv(state));
        scd::write_text(fs::path(out_dir) / "clusters.csv", scd::clusters_csv(state));
        std::cout << "final DRA " << state.history.back().dra << " after " << state.round << " round(s); "
                  << state.stop_reason << '\n';
    } catch (const scd::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

int cmd_classcount(const std::string& config_path, std::string counts_text, const std::string& eval_text,
                   const std::string& out_dir) {
    scd::ExperimentConfig cfg;
    std::vector<int> counts;
    std::set<int> eval;
    try {
        cfg = scd::load_config(config_path);
        if (counts_text.empty()) counts_text = "2,3,4,5";
        for (int c : parse_counts(counts_text)) {
            if (std::find(counts.begin(), counts.end(), c) != counts.end()) {
                std::cerr << "warning: duplicate class count " << c << " ignored\n";
                continue;
            }
            counts.push_back(c);
        }
        if (eval_text.empty()) {
            eval = cfg.split.held_out_classes;
        } else {
            for (int c : parse_counts(eval_text)) eval.insert(c);
        }
        if (eval.empty()) throw scd::ConfigError("classcount: no evaluation classes (set split.held_out_classes or --eval)");
        fs::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        const auto rows = scd::run_class_count_experiment(cfg, counts, eval);
        scd::write_text(fs::path(out_dir) / "classcount.csv", scd::classcount_csv(rows));
        for (const auto& r : rows) std::cout << r.class_count << " classes: cluster accuracy " << r.cluster_accuracy << '\n';
    } catch (const scd::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

int cmd_validate(const std::string& config_path) {
    try {
        load_checked(config_path);
    } catch (const std::exception& e) {
        std::cerr << "invalid: " << e.what() << '\n';
        return kConfigError;
    }
    std::cout << "ok\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised class discovery"};
    app.require_subcommand(1);

    std::string config, mode = "dynamic", out = "runs/latest", counts, eval;

    auto* discover = app.add_subcommand("discover", "run static or dynamic discovery");
    discover->add_option("--config", config, "experiment config (JSON) or a previous report.json")->required();
    discover->add_option("--mode", mode, "static or dynamic")->check(CLI::IsMember({"static", "dynamic"}));
    discover->add_option("--out", out, "output directory");

    auto* classcount = app.add_subcommand("classcount", "cluster accuracy vs. number of training classes");
    classcount->add_option("--config", config, "experiment config (JSON)")->required();
    classcount->add_option("--counts", counts, "comma-separated class counts (default 2,3,4,5)");
    classcount->add_option("--eval", eval, "comma-separated evaluation classes (default split.held_out_classes)");
    classcount->add_option("--out", out, "output directory");

    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("--config", config, "experiment config (JSON) or report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    if (*discover) return cmd_discover(config, mode, out);
    if (*classcount) return cmd_classcount(config, counts, eval, out);
    return cmd_validate(config);
}
