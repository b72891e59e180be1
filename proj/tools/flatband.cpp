#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flatband/experiments.hpp"

namespace {

int exit_code(flatband::ErrorCategory c) {
    switch (c) {
    case flatband::ErrorCategory::config: return 2;
    case flatband::ErrorCategory::numeric: return 3;
    case flatband::ErrorCategory::io: return 4;
    }
    return 1;
}

void report_error(const std::string& type, const std::string& cause, const std::string& message, int code) {
    nlohmann::ordered_json j;
    j["error"] = type;
    j["cause"] = cause;
    j["message"] = message;
    j["exit_code"] = code;
    std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven-dissipative flat-band lattice experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;
    std::string convention;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file or manifest.json");
    run->add_option("config", config_path, "config path")->required();
    run->add_option("--output-dir", output_dir, "override the output directory");
    run->add_option("--convention", convention, "decay-length logarithm")->check(CLI::IsMember({"natural", "log10"}));
    auto* list = app.add_subcommand("list", "list experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        std::cout << flatband::format_listing();
        return 0;
    }

    try {
        flatband::Config cfg = flatband::load_config(config_path);
        if (!convention.empty()) cfg.set("convention", convention);
        std::optional<std::filesystem::path> dir;
        if (!output_dir.empty()) dir = output_dir;
        const auto result = flatband::run_experiment(cfg, dir);
        for (const auto& f : result.files) std::cout << (result.output_dir / f).string() << "\n";
        return 0;
    } catch (const flatband::ExperimentFailed& e) {
        const int code = exit_code(e.category());
        report_error(e.name(), e.cause_name(), e.what(), code);
        return code;
    } catch (const flatband::Error& e) {
        const int code = exit_code(e.category());
        report_error(e.name(), e.name(), e.what(), code);
        return code;
    } catch (const std::filesystem::filesystem_error& e) {
        report_error("IoError", "filesystem_error", e.what(), 4);
        return 4;
    }
}
