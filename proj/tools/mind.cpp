// mind: augment / validate / stats / train / eval / gradcheck / synth.

#include "mind/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>

#include <functional>
#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

int main(int argc, char** argv) {
    // Logs go to stderr so stdout carries only the JSON report.
    spdlog::set_default_logger(spdlog::stderr_color_mt("mind"));

    CLI::App app{"MIND rationale toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::map<std::string, std::string> path_flags;
    std::vector<std::string> overrides;
    std::string log_level = "info";

    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "root seed");
    app.add_option("--out", out_dir, "output directory");
    for (const char* key : {"dataset", "eval_dataset", "positive_pool", "negative_pool", "checkpoint"}) {
        std::string flag = std::string("--") + key;
        std::replace(flag.begin() + 2, flag.end(), '_', '-');
        app.add_option(flag, path_flags[key], std::string("override ") + key);
    }
    app.add_option("--set", overrides, "override any key, e.g. --set mining.k=2")->allow_extra_args(false)->take_all();
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    using Command = std::function<int(const mind::RunConfig&, std::ostream&)>;
    const std::vector<std::tuple<const char*, const char*, Command>> commands = {
        {"augment", "generate positive/negative rationale pools", mind::cli::cmd_augment},
        {"validate", "check dataset and pool integrity", mind::cli::cmd_validate},
        {"stats", "report pool sizes and expansion factor", mind::cli::cmd_stats},
        {"train", "train the toy model and write a checkpoint", mind::cli::cmd_train},
        {"eval", "two-phase inference accuracy, plain and forced-negative", mind::cli::cmd_eval},
        {"gradcheck", "finite-difference gradient suites", mind::cli::cmd_gradcheck},
        {"synth", "write the synthetic attribute-lookup corpus to --out", mind::cli::cmd_synth},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : mind::cli::kValidation;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        std::vector<nlohmann::json> layers;
        if (!config_path.empty()) layers.push_back(mind::load_config_file(config_path));
        nlohmann::json flags = nlohmann::json::object();
        if (seed) flags["seed"] = *seed;
        if (!out_dir.empty()) flags["output_dir"] = out_dir;
        for (const auto& [key, value] : path_flags)
            if (!value.empty()) flags[key] = value;
        for (const auto& o : overrides) flags.merge_patch(mind::override_patch(o));
        layers.push_back(flags);
        const mind::RunConfig cfg = mind::make_run_config(layers);
        for (const auto& [name, help, fn] : commands)
            if (app.got_subcommand(name)) return fn(cfg, std::cout);
    } catch (...) {
        return mind::cli::exit_code_for(std::current_exception());
    }
    return mind::cli::kOk;
}
