#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "strokebench/strokebench.hpp"

namespace sb = strokebench;

int main(int argc, char** argv) {
    CLI::App app{"Table-tennis stroke detection and classification with a 3D CNN"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "key=value settings file; flags override it");

    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;
    for (const auto& key : sb::kConfigKeys) {
        const std::string name(key.name);
        if (key.is_flag) options[name] = app.add_flag("--" + name, flags[name], std::string(key.help));
        else options[name] = app.add_option("--" + name, values[name], std::string(key.help));
    }

    using Command = int (*)(const sb::RunConfig&, std::ostream&, std::ostream&);
    const std::pair<const char*, Command> commands[] = {
        {"prepare", sb::cmd_prepare},     {"synth", sb::cmd_synth}, {"train", sb::cmd_train},
        {"infer", sb::cmd_infer},         {"eval", sb::cmd_eval},   {"gradcheck", sb::cmd_gradcheck},
    };
    const char* help[] = {
        "write train/validation index CSVs from annotations",
        "generate a synthetic corpus",
        "train a model and write the best checkpoint",
        "write prediction XML for the test videos",
        "score predictions against the test annotations",
        "check analytic gradients against finite differences",
    };
    for (std::size_t i = 0; i < std::size(commands); ++i) app.add_subcommand(commands[i].first, help[i]);

    CLI11_PARSE(app, argc, argv);

    sb::RunConfig cfg;
    try {
        if (!config_path.empty()) sb::load_config_file(cfg, config_path);
        for (const auto& key : sb::kConfigKeys) {
            const std::string name(key.name);
            if (options[name]->count() == 0) continue;
            sb::apply_setting(cfg, name, key.is_flag ? (flags[name] ? "true" : "false") : values[name]);
        }
    } catch (const sb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    for (const auto& [name, run] : commands)
        if (app.got_subcommand(name)) return run(cfg, std::cout, std::cerr);
    return 2;
}
