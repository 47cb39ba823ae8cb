#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "tilefreq/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tilefreq: DCT tile compression, LSH neighborhoods, multi-label training"};
    app.require_subcommand(1);

    std::string run_config, run_target;
    CLI::App* run = app.add_subcommand("run", "run a task and its incomplete dependencies");
    run->add_option("--config", run_config, "pipeline config file")->required();
    run->add_option("--target", run_target, "task to bring up to date")->required();

    std::string describe_config;
    CLI::App* describe = app.add_subcommand("describe", "print the task plan with status");
    describe->add_option("--config", describe_config, "pipeline config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad invocation is a config error
    }

    try {
        if (run->parsed()) {
            tilefreq::PipelineConfig config = tilefreq::load_config(run_config);
            tilefreq::run_pipeline(config, run_target);
        } else {
            tilefreq::PipelineConfig config = tilefreq::load_config(describe_config);
            std::fputs(tilefreq::describe_pipeline(config).c_str(), stdout);
        }
    } catch (const tilefreq::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
