#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sspeval/config.hpp"
#include "sspeval/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Batch evaluation of prompted language models on social-signal tasks"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "TOML run configuration")->required();
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "override run.seed");
    std::string run_dir;
    auto* run_dir_opt = app.add_option("--run-dir", run_dir, "override paths.run_dir");

    auto* validate = app.add_subcommand("validate", "check the config and input files");
    auto* slice = app.add_subcommand("slice", "print the sliced corpus as CSV");

    auto* preview = app.add_subcommand("prompt-preview", "print one compiled prompt verbatim");
    std::string pv_config, pv_signal, pv_visit;
    int pv_slice = 0;
    preview->add_option("--configuration", pv_config, "configuration id, e.g. LLaMA-FS")
        ->required();
    preview->add_option("--signal", pv_signal, "signal id, e.g. provider_warmth")
        ->required();
    preview->add_option("--visit", pv_visit, "visit id")->required();
    preview->add_option("--slice", pv_slice, "slice index")->required();

    auto* run = app.add_subcommand("run", "generate predictions into the journal");

    auto* analyze = app.add_subcommand("analyze", "emit the report bundle from the journal");
    std::vector<std::string> which;
    analyze->add_option("--which", which, "subset of analyses to run");

    auto* ensemble = app.add_subcommand("ensemble", "run only the stacked-ensemble analysis");
    double lambda = 0.0;
    auto* lambda_opt = ensemble->add_option("--lambda", lambda, "override analysis.lambda");

    CLI11_PARSE(app, argc, argv);

    try {
        ssp::config::RunConfig cfg = ssp::config::load_config(config_path);
        if (seed_opt->count()) cfg.seed = seed;
        if (run_dir_opt->count()) cfg.run_dir = run_dir;

        if (validate->parsed()) return ssp::config::cmd_validate(cfg);
        if (slice->parsed()) return ssp::config::cmd_slice(cfg);
        if (preview->parsed()) {
            return ssp::config::cmd_prompt_preview(cfg, pv_config, pv_signal, pv_visit, pv_slice);
        }
        if (run->parsed()) return ssp::config::cmd_run(cfg);
        if (analyze->parsed()) return ssp::config::cmd_analyze(cfg, which);
        if (ensemble->parsed()) {
            std::optional<double> l;
            if (lambda_opt->count()) l = lambda;
            return ssp::config::cmd_ensemble(cfg, l);
        }
    } catch (const ssp::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
