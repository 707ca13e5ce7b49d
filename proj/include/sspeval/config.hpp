#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sspeval/corpus.hpp"
#include "sspeval/inference.hpp"
#include "sspeval/promptkit.hpp"

namespace ssp::config {

// Minimal TOML-style value. Arrays hold strings only; that is all the
// config schema needs.
struct TomlValue {
    enum class Kind { String, Integer, Float, Boolean, StringArray };
    Kind kind = Kind::String;
    std::string str;
    long long integer = 0;
    double number = 0.0;
    bool boolean = false;
    std::vector<std::string> array;
};

// Parses a TOML subset into a flat "section.key" map: [section] and
// [section.sub] headers, bare keys, # comments, basic "..." strings,
// integers, floats, booleans, and single-line arrays of strings.
std::map<std::string, TomlValue> parse_toml(const std::string& text);

struct BackendSettings {
    std::string kind = "mock";  // mock | http
    infer::BackendConfig http;  // endpoint/model/secret env var/limits
    std::string mock_rules;     // rule file path; empty = always-abstain mock
};

struct RunConfig {
    // [paths]
    std::string transcripts;
    std::string labels;
    std::string metadata;
    std::string lexicon;
    std::string bank;  // optional; built from the labels when empty
    std::string run_dir = "run";

    // [slicing]
    double window_s = 180.0;
    int min_words = 20;

    // [prompts]
    std::string template_overrides;

    // [run] filters; empty means everything
    std::vector<std::string> configs;
    std::vector<std::string> tasks;
    std::optional<std::uint64_t> seed;
    int k_per_class = 1;
    infer::RetryPolicy retry;  // [retry], applied to every http backend

    // [analysis]
    std::vector<std::string> analyses;  // empty = all
    double quantile = 0.25;
    double lambda = 0.1;
    std::string out_dir;  // empty = <run_dir>/reports

    std::map<std::string, BackendSettings> backends;  // keys flan/gemma/llama
};

RunConfig load_config(const std::string& path);

// The configuration/task lists after the [run] filters, in canonical order.
std::vector<prompt::Configuration> enabled_configurations(const RunConfig& cfg);
std::vector<corpus::SignalTask> enabled_tasks(const RunConfig& cfg);

// Subcommand bodies. Exit codes: 0 success, 1 validation or analysis
// error, 2 transport errors remain after the run.
int cmd_validate(const RunConfig& cfg);
int cmd_slice(const RunConfig& cfg);
int cmd_prompt_preview(const RunConfig& cfg, const std::string& config_id,
                       const std::string& signal_id, const std::string& visit_id,
                       int slice_index);
int cmd_run(const RunConfig& cfg);
int cmd_analyze(const RunConfig& cfg, const std::vector<std::string>& which);
int cmd_ensemble(const RunConfig& cfg, std::optional<double> lambda);

}  // namespace ssp::config
