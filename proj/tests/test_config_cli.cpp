#include <doctest.h>

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sspeval/config.hpp"
#include "sspeval/errors.hpp"
#include "sspeval/promptkit.hpp"
#include "sspeval/util.hpp"
#include "support/fixture.hpp"

using namespace ssp;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

// redirects fd 1 into a file so command output can be inspected
class CaptureStdout {
  public:
    explicit CaptureStdout(const std::string& path) : path_(path) {
        std::fflush(stdout);
        saved_ = dup(1);
        int f = open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        dup2(f, 1);
        close(f);
    }
    std::string finish() {
        std::fflush(stdout);
        dup2(saved_, 1);
        close(saved_);
        return util::read_file(path_);
    }

  private:
    std::string path_;
    int saved_ = -1;
};

struct Env {
    std::string dir;
    testfix::FixturePaths paths;
    config::RunConfig cfg;
};

Env make_env(const std::string& tag) {
    Env e;
    e.dir = testfix::make_temp_dir(tag);
    e.paths = testfix::write_fixture(e.dir);
    auto config_path = testfix::write_config(e.paths, e.dir + "/run.toml", e.dir + "/run");
    e.cfg = config::load_config(config_path);
    return e;
}

}  // namespace

TEST_CASE("toml subset parses sections, scalars, and arrays") {
    auto values = config::parse_toml(
        "# leading comment\n"
        "[paths]\n"
        "transcripts = \"a\\\"b\\\\c\"  # trailing comment\n"
        "\n"
        "[backend.flan]\n"
        "seed = 42\n"
        "ratio = 0.5\n"
        "flag = true\n"
        "names = [\"x\", \"y\",]\n");
    CHECK(values.at("paths.transcripts").str == "a\"b\\c");
    CHECK(values.at("backend.flan.seed").kind == config::TomlValue::Kind::Integer);
    CHECK(values.at("backend.flan.seed").integer == 42);
    CHECK(values.at("backend.flan.ratio").number == Approx(0.5));
    CHECK(values.at("backend.flan.flag").boolean);
    CHECK(values.at("backend.flan.names").array == std::vector<std::string>{"x", "y"});

    CHECK_THROWS_AS((void)config::parse_toml("loose line\n"), ConfigError);
    CHECK_THROWS_AS((void)config::parse_toml("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS((void)config::parse_toml("a = \"unterminated\n"), ConfigError);
    CHECK_THROWS_AS((void)config::parse_toml("a = [1, 2]\n"), ConfigError);
    CHECK_THROWS_AS((void)config::parse_toml("[bad section]\n"), ConfigError);
    CHECK_THROWS_AS((void)config::parse_toml("a = 12abc\n"), ConfigError);
}

TEST_CASE("run config loads with defaults and rejects unknown keys") {
    auto env = make_env("cfg-load");
    const auto& cfg = env.cfg;
    CHECK(cfg.transcripts == env.paths.transcripts);
    CHECK(cfg.labels == env.paths.labels);
    CHECK(cfg.metadata == env.paths.metadata);
    CHECK(cfg.window_s == Approx(180.0));
    CHECK(cfg.min_words == 20);
    REQUIRE(cfg.seed.has_value());
    CHECK(*cfg.seed == 11);
    CHECK(cfg.k_per_class == 1);
    CHECK(cfg.quantile == Approx(0.25));
    CHECK(cfg.lambda == Approx(0.1));
    CHECK(cfg.retry.max_attempts == 3);
    CHECK(cfg.configs.empty());
    CHECK(cfg.analyses.empty());
    REQUIRE(cfg.backends.count("gemma") == 1);
    CHECK(cfg.backends.at("gemma").kind == "mock");
    CHECK(cfg.backends.at("gemma").mock_rules == env.paths.rules);
    CHECK(cfg.backends.at("gemma").http.max_in_flight == 1);

    auto bad = env.dir + "/bad.toml";
    util::write_file(bad, util::read_file(env.dir + "/run.toml") + "\n[run]\nseed = 4\n");
    CHECK_THROWS_AS((void)config::load_config(bad), ConfigError);  // duplicate key
    util::write_file(bad, "[paths]\ntranscripts = \"x\"\nlabels = \"y\"\nmystery = \"z\"\n");
    CHECK_THROWS_AS((void)config::load_config(bad), ConfigError);
    util::write_file(bad, "[paths]\ntranscripts = \"x\"\nlabels = \"y\"\n"
                          "[slicing]\nwindow_s = -5.0\n");
    CHECK_THROWS_AS((void)config::load_config(bad), ConfigError);
    util::write_file(bad, "[paths]\ntranscripts = \"x\"\nlabels = \"y\"\n"
                          "[backend.flan]\nkind = \"carrier-pigeon\"\n");
    CHECK_THROWS_AS((void)config::load_config(bad), ConfigError);
}

TEST_CASE("run filters keep canonical ordering") {
    auto env = make_env("cfg-filter");
    env.cfg.configs = {"LLaMA-COT", "FLAN-ZS"};
    auto configs = config::enabled_configurations(env.cfg);
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].config_id == "FLAN-ZS");  // registry order, not input order
    CHECK(configs[1].config_id == "LLaMA-COT");
    env.cfg.configs = {"FLAN-COT"};
    CHECK_THROWS_AS((void)config::enabled_configurations(env.cfg), ConfigError);

    env.cfg.tasks = {"patient_distress", "provider_dominance"};
    auto tasks = config::enabled_tasks(env.cfg);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].signal_id == "provider_dominance");
    env.cfg.tasks = {"nonexistent_signal"};
    CHECK_THROWS_AS((void)config::enabled_tasks(env.cfg), ConfigError);
}

TEST_CASE("validate passes the fixture and catches broken inputs") {
    auto env = make_env("cfg-validate");
    CaptureStdout cap(env.dir + "/out1.txt");
    int rc = config::cmd_validate(env.cfg);
    auto out = cap.finish();
    CHECK(rc == 0);
    CHECK(out.find("validation clean") != std::string::npos);
    CHECK(out.find("violation:") == std::string::npos);

    // a label pointing at a slice the corpus does not have
    auto broken_labels = env.dir + "/broken_labels.csv";
    util::write_file(broken_labels,
                     util::read_file(env.paths.labels) + "v99,0,provider_warmth,5\n");
    auto broken = env.cfg;
    broken.labels = broken_labels;
    CaptureStdout cap2(env.dir + "/out2.txt");
    rc = config::cmd_validate(broken);
    out = cap2.finish();
    CHECK(rc == 1);
    CHECK(out.find("violation:") != std::string::npos);
    CHECK(out.find("validation failed") != std::string::npos);

    // ensemble analysis enabled without metadata
    auto no_meta = env.cfg;
    no_meta.metadata.clear();
    no_meta.analyses = {"ensemble"};
    CaptureStdout cap3(env.dir + "/out3.txt");
    rc = config::cmd_validate(no_meta);
    out = cap3.finish();
    CHECK(rc == 1);
    CHECK(out.find("ensemble") != std::string::npos);

    // few-shot configurations without a seed
    auto unseeded = env.cfg;
    unseeded.seed.reset();
    CaptureStdout cap4(env.dir + "/out4.txt");
    rc = config::cmd_validate(unseeded);
    out = cap4.finish();
    CHECK(rc == 1);
    CHECK(out.find("seed") != std::string::npos);

    // zero-shot-only runs are fine without a seed
    unseeded.configs = {"FLAN-ZS", "Gemma-COT"};
    CaptureStdout cap5(env.dir + "/out5.txt");
    rc = config::cmd_validate(unseeded);
    out = cap5.finish();
    CHECK(rc == 0);
}

TEST_CASE("slice report prints summary lines and a csv body") {
    auto env = make_env("cfg-slice");
    CaptureStdout cap(env.dir + "/slice.txt");
    int rc = config::cmd_slice(env.cfg);
    auto out = cap.finish();
    CHECK(rc == 0);
    CHECK(out.find("# visits 10, slices 60, dropped 1") != std::string::npos);
    CHECK(out.find("visit_id,slice_index,segment,word_count,turns") != std::string::npos);
    CHECK(out.find("v01,0,start,") != std::string::npos);
    CHECK(out.find("v01,5,end,") != std::string::npos);
}

TEST_CASE("prompt preview prints the compiled prompt verbatim") {
    auto env = make_env("cfg-preview");
    CaptureStdout cap(env.dir + "/preview.txt");
    int rc = config::cmd_prompt_preview(env.cfg, "FLAN-ZS", "provider_warmth", "v01", 0);
    auto out = cap.finish();
    CHECK(rc == 0);

    auto data = testfix::load_fixture(env.paths);
    const auto* slice = data.corpus.find("v01", 0);
    REQUIRE(slice != nullptr);
    auto expected = prompt::compile_prompt(prompt::configuration_by_id("FLAN-ZS"),
                                           corpus::signal_by_id("provider_warmth"), *slice);
    CHECK(out == expected.full_text + "\n");

    CHECK_THROWS_AS((void)config::cmd_prompt_preview(env.cfg, "FLAN-ZS", "provider_warmth",
                                                     "v01", 99),
                    ValidationError);
    CHECK_THROWS_AS((void)config::cmd_prompt_preview(env.cfg, "FLAN-COT", "provider_warmth",
                                                     "v01", 0),
                    ConfigError);
}

TEST_CASE("run and analyze round trip on a reduced experiment") {
    auto env = make_env("cfg-run");
    env.cfg.configs = {"FLAN-ZS", "Gemma-COT"};
    env.cfg.tasks = {"provider_warmth", "patient_distress"};

    CaptureStdout cap(env.dir + "/run_out.txt");
    int rc = config::cmd_run(env.cfg);
    auto out = cap.finish();
    CHECK(rc == 0);
    CHECK(out.find("records: 240 (new 240, journaled 0)") != std::string::npos);
    CHECK(out.find("journal: fnv1a64:") != std::string::npos);
    CHECK(fs::exists(infer::journal_path(env.cfg.run_dir)));
    CHECK(fs::exists(infer::sorted_predictions_path(env.cfg.run_dir)));

    // rerun resumes from the journal
    CaptureStdout cap2(env.dir + "/rerun_out.txt");
    rc = config::cmd_run(env.cfg);
    out = cap2.finish();
    CHECK(rc == 0);
    CHECK(out.find("records: 240 (new 0, journaled 240)") != std::string::npos);

    // the overall table lands in the reports directory
    CaptureStdout cap3(env.dir + "/analyze_out.txt");
    rc = config::cmd_analyze(env.cfg, {"overall"});
    out = cap3.finish();
    CHECK(rc == 0);
    CHECK(out.find("journal: fnv1a64:") != std::string::npos);
    auto reports = env.cfg.run_dir + "/reports";
    CHECK(fs::exists(reports + "/overall_balanced_accuracy.md"));
    CHECK(fs::exists(reports + "/overall_balanced_accuracy.csv"));
    CHECK(fs::exists(reports + "/label_prevalence.csv"));
    CHECK(fs::exists(reports + "/summary.json"));
    auto summary = nlohmann::json::parse(util::read_file(reports + "/summary.json"));
    CHECK(summary.at("journal").get<std::string>().rfind("fnv1a64:", 0) == 0);
    CHECK(summary.at("records").get<long long>() == 240);

    // the ensemble command reuses the same journal and reports directory
    CaptureStdout cap4(env.dir + "/ens_out.txt");
    rc = config::cmd_ensemble(env.cfg, 0.05);
    out = cap4.finish();
    CHECK(rc == 0);
    CHECK(fs::exists(reports + "/ensemble_folds.csv"));
    CHECK(fs::exists(reports + "/ensemble_tasks.csv"));

    CHECK_THROWS_AS((void)config::cmd_analyze(env.cfg, {"nonsense"}), ConfigError);
    auto fresh = env.cfg;
    fresh.run_dir = env.dir + "/never_ran";
    CHECK_THROWS_AS((void)config::cmd_analyze(fresh, {"overall"}), Error);
}

TEST_CASE("run refuses an http backend with no endpoint") {
    auto env = make_env("cfg-http");
    env.cfg.configs = {"FLAN-ZS"};
    env.cfg.tasks = {"provider_warmth"};
    env.cfg.backends["flan"].kind = "http";
    env.cfg.backends["flan"].http.endpoint_url.clear();
    CHECK_THROWS_AS((void)config::cmd_run(env.cfg), ConfigError);
}
