#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sspeval/corpus.hpp"
#include "sspeval/promptkit.hpp"

namespace ssp::infer {

struct RetryPolicy {
    int max_attempts = 3;
    double backoff_s = 1.0;  // doubles per attempt
};

struct BackendConfig {
    std::string endpoint_url;  // e.g. http://host:8000/v1/chat/completions
    std::string model_name;
    std::string api_key_env;   // name of the env var holding the bearer token
    int max_in_flight = 1;
    double timeout_s = 60.0;
    RetryPolicy retry;
    int max_tokens_answer = 16;
    int max_tokens_reasoning = 256;
    int top_logprobs = 20;
};

struct CandidateLogprobs {
    double positive = 0.0;
    double negative = 0.0;
};

struct GenerationResponse {
    std::string text;
    // Present only when both candidate tokens were found in the returned
    // top-logprobs for the first generated position.
    std::optional<CandidateLogprobs> candidate_logprobs;
    // Logprobs came back but did not cover both candidates.
    bool logprobs_without_candidates = false;
    std::optional<long long> prompt_tokens;
    std::optional<long long> completion_tokens;
};

enum class ParseStatus { Direct, LogitFallback, Abstain, TransportError };
enum class AbstainReason { None, NoLogprobs, CandidatesNotInTopK };

const char* to_string(ParseStatus s);
const char* to_string(AbstainReason r);
ParseStatus parse_status_from_string(const std::string& s);
AbstainReason abstain_reason_from_string(const std::string& s);

struct PredictionRecord {
    std::string visit_id;
    int slice_index = 0;
    std::string signal_id;
    std::string config_id;
    std::optional<int> prediction;  // empty unless Direct/LogitFallback
    ParseStatus parse_status = ParseStatus::Abstain;
    AbstainReason abstain_reason = AbstainReason::None;
    std::string raw_text;
    std::optional<double> positive_logprob;
    std::optional<double> negative_logprob;
    long long timestamp_ms = 0;

    std::string key() const;
};

struct ParsedPrediction {
    std::optional<int> prediction;
    ParseStatus status = ParseStatus::Abstain;
    AbstainReason reason = AbstainReason::None;
};

// Total over arbitrary response text: leading yes/no token or leading 0/1
// integer per the plan, then the candidate-logprob argmax, else abstain.
ParsedPrediction parse_prediction(const GenerationResponse& response,
                                  const prompt::ParsePlan& plan) noexcept;

class Backend {
  public:
    virtual ~Backend() = default;
    // Throws TransportError / BackendError on failure.
    virtual GenerationResponse generate(const prompt::CompiledPrompt& prompt) const = 0;
};

// One chat-completion call with retry/backoff; temperature pinned to 0 and
// logprobs requested so the fallback path has something to read.
GenerationResponse generate(const BackendConfig& config,
                            const prompt::CompiledPrompt& prompt);

class HttpBackend : public Backend {
  public:
    explicit HttpBackend(BackendConfig config) : config_(std::move(config)) {}
    GenerationResponse generate(const prompt::CompiledPrompt& prompt) const override;
    const BackendConfig& config() const { return config_; }

  private:
    BackendConfig config_;
};

struct MockRule {
    std::string pattern;  // substring, or glob when it contains '*'; "" = catch-all
    std::string response_text;
    std::map<std::string, double> logprobs;  // token -> logprob
};

// Deterministic test double: first matching rule wins; no match yields an
// empty response (which parses to abstain).
class MockBackend : public Backend {
  public:
    explicit MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {}
    GenerationResponse generate(const prompt::CompiledPrompt& prompt) const override;
    long long call_count() const { return calls_.load(); }

  private:
    std::vector<MockRule> rules_;
    mutable std::atomic<long long> calls_{0};
};

std::vector<MockRule> load_mock_rules(const std::string& path);

// Maps every dialect to the backend that serves it.
class BackendSet {
  public:
    void set(prompt::DialectName name, std::shared_ptr<const Backend> backend);
    const Backend& for_dialect(prompt::DialectName name) const;

  private:
    std::map<int, std::shared_ptr<const Backend>> backends_;
};

struct RunOptions {
    const prompt::FewShotBank* bank = nullptr;  // required with FS/FSCoT configs
    int k_per_class = 1;
    std::uint64_t seed = 0;
    int max_in_flight = 1;
    const prompt::PromptTemplates* templates = nullptr;
    std::function<void(const PredictionRecord&)> on_record;  // progress hook
};

struct RunResult {
    std::vector<PredictionRecord> records;  // sorted by (visit, slice, signal, config)
    long long newly_generated = 0;
    long long skipped_journaled = 0;
    long long transport_errors = 0;  // still failing after this run
};

// One record per (labeled slice, task, config). Completed keys found in the
// journal are skipped; transport-error keys are retried. Appends to
// <run_dir>/journal.jsonl as records complete and rewrites the canonical
// sorted predictions file at the end.
RunResult run_experiment(const corpus::CorpusData& corpus,
                         const std::vector<corpus::RawLabel>& labels,
                         const std::vector<prompt::Configuration>& configs,
                         const std::vector<corpus::SignalTask>& tasks,
                         const BackendSet& backends,
                         const std::string& run_dir,
                         const RunOptions& options);

std::string journal_path(const std::string& run_dir);
std::string sorted_predictions_path(const std::string& run_dir);

// Journal IO. Later lines supersede earlier ones for the same key.
std::vector<PredictionRecord> load_journal(const std::string& path);
void sort_records(std::vector<PredictionRecord>& records);

// Canonical serialization: sorted records, timestamps excluded, one JSON
// object per line. The provenance hash is FNV-1a64 over these bytes.
std::string canonical_bytes(const std::vector<PredictionRecord>& sorted_records);
std::string journal_hash(const std::vector<PredictionRecord>& sorted_records);

}  // namespace ssp::infer
