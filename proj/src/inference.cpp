#include "sspeval/inference.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::infer {

using nlohmann::json;

const char* to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::Direct: return "direct";
        case ParseStatus::LogitFallback: return "logit_fallback";
        case ParseStatus::Abstain: return "abstain";
        case ParseStatus::TransportError: return "transport_error";
    }
    return "abstain";
}

const char* to_string(AbstainReason r) {
    switch (r) {
        case AbstainReason::None: return "none";
        case AbstainReason::NoLogprobs: return "no_logprobs";
        case AbstainReason::CandidatesNotInTopK: return "candidates_not_in_top_k";
    }
    return "none";
}

ParseStatus parse_status_from_string(const std::string& s) {
    if (s == "direct") return ParseStatus::Direct;
    if (s == "logit_fallback") return ParseStatus::LogitFallback;
    if (s == "abstain") return ParseStatus::Abstain;
    if (s == "transport_error") return ParseStatus::TransportError;
    throw ParseError("unknown parse status: " + s);
}

AbstainReason abstain_reason_from_string(const std::string& s) {
    if (s == "none") return AbstainReason::None;
    if (s == "no_logprobs") return AbstainReason::NoLogprobs;
    if (s == "candidates_not_in_top_k") return AbstainReason::CandidatesNotInTopK;
    throw ParseError("unknown abstain reason: " + s);
}

std::string PredictionRecord::key() const {
    return visit_id + "\x1f" + std::to_string(slice_index) + "\x1f" + signal_id +
           "\x1f" + config_id;
}

namespace {

// First maximal alphabetic run, lowercased.
std::optional<std::string> first_alpha_token(const std::string& text) {
    size_t i = 0;
    while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) return std::nullopt;
    size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    return util::to_lower(text.substr(i, j - i));
}

std::optional<std::string> first_digit_token(const std::string& text) {
    size_t i = 0;
    while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) return std::nullopt;
    size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    return text.substr(i, j - i);
}

}  // namespace

ParsedPrediction parse_prediction(const GenerationResponse& response,
                                  const prompt::ParsePlan& plan) noexcept {
    ParsedPrediction out;
    std::optional<int> direct;
    if (plan.kind == prompt::ParseKind::LeadingYesNo) {
        if (auto tok = first_alpha_token(response.text)) {
            if (*tok == "yes") direct = 1;
            else if (*tok == "no") direct = 0;
        }
    } else {
        if (auto tok = first_digit_token(response.text)) {
            if (*tok == "1") direct = 1;
            else if (*tok == "0") direct = 0;
        }
    }
    if (direct) {
        out.prediction = direct;
        out.status = ParseStatus::Direct;
        return out;
    }
    if (response.candidate_logprobs) {
        out.prediction = response.candidate_logprobs->positive >=
                                 response.candidate_logprobs->negative
                             ? 1
                             : 0;
        out.status = ParseStatus::LogitFallback;
        return out;
    }
    out.status = ParseStatus::Abstain;
    out.reason = response.logprobs_without_candidates
                     ? AbstainReason::CandidatesNotInTopK
                     : AbstainReason::NoLogprobs;
    return out;
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint_url needs a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Tokens may arrive with leading whitespace or capitalization quirks;
// candidates are matched on the trimmed lowercase form.
bool token_matches(const std::string& token, const std::string& candidate) {
    size_t b = 0;
    while (b < token.size() && std::isspace(static_cast<unsigned char>(token[b]))) ++b;
    return util::iequals(std::string_view(token).substr(b), candidate);
}

void read_top_logprobs(const json& choice, const prompt::CompiledPrompt& prompt,
                       GenerationResponse& out) {
    auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null()) return;
    auto content = lp->find("content");
    if (content == lp->end() || !content->is_array() || content->empty()) return;
    const json& first = (*content)[0];
    auto top = first.find("top_logprobs");
    if (top == first.end() || !top->is_array()) return;

    std::optional<double> pos, neg;
    for (const json& entry : *top) {
        if (!entry.contains("token") || !entry.contains("logprob")) continue;
        std::string token = entry["token"].get<std::string>();
        double value = entry["logprob"].get<double>();
        if (token_matches(token, prompt.candidate_tokens.first)) {
            pos = pos ? std::max(*pos, value) : value;
        }
        if (token_matches(token, prompt.candidate_tokens.second)) {
            neg = neg ? std::max(*neg, value) : value;
        }
    }
    if (pos && neg) {
        out.candidate_logprobs = CandidateLogprobs{*pos, *neg};
    } else {
        out.logprobs_without_candidates = true;
    }
}

GenerationResponse parse_completion_body(const std::string& body,
                                         const prompt::CompiledPrompt& prompt) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError(std::string("unparseable completion body: ") + e.what());
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw BackendError("completion body has no choices");
    }
    const json& choice = j["choices"][0];
    GenerationResponse out;
    try {
        out.text = choice.at("message").at("content").is_null()
                       ? std::string()
                       : choice.at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("completion body missing message content: ") +
                           e.what());
    }
    read_top_logprobs(choice, prompt, out);
    if (j.contains("usage") && j["usage"].is_object()) {
        const json& u = j["usage"];
        if (u.contains("prompt_tokens")) out.prompt_tokens = u["prompt_tokens"].get<long long>();
        if (u.contains("completion_tokens")) {
            out.completion_tokens = u["completion_tokens"].get<long long>();
        }
    }
    return out;
}

bool retryable_status(int status) {
    return status == 429 || status >= 500;
}

}  // namespace

GenerationResponse generate(const BackendConfig& config,
                            const prompt::CompiledPrompt& prompt) {
    SplitUrl url = split_url(config.endpoint_url);
    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<long long>(config.timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<long long>(config.timeout_s * 1000)));

    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("environment variable " + config.api_key_env +
                              " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body = {
        {"model", config.model_name},
        {"messages", json::array({{{"role", "user"}, {"content", prompt.full_text}}})},
        {"temperature", 0},
        {"logprobs", true},
        {"top_logprobs", config.top_logprobs},
        {"max_tokens", prompt.plan.reasoning_expected ? config.max_tokens_reasoning
                                                      : config.max_tokens_answer},
    };
    const std::string payload = body.dump();

    std::string last_error;
    const int attempts = std::max(1, config.retry.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) {
            double delay = config.retry.backoff_s * std::pow(2.0, attempt - 2);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status / 100 == 2) {
            return parse_completion_body(res->body, prompt);
        }
        std::string excerpt = res->body.substr(0, 200);
        if (retryable_status(res->status)) {
            last_error = "status " + std::to_string(res->status) + ": " + excerpt;
            continue;
        }
        throw BackendError("status " + std::to_string(res->status) + ": " + excerpt);
    }
    throw TransportError(last_error + " (after " + std::to_string(attempts) +
                         " attempts to " + config.endpoint_url + ")");
}

GenerationResponse HttpBackend::generate(const prompt::CompiledPrompt& prompt) const {
    return infer::generate(config_, prompt);
}

namespace {

// '*'-wildcard match anchored at both ends; '*' spans newlines too.
bool glob_match(std::string_view pattern, std::string_view text) {
    size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool rule_matches(const MockRule& rule, const std::string& text) {
    if (rule.pattern.empty()) return true;
    if (rule.pattern.find('*') != std::string::npos) {
        return glob_match(rule.pattern, text);
    }
    return text.find(rule.pattern) != std::string::npos;
}

}  // namespace

GenerationResponse MockBackend::generate(const prompt::CompiledPrompt& prompt) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    for (const MockRule& rule : rules_) {
        if (!rule_matches(rule, prompt.full_text)) continue;
        GenerationResponse out;
        out.text = rule.response_text;
        if (!rule.logprobs.empty()) {
            auto find = [&](const std::string& candidate) -> std::optional<double> {
                for (const auto& [token, lp] : rule.logprobs) {
                    if (util::iequals(token, candidate)) return lp;
                }
                return std::nullopt;
            };
            auto pos = find(prompt.candidate_tokens.first);
            auto neg = find(prompt.candidate_tokens.second);
            if (pos && neg) out.candidate_logprobs = CandidateLogprobs{*pos, *neg};
            else out.logprobs_without_candidates = true;
        }
        return out;
    }
    return GenerationResponse{};
}

std::vector<MockRule> load_mock_rules(const std::string& path) {
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("mock rule file " + path + ": " + e.what());
    }
    if (!j.is_array()) throw ParseError("mock rule file must be a JSON array");
    std::vector<MockRule> rules;
    rules.reserve(j.size());
    for (const json& entry : j) {
        MockRule r;
        try {
            r.pattern = entry.value("pattern", std::string());
            r.response_text = entry.at("response_text").get<std::string>();
            if (entry.contains("logprobs")) {
                for (const auto& [token, lp] : entry["logprobs"].items()) {
                    r.logprobs[token] = lp.get<double>();
                }
            }
        } catch (const json::exception& e) {
            throw ParseError("mock rule entry: " + std::string(e.what()));
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

void BackendSet::set(prompt::DialectName name, std::shared_ptr<const Backend> backend) {
    backends_[static_cast<int>(name)] = std::move(backend);
}

const Backend& BackendSet::for_dialect(prompt::DialectName name) const {
    auto it = backends_.find(static_cast<int>(name));
    if (it == backends_.end() || !it->second) {
        throw ConfigError(std::string("no backend configured for dialect ") +
                          prompt::dialect(name).label);
    }
    return *it->second;
}

namespace {

json record_to_json(const PredictionRecord& r, bool include_timestamp) {
    json j;
    j["visit_id"] = r.visit_id;
    j["slice_index"] = r.slice_index;
    j["signal_id"] = r.signal_id;
    j["config_id"] = r.config_id;
    if (r.prediction) j["prediction"] = *r.prediction;
    else j["prediction"] = nullptr;
    j["parse_status"] = to_string(r.parse_status);
    if (r.parse_status == ParseStatus::Abstain) {
        j["abstain_reason"] = to_string(r.abstain_reason);
    }
    j["raw_text"] = r.raw_text;
    if (r.positive_logprob) j["positive_logprob"] = *r.positive_logprob;
    if (r.negative_logprob) j["negative_logprob"] = *r.negative_logprob;
    if (include_timestamp) j["timestamp_ms"] = r.timestamp_ms;
    return j;
}

PredictionRecord record_from_json(const json& j) {
    PredictionRecord r;
    r.visit_id = j.at("visit_id").get<std::string>();
    r.slice_index = j.at("slice_index").get<int>();
    r.signal_id = j.at("signal_id").get<std::string>();
    r.config_id = j.at("config_id").get<std::string>();
    if (j.contains("prediction") && !j["prediction"].is_null()) {
        r.prediction = j["prediction"].get<int>();
    }
    r.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
    if (j.contains("abstain_reason")) {
        r.abstain_reason = abstain_reason_from_string(j["abstain_reason"].get<std::string>());
    }
    r.raw_text = j.value("raw_text", std::string());
    if (j.contains("positive_logprob") && !j["positive_logprob"].is_null()) {
        r.positive_logprob = j["positive_logprob"].get<double>();
    }
    if (j.contains("negative_logprob") && !j["negative_logprob"].is_null()) {
        r.negative_logprob = j["negative_logprob"].get<double>();
    }
    r.timestamp_ms = j.value("timestamp_ms", 0LL);
    return r;
}

long long now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::string journal_path(const std::string& run_dir) {
    return (std::filesystem::path(run_dir) / "journal.jsonl").string();
}

std::string sorted_predictions_path(const std::string& run_dir) {
    return (std::filesystem::path(run_dir) / "predictions.sorted.jsonl").string();
}

std::vector<PredictionRecord> load_journal(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};
    std::vector<PredictionRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError("journal line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void sort_records(std::vector<PredictionRecord>& records) {
    std::sort(records.begin(), records.end(),
              [](const PredictionRecord& a, const PredictionRecord& b) {
                  return std::tie(a.visit_id, a.slice_index, a.signal_id, a.config_id) <
                         std::tie(b.visit_id, b.slice_index, b.signal_id, b.config_id);
              });
}

std::string canonical_bytes(const std::vector<PredictionRecord>& sorted_records) {
    std::string out;
    for (const PredictionRecord& r : sorted_records) {
        out += record_to_json(r, false).dump();
        out += '\n';
    }
    return out;
}

std::string journal_hash(const std::vector<PredictionRecord>& sorted_records) {
    return "fnv1a64:" + util::fnv1a64_hex(canonical_bytes(sorted_records));
}

RunResult run_experiment(const corpus::CorpusData& corpus,
                         const std::vector<corpus::RawLabel>& labels,
                         const std::vector<prompt::Configuration>& configs,
                         const std::vector<corpus::SignalTask>& tasks,
                         const BackendSet& backends,
                         const std::string& run_dir,
                         const RunOptions& options) {
    for (const prompt::Configuration& c : configs) {
        const bool fs = c.strategy == prompt::Strategy::FS ||
                        c.strategy == prompt::Strategy::FSCoT;
        if (fs && options.bank == nullptr) {
            throw ConfigError("configuration " + c.config_id +
                              " requires a few-shot bank");
        }
    }
    std::filesystem::create_directories(run_dir);

    // Completed journal keys are skipped; transport errors get another try.
    const std::string jpath = journal_path(run_dir);
    std::map<std::string, PredictionRecord> existing;
    for (PredictionRecord& r : load_journal(jpath)) {
        existing[r.key()] = std::move(r);
    }

    struct WorkItem {
        const corpus::Slice* slice;
        const corpus::SignalTask* task;
        const prompt::Configuration* config;
        int label;
    };
    corpus::LabelIndex label_index(labels);
    std::vector<WorkItem> work;
    RunResult result;
    std::map<std::string, PredictionRecord> final_records;
    for (const corpus::Slice& slice : corpus.slices) {
        for (const corpus::SignalTask& task : tasks) {
            auto raw = label_index.raw(slice.visit_id, slice.slice_index, task.signal_id);
            if (!raw) continue;  // unlabeled cells are not evaluated
            int label = corpus::binarize(task, *raw);
            for (const prompt::Configuration& config : configs) {
                PredictionRecord probe;
                probe.visit_id = slice.visit_id;
                probe.slice_index = slice.slice_index;
                probe.signal_id = task.signal_id;
                probe.config_id = config.config_id;
                auto it = existing.find(probe.key());
                if (it != existing.end() &&
                    it->second.parse_status != ParseStatus::TransportError) {
                    ++result.skipped_journaled;
                    final_records[probe.key()] = it->second;
                    continue;
                }
                work.push_back(WorkItem{&slice, &task, &config, label});
            }
        }
    }

    std::ofstream journal(jpath, std::ios::app);
    if (!journal) throw ParseError("cannot open journal for append: " + jpath);
    std::mutex sink_mutex;
    std::atomic<size_t> next{0};
    std::atomic<long long> transport_failures{0};
    std::atomic<long long> completed{0};
    std::atomic<bool> abort{false};
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            if (abort.load(std::memory_order_relaxed)) return;
            size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            const WorkItem& item = work[i];
            PredictionRecord rec;
            rec.visit_id = item.slice->visit_id;
            rec.slice_index = item.slice->slice_index;
            rec.signal_id = item.task->signal_id;
            rec.config_id = item.config->config_id;
            try {
                prompt::CompileOptions copts;
                copts.k_per_class = options.k_per_class;
                copts.seed = options.seed;
                copts.templates = options.templates;
                prompt::CompiledPrompt compiled = prompt::compile_prompt(
                    *item.config, *item.task, *item.slice, options.bank, copts);
                const Backend& backend = backends.for_dialect(item.config->dialect.name);
                GenerationResponse response = backend.generate(compiled);
                ParsedPrediction parsed = parse_prediction(response, compiled.plan);
                rec.prediction = parsed.prediction;
                rec.parse_status = parsed.status;
                rec.abstain_reason = parsed.reason;
                rec.raw_text = response.text;
                if (response.candidate_logprobs) {
                    rec.positive_logprob = response.candidate_logprobs->positive;
                    rec.negative_logprob = response.candidate_logprobs->negative;
                }
            } catch (const TransportError& e) {
                rec.parse_status = ParseStatus::TransportError;
                rec.raw_text = e.what();
                transport_failures.fetch_add(1);
            } catch (const BackendError& e) {
                rec.parse_status = ParseStatus::TransportError;
                rec.raw_text = e.what();
                transport_failures.fetch_add(1);
            } catch (...) {
                // configuration or data fault: stop the run and surface it
                std::lock_guard<std::mutex> lock(sink_mutex);
                if (!first_error) first_error = std::current_exception();
                abort.store(true, std::memory_order_relaxed);
                return;
            }
            rec.timestamp_ms = now_ms();
            std::lock_guard<std::mutex> lock(sink_mutex);
            journal << record_to_json(rec, true).dump() << '\n';
            journal.flush();
            final_records[rec.key()] = rec;
            completed.fetch_add(1);
            if (options.on_record) options.on_record(rec);
        }
    };

    const int pool = std::max(1, std::min<int>(options.max_in_flight,
                                               static_cast<int>(work.size())));
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(pool);
        for (int i = 0; i < pool; ++i) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    result.newly_generated = completed.load();
    result.transport_errors = transport_failures.load();
    result.records.reserve(final_records.size());
    for (auto& [_, r] : final_records) result.records.push_back(std::move(r));
    sort_records(result.records);
    util::write_file(sorted_predictions_path(run_dir), canonical_bytes(result.records));
    return result;
}

}  // namespace ssp::infer
