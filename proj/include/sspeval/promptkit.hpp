#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sspeval/corpus.hpp"

namespace ssp::prompt {

enum class Strategy { ZS, FS, CoT, FSCoT };
enum class DialectName { Flan, Gemma, Llama };
enum class AnswerStyle { YesNo, Numeric };

struct ModelDialect {
    DialectName name = DialectName::Flan;
    AnswerStyle answer_style = AnswerStyle::YesNo;
    bool supports_reasoning = false;     // CoT allowed
    bool supports_fs_reasoning = false;  // FS + CoT allowed
    std::string label;                   // "FLAN", "Gemma", "LLaMA"
};

const ModelDialect& dialect(DialectName name);
const std::vector<ModelDialect>& all_dialects();

struct Configuration {
    ModelDialect dialect;
    Strategy strategy = Strategy::ZS;
    std::string config_id;  // e.g. "LLaMA-FSCOT"
};

// The nine admissible dialect/strategy pairs in report column order.
const std::vector<Configuration>& valid_configurations();
bool is_valid_pair(DialectName name, Strategy strategy);
Configuration make_configuration(DialectName name, Strategy strategy);
const Configuration& configuration_by_id(const std::string& config_id);

const char* to_string(Strategy s);
std::string strategy_display_name(Strategy s);

struct FewShotExample {
    std::string text;  // rendered slice transcript
    int label = 0;     // binary class the example illustrates
    std::string visit_id;
};

struct FewShotBank {
    std::map<std::string, std::vector<FewShotExample>> by_signal;
};

struct BankThresholds {
    double type1_low_max = 2.0;
    double type1_high_min = 5.0;
    double type2_absent_max = 1.0;
    double type2_present_min = 3.0;
};

// Builds the example pool from slices whose raw scores are extreme.
FewShotBank build_bank(const corpus::CorpusData& corpus,
                       const std::vector<corpus::RawLabel>& labels,
                       const BankThresholds& thresholds = {});
FewShotBank load_bank(const std::string& path);
void save_bank(const FewShotBank& bank, const std::string& path);

enum class ParseKind { LeadingYesNo, LeadingInteger };

struct ParsePlan {
    ParseKind kind = ParseKind::LeadingYesNo;
    bool reasoning_expected = false;
};

struct CompiledPrompt {
    std::string config_id;
    std::string full_text;
    ParsePlan plan;
    // (positive, negative) answer tokens for the logit fallback.
    std::pair<std::string, std::string> candidate_tokens;
    // Provenance of the injected examples, in injection order.
    std::vector<FewShotExample> few_shot_sources;
};

// "Doctor:"/"Patient:"/"Other:" prefixed utterance lines.
std::string render_transcript(const corpus::Slice& slice);

// Per-dialect wording blocks; "{signal}" is replaced with the lowercased
// signal display name.
struct TemplateBlocks {
    std::string role;
    std::string job;
    std::string scoring_type1;
    std::string scoring_type2_presence;
    std::string output_answer;
    std::string output_answer_reasoning;
};

struct PromptTemplates {
    std::map<std::string, TemplateBlocks> by_dialect;  // keys flan/gemma/llama

    static const PromptTemplates& defaults();
    // JSON override file with the same keys; unspecified blocks keep their
    // default wording.
    static PromptTemplates load_overrides(const std::string& path);

    const TemplateBlocks& blocks(DialectName name) const;
};

// Task instruction for a dialect: yes/no dialects ask the Type-I
// "higher than normal" or Type-II "any presence" question; the numeric
// dialect states the integer scale.
std::string scoring_question(const corpus::SignalTask& task, const ModelDialect& d,
                             const PromptTemplates& templates = PromptTemplates::defaults());

struct CompileOptions {
    int k_per_class = 1;
    std::uint64_t seed = 0;
    const PromptTemplates* templates = nullptr;  // null = defaults
};

// Deterministic sample of k examples per class for the task, excluding
// entries from the target slice's visit; highs precede lows.
std::vector<FewShotExample> select_few_shot(const FewShotBank& bank,
                                            const corpus::SignalTask& task,
                                            const corpus::Slice& target,
                                            int k_per_class, std::uint64_t seed);

// Assembles the full prompt for one (configuration, task, slice). The bank
// is required for FS/FSCoT and ignored otherwise.
CompiledPrompt compile_prompt(const Configuration& config,
                              const corpus::SignalTask& task,
                              const corpus::Slice& slice,
                              const FewShotBank* bank = nullptr,
                              const CompileOptions& options = {});

}  // namespace ssp::prompt
