#include "sspeval/promptkit.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::prompt {

using nlohmann::json;

const std::vector<ModelDialect>& all_dialects() {
    static const std::vector<ModelDialect> dialects = {
        {DialectName::Flan, AnswerStyle::YesNo, false, false, "FLAN"},
        {DialectName::Gemma, AnswerStyle::YesNo, true, false, "Gemma"},
        {DialectName::Llama, AnswerStyle::Numeric, true, true, "LLaMA"},
    };
    return dialects;
}

const ModelDialect& dialect(DialectName name) {
    for (const ModelDialect& d : all_dialects()) {
        if (d.name == name) return d;
    }
    throw ConfigError("unknown dialect");
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::ZS: return "ZS";
        case Strategy::FS: return "FS";
        case Strategy::CoT: return "COT";
        case Strategy::FSCoT: return "FSCOT";
    }
    return "ZS";
}

std::string strategy_display_name(Strategy s) {
    switch (s) {
        case Strategy::ZS: return "Zero Shot";
        case Strategy::FS: return "Few Shot";
        case Strategy::CoT: return "Chain of Thought";
        case Strategy::FSCoT: return "Few Shot with Chain of Thought";
    }
    return "Zero Shot";
}

bool is_valid_pair(DialectName name, Strategy strategy) {
    const ModelDialect& d = dialect(name);
    switch (strategy) {
        case Strategy::ZS:
        case Strategy::FS:
            return true;
        case Strategy::CoT:
            return d.supports_reasoning;
        case Strategy::FSCoT:
            return d.supports_fs_reasoning;
    }
    return false;
}

Configuration make_configuration(DialectName name, Strategy strategy) {
    if (!is_valid_pair(name, strategy)) {
        throw ConfigError(std::string("excluded configuration: ") +
                          dialect(name).label + "-" + to_string(strategy));
    }
    const ModelDialect& d = dialect(name);
    return Configuration{d, strategy, d.label + "-" + to_string(strategy)};
}

const std::vector<Configuration>& valid_configurations() {
    static const std::vector<Configuration> configs = [] {
        std::vector<Configuration> out;
        for (const ModelDialect& d : all_dialects()) {
            for (Strategy s : {Strategy::ZS, Strategy::FS, Strategy::CoT,
                               Strategy::FSCoT}) {
                if (is_valid_pair(d.name, s)) out.push_back(make_configuration(d.name, s));
            }
        }
        return out;
    }();
    return configs;
}

const Configuration& configuration_by_id(const std::string& config_id) {
    for (const Configuration& c : valid_configurations()) {
        if (c.config_id == config_id) return c;
    }
    throw ConfigError("unknown configuration id: " + config_id);
}

std::string render_transcript(const corpus::Slice& slice) {
    std::string out;
    for (const corpus::Turn& t : slice.turns) {
        if (!out.empty()) out += '\n';
        switch (t.speaker) {
            case corpus::Speaker::Provider: out += "Doctor: "; break;
            case corpus::Speaker::Patient: out += "Patient: "; break;
            case corpus::Speaker::Other: out += "Other: "; break;
        }
        out += t.text;
    }
    return out;
}

namespace {

const char* kRole =
    "You are a behavior analyst assessing doctor patient interaction to help "
    "doctors with communication feedback. You will be given a small part of a "
    "transcript of a conversation between a doctor and a patient.";

const char* kJob =
    "You have to score the {signal} in this text. Look at each behavior and "
    "look for deviations from normal or neutral behavior, be it positive "
    "(high) or negative (low).";

const char* kYesNoType1 = "Is the {signal} higher than normal?";
const char* kYesNoType2 = "Did you see any presence of {signal} in this slice?";
const char* kNumericScale =
    "The expected scale tags each behavior with an integer: 0 means below "
    "average or not existent, 1 means above average or existent.";

const char* kYesNoAnswer = "Respond only with one word, \"yes\" or \"no\".";
const char* kNumericAnswer = "Return the integer only.";
const char* kYesNoAnswerReasoning =
    "Start your answer with either Yes or No. Explain why you think it was "
    "higher or lower. DO NOT repeat any sentence!";
const char* kNumericAnswerReasoning =
    "Return the integer first, followed by an explanation of the score in two "
    "sentences.";

const char* kNumericExamplesPreamble =
    "Here are examples (please interpret speaker turns accurately based on "
    "the context, even if the diarization may not be perfect):";

std::string dialect_key(DialectName name) {
    switch (name) {
        case DialectName::Flan: return "flan";
        case DialectName::Gemma: return "gemma";
        case DialectName::Llama: return "llama";
    }
    return "flan";
}

std::string substitute_signal(std::string block, const std::string& signal_name) {
    const std::string token = "{signal}";
    size_t pos = 0;
    while ((pos = block.find(token, pos)) != std::string::npos) {
        block.replace(pos, token.size(), signal_name);
        pos += signal_name.size();
    }
    return block;
}

}  // namespace

const PromptTemplates& PromptTemplates::defaults() {
    static const PromptTemplates templates = [] {
        PromptTemplates t;
        TemplateBlocks yes_no;
        yes_no.role = kRole;
        yes_no.job = kJob;
        yes_no.scoring_type1 = kYesNoType1;
        yes_no.scoring_type2_presence = kYesNoType2;
        yes_no.output_answer = kYesNoAnswer;
        yes_no.output_answer_reasoning = kYesNoAnswerReasoning;
        t.by_dialect["flan"] = yes_no;
        t.by_dialect["gemma"] = yes_no;
        TemplateBlocks numeric;
        numeric.role = kRole;
        numeric.job = kJob;
        numeric.scoring_type1 = kNumericScale;
        numeric.scoring_type2_presence = kNumericScale;
        numeric.output_answer = kNumericAnswer;
        numeric.output_answer_reasoning = kNumericAnswerReasoning;
        t.by_dialect["llama"] = numeric;
        return t;
    }();
    return templates;
}

PromptTemplates PromptTemplates::load_overrides(const std::string& path) {
    PromptTemplates out = defaults();
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("template override file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("template override file must be an object");
    for (const auto& [dialect_name, blocks] : j.items()) {
        auto it = out.by_dialect.find(dialect_name);
        if (it == out.by_dialect.end()) {
            throw ConfigError("template override: unknown dialect \"" + dialect_name +
                              "\"");
        }
        if (!blocks.is_object()) {
            throw ParseError("template override: dialect \"" + dialect_name +
                             "\" must map to an object");
        }
        for (const auto& [key, value] : blocks.items()) {
            if (!value.is_string()) {
                throw ParseError("template override: block \"" + key +
                                 "\" must be a string");
            }
            std::string text = value.get<std::string>();
            if (key == "role") it->second.role = text;
            else if (key == "job") it->second.job = text;
            else if (key == "scoring_type1") it->second.scoring_type1 = text;
            else if (key == "scoring_type2_presence") it->second.scoring_type2_presence = text;
            else if (key == "output_answer") it->second.output_answer = text;
            else if (key == "output_answer_reasoning") it->second.output_answer_reasoning = text;
            else throw ConfigError("template override: unknown block \"" + key + "\"");
        }
    }
    return out;
}

const TemplateBlocks& PromptTemplates::blocks(DialectName name) const {
    auto it = by_dialect.find(dialect_key(name));
    if (it == by_dialect.end()) throw ConfigError("templates missing dialect");
    return it->second;
}

std::string scoring_question(const corpus::SignalTask& task, const ModelDialect& d,
                             const PromptTemplates& templates) {
    const TemplateBlocks& b = templates.blocks(d.name);
    const std::string signal_name = util::to_lower(task.display_name);
    const std::string& block = task.signal_type == corpus::SignalType::TypeI
                                   ? b.scoring_type1
                                   : b.scoring_type2_presence;
    return substitute_signal(block, signal_name);
}

FewShotBank build_bank(const corpus::CorpusData& corpus,
                       const std::vector<corpus::RawLabel>& labels,
                       const BankThresholds& thresholds) {
    FewShotBank bank;
    for (const corpus::RawLabel& l : labels) {
        const corpus::Slice* slice = corpus.find(l.visit_id, l.slice_index);
        if (slice == nullptr) continue;
        const corpus::SignalTask& task = corpus::signal_by_id(l.signal_id);
        std::optional<int> cls;
        if (task.signal_type == corpus::SignalType::TypeI) {
            if (l.raw_score <= thresholds.type1_low_max) cls = 0;
            else if (l.raw_score >= thresholds.type1_high_min) cls = 1;
        } else {
            if (l.raw_score <= thresholds.type2_absent_max) cls = 0;
            else if (l.raw_score >= thresholds.type2_present_min) cls = 1;
        }
        if (!cls) continue;
        bank.by_signal[l.signal_id].push_back(
            FewShotExample{render_transcript(*slice), *cls, l.visit_id});
    }
    return bank;
}

FewShotBank load_bank(const std::string& path) {
    json j;
    try {
        j = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("few-shot bank " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError("few-shot bank must be a JSON object");
    FewShotBank bank;
    for (const auto& [signal_id, entries] : j.items()) {
        corpus::signal_by_id(signal_id);
        if (!entries.is_array()) {
            throw ParseError("few-shot bank: \"" + signal_id + "\" must be an array");
        }
        for (const auto& e : entries) {
            FewShotExample ex;
            try {
                ex.text = e.at("text").get<std::string>();
                ex.label = e.at("label").get<int>();
                ex.visit_id = e.at("visit_id").get<std::string>();
            } catch (const json::exception& err) {
                throw ParseError("few-shot bank entry for " + signal_id + ": " +
                                 err.what());
            }
            if (ex.label != 0 && ex.label != 1) {
                throw ValidationError("few-shot bank label must be 0 or 1 (" +
                                      signal_id + ")");
            }
            if (util::trim(ex.text).empty()) {
                throw ValidationError("few-shot bank entry with empty text (" +
                                      signal_id + ")");
            }
            bank.by_signal[signal_id].push_back(std::move(ex));
        }
    }
    return bank;
}

void save_bank(const FewShotBank& bank, const std::string& path) {
    json j = json::object();
    for (const auto& [signal_id, entries] : bank.by_signal) {
        json arr = json::array();
        for (const FewShotExample& e : entries) {
            arr.push_back({{"text", e.text}, {"label", e.label}, {"visit_id", e.visit_id}});
        }
        j[signal_id] = std::move(arr);
    }
    util::write_file(path, j.dump(2) + "\n");
}

std::vector<FewShotExample> select_few_shot(const FewShotBank& bank,
                                            const corpus::SignalTask& task,
                                            const corpus::Slice& target,
                                            int k_per_class, std::uint64_t seed) {
    if (k_per_class < 1) throw ConfigError("k_per_class must be >= 1");
    auto it = bank.by_signal.find(task.signal_id);
    if (it == bank.by_signal.end() || it->second.empty()) {
        throw FewShotUnavailableError("no few-shot examples for task " + task.signal_id);
    }
    std::vector<const FewShotExample*> highs, lows;
    for (const FewShotExample& e : it->second) {
        if (e.visit_id == target.visit_id) continue;  // no leakage from the target visit
        (e.label == 1 ? highs : lows).push_back(&e);
    }
    if (static_cast<int>(highs.size()) < k_per_class ||
        static_cast<int>(lows.size()) < k_per_class) {
        throw FewShotUnavailableError(
            "few-shot bank cannot supply " + std::to_string(k_per_class) +
            " example(s) per class for task " + task.signal_id + " outside visit " +
            target.visit_id);
    }

    // Stream keyed on (seed, task, target) so every cell draws independently
    // and reruns reproduce the same picks.
    std::uint64_t state = seed ^ util::fnv1a64(task.signal_id + "\x1f" + target.visit_id +
                                               "\x1f" + std::to_string(target.slice_index));
    auto sample = [&](std::vector<const FewShotExample*>& pool, int k,
                      std::vector<FewShotExample>& out) {
        for (int i = 0; i < k; ++i) {
            std::uint64_t j = i + util::bounded_draw(state, pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(*pool[i]);
        }
    };
    std::vector<FewShotExample> selected;
    selected.reserve(2 * static_cast<size_t>(k_per_class));
    sample(highs, k_per_class, selected);
    sample(lows, k_per_class, selected);
    return selected;
}

namespace {

std::string yes_no_example_blocks(const std::vector<FewShotExample>& examples,
                                  const std::string& target_transcript) {
    std::string out;
    for (const FewShotExample& e : examples) {
        out += "#TRANSCRIPT: " + e.text + "; #LABEL: " + (e.label == 1 ? "yes" : "no") +
               ";\n";
    }
    out += "#TRANSCRIPT: " + target_transcript + "; #LABEL:";
    return out;
}

std::string numeric_example_block(const std::vector<FewShotExample>& examples,
                                  const std::string& signal_name) {
    std::string out = kNumericExamplesPreamble;
    for (const FewShotExample& e : examples) {
        out += '\n';
        out += (e.label == 1 ? "High " : "Low ") + signal_name + " example: " + e.text;
    }
    return out;
}

}  // namespace

CompiledPrompt compile_prompt(const Configuration& config,
                              const corpus::SignalTask& task,
                              const corpus::Slice& slice,
                              const FewShotBank* bank,
                              const CompileOptions& options) {
    if (!is_valid_pair(config.dialect.name, config.strategy)) {
        throw ConfigError("excluded configuration: " + config.config_id);
    }
    const bool few_shot =
        config.strategy == Strategy::FS || config.strategy == Strategy::FSCoT;
    if (few_shot && bank == nullptr) {
        throw ConfigError("configuration " + config.config_id +
                          " needs a few-shot bank");
    }
    const PromptTemplates& templates =
        options.templates ? *options.templates : PromptTemplates::defaults();
    const TemplateBlocks& blocks = templates.blocks(config.dialect.name);
    const std::string signal_name = util::to_lower(task.display_name);
    const std::string transcript = render_transcript(slice);
    const std::string question = scoring_question(task, config.dialect, templates);
    const bool reasoning =
        config.strategy == Strategy::CoT || config.strategy == Strategy::FSCoT;
    const std::string& output_block =
        reasoning ? blocks.output_answer_reasoning : blocks.output_answer;

    CompiledPrompt out;
    out.config_id = config.config_id;
    out.plan.kind = config.dialect.answer_style == AnswerStyle::Numeric
                        ? ParseKind::LeadingInteger
                        : ParseKind::LeadingYesNo;
    out.plan.reasoning_expected = reasoning;
    out.candidate_tokens = config.dialect.answer_style == AnswerStyle::Numeric
                               ? std::make_pair(std::string("1"), std::string("0"))
                               : std::make_pair(std::string("yes"), std::string("no"));

    const std::string base =
        blocks.role + "\n" + substitute_signal(blocks.job, signal_name);

    std::string text;
    if (!few_shot) {
        // instructions, transcript, task question, output format
        text = base + "\n\nTRANSCRIPT:\n" + transcript + "\n\n" + question + "\n" +
               output_block;
    } else {
        out.few_shot_sources =
            select_few_shot(*bank, task, slice, options.k_per_class, options.seed);
        if (config.dialect.answer_style == AnswerStyle::Numeric) {
            // instructions and examples first, then the transcript to score
            text = base + "\n\n" + question + "\n" +
                   numeric_example_block(out.few_shot_sources, signal_name) +
                   "\n\nTRANSCRIPT:\n" + transcript + "\n\n" + output_block;
        } else {
            // completion style: labeled transcript blocks ending at the
            // unanswered label cue, answer instruction kept up front
            text = base + "\n\n" + question + " " + output_block + "\n\n" +
                   yes_no_example_blocks(out.few_shot_sources, transcript);
        }
    }
    out.full_text = std::move(text);

    if (util::count_occurrences(out.full_text, transcript) != 1) {
        throw ValidationError("compiled prompt must contain the target transcript "
                              "exactly once (" + config.config_id + ", " +
                              task.signal_id + ")");
    }
    return out;
}

}  // namespace ssp::prompt
