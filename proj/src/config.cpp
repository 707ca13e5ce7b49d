#include "sspeval/config.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <optional>
#include <set>
#include <sstream>

#include "sspeval/analysis.hpp"
#include "sspeval/difficulty.hpp"
#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::config {

namespace {

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_str) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_str = false;
            }
        } else if (c == '"') {
            in_str = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

[[noreturn]] void bad_line(int line_no, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string parse_basic_string(const std::string& s, std::size_t& pos, int line_no) {
    std::string out;
    ++pos;  // opening quote
    while (pos < s.size()) {
        char c = s[pos++];
        if (c == '"') return out;
        if (c == '\\') {
            if (pos >= s.size()) break;
            char e = s[pos++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                default: bad_line(line_no, std::string("unsupported escape \\") + e);
            }
        } else {
            out += c;
        }
    }
    bad_line(line_no, "unterminated string");
}

TomlValue parse_value(const std::string& raw, int line_no) {
    std::string s = util::trim(raw);
    if (s.empty()) bad_line(line_no, "missing value");
    TomlValue v;
    if (s[0] == '"') {
        std::size_t pos = 0;
        v.kind = TomlValue::Kind::String;
        v.str = parse_basic_string(s, pos, line_no);
        if (!util::trim(s.substr(pos)).empty()) bad_line(line_no, "trailing content after string");
        return v;
    }
    if (s[0] == '[') {
        v.kind = TomlValue::Kind::StringArray;
        std::size_t pos = 1;
        auto skip_ws = [&] {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        };
        while (true) {
            skip_ws();
            if (pos >= s.size()) bad_line(line_no, "unterminated array");
            if (s[pos] == ']') {
                ++pos;
                break;
            }
            if (s[pos] != '"') bad_line(line_no, "arrays may hold strings only");
            v.array.push_back(parse_basic_string(s, pos, line_no));
            skip_ws();
            if (pos < s.size() && s[pos] == ',') ++pos;
        }
        if (!util::trim(s.substr(pos)).empty()) bad_line(line_no, "trailing content after array");
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlValue::Kind::Boolean;
        v.boolean = s == "true";
        return v;
    }
    bool looks_float = s.find_first_of(".eE") != std::string::npos;
    try {
        std::size_t used = 0;
        if (looks_float) {
            v.number = std::stod(s, &used);
            v.kind = TomlValue::Kind::Float;
        } else {
            v.integer = std::stoll(s, &used);
            v.number = static_cast<double>(v.integer);
            v.kind = TomlValue::Kind::Integer;
        }
        if (used != s.size()) bad_line(line_no, "cannot parse value '" + s + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_line(line_no, "cannot parse value '" + s + "'");
    }
    return v;
}

bool valid_word(const std::string& s, bool allow_dot) {
    if (s.empty()) return false;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') continue;
        if (allow_dot && c == '.') continue;
        return false;
    }
    return !(allow_dot && (s.front() == '.' || s.back() == '.'));
}

// Typed access over the flat key map; unconsumed keys are a config error.
class Picker {
  public:
    explicit Picker(std::map<std::string, TomlValue> kv) : kv_(std::move(kv)) {}

    std::string str(const std::string& key, std::string def = "") {
        const TomlValue* v = take(key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::String) wrong(key, "a string");
        return v->str;
    }
    long long integer(const std::string& key, long long def) {
        const TomlValue* v = take(key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::Integer) wrong(key, "an integer");
        return v->integer;
    }
    std::optional<long long> integer_opt(const std::string& key) {
        const TomlValue* v = take(key);
        if (!v) return std::nullopt;
        if (v->kind != TomlValue::Kind::Integer) wrong(key, "an integer");
        return v->integer;
    }
    double number(const std::string& key, double def) {
        const TomlValue* v = take(key);
        if (!v) return def;
        if (v->kind != TomlValue::Kind::Integer && v->kind != TomlValue::Kind::Float) {
            wrong(key, "a number");
        }
        return v->number;
    }
    std::vector<std::string> array(const std::string& key) {
        const TomlValue* v = take(key);
        if (!v) return {};
        if (v->kind != TomlValue::Kind::StringArray) wrong(key, "an array of strings");
        return v->array;
    }
    void finish() const {
        for (const auto& [k, _] : kv_) {
            if (!consumed_.count(k)) throw ConfigError("unknown config key '" + k + "'");
        }
    }

  private:
    const TomlValue* take(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return nullptr;
        consumed_.insert(key);
        return &it->second;
    }
    [[noreturn]] static void wrong(const std::string& key, const std::string& want) {
        throw ConfigError("config key '" + key + "' must be " + want);
    }

    std::map<std::string, TomlValue> kv_;
    std::set<std::string> consumed_;
};

const char* dialect_key(prompt::DialectName n) {
    switch (n) {
        case prompt::DialectName::Flan: return "flan";
        case prompt::DialectName::Gemma: return "gemma";
        case prompt::DialectName::Llama: return "llama";
    }
    return "";
}

struct Loaded {
    corpus::CorpusData corpus;
    std::vector<corpus::RawLabel> labels;
    std::optional<std::vector<corpus::VisitMetadata>> metadata;
};

Loaded load_inputs(const RunConfig& cfg, bool need_labels) {
    if (cfg.transcripts.empty()) throw ConfigError("paths.transcripts not set");
    auto visits = corpus::ingest_transcripts(cfg.transcripts);
    Loaded out;
    out.corpus = corpus::build_corpus(visits, cfg.window_s, cfg.min_words);
    if (need_labels) {
        if (cfg.labels.empty()) throw ConfigError("paths.labels not set");
        out.labels = corpus::load_labels(cfg.labels);
    }
    if (!cfg.metadata.empty()) out.metadata = corpus::load_metadata(cfg.metadata);
    return out;
}

std::set<std::string> corpus_visit_ids(const corpus::CorpusData& data) {
    std::set<std::string> ids;
    for (const auto& s : data.slices) ids.insert(s.visit_id);
    return ids;
}

bool uses_few_shot(const std::vector<prompt::Configuration>& configs) {
    return std::any_of(configs.begin(), configs.end(), [](const prompt::Configuration& c) {
        return c.strategy == prompt::Strategy::FS || c.strategy == prompt::Strategy::FSCoT;
    });
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string line = util::trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') bad_line(line_no, "malformed section header");
            section = util::trim(line.substr(1, line.size() - 2));
            if (!valid_word(section, true)) bad_line(line_no, "bad section name '" + section + "'");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) bad_line(line_no, "expected key = value");
        std::string key = util::trim(line.substr(0, eq));
        if (!valid_word(key, false)) bad_line(line_no, "bad key '" + key + "'");
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) bad_line(line_no, "duplicate key '" + full + "'");
        out[full] = parse_value(line.substr(eq + 1), line_no);
    }
    return out;
}

RunConfig load_config(const std::string& path) {
    Picker p(parse_toml(util::read_file(path)));
    RunConfig cfg;
    cfg.transcripts = p.str("paths.transcripts");
    cfg.labels = p.str("paths.labels");
    cfg.metadata = p.str("paths.metadata");
    cfg.lexicon = p.str("paths.lexicon");
    cfg.bank = p.str("paths.bank");
    cfg.run_dir = p.str("paths.run_dir", "run");

    cfg.window_s = p.number("slicing.window_s", 180.0);
    cfg.min_words = static_cast<int>(p.integer("slicing.min_words", 20));

    cfg.template_overrides = p.str("prompts.overrides");

    cfg.configs = p.array("run.configs");
    cfg.tasks = p.array("run.tasks");
    if (auto s = p.integer_opt("run.seed")) {
        if (*s < 0) throw ConfigError("run.seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(*s);
    }
    cfg.k_per_class = static_cast<int>(p.integer("run.k_per_class", 1));

    cfg.retry.max_attempts = static_cast<int>(p.integer("retry.max_attempts", 3));
    cfg.retry.backoff_s = p.number("retry.backoff_s", 1.0);

    cfg.analyses = p.array("analysis.which");
    cfg.quantile = p.number("analysis.q", 0.25);
    cfg.lambda = p.number("analysis.lambda", 0.1);
    cfg.out_dir = p.str("analysis.out_dir");

    for (const char* name : {"flan", "gemma", "llama"}) {
        std::string pre = std::string("backend.") + name + ".";
        BackendSettings b;
        b.kind = p.str(pre + "kind", "mock");
        if (b.kind != "mock" && b.kind != "http") {
            throw ConfigError("backend." + std::string(name) + ".kind must be mock or http");
        }
        b.http.endpoint_url = p.str(pre + "base_url");
        b.http.model_name = p.str(pre + "model");
        b.http.api_key_env = p.str(pre + "api_key_env");
        b.mock_rules = p.str(pre + "mock_rules");
        b.http.max_in_flight = static_cast<int>(p.integer(pre + "max_in_flight", 1));
        b.http.timeout_s = p.number(pre + "timeout_s", 60.0);
        b.http.retry = cfg.retry;
        cfg.backends[name] = std::move(b);
    }
    p.finish();

    if (cfg.window_s <= 0) throw ConfigError("slicing.window_s must be positive");
    if (cfg.min_words < 0) throw ConfigError("slicing.min_words must be non-negative");
    if (cfg.k_per_class < 1) throw ConfigError("run.k_per_class must be at least 1");
    if (!(cfg.quantile > 0.0 && cfg.quantile < 0.5)) {
        throw ConfigError("analysis.q must be in (0, 0.5)");
    }
    if (cfg.lambda < 0) throw ConfigError("analysis.lambda must be non-negative");
    if (cfg.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    for (const auto& [name, b] : cfg.backends) {
        if (b.http.max_in_flight < 1) {
            throw ConfigError("backend." + name + ".max_in_flight must be at least 1");
        }
    }
    return cfg;
}

std::vector<prompt::Configuration> enabled_configurations(const RunConfig& cfg) {
    const auto& all = prompt::valid_configurations();
    if (cfg.configs.empty()) return all;
    std::set<std::string> want;
    for (const auto& id : cfg.configs) {
        prompt::configuration_by_id(id);  // unknown id throws
        want.insert(id);
    }
    std::vector<prompt::Configuration> out;
    for (const auto& c : all) {
        if (want.count(c.config_id)) out.push_back(c);
    }
    return out;
}

std::vector<corpus::SignalTask> enabled_tasks(const RunConfig& cfg) {
    const auto& all = corpus::signal_registry();
    if (cfg.tasks.empty()) return all;
    std::set<std::string> want;
    for (const auto& id : cfg.tasks) {
        corpus::signal_by_id(id);  // unknown id throws
        want.insert(id);
    }
    std::vector<corpus::SignalTask> out;
    for (const auto& t : all) {
        if (want.count(t.signal_id)) out.push_back(t);
    }
    return out;
}

int cmd_validate(const RunConfig& cfg) {
    std::vector<std::string> violations;
    auto check = [&](const std::string& what, auto&& fn) {
        try {
            fn();
            std::printf("ok: %s\n", what.c_str());
            return true;
        } catch (const Error& e) {
            violations.push_back(what + ": " + e.what());
            return false;
        }
    };

    std::vector<prompt::Configuration> configs;
    check("configuration filter", [&] { configs = enabled_configurations(cfg); });
    check("task filter", [&] { enabled_tasks(cfg); });

    std::optional<corpus::CorpusData> data;
    check("transcripts parse and slice", [&] {
        if (cfg.transcripts.empty()) throw ConfigError("paths.transcripts not set");
        auto visits = corpus::ingest_transcripts(cfg.transcripts);
        data = corpus::build_corpus(visits, cfg.window_s, cfg.min_words);
        auto s = corpus::summarize(*data);
        std::printf("  visits %d, slices %d, dropped %d\n", s.n_visits, s.n_slices,
                    s.dropped_slices);
    });

    std::vector<corpus::RawLabel> labels;
    bool labels_ok = check("labels parse", [&] {
        if (cfg.labels.empty()) throw ConfigError("paths.labels not set");
        labels = corpus::load_labels(cfg.labels);
    });
    if (data && labels_ok) {
        long long missing = 0;
        std::string first;
        for (const auto& l : labels) {
            if (!data->find(l.visit_id, l.slice_index)) {
                if (missing == 0) first = l.visit_id + "/" + std::to_string(l.slice_index);
                ++missing;
            }
        }
        if (missing > 0) {
            violations.push_back(std::to_string(missing) +
                                 " labels reference missing slices (first: " + first +
                                 "); unknown visit or dropped by the word filter");
        } else {
            std::printf("ok: labels reference existing slices\n");
        }
    }

    std::set<std::string> want(cfg.analyses.begin(), cfg.analyses.end());
    if (want.empty()) {
        want.insert(analysis::analysis_names().begin(), analysis::analysis_names().end());
    } else {
        for (const auto& w : cfg.analyses) {
            if (std::find(analysis::analysis_names().begin(), analysis::analysis_names().end(),
                          w) == analysis::analysis_names().end()) {
                violations.push_back("unknown analysis '" + w + "'");
            }
        }
    }

    std::optional<std::vector<corpus::VisitMetadata>> metadata;
    if (!cfg.metadata.empty()) {
        check("metadata parses", [&] { metadata = corpus::load_metadata(cfg.metadata); });
    }
    if (data && metadata) {
        std::set<std::string> covered;
        for (const auto& m : *metadata) covered.insert(m.visit_id);
        long long uncovered = 0;
        std::string first;
        for (const auto& v : corpus_visit_ids(*data)) {
            if (!covered.count(v)) {
                if (uncovered == 0) first = v;
                ++uncovered;
            }
        }
        if (uncovered > 0) {
            violations.push_back(std::to_string(uncovered) +
                                 " visits have no metadata row (first: " + first + ")");
        } else {
            std::printf("ok: metadata covers all visits\n");
        }
        if (want.count("ensemble")) {
            for (const auto& m : *metadata) {
                if (m.provider_group.empty()) {
                    violations.push_back("visit " + m.visit_id +
                                         " has no provider_group (required by the ensemble)");
                }
            }
        }
    } else if (want.count("ensemble") && cfg.metadata.empty()) {
        violations.push_back("paths.metadata not set but the ensemble analysis is enabled");
    }

    if (uses_few_shot(configs) && !cfg.seed) {
        violations.push_back("run.seed is required when few-shot configurations are enabled");
    }
    if (!cfg.bank.empty()) {
        check("few-shot bank parses", [&] { prompt::load_bank(cfg.bank); });
    }
    if (!cfg.lexicon.empty()) {
        check("lexicon parses", [&] { difficulty::Lexicon::from_csv(cfg.lexicon); });
    }
    if (!cfg.template_overrides.empty()) {
        check("prompt overrides parse", [&] {
            prompt::PromptTemplates::load_overrides(cfg.template_overrides);
        });
    }
    std::set<std::string> dialects;
    for (const auto& c : configs) dialects.insert(dialect_key(c.dialect.name));
    for (const auto& d : dialects) {
        auto it = cfg.backends.find(d);
        BackendSettings b = it == cfg.backends.end() ? BackendSettings{} : it->second;
        if (b.kind == "http") {
            if (b.http.endpoint_url.empty()) {
                violations.push_back("backend." + d + ".base_url not set for http backend");
            }
            if (b.http.model_name.empty()) {
                violations.push_back("backend." + d + ".model not set for http backend");
            }
        } else if (!b.mock_rules.empty()) {
            check("mock rules for " + d + " parse", [&] { infer::load_mock_rules(b.mock_rules); });
        }
    }

    for (const auto& v : violations) std::printf("violation: %s\n", v.c_str());
    if (violations.empty()) {
        std::printf("validation clean\n");
        return 0;
    }
    std::printf("validation failed (%zu violations)\n", violations.size());
    return 1;
}

int cmd_slice(const RunConfig& cfg) {
    Loaded loaded = load_inputs(cfg, false);
    auto s = corpus::summarize(loaded.corpus);
    std::printf("# visits %d, slices %d, dropped %d\n", s.n_visits, s.n_slices, s.dropped_slices);
    std::printf("# slices per visit: mean %s, sd %s\n",
                util::fixed(s.slices_per_visit.mean, 2).c_str(),
                util::fixed(s.slices_per_visit.sd, 2).c_str());
    auto words_line = [](const char* name, const corpus::DistStats& d) {
        std::printf("# words %s: mean %s, sd %s\n", name, util::fixed(d.mean, 2).c_str(),
                    util::fixed(d.sd, 2).c_str());
    };
    words_line("overall", s.words_overall);
    words_line("start", s.words_start);
    words_line("middle", s.words_middle);
    words_line("end", s.words_end);
    std::printf("visit_id,slice_index,segment,word_count,turns\n");
    for (const auto& sl : loaded.corpus.slices) {
        std::printf("%s,%d,%s,%d,%zu\n", sl.visit_id.c_str(), sl.slice_index,
                    corpus::to_string(sl.segment), sl.word_count, sl.turns.size());
    }
    return 0;
}

int cmd_prompt_preview(const RunConfig& cfg, const std::string& config_id,
                       const std::string& signal_id, const std::string& visit_id,
                       int slice_index) {
    Loaded loaded = load_inputs(cfg, true);
    const auto& config = prompt::configuration_by_id(config_id);
    const auto& task = corpus::signal_by_id(signal_id);
    const corpus::Slice* slice = loaded.corpus.find(visit_id, slice_index);
    if (!slice) {
        throw ValidationError("no such slice: " + visit_id + "/" + std::to_string(slice_index));
    }

    prompt::FewShotBank bank;
    const prompt::FewShotBank* bank_ptr = nullptr;
    prompt::CompileOptions opts;
    opts.k_per_class = cfg.k_per_class;
    if (config.strategy == prompt::Strategy::FS || config.strategy == prompt::Strategy::FSCoT) {
        if (!cfg.seed) throw ConfigError("run.seed is required for few-shot prompts");
        opts.seed = *cfg.seed;
        bank = cfg.bank.empty() ? prompt::build_bank(loaded.corpus, loaded.labels)
                                : prompt::load_bank(cfg.bank);
        bank_ptr = &bank;
    }
    prompt::PromptTemplates templates;
    if (!cfg.template_overrides.empty()) {
        templates = prompt::PromptTemplates::load_overrides(cfg.template_overrides);
        opts.templates = &templates;
    }
    auto compiled = prompt::compile_prompt(config, task, *slice, bank_ptr, opts);
    std::fwrite(compiled.full_text.data(), 1, compiled.full_text.size(), stdout);
    if (compiled.full_text.empty() || compiled.full_text.back() != '\n') std::fputc('\n', stdout);
    return 0;
}

int cmd_run(const RunConfig& cfg) {
    Loaded loaded = load_inputs(cfg, true);
    auto configs = enabled_configurations(cfg);
    auto tasks = enabled_tasks(cfg);
    if (configs.empty()) throw ConfigError("no configurations enabled");
    if (tasks.empty()) throw ConfigError("no tasks enabled");

    infer::RunOptions opts;
    prompt::FewShotBank bank;
    if (uses_few_shot(configs)) {
        if (!cfg.seed) {
            throw ConfigError("run.seed is required when few-shot configurations are enabled");
        }
        bank = cfg.bank.empty() ? prompt::build_bank(loaded.corpus, loaded.labels)
                                : prompt::load_bank(cfg.bank);
        opts.bank = &bank;
    }
    opts.k_per_class = cfg.k_per_class;
    opts.seed = cfg.seed.value_or(0);
    prompt::PromptTemplates templates;
    if (!cfg.template_overrides.empty()) {
        templates = prompt::PromptTemplates::load_overrides(cfg.template_overrides);
        opts.templates = &templates;
    }

    infer::BackendSet backends;
    std::set<prompt::DialectName> dialects;
    for (const auto& c : configs) dialects.insert(c.dialect.name);
    int max_in_flight = 1;
    for (auto d : dialects) {
        auto it = cfg.backends.find(dialect_key(d));
        BackendSettings b = it == cfg.backends.end() ? BackendSettings{} : it->second;
        if (b.kind == "http") {
            if (b.http.endpoint_url.empty() || b.http.model_name.empty()) {
                throw ConfigError(std::string("backend.") + dialect_key(d) +
                                  " needs base_url and model for the http backend");
            }
            backends.set(d, std::make_shared<infer::HttpBackend>(b.http));
        } else {
            std::vector<infer::MockRule> rules;
            if (!b.mock_rules.empty()) rules = infer::load_mock_rules(b.mock_rules);
            backends.set(d, std::make_shared<infer::MockBackend>(std::move(rules)));
        }
        max_in_flight = std::max(max_in_flight, b.http.max_in_flight);
    }
    opts.max_in_flight = max_in_flight;

    std::atomic<long long> done{0};
    opts.on_record = [&](const infer::PredictionRecord&) {
        long long d = ++done;
        if (d % 100 == 0) std::fprintf(stderr, "progress: %lld records\n", d);
    };

    auto result = infer::run_experiment(loaded.corpus, loaded.labels, configs, tasks, backends,
                                        cfg.run_dir, opts);

    std::map<std::string, long long> abstains;
    long long abstain_total = 0;
    for (const auto& r : result.records) {
        if (r.parse_status == infer::ParseStatus::Abstain) {
            ++abstains[r.config_id];
            ++abstain_total;
        }
    }
    std::printf("records: %lld (new %lld, journaled %lld)\n",
                static_cast<long long>(result.records.size()), result.newly_generated,
                result.skipped_journaled);
    std::printf("abstentions: %lld\n", abstain_total);
    for (const auto& [id, n] : abstains) std::printf("  %s: %lld\n", id.c_str(), n);
    std::printf("transport errors: %lld\n", result.transport_errors);
    std::printf("journal: %s\n", infer::journal_hash(result.records).c_str());
    return result.transport_errors > 0 ? 2 : 0;
}

int cmd_analyze(const RunConfig& cfg, const std::vector<std::string>& which) {
    Loaded loaded = load_inputs(cfg, true);
    std::string jp = infer::journal_path(cfg.run_dir);
    auto records = infer::load_journal(jp);
    if (records.empty()) throw ValidationError("journal is empty: " + jp);
    infer::sort_records(records);

    analysis::AnalysisInputs in;
    in.corpus = &loaded.corpus;
    in.labels = &loaded.labels;
    in.metadata = loaded.metadata ? &*loaded.metadata : nullptr;
    in.records = &records;
    in.provenance = infer::journal_hash(records);

    analysis::AnalysisOptions opt;
    opt.which = which.empty() ? cfg.analyses : which;
    opt.quantile = cfg.quantile;
    opt.lambda = cfg.lambda;
    opt.lexicon_path = cfg.lexicon;
    opt.out_dir = cfg.out_dir.empty() ? cfg.run_dir + "/reports" : cfg.out_dir;

    auto outcome = analysis::run_analyses(in, opt);
    for (const auto& n : outcome.notices) std::printf("notice: %s\n", n.c_str());
    for (const auto& w : outcome.written) std::printf("wrote %s\n", w.c_str());
    std::printf("journal: %s\n", in.provenance.c_str());
    return 0;
}

int cmd_ensemble(const RunConfig& cfg, std::optional<double> lambda) {
    RunConfig local = cfg;
    if (lambda) local.lambda = *lambda;
    return cmd_analyze(local, {"ensemble"});
}

}  // namespace ssp::config
