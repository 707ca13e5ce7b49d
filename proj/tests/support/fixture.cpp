#include "support/fixture.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "sspeval/util.hpp"

namespace ssp::testfix {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& visit_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (int i = 1; i <= 10; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "v%02d", i);
            v.emplace_back(buf);
        }
        return v;
    }();
    return ids;
}

bool non_white_visit(const std::string& visit) {
    return visit == "v02" || visit == "v05" || visit == "v09";
}

// cue planted in one turn of the slice; "" = cue-free
std::string cue_for(const std::string& visit, int slice) {
    static const std::map<std::pair<std::string, int>, std::string> cues = {
        {{"v01", 0}, "beaconword"}, {{"v02", 1}, "mistcue"},    {{"v04", 2}, "glowcue"},
        {{"v05", 3}, "duskcue"},    {{"v06", 0}, "duskcue"},    {{"v09", 2}, "duskcue"},
        {{"v03", 1}, "fernhollow"}, {{"v08", 4}, "fernhollow"}, {{"v10", 5}, "fernhollow"},
    };
    auto it = cues.find({visit, slice});
    return it == cues.end() ? "" : it->second;
}

const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> pool = {
        "well",     "today",  "we",      "can",    "talk",    "about",   "your",
        "sleep",    "and",    "meals",   "i",      "feel",    "tired",   "because",
        "the",      "garden", "keeps",   "me",     "busy",    "that",    "sounds",
        "hard",     "um",     "yeah",    "worried", "thinking", "reasons", "friends",
        "listen",   "happy",  "concerns", "plan",  "walks",   "water",   "rest",
        "home",     "family", "morning", "slowly", "better"};
    return pool;
}

std::string make_turn_text(std::uint64_t& rng, int n_words) {
    const auto& pool = word_pool();
    int split = 0;
    if (n_words >= 8 && (util::splitmix64(rng) & 1)) split = n_words / 2;
    std::string out;
    for (int i = 0; i < n_words; ++i) {
        std::string w = pool[util::bounded_draw(rng, pool.size())];
        if (i == 0 || i == split) {
            w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        }
        if (i) out += ' ';
        out += w;
        if (i + 1 == split || i + 1 == n_words) out += '.';
    }
    return out;
}

void write_transcripts(const std::string& path) {
    std::string out;
    for (const auto& visit : visit_ids()) {
        for (int slice = 0; slice < 6; ++slice) {
            std::string cue = cue_for(visit, slice);
            for (int t = 0; t < 4; ++t) {
                std::uint64_t rng =
                    util::fnv1a64(visit + "/" + std::to_string(slice) + "/" + std::to_string(t));
                int n_words = 7 + static_cast<int>(util::bounded_draw(rng, 6));
                std::string text = make_turn_text(rng, n_words);
                if (t == 0 && !cue.empty()) text += " " + cue + ".";
                const char* speaker =
                    (slice == 3 && t == 3) ? "other" : (t % 2 == 0 ? "doctor" : "patient");
                json j = {{"visit_id", visit},
                          {"speaker", speaker},
                          {"start_s", slice * 180.0 + t * 42.0},
                          {"end_s", slice * 180.0 + t * 42.0 + 35.0},
                          {"text", text}};
                out += j.dump() + "\n";
            }
        }
    }
    // under-length slice that the word filter drops
    json extra = {{"visit_id", "v03"},
                  {"speaker", "patient"},
                  {"start_s", 6 * 180.0 + 5.0},
                  {"end_s", 6 * 180.0 + 12.0},
                  {"text", "Okay thanks see you soon."}};
    out += extra.dump() + "\n";
    util::write_file(path, out);
}

double positive_probability(int sig_idx, int slice_idx, bool non_white) {
    double p = 0.25 + 0.5 * ((sig_idx * 7) % 20) / 19.0;
    if (sig_idx % 5 == 0) {
        if (slice_idx == 5) p += 0.35;
        else if (slice_idx == 0) p -= 0.15;
    }
    if ((sig_idx == 15 || sig_idx == 16) && non_white) p += 0.4;
    return std::clamp(p, 0.05, 0.95);
}

double raw_for(const corpus::SignalTask& task, bool positive, std::uint64_t& rng) {
    auto d = util::splitmix64(rng);
    if (task.signal_type == corpus::SignalType::TypeI) {
        return positive ? 4.0 + static_cast<double>(d % 3) : 1.0 + static_cast<double>(d % 3);
    }
    return positive ? 2.0 + static_cast<double>(d % 2) : 1.0;
}

void write_labels(const std::string& path) {
    const auto& registry = corpus::signal_registry();
    std::string out = "visit_id,slice_index,signal_id,raw_score\n";
    for (const auto& visit : visit_ids()) {
        for (int slice = 0; slice < 6; ++slice) {
            for (std::size_t s = 0; s < registry.size(); ++s) {
                const auto& task = registry[s];
                std::uint64_t rng = util::fnv1a64(visit + "/" + std::to_string(slice) + "/" +
                                                  task.signal_id);
                bool positive;
                if (visit == "v01" && slice == 0) {
                    positive = true;  // the 180-correct slice
                } else if (visit == "v02" && slice == 1) {
                    positive = s % 2 == 0;
                } else if (visit == "v04" && slice == 2) {
                    positive = s < 10;
                } else {
                    double u = static_cast<double>(util::splitmix64(rng) >> 11) * 0x1p-53;
                    positive = u < positive_probability(static_cast<int>(s), slice,
                                                        non_white_visit(visit));
                }
                double raw = raw_for(task, positive, rng);
                out += visit + "," + std::to_string(slice) + "," + task.signal_id + "," +
                       util::fixed(raw, 0) + "\n";
            }
        }
    }
    util::write_file(path, out);
}

void write_metadata(const std::string& path) {
    std::string out = "visit_id,provider_id,provider_group,patient_race\n";
    const char* providers[] = {"dr_a", "dr_b", "dr_c", "dr_d", "dr_e"};
    const char* groups[] = {"g1", "g2", "g3", "g4", "g5"};
    const auto& ids = visit_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += ids[i] + "," + providers[i / 2] + "," + groups[i / 2] + "," +
               (non_white_visit(ids[i]) ? "non_white" : "white") + "\n";
    }
    util::write_file(path, out);
}

void write_lexicon(const std::string& path) {
    util::write_file(path,
                     "category,pattern\n"
                     "Social,friend*\n"
                     "Social,listen*\n"
                     "Social,talk*\n"
                     "Affect,happy\n"
                     "Affect,worr*\n"
                     "Affect,concern*\n"
                     "CogProc,think*\n"
                     "CogProc,because\n"
                     "CogProc,reason*\n"
                     "Informal,um\n"
                     "Informal,yeah\n");
}

const char* number_word(std::size_t i) {
    static const char* words[20] = {"one",     "two",      "three",    "four",    "five",
                                    "six",     "seven",    "eight",    "nine",    "ten",
                                    "eleven",  "twelve",   "thirteen", "fourteen", "fifteen",
                                    "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};
    return words[i % 20];
}

void write_bank(const std::string& path) {
    const std::vector<std::string> bank_visits = {"v07", "v08", "v09", "v10"};
    json j = json::object();
    for (std::size_t s = 0; s < corpus::signal_registry().size(); ++s) {
        const auto& task = corpus::signal_registry()[s];
        json arr = json::array();
        for (int variant = 0; variant < 2; ++variant) {
            std::string text =
                "Doctor: We have plenty of room to go over everything calmly today.\n"
                "Patient: Thank you, I feel heard and settled now. Case " +
                std::string(number_word(s)) + (variant ? " second" : " first") + " strong.";
            arr.push_back({{"text", text},
                           {"label", 1},
                           {"visit_id", bank_visits[(s + variant) % 4]}});
        }
        for (int variant = 0; variant < 2; ++variant) {
            std::string text =
                "Doctor: Next item now.\n"
                "Patient: Fine, whatever works, let us move on quickly. Case " +
                std::string(number_word(s)) + (variant ? " second" : " first") + " faint.";
            arr.push_back({{"text", text},
                           {"label", 0},
                           {"visit_id", bank_visits[(s + 2 + variant) % 4]}});
        }
        j[task.signal_id] = std::move(arr);
    }
    util::write_file(path, j.dump(2) + "\n");
}

void write_rules(const std::string& path) {
    json j = json::array();
    auto rule = [&](const std::string& pattern, const std::string& text) {
        j.push_back({{"pattern", pattern}, {"response_text", text}});
    };
    rule("beaconword", "1 yes.");
    rule("mistcue", "I cannot assess this.");
    j.push_back({{"pattern", "glowcue"},
                 {"response_text", "unclear"},
                 {"logprobs", {{"yes", -0.15}, {"no", -2.0}, {"1", -0.15}, {"0", -2.0}}}});
    rule("*duskcue*Start your answer*", "1 yes.");
    rule("*Here are examples*duskcue*Return the integer first*", "1");
    rule("duskcue", "0 no.");
    rule("*fernhollow*Start your answer*", "0 no.");
    rule("fernhollow", "1 yes.");
    rule("*provider*higher than normal*", "no");
    rule("any presence", "no");
    rule("*score the patient*0 means below average*", "1");
    rule("*score the provider*0 means below average*", "0");
    rule("", "yes");
    util::write_file(path, j.dump(2) + "\n");
}

std::string toml_str(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

FixturePaths write_fixture(const std::string& dir) {
    fs::create_directories(dir);
    FixturePaths p;
    p.dir = dir;
    p.transcripts = (fs::path(dir) / "transcripts.jsonl").string();
    p.labels = (fs::path(dir) / "labels.csv").string();
    p.metadata = (fs::path(dir) / "metadata.csv").string();
    p.lexicon = (fs::path(dir) / "lexicon.csv").string();
    p.bank = (fs::path(dir) / "bank.json").string();
    p.rules = (fs::path(dir) / "mock_rules.json").string();
    write_transcripts(p.transcripts);
    write_labels(p.labels);
    write_metadata(p.metadata);
    write_lexicon(p.lexicon);
    write_bank(p.bank);
    write_rules(p.rules);
    return p;
}

std::string write_config(const FixturePaths& paths, const std::string& config_path,
                         const std::string& run_dir, std::uint64_t seed, int max_in_flight) {
    std::string out;
    out += "[paths]\n";
    out += "transcripts = " + toml_str(paths.transcripts) + "\n";
    out += "labels = " + toml_str(paths.labels) + "\n";
    out += "metadata = " + toml_str(paths.metadata) + "\n";
    out += "lexicon = " + toml_str(paths.lexicon) + "\n";
    out += "bank = " + toml_str(paths.bank) + "\n";
    out += "run_dir = " + toml_str(run_dir) + "\n";
    out += "\n[slicing]\n";
    out += "window_s = 180.0\n";
    out += "min_words = 20\n";
    out += "\n[run]\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "k_per_class = 1\n";
    for (const char* d : {"flan", "gemma", "llama"}) {
        out += std::string("\n[backend.") + d + "]\n";
        out += "kind = \"mock\"\n";
        out += "mock_rules = " + toml_str(paths.rules) + "\n";
        out += "max_in_flight = " + std::to_string(max_in_flight) + "\n";
    }
    util::write_file(config_path, out);
    return config_path;
}

FixtureData load_fixture(const FixturePaths& paths) {
    FixtureData d;
    auto visits = corpus::ingest_transcripts(paths.transcripts);
    d.corpus = corpus::build_corpus(visits, 180.0, 20);
    d.labels = corpus::load_labels(paths.labels);
    d.metadata = corpus::load_metadata(paths.metadata);
    d.bank = prompt::load_bank(paths.bank);
    d.rules = infer::load_mock_rules(paths.rules);
    return d;
}

std::string make_temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path dir = fs::temp_directory_path() / "sspeval_tests" /
                   (tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace ssp::testfix
