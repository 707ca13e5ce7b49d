#include "sspeval/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::corpus {

using nlohmann::json;

std::string Slice::joined_text() const {
    std::string out;
    for (const Turn& t : turns) {
        if (!out.empty()) out += ' ';
        out += t.text;
    }
    return out;
}

namespace {

std::vector<SignalTask> make_registry() {
    auto t1 = [](Subject s, const char* id, const char* name) {
        return SignalTask{id, s, name, SignalType::TypeI};
    };
    auto t2 = [](Subject s, const char* id, const char* name) {
        return SignalTask{id, s, name, SignalType::TypeII};
    };
    const Subject pr = Subject::Provider;
    const Subject pa = Subject::Patient;
    return {
        t1(pr, "provider_dominance", "Provider Dominance"),
        t1(pr, "provider_attentiveness", "Provider Attentiveness"),
        t1(pr, "provider_warmth", "Provider Warmth"),
        t1(pr, "provider_engagement", "Provider Engagement"),
        t1(pr, "provider_empathy", "Provider Empathy"),
        t1(pr, "provider_respect", "Provider Respect"),
        t1(pr, "provider_interactivity", "Provider Interactivity"),
        t1(pa, "patient_dominance", "Patient Dominance"),
        t1(pa, "patient_attentiveness", "Patient Attentiveness"),
        t1(pa, "patient_warmth", "Patient Warmth"),
        t1(pa, "patient_engagement", "Patient Engagement"),
        t1(pa, "patient_empathy", "Patient Empathy"),
        t1(pa, "patient_respect", "Patient Respect"),
        t1(pa, "patient_interactivity", "Patient Interactivity"),
        t1(pr, "provider_hurriedness", "Provider Hurriedness"),
        t2(pr, "provider_irritation", "Provider Irritation"),
        t2(pa, "patient_irritation", "Patient Irritation"),
        t2(pa, "patient_nervousness", "Patient Nervousness"),
        t2(pa, "patient_sadness", "Patient Sadness"),
        t2(pa, "patient_distress", "Patient Distress"),
    };
}

}  // namespace

const std::vector<SignalTask>& signal_registry() {
    static const std::vector<SignalTask> registry = make_registry();
    return registry;
}

const SignalTask& signal_by_id(const std::string& signal_id) {
    for (const SignalTask& t : signal_registry()) {
        if (t.signal_id == signal_id) return t;
    }
    throw ConfigError("unknown signal id: " + signal_id);
}

int binarize(const SignalTask& task, double raw_score) {
    if (!(raw_score >= 1.0 && raw_score <= 6.0)) {
        throw ValidationError("raw score out of range [1,6] for " +
                              task.signal_id + ": " + util::fixed(raw_score, 3));
    }
    double threshold = task.signal_type == SignalType::TypeI ? 3.5 : 1.5;
    return raw_score > threshold ? 1 : 0;
}

Segment segment_position(int slice_index, int n_slices) {
    if (n_slices < 1) throw ValidationError("segment_position: empty visit");
    if (slice_index < 0 || slice_index >= n_slices) {
        throw ValidationError("segment_position: index " +
                              std::to_string(slice_index) + " outside [0," +
                              std::to_string(n_slices) + ")");
    }
    if (slice_index == 0) return Segment::Start;
    if (slice_index == n_slices - 1) return Segment::End;
    return Segment::Middle;
}

namespace {

Speaker speaker_from_string(const std::string& s, int line_no) {
    std::string v = util::to_lower(util::trim(s));
    if (v == "provider" || v == "doctor" || v == "clinician") return Speaker::Provider;
    if (v == "patient") return Speaker::Patient;
    if (v == "other" || v == "companion" || v == "caregiver") return Speaker::Other;
    throw ValidationError("line " + std::to_string(line_no) +
                          ": unknown speaker \"" + s + "\"");
}

// Recompute segments over an ordered run of slices of one visit.
void assign_segments_run(std::vector<Slice>& slices, size_t begin, size_t end) {
    int n = static_cast<int>(end - begin);
    for (size_t i = begin; i < end; ++i) {
        slices[i].segment = segment_position(static_cast<int>(i - begin), n);
    }
}

void assign_segments_by_visit(std::vector<Slice>& slices) {
    size_t run_start = 0;
    for (size_t i = 1; i <= slices.size(); ++i) {
        if (i == slices.size() || slices[i].visit_id != slices[run_start].visit_id) {
            assign_segments_run(slices, run_start, i);
            run_start = i;
        }
    }
}

}  // namespace

std::vector<Visit> ingest_transcripts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transcript file: " + path);
    std::map<std::string, std::vector<Turn>> by_visit;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": invalid JSON: " + e.what());
        }
        Turn t;
        try {
            t.visit_id = j.at("visit_id").get<std::string>();
            t.speaker = speaker_from_string(j.at("speaker").get<std::string>(), line_no);
            t.start_s = j.at("start_s").get<double>();
            t.end_s = j.at("end_s").get<double>();
            t.text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": missing or mistyped field: " + e.what());
        }
        if (t.visit_id.empty()) {
            throw ValidationError("line " + std::to_string(line_no) + ": empty visit_id");
        }
        if (t.start_s < 0.0) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": negative start_s");
        }
        if (t.end_s < t.start_s) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": end_s precedes start_s");
        }
        if (util::trim(t.text).empty()) {
            throw ValidationError("line " + std::to_string(line_no) + ": empty text");
        }
        by_visit[t.visit_id].push_back(std::move(t));
    }
    std::vector<Visit> visits;
    visits.reserve(by_visit.size());
    for (auto& [id, turns] : by_visit) {
        std::stable_sort(turns.begin(), turns.end(),
                         [](const Turn& a, const Turn& b) { return a.start_s < b.start_s; });
        visits.push_back(Visit{id, std::move(turns)});
    }
    return visits;
}

std::vector<Slice> slice_visit(const Visit& visit, double slice_len_s) {
    if (!(slice_len_s > 0.0)) throw ConfigError("slice_len_s must be positive");
    std::map<long long, std::vector<Turn>> buckets;
    for (const Turn& t : visit.turns) {
        auto idx = static_cast<long long>(std::floor(t.start_s / slice_len_s));
        buckets[idx].push_back(t);
    }
    std::vector<Slice> slices;
    slices.reserve(buckets.size());
    int dense = 0;
    for (auto& [raw_idx, turns] : buckets) {
        Slice s;
        s.visit_id = visit.visit_id;
        s.slice_index = dense++;
        s.word_count = 0;
        for (const Turn& t : turns) s.word_count += util::count_words(t.text);
        s.turns = std::move(turns);
        slices.push_back(std::move(s));
    }
    assign_segments_by_visit(slices);
    return slices;
}

FilterResult filter_slices(std::vector<Slice> slices, int min_words) {
    if (min_words < 0) throw ConfigError("min_words must be non-negative");
    FilterResult out;
    out.slices.reserve(slices.size());
    for (Slice& s : slices) {
        if (s.word_count >= min_words) out.slices.push_back(std::move(s));
        else ++out.dropped;
    }
    assign_segments_by_visit(out.slices);
    return out;
}

const Slice* CorpusData::find(const std::string& visit_id, int slice_index) const {
    auto key = std::make_pair(visit_id, slice_index);
    auto it = std::lower_bound(
        slices.begin(), slices.end(), key,
        [](const Slice& s, const std::pair<std::string, int>& k) {
            return std::tie(s.visit_id, s.slice_index) < std::tie(k.first, k.second);
        });
    if (it != slices.end() && it->visit_id == visit_id && it->slice_index == slice_index) {
        return &*it;
    }
    return nullptr;
}

std::vector<const Slice*> CorpusData::visit_slices(const std::string& visit_id) const {
    std::vector<const Slice*> out;
    for (const Slice& s : slices) {
        if (s.visit_id == visit_id) out.push_back(&s);
    }
    return out;
}

CorpusData build_corpus(const std::vector<Visit>& visits,
                        double slice_len_s, int min_words) {
    std::vector<Slice> all;
    for (const Visit& v : visits) {
        auto sliced = slice_visit(v, slice_len_s);
        all.insert(all.end(), std::make_move_iterator(sliced.begin()),
                   std::make_move_iterator(sliced.end()));
    }
    FilterResult filtered = filter_slices(std::move(all), min_words);
    CorpusData corpus;
    corpus.slices = std::move(filtered.slices);
    corpus.dropped_slices = filtered.dropped;
    std::sort(corpus.slices.begin(), corpus.slices.end(),
              [](const Slice& a, const Slice& b) {
                  return std::tie(a.visit_id, a.slice_index) <
                         std::tie(b.visit_id, b.slice_index);
              });
    return corpus;
}

std::vector<RawLabel> load_labels(const std::string& path) {
    auto rows = util::read_csv(path);
    if (rows.empty()) throw ParseError("empty label file: " + path);
    const std::vector<std::string> header = {"visit_id", "slice_index", "signal_id",
                                             "raw_score"};
    if (rows[0] != header) {
        throw ParseError("label file header must be visit_id,slice_index,signal_id,"
                         "raw_score: " + path);
    }
    std::vector<RawLabel> labels;
    labels.reserve(rows.size() - 1);
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) {
            throw ParseError("label row " + std::to_string(i + 1) +
                             ": expected 4 fields, got " + std::to_string(rows[i].size()));
        }
        RawLabel l;
        l.visit_id = util::trim(rows[i][0]);
        try {
            l.slice_index = std::stoi(rows[i][1]);
            l.raw_score = std::stod(rows[i][3]);
        } catch (const std::exception&) {
            throw ParseError("label row " + std::to_string(i + 1) + ": bad number");
        }
        l.signal_id = util::trim(rows[i][2]);
        signal_by_id(l.signal_id);  // rejects unknown ids
        labels.push_back(std::move(l));
    }
    return labels;
}

std::vector<VisitMetadata> load_metadata(const std::string& path) {
    auto rows = util::read_csv(path);
    if (rows.empty()) throw ParseError("empty metadata file: " + path);
    const std::vector<std::string> header = {"visit_id", "provider_id",
                                             "provider_group", "patient_race"};
    if (rows[0] != header) {
        throw ParseError("metadata header must be visit_id,provider_id,"
                         "provider_group,patient_race: " + path);
    }
    std::vector<VisitMetadata> meta;
    meta.reserve(rows.size() - 1);
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) {
            throw ParseError("metadata row " + std::to_string(i + 1) +
                             ": expected 4 fields");
        }
        VisitMetadata m;
        m.visit_id = util::trim(rows[i][0]);
        m.provider_id = util::trim(rows[i][1]);
        m.provider_group = util::trim(rows[i][2]);
        m.patient_race = race_from_string(rows[i][3]);
        if (m.visit_id.empty()) {
            throw ValidationError("metadata row " + std::to_string(i + 1) +
                                  ": empty visit_id");
        }
        meta.push_back(std::move(m));
    }
    return meta;
}

std::string LabelIndex::key(const std::string& v, int s, const std::string& sig) {
    return v + "\x1f" + std::to_string(s) + "\x1f" + sig;
}

LabelIndex::LabelIndex(const std::vector<RawLabel>& labels) {
    for (const RawLabel& l : labels) {
        auto k = key(l.visit_id, l.slice_index, l.signal_id);
        auto [it, inserted] = by_key_.emplace(k, l.raw_score);
        if (!inserted && it->second != l.raw_score) {
            throw IntegrityError("conflicting duplicate label for " + l.visit_id +
                                 "/" + std::to_string(l.slice_index) + "/" +
                                 l.signal_id);
        }
    }
}

std::optional<double> LabelIndex::raw(const std::string& visit_id, int slice_index,
                                      const std::string& signal_id) const {
    auto it = by_key_.find(key(visit_id, slice_index, signal_id));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

namespace {

DistStats dist_stats(const std::vector<double>& values) {
    auto ms = util::mean_population_sd(values);
    return DistStats{ms.mean, ms.sd, ms.n};
}

}  // namespace

CorpusSummary summarize(const CorpusData& corpus) {
    CorpusSummary out;
    out.n_slices = static_cast<int>(corpus.slices.size());
    out.dropped_slices = corpus.dropped_slices;
    std::map<std::string, int> per_visit;
    std::vector<double> overall, start, middle, end;
    for (const Slice& s : corpus.slices) {
        ++per_visit[s.visit_id];
        double wc = s.word_count;
        overall.push_back(wc);
        switch (s.segment) {
            case Segment::Start: start.push_back(wc); break;
            case Segment::Middle: middle.push_back(wc); break;
            case Segment::End: end.push_back(wc); break;
        }
    }
    out.n_visits = static_cast<int>(per_visit.size());
    std::vector<double> spv;
    spv.reserve(per_visit.size());
    for (const auto& [_, n] : per_visit) spv.push_back(n);
    out.slices_per_visit = dist_stats(spv);
    out.words_overall = dist_stats(overall);
    out.words_start = dist_stats(start);
    out.words_middle = dist_stats(middle);
    out.words_end = dist_stats(end);
    return out;
}

const char* to_string(Speaker s) {
    switch (s) {
        case Speaker::Provider: return "provider";
        case Speaker::Patient: return "patient";
        case Speaker::Other: return "other";
    }
    return "other";
}

const char* to_string(Segment s) {
    switch (s) {
        case Segment::Start: return "start";
        case Segment::Middle: return "middle";
        case Segment::End: return "end";
    }
    return "middle";
}

const char* to_string(Race r) {
    switch (r) {
        case Race::White: return "white";
        case Race::NonWhite: return "non_white";
        case Race::Unknown: return "unknown";
    }
    return "unknown";
}

Race race_from_string(const std::string& s) {
    std::string v = util::to_lower(util::trim(s));
    if (v == "white") return Race::White;
    if (v == "non_white" || v == "non-white" || v == "nonwhite") return Race::NonWhite;
    if (v == "unknown" || v.empty()) return Race::Unknown;
    throw ValidationError("unknown patient_race value: " + s);
}

}  // namespace ssp::corpus
