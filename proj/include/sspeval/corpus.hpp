#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssp::corpus {

enum class Speaker { Provider, Patient, Other };

// Visit position of a slice among the surviving slices of its visit.
enum class Segment { Start, Middle, End };

enum class SignalType { TypeI, TypeII };
enum class Subject { Provider, Patient };
enum class Race { White, NonWhite, Unknown };

struct Turn {
    std::string visit_id;
    Speaker speaker = Speaker::Other;
    double start_s = 0.0;
    double end_s = 0.0;
    std::string text;
};

struct Visit {
    std::string visit_id;
    std::vector<Turn> turns;  // ordered by start_s
};

struct Slice {
    std::string visit_id;
    int slice_index = 0;  // dense per visit, assigned at slicing time, stable
    std::vector<Turn> turns;
    int word_count = 0;
    Segment segment = Segment::Start;

    // Utterance texts joined with single spaces, no speaker markers.
    std::string joined_text() const;
};

// One of the 20 scored social-signal tasks.
struct SignalTask {
    std::string signal_id;     // e.g. "provider_warmth"
    Subject subject = Subject::Provider;
    std::string display_name;  // e.g. "Provider Warmth"
    SignalType signal_type = SignalType::TypeI;
};

// The full task registry: 15 Type-I then 5 Type-II, report row order.
const std::vector<SignalTask>& signal_registry();
const SignalTask& signal_by_id(const std::string& signal_id);

struct RawLabel {
    std::string visit_id;
    int slice_index = 0;
    std::string signal_id;
    double raw_score = 0.0;  // numeric annotation in [1, 6]
};

struct VisitMetadata {
    std::string visit_id;
    std::string provider_id;
    std::string provider_group;  // leave-one-group-out fold id
    Race patient_race = Race::Unknown;
};

// Ground truth class for a raw score: Type-I positive above 3.5,
// Type-II positive above 1.5. Scores outside [1, 6] are rejected.
int binarize(const SignalTask& task, double raw_score);

Segment segment_position(int slice_index, int n_slices);

// JSON-lines transcript file -> visits sorted by id, turns by start time.
std::vector<Visit> ingest_transcripts(const std::string& path);

// Fixed-width time slicing: turn belongs to floor(start_s / slice_len_s).
// Empty slice positions are dropped and the rest re-indexed densely;
// segments are assigned over that dense list.
std::vector<Slice> slice_visit(const Visit& visit, double slice_len_s = 180.0);

struct FilterResult {
    std::vector<Slice> slices;
    int dropped = 0;
};

// Drops slices under min_words, keeping slice indices stable so labels
// still resolve; segments are recomputed per visit over the survivors.
FilterResult filter_slices(std::vector<Slice> slices, int min_words);

// Ordered slice store with (visit_id, slice_index) lookup.
struct CorpusData {
    std::vector<Slice> slices;  // sorted by (visit_id, slice_index)
    int dropped_slices = 0;

    const Slice* find(const std::string& visit_id, int slice_index) const;
    std::vector<const Slice*> visit_slices(const std::string& visit_id) const;
};

CorpusData build_corpus(const std::vector<Visit>& visits,
                        double slice_len_s, int min_words);

std::vector<RawLabel> load_labels(const std::string& path);
std::vector<VisitMetadata> load_metadata(const std::string& path);

// Label lookup keyed by (visit_id, slice_index, signal_id).
class LabelIndex {
  public:
    explicit LabelIndex(const std::vector<RawLabel>& labels);
    std::optional<double> raw(const std::string& visit_id, int slice_index,
                              const std::string& signal_id) const;

  private:
    std::map<std::string, double> by_key_;
    static std::string key(const std::string& v, int s, const std::string& sig);
};

struct DistStats {
    double mean = 0.0;
    double sd = 0.0;  // population
    int n = 0;
};

// Dataset shape summary after filtering: slices per visit and word counts
// overall and per segment.
struct CorpusSummary {
    int n_visits = 0;
    int n_slices = 0;
    int dropped_slices = 0;
    DistStats slices_per_visit;
    DistStats words_overall;
    DistStats words_start;
    DistStats words_middle;
    DistStats words_end;
};

CorpusSummary summarize(const CorpusData& corpus);

const char* to_string(Speaker s);
const char* to_string(Segment s);
const char* to_string(Race r);
Race race_from_string(const std::string& s);

}  // namespace ssp::corpus
