#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sspeval/corpus.hpp"

namespace ssp::metrics {

struct Confusion {
    long long tp = 0, fp = 0, tn = 0, fn = 0;

    void add(int prediction, int label);
    long long total() const { return tp + fp + tn + fn; }
    long long positives() const { return tp + fn; }
    long long negatives() const { return tn + fp; }
};

struct BaResult {
    double value = 0.0;
    // One ground-truth class absent: value falls back to the recall of the
    // class that is present and the cell is flagged.
    bool degenerate = false;
};

BaResult balanced_accuracy(const Confusion& c);

// One joined evaluation cell: a prediction matched with its ground truth
// and the slice/visit attributes the groupings cut on.
struct EvalCell {
    std::string visit_id;
    int slice_index = 0;
    std::string signal_id;
    std::string config_id;
    std::optional<int> prediction;  // empty = abstained
    int label = 0;
    corpus::Segment segment = corpus::Segment::Start;
    corpus::Race race = corpus::Race::Unknown;

    bool abstained() const { return !prediction.has_value(); }
    bool correct() const { return prediction.has_value() && *prediction == label; }
};

struct SliceCorrectness {
    std::string visit_id;
    int slice_index = 0;
    int correct = 0;
    int evaluated = 0;  // non-abstained cells
    int abstained = 0;
};

struct CorrectnessTable {
    std::vector<SliceCorrectness> per_slice;  // sorted by (visit, slice)
    long long total_correct = 0;
    long long total_evaluated = 0;
    long long total_abstained = 0;
};

// Per-slice correct counts over the available (task, config) cells;
// duplicate (visit, slice, signal, config) keys are an integrity error.
// Abstained cells reduce the evaluated denominator.
CorrectnessTable correctness_matrix(const std::vector<EvalCell>& cells);

enum class Grouping {
    Task,
    Config,
    TaskConfig,
    Segment,
    Race,
    TaskRace,
    TaskSegment,
};

Grouping grouping_from_string(const std::string& name);

struct MeanSdAcrossConfigs {
    double mean = 0.0;
    double sd = 0.0;  // population
    int n_configs = 0;
    bool any_degenerate = false;
};

struct GroupMetric {
    // Key parts; empty string where the grouping does not use the dimension.
    std::string task;
    std::string config;
    std::string segment;
    std::string race;
    BaResult ba;           // pooled over all cells in the group
    long long n = 0;       // non-abstained cells
    long long abstained = 0;
    // Per-configuration balanced accuracies aggregated with mean and
    // population sd; filled for groupings whose reports print "mean (sd)"
    // across configurations (segment, race, task x race, task x segment).
    std::optional<MeanSdAcrossConfigs> across_configs;
};

// Balanced accuracy per group; abstained cells are excluded from the
// confusions. Cells with unknown race are skipped by race groupings.
// Groups whose cells are all abstained get n = 0 and no defined value.
std::vector<GroupMetric> group_balanced_accuracy(const std::vector<EvalCell>& cells,
                                                 Grouping grouping);

struct DprResult {
    std::optional<double> dpr;  // min/max of the two balanced accuracies
    bool flagged = false;       // defined and strictly below 0.8
};

// Four-fifths style disparity ratio between two groups' balanced
// accuracies; undefined when either side is empty or degenerate.
DprResult demographic_parity_ratio(const GroupMetric& a, const GroupMetric& b);

}  // namespace ssp::metrics
