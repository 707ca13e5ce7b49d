#include "sspeval/metrics.hpp"

#include <algorithm>
#include <set>

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::metrics {

void Confusion::add(int prediction, int label) {
    if ((prediction != 0 && prediction != 1) || (label != 0 && label != 1)) {
        throw ValidationError("confusion entries must be binary");
    }
    if (label == 1) {
        prediction == 1 ? ++tp : ++fn;
    } else {
        prediction == 0 ? ++tn : ++fp;
    }
}

BaResult balanced_accuracy(const Confusion& c) {
    if (c.total() == 0) throw StatError("balanced_accuracy: empty confusion");
    const bool has_pos = c.positives() > 0;
    const bool has_neg = c.negatives() > 0;
    BaResult out;
    if (has_pos && has_neg) {
        double tpr = static_cast<double>(c.tp) / c.positives();
        double tnr = static_cast<double>(c.tn) / c.negatives();
        out.value = 0.5 * (tpr + tnr);
        return out;
    }
    out.degenerate = true;
    out.value = has_pos ? static_cast<double>(c.tp) / c.positives()
                        : static_cast<double>(c.tn) / c.negatives();
    return out;
}

CorrectnessTable correctness_matrix(const std::vector<EvalCell>& cells) {
    std::set<std::string> seen;
    std::map<std::pair<std::string, int>, SliceCorrectness> per_slice;
    CorrectnessTable out;
    for (const EvalCell& c : cells) {
        std::string key = c.visit_id + "\x1f" + std::to_string(c.slice_index) +
                          "\x1f" + c.signal_id + "\x1f" + c.config_id;
        if (!seen.insert(key).second) {
            throw IntegrityError("duplicate evaluation cell: " + c.visit_id + "/" +
                                 std::to_string(c.slice_index) + "/" + c.signal_id +
                                 "/" + c.config_id);
        }
        auto& sc = per_slice[{c.visit_id, c.slice_index}];
        sc.visit_id = c.visit_id;
        sc.slice_index = c.slice_index;
        if (c.abstained()) {
            ++sc.abstained;
            ++out.total_abstained;
        } else {
            ++sc.evaluated;
            ++out.total_evaluated;
            if (c.correct()) {
                ++sc.correct;
                ++out.total_correct;
            }
        }
    }
    out.per_slice.reserve(per_slice.size());
    for (auto& [_, sc] : per_slice) out.per_slice.push_back(sc);
    return out;
}

Grouping grouping_from_string(const std::string& name) {
    if (name == "task") return Grouping::Task;
    if (name == "config") return Grouping::Config;
    if (name == "task-config" || name == "task x config") return Grouping::TaskConfig;
    if (name == "segment") return Grouping::Segment;
    if (name == "race") return Grouping::Race;
    if (name == "task-race" || name == "task x race") return Grouping::TaskRace;
    if (name == "task-segment" || name == "task x segment") return Grouping::TaskSegment;
    throw ConfigError("unknown grouping: " + name);
}

namespace {

struct KeyParts {
    bool task = false, config = false, segment = false, race = false;
};

KeyParts key_parts(Grouping g) {
    switch (g) {
        case Grouping::Task: return {true, false, false, false};
        case Grouping::Config: return {false, true, false, false};
        case Grouping::TaskConfig: return {true, true, false, false};
        case Grouping::Segment: return {false, false, true, false};
        case Grouping::Race: return {false, false, false, true};
        case Grouping::TaskRace: return {true, false, false, true};
        case Grouping::TaskSegment: return {true, false, true, false};
    }
    return {};
}

// Whether reports aggregate this grouping across configurations.
bool aggregates_configs(Grouping g) {
    switch (g) {
        case Grouping::Segment:
        case Grouping::Race:
        case Grouping::TaskRace:
        case Grouping::TaskSegment:
            return true;
        default:
            return false;
    }
}

struct GroupAccum {
    Confusion pooled;
    long long abstained = 0;
    std::map<std::string, Confusion> per_config;
};

}  // namespace

std::vector<GroupMetric> group_balanced_accuracy(const std::vector<EvalCell>& cells,
                                                 Grouping grouping) {
    const KeyParts parts = key_parts(grouping);
    const bool per_config_agg = aggregates_configs(grouping);
    std::map<std::tuple<std::string, std::string, std::string, std::string>, GroupAccum>
        groups;
    for (const EvalCell& c : cells) {
        if (parts.race && c.race == corpus::Race::Unknown) continue;
        auto key = std::make_tuple(parts.task ? c.signal_id : std::string(),
                                   parts.config ? c.config_id : std::string(),
                                   parts.segment ? std::string(corpus::to_string(c.segment))
                                                 : std::string(),
                                   parts.race ? std::string(corpus::to_string(c.race))
                                              : std::string());
        GroupAccum& acc = groups[key];
        if (c.abstained()) {
            ++acc.abstained;
            continue;
        }
        acc.pooled.add(*c.prediction, c.label);
        if (per_config_agg) acc.per_config[c.config_id].add(*c.prediction, c.label);
    }

    std::vector<GroupMetric> out;
    out.reserve(groups.size());
    for (auto& [key, acc] : groups) {
        GroupMetric m;
        std::tie(m.task, m.config, m.segment, m.race) = key;
        m.abstained = acc.abstained;
        m.n = acc.pooled.total();
        if (m.n > 0) m.ba = balanced_accuracy(acc.pooled);
        if (per_config_agg && !acc.per_config.empty()) {
            MeanSdAcrossConfigs agg;
            std::vector<double> values;
            values.reserve(acc.per_config.size());
            for (const auto& [_, conf] : acc.per_config) {
                BaResult r = balanced_accuracy(conf);
                values.push_back(r.value);
                agg.any_degenerate = agg.any_degenerate || r.degenerate;
            }
            auto ms = util::mean_population_sd(values);
            agg.mean = ms.mean;
            agg.sd = ms.sd;
            agg.n_configs = ms.n;
            m.across_configs = agg;
        }
        out.push_back(std::move(m));
    }
    return out;
}

DprResult demographic_parity_ratio(const GroupMetric& a, const GroupMetric& b) {
    DprResult out;
    if (a.n == 0 || b.n == 0 || a.ba.degenerate || b.ba.degenerate) return out;
    double lo = std::min(a.ba.value, b.ba.value);
    double hi = std::max(a.ba.value, b.ba.value);
    if (hi <= 0.0) return out;
    out.dpr = lo / hi;
    out.flagged = *out.dpr < 0.8;
    return out;
}

}  // namespace ssp::metrics
