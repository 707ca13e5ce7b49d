#include "sspeval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "sspeval/difficulty.hpp"
#include "sspeval/ensemble.hpp"
#include "sspeval/errors.hpp"
#include "sspeval/mixedglm.hpp"
#include "sspeval/promptkit.hpp"
#include "sspeval/report.hpp"
#include "sspeval/stats.hpp"
#include "sspeval/util.hpp"

namespace ssp::analysis {

using json = nlohmann::json;

const std::vector<std::string>& analysis_names() {
    static const std::vector<std::string> names = {
        "overall",    "glmm-model", "glmm-prompt", "glmm-config", "glmm-task",
        "difficulty", "fairness",   "segments",    "ensemble"};
    return names;
}

std::vector<metrics::EvalCell> join_cells(const AnalysisInputs& in) {
    if (!in.corpus || !in.labels || !in.records) {
        throw ConfigError("analysis inputs need corpus, labels, and records");
    }
    corpus::LabelIndex label_index(*in.labels);
    std::map<std::string, corpus::Race> race_by_visit;
    if (in.metadata) {
        for (const auto& m : *in.metadata) race_by_visit[m.visit_id] = m.patient_race;
    }
    std::vector<metrics::EvalCell> cells;
    cells.reserve(in.records->size());
    for (const auto& r : *in.records) {
        if (r.parse_status == infer::ParseStatus::TransportError) continue;
        const corpus::Slice* slice = in.corpus->find(r.visit_id, r.slice_index);
        if (!slice) {
            throw ValidationError("prediction references unknown slice " + r.visit_id + "/" +
                                  std::to_string(r.slice_index));
        }
        auto raw = label_index.raw(r.visit_id, r.slice_index, r.signal_id);
        if (!raw) {
            throw ValidationError("prediction without a ground-truth label: " + r.visit_id +
                                  "/" + std::to_string(r.slice_index) + "/" + r.signal_id);
        }
        metrics::EvalCell c;
        c.visit_id = r.visit_id;
        c.slice_index = r.slice_index;
        c.signal_id = r.signal_id;
        c.config_id = r.config_id;
        c.prediction = r.prediction;
        c.label = corpus::binarize(corpus::signal_by_id(r.signal_id), *raw);
        c.segment = slice->segment;
        auto it = race_by_visit.find(r.visit_id);
        c.race = it == race_by_visit.end() ? corpus::Race::Unknown : it->second;
        cells.push_back(std::move(c));
    }
    return cells;
}

namespace {

namespace fs = std::filesystem;

struct Emitter {
    std::string out_dir;
    std::string provenance;
    AnalysisOutcome* outcome;

    void write(const std::string& name, const std::string& content) const {
        fs::path p = fs::path(out_dir) / name;
        util::write_file(p.string(), content);
        outcome->written.push_back(p.string());
    }
    void table_pair(const std::string& stem, const report::Table& t) const {
        write(stem + ".md", report::to_markdown(t, provenance));
        write(stem + ".csv", report::to_csv(t, provenance));
    }
    void csv_only(const std::string& name, const report::Table& t) const {
        write(name, report::to_csv(t, provenance));
    }
};

std::string stars_suffix(double p) {
    std::string s = stats::significance_stars(p);
    return s.empty() ? "" : " " + s;
}

std::string ba_cell(const metrics::BaResult& ba) {
    return util::fixed(ba.value, 3) + (ba.degenerate ? "^" : "");
}

std::string join_list(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out;
}

// One ground-truth label joined with its slice attributes.
struct JoinedLabel {
    std::string visit_id;
    int slice_index = 0;
    std::string signal_id;
    int label = 0;
    corpus::Segment segment = corpus::Segment::Start;
    corpus::Race race = corpus::Race::Unknown;
};

std::vector<JoinedLabel> join_labels(const AnalysisInputs& in) {
    std::map<std::string, corpus::Race> race_by_visit;
    if (in.metadata) {
        for (const auto& m : *in.metadata) race_by_visit[m.visit_id] = m.patient_race;
    }
    std::vector<JoinedLabel> out;
    for (const auto& l : *in.labels) {
        const corpus::Slice* slice = in.corpus->find(l.visit_id, l.slice_index);
        if (!slice) continue;  // filtered out by the word-count floor
        JoinedLabel j;
        j.visit_id = l.visit_id;
        j.slice_index = l.slice_index;
        j.signal_id = l.signal_id;
        j.label = corpus::binarize(corpus::signal_by_id(l.signal_id), l.raw_score);
        j.segment = slice->segment;
        auto it = race_by_visit.find(l.visit_id);
        j.race = it == race_by_visit.end() ? corpus::Race::Unknown : it->second;
        out.push_back(std::move(j));
    }
    std::sort(out.begin(), out.end(), [](const JoinedLabel& a, const JoinedLabel& b) {
        return std::tie(a.visit_id, a.slice_index, a.signal_id) <
               std::tie(b.visit_id, b.slice_index, b.signal_id);
    });
    return out;
}

std::vector<std::string> model_level_order() {
    std::vector<std::string> out;
    for (const auto& d : prompt::all_dialects()) out.push_back(d.label);
    return out;
}

std::vector<std::string> prompt_level_order() {
    return {prompt::strategy_display_name(prompt::Strategy::ZS),
            prompt::strategy_display_name(prompt::Strategy::FS),
            prompt::strategy_display_name(prompt::Strategy::CoT),
            prompt::strategy_display_name(prompt::Strategy::FSCoT)};
}

std::vector<std::string> config_level_order() {
    std::vector<std::string> out;
    for (const auto& c : prompt::valid_configurations()) out.push_back(c.config_id);
    return out;
}

glmm::GlmmData build_glmm_data(const std::vector<metrics::EvalCell>& cells) {
    glmm::GlmmData data({"visit", "task", "model", "prompt", "configuration"});
    for (const auto& c : cells) {
        if (c.abstained()) continue;
        const auto& cfg = prompt::configuration_by_id(c.config_id);
        data.add(c.correct(), {c.visit_id, corpus::signal_by_id(c.signal_id).display_name,
                               cfg.dialect.label, prompt::strategy_display_name(cfg.strategy),
                               cfg.config_id});
    }
    return data;
}

std::string random_var_footer(const glmm::GlmmFit& fit) {
    std::vector<std::string> parts;
    for (const auto& rv : fit.random_variances) {
        parts.push_back(rv.factor + " = " + util::fixed(rv.variance, 2));
    }
    return "Random Var (" + join_list(parts) + ")";
}

json glmm_summary(const glmm::GlmmFit& fit) {
    json j;
    for (const auto& fe : fit.fixed) {
        j["levels"][fe.level] = {{"coef", fe.coef},
                                 {"odds_ratio", fe.odds_ratio},
                                 {"reference", fe.is_reference}};
    }
    for (const auto& rv : fit.random_variances) j["random_var"][rv.factor] = rv.variance;
    j["log_likelihood"] = fit.log_likelihood;
    j["converged"] = fit.converged;
    return j;
}

// Marks the best cell bold and the runner-up underlined, by value.
void mark_best_two(std::vector<std::string>& cells, std::size_t first_value_col,
                   const std::vector<std::optional<double>>& values) {
    int best = -1, second = -1;
    for (int i = 0; i < static_cast<int>(values.size()); ++i) {
        if (!values[i]) continue;
        if (best < 0 || *values[i] > *values[best]) {
            second = best;
            best = i;
        } else if (second < 0 || *values[i] > *values[second]) {
            second = i;
        }
    }
    if (best >= 0) cells[first_value_col + best] = report::bold(cells[first_value_col + best]);
    if (second >= 0) {
        cells[first_value_col + second] = report::underline(cells[first_value_col + second]);
    }
}

}  // namespace

AnalysisOutcome run_analyses(const AnalysisInputs& in, const AnalysisOptions& options) {
    AnalysisOutcome outcome;
    std::set<std::string> which(options.which.begin(), options.which.end());
    for (const auto& name : which) {
        if (std::find(analysis_names().begin(), analysis_names().end(), name) ==
            analysis_names().end()) {
            throw ConfigError("unknown analysis '" + name + "'");
        }
    }
    if (which.empty()) which.insert(analysis_names().begin(), analysis_names().end());
    auto requested = [&](const std::string& name) { return which.count(name) > 0; };

    if (options.out_dir.empty()) throw ConfigError("analysis output directory not set");
    fs::create_directories(options.out_dir);
    Emitter emit{options.out_dir, in.provenance, &outcome};

    auto cells = join_cells(in);
    long long transport = static_cast<long long>(in.records->size()) -
                          static_cast<long long>(cells.size());
    if (transport > 0) {
        outcome.notices.push_back(std::to_string(transport) +
                                  " transport-error records excluded from analysis");
    }
    auto labels = join_labels(in);

    json summary;
    summary["notices"] = json::array();
    summary["journal"] = in.provenance;
    summary["records"] = in.records->size();
    summary["cells"] = cells.size();
    summary["transport_error_records"] = transport;

    // ---- ensemble (first, so its column can merge into the overall table)
    std::optional<ens::EnsembleResult> ensemble_result;
    if (requested("ensemble")) {
        std::map<std::string, std::string> group_by_visit;
        if (in.metadata) {
            for (const auto& m : *in.metadata) group_by_visit[m.visit_id] = m.provider_group;
        }
        std::string skip;
        if (!in.metadata) {
            skip = "ensemble skipped: no visit metadata";
        } else {
            std::set<std::string> groups;
            for (const auto& c : cells) {
                auto it = group_by_visit.find(c.visit_id);
                if (it == group_by_visit.end() || it->second.empty()) {
                    skip = "ensemble skipped: visit " + c.visit_id + " has no provider group";
                    break;
                }
                groups.insert(it->second);
            }
            if (skip.empty() && groups.size() < 2) {
                skip = "ensemble skipped: need at least 2 provider groups";
            }
        }
        if (!skip.empty()) {
            outcome.notices.push_back(skip);
        } else if (cells.empty()) {
            outcome.notices.push_back("ensemble skipped: no evaluation cells");
        } else {
            std::set<std::string> present;
            for (const auto& c : cells) present.insert(c.config_id);
            std::vector<std::string> features;
            for (const auto& id : config_level_order()) {
                if (present.count(id)) features.push_back(id);
            }
            std::map<std::tuple<std::string, int, std::string>, ens::StackedExample> stacked;
            for (const auto& c : cells) {
                auto key = std::make_tuple(c.visit_id, c.slice_index, c.signal_id);
                auto& ex = stacked[key];
                if (ex.inputs.empty()) {
                    ex.group = group_by_visit[c.visit_id];
                    ex.visit_id = c.visit_id;
                    ex.slice_index = c.slice_index;
                    ex.signal_id = c.signal_id;
                    ex.inputs.resize(features.size());
                    ex.label = c.label;
                }
                for (std::size_t j = 0; j < features.size(); ++j) {
                    if (features[j] == c.config_id && c.prediction) {
                        ex.inputs[j] = static_cast<double>(*c.prediction);
                    }
                }
            }
            std::vector<ens::StackedExample> examples;
            examples.reserve(stacked.size());
            for (auto& [_, ex] : stacked) examples.push_back(std::move(ex));

            ens::PenaltyOptions popt;
            popt.lambda = options.lambda;
            ensemble_result = ens::evaluate_ensemble(examples, features, popt);

            report::Table folds;
            folds.title = "Ensemble cross-validation folds";
            folds.columns = {"held_out_group", "train_n", "test_n", "balanced_accuracy",
                             "degenerate",     "skipped", "intercept"};
            for (const auto& f : features) folds.columns.push_back("w_" + f);
            for (const auto& fold : ensemble_result->folds) {
                std::vector<std::string> row = {fold.held_out_group,
                                                std::to_string(fold.train_n),
                                                std::to_string(fold.test_n)};
                if (fold.skipped) {
                    row.push_back("");
                    row.push_back("");
                    row.push_back("1");
                    row.push_back("");
                    for (std::size_t j = 0; j < features.size(); ++j) row.push_back("");
                } else {
                    row.push_back(util::fixed(fold.balanced_accuracy, 4));
                    row.push_back(fold.degenerate ? "1" : "0");
                    row.push_back("0");
                    row.push_back(util::fixed(fold.model.intercept, 6));
                    for (Eigen::Index j = 0; j < fold.model.weights.size(); ++j) {
                        row.push_back(util::fixed(fold.model.weights[j], 6));
                    }
                }
                folds.rows.push_back(std::move(row));
            }
            emit.csv_only("ensemble_folds.csv", folds);

            report::Table tasks;
            tasks.title = "Ensemble balanced accuracy per task";
            tasks.columns = {"signal_id", "mean_ba", "sd", "folds"};
            for (const auto& t : ensemble_result->per_task) {
                tasks.rows.push_back({t.signal_id, util::fixed(t.mean, 4),
                                      util::fixed(t.sd, 4), std::to_string(t.folds)});
            }
            emit.csv_only("ensemble_tasks.csv", tasks);

            summary["ensemble"] = {{"mean_balanced_accuracy", ensemble_result->mean_balanced_accuracy},
                                   {"sd_balanced_accuracy", ensemble_result->sd_balanced_accuracy},
                                   {"lambda", options.lambda},
                                   {"features", features},
                                   {"folds", ensemble_result->folds.size()}};
        }
    }

    // ---- overall balanced accuracy (per signal x configuration)
    if (requested("overall")) {
        if (cells.empty()) {
            outcome.notices.push_back("overall skipped: no evaluation cells");
        } else {
            auto groups = metrics::group_balanced_accuracy(cells, metrics::Grouping::TaskConfig);
            std::map<std::pair<std::string, std::string>, const metrics::GroupMetric*> by_key;
            std::set<std::string> present;
            for (const auto& g : groups) {
                by_key[{g.task, g.config}] = &g;
                present.insert(g.config);
            }
            std::vector<std::string> config_cols;
            for (const auto& id : config_level_order()) {
                if (present.count(id)) config_cols.push_back(id);
            }
            std::map<std::string, const ens::TaskSummary*> ens_by_task;
            if (ensemble_result) {
                for (const auto& t : ensemble_result->per_task) ens_by_task[t.signal_id] = &t;
            }

            report::Table t;
            t.title = "Balanced accuracy per social signal";
            t.columns = {"Social Signal"};
            for (const auto& id : config_cols) t.columns.push_back(id);
            if (ensemble_result) t.columns.push_back("Ensemble (LOGO)");

            std::map<std::string, std::vector<double>> column_values;
            bool any_degenerate = false;
            auto add_signal_row = [&](const corpus::SignalTask& task) {
                std::vector<std::string> row = {task.display_name};
                std::vector<std::optional<double>> vals;
                for (const auto& id : config_cols) {
                    auto it = by_key.find({task.signal_id, id});
                    if (it != by_key.end() && it->second->n > 0) {
                        row.push_back(ba_cell(it->second->ba));
                        vals.push_back(it->second->ba.value);
                        any_degenerate = any_degenerate || it->second->ba.degenerate;
                        column_values[id].push_back(it->second->ba.value);
                    } else {
                        row.push_back("--");
                        vals.push_back(std::nullopt);
                    }
                }
                if (ensemble_result) {
                    auto it = ens_by_task.find(task.signal_id);
                    if (it != ens_by_task.end()) {
                        row.push_back(report::mean_sd_cell(it->second->mean, it->second->sd));
                        vals.push_back(it->second->mean);
                        column_values["__ensemble__"].push_back(it->second->mean);
                    } else {
                        row.push_back("--");
                        vals.push_back(std::nullopt);
                    }
                }
                mark_best_two(row, 1, vals);
                t.rows.push_back(std::move(row));
            };

            t.rows.push_back({"Type-I Signals"});
            for (const auto& task : corpus::signal_registry()) {
                if (task.signal_type == corpus::SignalType::TypeI) add_signal_row(task);
            }
            t.rows.push_back({"Type-II Signals"});
            for (const auto& task : corpus::signal_registry()) {
                if (task.signal_type == corpus::SignalType::TypeII) add_signal_row(task);
            }

            std::vector<std::string> mean_row = {"MEAN"}, sd_row = {"STD"};
            for (const auto& id : config_cols) {
                auto ms = util::mean_population_sd(column_values[id]);
                mean_row.push_back(ms.n ? util::fixed(ms.mean, 3) : "--");
                sd_row.push_back(ms.n ? util::fixed(ms.sd, 2) : "--");
                if (ms.n) summary["overall"]["mean_ba"][id] = ms.mean;
            }
            if (ensemble_result) {
                auto ms = util::mean_population_sd(column_values["__ensemble__"]);
                mean_row.push_back(ms.n ? util::fixed(ms.mean, 3) : "--");
                sd_row.push_back(ms.n ? util::fixed(ms.sd, 2) : "--");
                if (ms.n) summary["overall"]["mean_ba"]["ensemble"] = ms.mean;
            }
            t.rows.push_back(std::move(mean_row));
            t.rows.push_back(std::move(sd_row));
            t.footers.push_back(
                "bold best and underlined second-best per row; ensemble cells are "
                "mean (population sd) over held-out folds");
            if (any_degenerate) {
                t.footers.push_back(
                    "^ one ground-truth class absent; the value is the recall of the "
                    "present class");
            }
            emit.table_pair("overall_balanced_accuracy", t);

            report::Table prev;
            prev.title = "Positive label prevalence per signal";
            prev.columns = {"signal_id", "display_name", "type", "n", "prevalence_pct"};
            for (const auto& task : corpus::signal_registry()) {
                long long n = 0, pos = 0;
                for (const auto& l : labels) {
                    if (l.signal_id != task.signal_id) continue;
                    ++n;
                    pos += l.label;
                }
                prev.rows.push_back(
                    {task.signal_id, task.display_name,
                     task.signal_type == corpus::SignalType::TypeI ? "I" : "II",
                     std::to_string(n),
                     n ? util::fixed(100.0 * pos / n, 1) : ""});
            }
            emit.csv_only("label_prevalence.csv", prev);
        }
    }

    // ---- mixed-model blocks (model / prompt / configuration effects)
    bool want_blocks = requested("glmm-model") || requested("glmm-prompt") ||
                       requested("glmm-config") || requested("glmm-task");
    if (want_blocks) {
        glmm::GlmmData data = build_glmm_data(cells);
        if (data.n() == 0) {
            outcome.notices.push_back("mixed models skipped: no non-abstained cells");
        } else {
            struct BlockDef {
                std::string analysis;
                std::string heading;
                std::string fixed;
                std::optional<std::string> reference;
                std::vector<std::string> randoms;
                std::vector<std::string> level_order;
            };
            std::vector<BlockDef> defs = {
                {"glmm-model", "Model", "model", prompt::dialect(prompt::DialectName::Flan).label,
                 {"visit", "prompt", "task"}, model_level_order()},
                {"glmm-prompt", "Prompting Style", "prompt",
                 prompt::strategy_display_name(prompt::Strategy::ZS),
                 {"visit", "task", "model"}, prompt_level_order()},
                {"glmm-config", "Configuration", "configuration", std::string("FLAN-ZS"),
                 {"visit", "task"}, config_level_order()},
            };

            report::Table t;
            t.title = "Correctness odds by model setting";
            t.columns = {"Level", "Coef. (log)", "Odds Ratio"};
            bool any_block = false;
            for (const auto& def : defs) {
                if (!requested(def.analysis)) continue;
                int fi = data.factor_index(def.fixed);
                if (data.levels(fi).size() < 2) {
                    outcome.notices.push_back(def.analysis + " skipped: factor '" + def.fixed +
                                              "' has fewer than 2 levels");
                    continue;
                }
                glmm::GlmmSpec spec;
                spec.fixed_factor = def.fixed;
                spec.reference_level = def.reference;
                spec.random_factors = def.randoms;
                glmm::GlmmFit fit = glmm::fit_binomial_glmm(data, spec);

                any_block = true;
                t.rows.push_back({def.heading});
                for (const auto& level : def.level_order) {
                    for (const auto& fe : fit.fixed) {
                        if (fe.level != level) continue;
                        std::string or_cell = util::fixed(fe.odds_ratio, 3);
                        if (fe.is_reference) or_cell = "[" + or_cell + "]";
                        t.rows.push_back({fe.is_reference ? fe.level + " (reference)" : fe.level,
                                          util::fixed(fe.coef, 3), or_cell});
                    }
                }
                t.rows.push_back({random_var_footer(fit)});
                summary[def.analysis] = glmm_summary(fit);
                if (!fit.converged) {
                    outcome.notices.push_back(def.analysis + ": variance search did not converge");
                }
            }
            if (any_block) emit.table_pair("config_effects", t);

            if (requested("glmm-task")) {
                int fi = data.factor_index("task");
                if (data.levels(fi).size() < 2) {
                    outcome.notices.push_back("glmm-task skipped: fewer than 2 tasks");
                } else {
                    glmm::GlmmSpec spec;
                    spec.fixed_factor = "task";
                    spec.random_factors = {"visit", "configuration"};
                    glmm::GlmmFit fit = glmm::fit_binomial_glmm(data, spec);
                    auto rows = glmm::odds_ratio_table(fit, glmm::OrSort::AscendingOr);

                    report::Table td;
                    td.title = "Relative task difficulty";
                    td.columns = {"Social Signal (task)", "Coef. (log)", "Odds Ratio (OR)",
                                  "abs(1-OR)", "Band"};
                    for (const auto& r : rows) {
                        td.rows.push_back({r.label, util::fixed(r.coef, 3),
                                           util::fixed(r.odds_ratio, 3),
                                           util::fixed(r.abs_one_minus_or, 3),
                                           r.easier_band ? "easier" : "difficult"});
                    }
                    td.footers.push_back(random_var_footer(fit));
                    emit.table_pair("task_difficulty", td);
                    summary["glmm-task"] = glmm_summary(fit);
                    if (!fit.converged) {
                        outcome.notices.push_back("glmm-task: variance search did not converge");
                    }
                }
            }
        }
    }

    // ---- slice difficulty: correctness distribution + lexicon comparison
    if (requested("difficulty")) {
        auto ct = metrics::correctness_matrix(cells);
        if (ct.per_slice.empty()) {
            outcome.notices.push_back("difficulty skipped: no evaluation cells");
        } else {
            report::Table hist;
            hist.title = "Correct predictions per slice";
            hist.columns = {"visit_id", "slice_index", "correct", "evaluated", "abstained"};
            std::vector<double> scores;
            for (const auto& sc : ct.per_slice) {
                hist.rows.push_back({sc.visit_id, std::to_string(sc.slice_index),
                                     std::to_string(sc.correct), std::to_string(sc.evaluated),
                                     std::to_string(sc.abstained)});
                scores.push_back(static_cast<double>(sc.correct));
            }
            emit.csv_only("correct_histogram.csv", hist);

            auto ms = util::mean_population_sd(scores);
            auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
            summary["difficulty"] = {{"slices", scores.size()},
                                     {"mean_correct", ms.mean},
                                     {"sd_correct", ms.sd},
                                     {"min_correct", *mn},
                                     {"max_correct", *mx}};

            std::vector<std::string> footers;
            footers.push_back("correct per slice: mean " + util::fixed(ms.mean, 2) + ", sd " +
                              util::fixed(ms.sd, 2) + ", range [" + util::fixed(*mn, 0) + ", " +
                              util::fixed(*mx, 0) + "]");
            if (scores.size() >= 3) {
                auto ks = stats::ks_normality(scores);
                footers.push_back("normality: KS D = " + util::fixed(ks.statistic, 3) + ", p = " +
                                  util::fixed(ks.p_value, 3) +
                                  " (reference normal fit from the same data)");
                summary["difficulty"]["ks_d"] = ks.statistic;
                summary["difficulty"]["ks_p"] = ks.p_value;
            }

            if (options.lexicon_path.empty()) {
                outcome.notices.push_back(
                    "difficulty: no lexicon configured; feature comparison skipped");
            } else {
                try {
                    auto lex = difficulty::Lexicon::from_csv(options.lexicon_path);
                    auto split = difficulty::split_quantiles(scores, options.quantile);
                    auto band_features = [&](const std::vector<int>& idx) {
                        std::vector<difficulty::Features> feats;
                        for (int i : idx) {
                            const auto& sc = ct.per_slice[static_cast<std::size_t>(i)];
                            const corpus::Slice* slice = in.corpus->find(sc.visit_id, sc.slice_index);
                            if (!slice) continue;
                            feats.push_back(
                                difficulty::extract_features(slice->joined_text(), lex));
                        }
                        return feats;
                    };
                    auto hard = band_features(split.low);
                    auto easy = band_features(split.high);
                    auto comps = difficulty::compare_groups(hard, easy, lex);

                    report::Table t;
                    t.title = "Linguistic features of hard vs easy slices";
                    t.columns = {"Feature", "Hard", "Easy", "U"};
                    for (const auto& c : comps) {
                        t.rows.push_back({c.feature,
                                          report::mean_sd_cell(c.low_mean, c.low_sd),
                                          report::mean_sd_cell(c.high_mean, c.high_sd),
                                          util::fixed(c.test.statistic, 1) +
                                              stars_suffix(c.test.corrected_p.value_or(1.0))});
                    }
                    t.footers.push_back(
                        "hard: correct <= " + util::fixed(split.low_threshold, 0) + " (n = " +
                        std::to_string(hard.size()) + "); easy: correct >= " +
                        util::fixed(split.high_threshold, 0) + " (n = " +
                        std::to_string(easy.size()) + "); q = " +
                        util::fixed(options.quantile, 2));
                    for (const auto& f : footers) t.footers.push_back(f);
                    t.footers.push_back(
                        "Mann-Whitney two-sided with Bonferroni correction over features; "
                        "* p<0.05, ** p<0.01, *** p<0.001");
                    emit.table_pair("difficulty_features", t);
                    summary["difficulty"]["hard_n"] = hard.size();
                    summary["difficulty"]["easy_n"] = easy.size();
                } catch (const Error& e) {
                    outcome.notices.push_back(std::string("difficulty comparison skipped: ") +
                                              e.what());
                }
            }
        }
    }

    // ---- fairness across patient race groups
    if (requested("fairness")) {
        bool have_white = false, have_nonwhite = false;
        for (const auto& l : labels) {
            have_white = have_white || l.race == corpus::Race::White;
            have_nonwhite = have_nonwhite || l.race == corpus::Race::NonWhite;
        }
        if (!have_white || !have_nonwhite) {
            outcome.notices.push_back("fairness skipped: need labeled visits for both race groups");
        } else {
            auto groups = metrics::group_balanced_accuracy(cells, metrics::Grouping::TaskRace);
            std::map<std::pair<std::string, std::string>, const metrics::GroupMetric*> ba_by_key;
            for (const auto& g : groups) ba_by_key[{g.task, g.race}] = &g;

            report::Table t;
            t.title = "Labels and accuracy by patient race";
            t.columns = {"Social Signal", "Labels White",  "Labels Non-White",
                         "Statistical Difference", "BA White", "BA Non-White"};
            json fair_summary;
            for (const auto& task : corpus::signal_registry()) {
                std::vector<double> white_vals, nw_vals;
                for (const auto& l : labels) {
                    if (l.signal_id != task.signal_id) continue;
                    if (l.race == corpus::Race::White) white_vals.push_back(l.label);
                    if (l.race == corpus::Race::NonWhite) nw_vals.push_back(l.label);
                }
                std::string name = task.display_name;
                std::string stat_cell = "--";
                if (!white_vals.empty() && !nw_vals.empty()) {
                    long long wp = 0, np = 0;
                    for (double v : white_vals) wp += static_cast<long long>(v);
                    for (double v : nw_vals) np += static_cast<long long>(v);
                    long long wn = static_cast<long long>(white_vals.size()) - wp;
                    long long nn = static_cast<long long>(nw_vals.size()) - np;
                    auto res = stats::fisher_exact_2x2({{{wp, wn}, {np, nn}}});
                    if (std::isfinite(res.statistic)) {
                        stat_cell = util::fixed(res.statistic, 3);
                    } else if (std::isinf(res.statistic)) {
                        stat_cell = "inf";
                    }
                    name += stars_suffix(res.p_value);
                    if (res.p_value < 0.05) {
                        fair_summary["significant"].push_back(task.signal_id);
                    }
                    fair_summary["fisher_p"][task.signal_id] = res.p_value;
                }
                auto label_cell = [&](const std::vector<double>& vals) {
                    if (vals.empty()) return std::string("--");
                    auto lm = util::mean_population_sd(vals);
                    return report::mean_sd_cell(lm.mean, lm.sd);
                };
                auto acc_cell = [&](const char* race) {
                    auto it = ba_by_key.find({task.signal_id, race});
                    if (it == ba_by_key.end() || !it->second->across_configs ||
                        it->second->across_configs->n_configs == 0) {
                        return std::string("--");
                    }
                    const auto& ac = *it->second->across_configs;
                    std::string cell = report::mean_sd_cell(ac.mean, ac.sd);
                    if (ac.mean > 0.55) cell = report::bold(cell);
                    if (ac.mean < 0.5) cell = report::underline(cell);
                    return cell;
                };
                t.rows.push_back({name, label_cell(white_vals), label_cell(nw_vals), stat_cell,
                                  acc_cell("white"), acc_cell("non_white")});
            }
            t.footers.push_back("Fisher exact test on binarized labels, White vs non-White; "
                                "* p<0.05, ** p<0.01, *** p<0.001 (uncorrected)");
            t.footers.push_back("BA cells average balanced accuracy over configurations, "
                                "mean (population sd); bold > 0.55, underlined < 0.5");
            emit.table_pair("fairness", t);

            // parity ratio per (signal, configuration)
            report::Table dpr;
            dpr.title = "Demographic parity ratio";
            dpr.columns = {"signal_id", "config_id", "ba_white", "ba_non_white", "dpr", "flagged"};
            std::map<std::tuple<std::string, std::string, corpus::Race>, metrics::Confusion>
                conf;
            for (const auto& c : cells) {
                if (c.abstained() || c.race == corpus::Race::Unknown) continue;
                conf[{c.signal_id, c.config_id, c.race}].add(*c.prediction, c.label);
            }
            long long flags = 0;
            std::set<std::string> present;
            for (const auto& c : cells) present.insert(c.config_id);
            for (const auto& task : corpus::signal_registry()) {
                for (const auto& id : config_level_order()) {
                    if (!present.count(id)) continue;
                    metrics::GroupMetric a, b;
                    auto wit = conf.find({task.signal_id, id, corpus::Race::White});
                    auto nit = conf.find({task.signal_id, id, corpus::Race::NonWhite});
                    std::string wcell, ncell;
                    if (wit != conf.end()) {
                        a.n = wit->second.total();
                        a.ba = metrics::balanced_accuracy(wit->second);
                        wcell = util::fixed(a.ba.value, 3);
                    }
                    if (nit != conf.end()) {
                        b.n = nit->second.total();
                        b.ba = metrics::balanced_accuracy(nit->second);
                        ncell = util::fixed(b.ba.value, 3);
                    }
                    auto res = metrics::demographic_parity_ratio(a, b);
                    if (res.flagged) ++flags;
                    dpr.rows.push_back({task.signal_id, id, wcell, ncell,
                                        res.dpr ? util::fixed(*res.dpr, 3) : "",
                                        res.flagged ? "1" : "0"});
                }
            }
            emit.csv_only("dpr.csv", dpr);
            fair_summary["dpr_flagged"] = flags;
            summary["fairness"] = fair_summary;
        }
    }

    // ---- per-segment label shifts and accuracy
    if (requested("segments")) {
        if (labels.empty()) {
            outcome.notices.push_back("segments skipped: no labels on surviving slices");
        } else {
            const corpus::Segment segs[3] = {corpus::Segment::Start, corpus::Segment::Middle,
                                             corpus::Segment::End};
            struct SegRow {
                const corpus::SignalTask* task;
                std::vector<double> vals[3];
                std::optional<stats::TestResult> test;
            };
            std::vector<SegRow> rows;
            for (const auto& task : corpus::signal_registry()) {
                SegRow r;
                r.task = &task;
                for (const auto& l : labels) {
                    if (l.signal_id != task.signal_id) continue;
                    for (int s = 0; s < 3; ++s) {
                        if (l.segment == segs[s]) r.vals[s].push_back(l.label);
                    }
                }
                std::vector<std::vector<long long>> table;
                for (int s = 0; s < 3; ++s) {
                    long long pos = 0;
                    for (double v : r.vals[s]) pos += static_cast<long long>(v);
                    table.push_back({static_cast<long long>(r.vals[s].size()) - pos, pos});
                }
                try {
                    r.test = stats::chi_squared_independence(table);
                } catch (const StatError&) {
                    // zero margin: the shift test is undefined for this signal
                }
                rows.push_back(std::move(r));
            }
            std::vector<double> ps;
            for (const auto& r : rows) {
                if (r.test) ps.push_back(r.test->p_value);
            }
            auto corrected = stats::bonferroni(ps);
            std::size_t pi = 0;
            std::map<std::string, double> corrected_by_signal;
            for (auto& r : rows) {
                if (r.test) {
                    r.test->corrected_p = corrected[pi++];
                    corrected_by_signal[r.task->signal_id] = *r.test->corrected_p;
                }
            }

            report::Table t7;
            t7.title = "Label prevalence by visit segment";
            t7.columns = {"Social Signal", "Start", "Middle", "End", "Chi-squared (df=2)"};
            json seg_summary;
            for (const auto& r : rows) {
                std::vector<std::string> row = {r.task->display_name};
                for (int s = 0; s < 3; ++s) {
                    if (r.vals[s].empty()) {
                        row.push_back("--");
                    } else {
                        auto lm = util::mean_population_sd(r.vals[s]);
                        row.push_back(report::mean_sd_cell(lm.mean, lm.sd));
                    }
                }
                if (r.test) {
                    row.push_back(util::fixed(r.test->statistic, 3) +
                                  stars_suffix(*r.test->corrected_p));
                    if (*r.test->corrected_p < 0.05) {
                        seg_summary["significant"].push_back(r.task->signal_id);
                    }
                } else {
                    row.push_back("--");
                }
                t7.rows.push_back(std::move(row));
            }
            t7.footers.push_back("Chi-squared over pooled slices; slices from the same visit "
                                 "are not independent, so p-values are approximate");
            t7.footers.push_back("Bonferroni-corrected over the " + std::to_string(ps.size()) +
                                 " computable tests; * p<0.05, ** p<0.01, *** p<0.001");
            emit.table_pair("segment_labels", t7);

            auto seg_groups =
                metrics::group_balanced_accuracy(cells, metrics::Grouping::TaskSegment);
            std::map<std::pair<std::string, std::string>, const metrics::GroupMetric*> seg_ba;
            for (const auto& g : seg_groups) seg_ba[{g.task, g.segment}] = &g;
            auto overall_groups =
                metrics::group_balanced_accuracy(cells, metrics::Grouping::Segment);
            std::map<std::string, const metrics::GroupMetric*> overall_ba;
            for (const auto& g : overall_groups) overall_ba[g.segment] = &g;

            report::Table t8;
            t8.title = "Balanced accuracy by visit segment";
            t8.columns = {"Social Signal", "Start", "Middle", "End"};
            auto seg_cell = [&](const metrics::GroupMetric* g) {
                if (!g || !g->across_configs || g->across_configs->n_configs == 0) {
                    return std::string("--");
                }
                std::string cell =
                    report::mean_sd_cell(g->across_configs->mean, g->across_configs->sd);
                if (g->across_configs->mean < 0.5) cell = report::underline(cell);
                return cell;
            };
            for (const auto& task : corpus::signal_registry()) {
                std::string name = task.display_name;
                auto cit = corrected_by_signal.find(task.signal_id);
                if (cit != corrected_by_signal.end() && cit->second < 0.05) {
                    name = report::bold(name);
                }
                std::vector<std::string> row = {name};
                for (int s = 0; s < 3; ++s) {
                    auto it = seg_ba.find({task.signal_id, corpus::to_string(segs[s])});
                    row.push_back(seg_cell(it == seg_ba.end() ? nullptr : it->second));
                }
                t8.rows.push_back(std::move(row));
            }
            std::vector<std::string> avg = {"Averaged Performance"};
            for (int s = 0; s < 3; ++s) {
                auto it = overall_ba.find(corpus::to_string(segs[s]));
                const metrics::GroupMetric* g = it == overall_ba.end() ? nullptr : it->second;
                if (g && g->across_configs && g->across_configs->n_configs > 0) {
                    avg.push_back(
                        report::mean_sd_cell(g->across_configs->mean, g->across_configs->sd));
                    seg_summary["averaged"][corpus::to_string(segs[s])] =
                        g->across_configs->mean;
                } else {
                    avg.push_back("--");
                }
            }
            t8.rows.push_back(std::move(avg));
            t8.footers.push_back("cells average balanced accuracy over configurations, "
                                 "mean (population sd); underlined < 0.5; bold signals have "
                                 "significantly shifted labels");
            emit.table_pair("segment_accuracy", t8);
            summary["segments"] = seg_summary;
        }
    }

    for (const auto& n : outcome.notices) summary["notices"].push_back(n);
    fs::path sp = fs::path(options.out_dir) / "summary.json";
    util::write_file(sp.string(), summary.dump(2) + "\n");
    outcome.written.push_back(sp.string());
    return outcome;
}

}  // namespace ssp::analysis
