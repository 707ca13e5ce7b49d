#pragma once

#include <string>
#include <vector>

#include "sspeval/corpus.hpp"
#include "sspeval/inference.hpp"
#include "sspeval/metrics.hpp"

namespace ssp::analysis {

// The analysis ids accepted by run_analyses, in execution order.
const std::vector<std::string>& analysis_names();

struct AnalysisInputs {
    const corpus::CorpusData* corpus = nullptr;
    const std::vector<corpus::RawLabel>* labels = nullptr;
    const std::vector<corpus::VisitMetadata>* metadata = nullptr;  // may be null
    const std::vector<infer::PredictionRecord>* records = nullptr;  // canonical order
    std::string provenance;  // journal hash stamped onto every artifact
};

struct AnalysisOptions {
    std::vector<std::string> which;  // empty = all
    double quantile = 0.25;
    double lambda = 0.1;
    std::string lexicon_path;  // empty: the lexicon comparison is skipped
    std::string out_dir;
};

struct AnalysisOutcome {
    std::vector<std::string> written;  // artifact paths
    std::vector<std::string> notices;  // skipped analyses and data caveats
};

// Joins prediction records with labels and slice attributes. Abstains keep
// an empty prediction; transport-error records are excluded.
std::vector<metrics::EvalCell> join_cells(const AnalysisInputs& in);

// Runs the requested analyses and writes the report bundle (markdown + CSV
// tables, plot data files, summary.json) into out_dir. Deterministic for a
// given journal.
AnalysisOutcome run_analyses(const AnalysisInputs& in, const AnalysisOptions& options);

}  // namespace ssp::analysis
