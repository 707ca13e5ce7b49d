#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sspeval/corpus.hpp"
#include "sspeval/inference.hpp"
#include "sspeval/promptkit.hpp"

namespace ssp::testfix {

// Deterministic 10-visit synthetic corpus used by the end-to-end tests:
// 6 slices per visit (plus one under-length slice in v03 that the word
// filter drops), full 20-signal label coverage, 5 provider groups of 2
// visits, 7 white / 3 non-white patients, and a shared mock-rule file that
// drives every dialect through cue words planted in the transcripts.
//
// Cue slices:
//   v01/0 beaconword  -> every config answers 1; all 20 labels positive,
//                        so the slice scores the full 180 correct cells
//   v02/1 mistcue     -> every config abstains (no logprobs)
//   v04/2 glowcue     -> logit fallback, prediction 1
//   duskcue slices    -> 0 everywhere except Gemma-COT and LLaMA-FSCOT
//   fernhollow slices -> 1 everywhere except Gemma-COT
// Cue-free slices follow dialect rules: yes/no dialects answer "no" for
// provider Type-I and all Type-II signals and "yes" otherwise; the numeric
// dialect answers 1 for patient subjects and 0 for provider subjects.
struct FixturePaths {
    std::string dir;
    std::string transcripts;
    std::string labels;
    std::string metadata;
    std::string lexicon;
    std::string bank;
    std::string rules;
};

FixturePaths write_fixture(const std::string& dir);

// Writes a TOML run config pointing at the fixture files.
std::string write_config(const FixturePaths& paths, const std::string& config_path,
                         const std::string& run_dir, std::uint64_t seed = 11,
                         int max_in_flight = 1);

struct FixtureData {
    corpus::CorpusData corpus;
    std::vector<corpus::RawLabel> labels;
    std::vector<corpus::VisitMetadata> metadata;
    prompt::FewShotBank bank;
    std::vector<infer::MockRule> rules;
};

FixtureData load_fixture(const FixturePaths& paths);

// Fresh per-test scratch directory under the system temp root.
std::string make_temp_dir(const std::string& tag);

}  // namespace ssp::testfix
