#pragma once

#include <string>
#include <vector>

#include "sspeval/stats.hpp"

namespace ssp::difficulty {

// One word category: exact literals plus stem prefixes loaded from a
// trailing-star pattern (e.g. "certain*").
struct Category {
    std::string name;
    std::vector<std::string> literals;
    std::vector<std::string> stems;

    bool matches(const std::string& token) const;
};

// Word-category table, CSV with a "category,pattern" header. Categories
// keep file order.
class Lexicon {
  public:
    static Lexicon from_csv(const std::string& path);

    const std::vector<Category>& categories() const { return categories_; }
    void add_pattern(const std::string& category, const std::string& pattern);

  private:
    std::vector<Category> categories_;
};

// Lowercase alphabetic runs; apostrophes survive only between letters,
// digits never join a token.
std::vector<std::string> tokenize(const std::string& text);

// Chunks delimited by . ! ? that contain at least one token; text with no
// terminator counts as a single sentence.
int count_sentences(const std::string& text);

struct Features {
    int tokens = 0;
    int sentences = 0;
    double words_per_sentence = 0.0;
    double all_punctuation_pct = 0.0;  // per 100 tokens
    double period_pct = 0.0;
    std::vector<double> category_pct;  // aligned with lexicon categories
};

Features extract_features(const std::string& text, const Lexicon& lexicon);

// "WPS", "AllPunc", "Period", then the lexicon category names.
std::vector<std::string> feature_names(const Lexicon& lexicon);
std::vector<double> flatten(const Features& f);

struct QuantileSplit {
    std::vector<int> low;   // indices with score <= low_threshold
    std::vector<int> high;  // indices with score >= high_threshold
    double low_threshold = 0.0;
    double high_threshold = 0.0;
};

// Symmetric nearest-rank tails: k = ceil(q * n); the low band takes every
// score at or under the k-th smallest, the high band every score at or
// over the k-th largest. Overlapping bands are an error.
QuantileSplit split_quantiles(const std::vector<double>& scores, double q);

struct FeatureComparison {
    std::string feature;
    double low_mean = 0.0, low_sd = 0.0;    // population sd
    double high_mean = 0.0, high_sd = 0.0;
    stats::TestResult test;  // Mann-Whitney, corrected_p Bonferroni over features
};

std::vector<FeatureComparison> compare_groups(const std::vector<Features>& low,
                                              const std::vector<Features>& high,
                                              const Lexicon& lexicon);

}  // namespace ssp::difficulty
