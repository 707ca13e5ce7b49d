#include "sspeval/difficulty.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"

namespace ssp::difficulty {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool Category::matches(const std::string& token) const {
    for (const auto& lit : literals) {
        if (token == lit) return true;
    }
    for (const auto& stem : stems) {
        if (token.size() >= stem.size() && token.compare(0, stem.size(), stem) == 0) return true;
    }
    return false;
}

void Lexicon::add_pattern(const std::string& category, const std::string& pattern) {
    if (category.empty()) throw ParseError("lexicon entry with empty category name");
    if (pattern.empty()) throw ParseError("lexicon category '" + category + "' has an empty pattern");
    std::string p = util::to_lower(pattern);
    bool stem = p.back() == '*';
    if (stem) p.pop_back();
    if (p.empty()) throw ParseError("lexicon category '" + category + "' has a bare '*' pattern");
    if (p.find('*') != std::string::npos) {
        throw ParseError("lexicon pattern '" + pattern + "' may only end with '*'");
    }
    Category* cat = nullptr;
    for (auto& c : categories_) {
        if (c.name == category) { cat = &c; break; }
    }
    if (!cat) {
        categories_.push_back(Category{category, {}, {}});
        cat = &categories_.back();
    }
    (stem ? cat->stems : cat->literals).push_back(p);
}

Lexicon Lexicon::from_csv(const std::string& path) {
    auto rows = util::read_csv(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"category", "pattern"}) {
        throw ParseError(path + ": expected header 'category,pattern'");
    }
    Lexicon lex;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) {
            throw ParseError(path + ": line " + std::to_string(i + 1) + " needs exactly 2 fields");
        }
        lex.add_pattern(rows[i][0], rows[i][1]);
    }
    if (lex.categories().empty()) throw ParseError(path + ": no lexicon entries");
    return lex;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (is_alpha(c)) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (c == '\'' && !current.empty() && i + 1 < text.size() && is_alpha(text[i + 1])) {
            current.push_back('\'');
        } else {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

int count_sentences(const std::string& text) {
    int sentences = 0;
    bool terminator_seen = false;
    std::string chunk;
    auto flush = [&]() {
        if (!tokenize(chunk).empty()) ++sentences;
        chunk.clear();
    };
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            terminator_seen = true;
            flush();
        } else {
            chunk.push_back(c);
        }
    }
    flush();
    if (!terminator_seen) return 1;
    return sentences;
}

Features extract_features(const std::string& text, const Lexicon& lexicon) {
    auto tokens = tokenize(text);
    if (tokens.empty()) throw ValidationError("no word tokens in text, cannot extract features");

    Features f;
    f.tokens = static_cast<int>(tokens.size());
    f.sentences = std::max(1, count_sentences(text));
    f.words_per_sentence = static_cast<double>(f.tokens) / f.sentences;

    long long punct = 0, periods = 0;
    for (char c : text) {
        if (is_punct(c)) ++punct;
        if (c == '.') ++periods;
    }
    f.all_punctuation_pct = 100.0 * punct / f.tokens;
    f.period_pct = 100.0 * periods / f.tokens;

    f.category_pct.resize(lexicon.categories().size(), 0.0);
    for (std::size_t k = 0; k < lexicon.categories().size(); ++k) {
        int hits = 0;
        for (const auto& tok : tokens) {
            if (lexicon.categories()[k].matches(tok)) ++hits;
        }
        f.category_pct[k] = 100.0 * hits / f.tokens;
    }
    return f;
}

std::vector<std::string> feature_names(const Lexicon& lexicon) {
    std::vector<std::string> names = {"WPS", "AllPunc", "Period"};
    for (const auto& c : lexicon.categories()) names.push_back(c.name);
    return names;
}

std::vector<double> flatten(const Features& f) {
    std::vector<double> row = {f.words_per_sentence, f.all_punctuation_pct, f.period_pct};
    row.insert(row.end(), f.category_pct.begin(), f.category_pct.end());
    return row;
}

QuantileSplit split_quantiles(const std::vector<double>& scores, double q) {
    const int n = static_cast<int>(scores.size());
    if (n < 2) throw ValidationError("quantile split needs at least 2 scores");
    if (!(q > 0.0 && q < 0.5)) throw ConfigError("quantile fraction must lie in (0, 0.5)");

    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) {
        throw ValidationError("all scores are equal; no difficulty bands exist");
    }
    const int k = static_cast<int>(std::ceil(q * n));

    QuantileSplit split;
    split.low_threshold = sorted[k - 1];
    split.high_threshold = sorted[n - k];
    if (split.low_threshold >= split.high_threshold) {
        throw ValidationError("difficulty bands overlap; scores are too concentrated for q=" +
                              util::fixed(q, 3));
    }
    for (int i = 0; i < n; ++i) {
        if (scores[i] <= split.low_threshold) split.low.push_back(i);
        if (scores[i] >= split.high_threshold) split.high.push_back(i);
    }
    return split;
}

std::vector<FeatureComparison> compare_groups(const std::vector<Features>& low,
                                              const std::vector<Features>& high,
                                              const Lexicon& lexicon) {
    if (low.empty() || high.empty()) throw ValidationError("both difficulty bands need rows");
    auto names = feature_names(lexicon);
    const std::size_t m = names.size();

    std::vector<FeatureComparison> rows;
    std::vector<double> raw_p;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> lo, hi;
        lo.reserve(low.size());
        hi.reserve(high.size());
        for (const auto& f : low) lo.push_back(flatten(f)[j]);
        for (const auto& f : high) hi.push_back(flatten(f)[j]);

        FeatureComparison fc;
        fc.feature = names[j];
        auto lo_ms = util::mean_population_sd(lo);
        auto hi_ms = util::mean_population_sd(hi);
        fc.low_mean = lo_ms.mean;
        fc.low_sd = lo_ms.sd;
        fc.high_mean = hi_ms.mean;
        fc.high_sd = hi_ms.sd;
        fc.test = stats::mann_whitney_u(lo, hi);
        raw_p.push_back(fc.test.p_value);
        rows.push_back(std::move(fc));
    }
    auto corrected = stats::bonferroni(raw_p, static_cast<int>(m));
    for (std::size_t j = 0; j < m; ++j) rows[j].test.corrected_p = corrected[j];
    return rows;
}

}  // namespace ssp::difficulty
