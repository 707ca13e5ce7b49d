#include <doctest.h>

#include <cmath>

#include "sspeval/difficulty.hpp"
#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"
#include "support/fixture.hpp"

using namespace ssp;
using doctest::Approx;

namespace {

difficulty::Lexicon demo_lexicon() {
    difficulty::Lexicon lex;
    lex.add_pattern("Affect", "happy");
    lex.add_pattern("Affect", "worr*");
    lex.add_pattern("CogProc", "think*");
    return lex;
}

}  // namespace

TEST_CASE("tokenizer keeps internal apostrophes and drops digits") {
    auto t = difficulty::tokenize("I don't think so, Dr. Smith; it's 25 mg!");
    std::vector<std::string> want = {"i",     "don't", "think", "so", "dr",
                                     "smith", "it's",  "mg"};
    CHECK(t == want);
    CHECK(difficulty::tokenize("'quoted' words'").size() == 2);
    CHECK(difficulty::tokenize("12 34 56").empty());
}

TEST_CASE("sentence counting needs a token per chunk") {
    CHECK(difficulty::count_sentences("One. Two! Three?") == 3);
    CHECK(difficulty::count_sentences("Wait... what?") == 2);
    CHECK(difficulty::count_sentences("no terminator at all") == 1);
    CHECK(difficulty::count_sentences("Trailing words. And more") == 2);
    CHECK(difficulty::count_sentences("...") == 0);  // terminators but no words
}

TEST_CASE("category matching distinguishes literals from stems") {
    auto lex = demo_lexicon();
    REQUIRE(lex.categories().size() == 2);
    const auto& affect = lex.categories()[0];
    CHECK(affect.matches("happy"));
    CHECK(!affect.matches("happychance"));  // literal, not a stem
    CHECK(affect.matches("worried"));
    CHECK(affect.matches("worry"));
    CHECK(affect.matches("worr"));
    CHECK(!affect.matches("wor"));
}

TEST_CASE("feature extraction percentages are per hundred tokens") {
    auto lex = demo_lexicon();
    auto f = difficulty::extract_features(
        "I am happy today. I think we were worried, really worried!", lex);
    CHECK(f.tokens == 11);
    CHECK(f.sentences == 2);
    CHECK(f.words_per_sentence == Approx(5.5));
    // punctuation: one period, one comma, one exclamation mark
    CHECK(f.all_punctuation_pct == Approx(100.0 * 3 / 11));
    CHECK(f.period_pct == Approx(100.0 * 1 / 11));
    REQUIRE(f.category_pct.size() == 2);
    CHECK(f.category_pct[0] == Approx(100.0 * 3 / 11));  // happy, worried x2
    CHECK(f.category_pct[1] == Approx(100.0 * 1 / 11));  // think

    auto names = difficulty::feature_names(lex);
    std::vector<std::string> want = {"WPS", "AllPunc", "Period", "Affect", "CogProc"};
    CHECK(names == want);
    auto flat = difficulty::flatten(f);
    REQUIRE(flat.size() == names.size());
    CHECK(flat[0] == Approx(5.5));
    CHECK(flat[3] == Approx(f.category_pct[0]));
}

TEST_CASE("lexicon csv loading") {
    auto dir = testfix::make_temp_dir("lex");
    auto path = dir + "/lex.csv";
    util::write_file(path, "category,pattern\nAffect,happy\nAffect,sad*\nSocial,friend*\n");
    auto lex = difficulty::Lexicon::from_csv(path);
    REQUIRE(lex.categories().size() == 2);
    CHECK(lex.categories()[0].name == "Affect");
    CHECK(lex.categories()[0].literals.size() == 1);
    CHECK(lex.categories()[0].stems.size() == 1);
    CHECK(lex.categories()[1].matches("friends"));

    util::write_file(path, "wrong,header\nAffect,happy\n");
    CHECK_THROWS_AS((void)difficulty::Lexicon::from_csv(path), ParseError);
}

TEST_CASE("quantile split takes symmetric nearest-rank tails") {
    std::vector<double> scores;
    for (int i = 1; i <= 100; ++i) scores.push_back(static_cast<double>(i));
    auto split = difficulty::split_quantiles(scores, 0.25);
    CHECK(split.low.size() == 25);
    CHECK(split.high.size() == 25);
    CHECK(split.low_threshold == Approx(25.0));
    CHECK(split.high_threshold == Approx(76.0));
    for (int idx : split.low) CHECK(scores[idx] <= 25.0);
    for (int idx : split.high) CHECK(scores[idx] >= 76.0);

    // ties at the threshold pull their whole run into the band
    std::vector<double> tied = {1, 1, 1, 1, 5, 6, 7, 8};
    auto tied_split = difficulty::split_quantiles(tied, 0.25);
    CHECK(tied_split.low.size() == 4);
    CHECK(tied_split.high.size() == 2);

    // overlapping bands are refused rather than fudged
    std::vector<double> flat(8, 3.0);
    CHECK_THROWS_AS((void)difficulty::split_quantiles(flat, 0.25), ValidationError);
    CHECK_THROWS_AS((void)difficulty::split_quantiles(scores, 0.0), ConfigError);
    CHECK_THROWS_AS((void)difficulty::split_quantiles(scores, 0.6), ConfigError);
    CHECK_THROWS_AS((void)difficulty::split_quantiles({}, 0.25), ValidationError);
}

TEST_CASE("group comparison tests every feature with a corrected p") {
    auto lex = demo_lexicon();
    std::vector<difficulty::Features> low, high;
    // low band: short sentences, no affect words; high band: longer and
    // affect-heavy, so at least one feature separates cleanly
    for (int i = 0; i < 8; ++i) {
        low.push_back(difficulty::extract_features("We talked. It went fine. All good.", lex));
        high.push_back(difficulty::extract_features(
            "I think we were really worried about the long and complicated plan "
            "that kept everyone unsettled and unhappy for days on end.",
            lex));
    }
    auto rows = difficulty::compare_groups(low, high, lex);
    auto names = difficulty::feature_names(lex);
    REQUIRE(rows.size() == names.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].feature == names[i]);
        REQUIRE(rows[i].test.corrected_p.has_value());
        CHECK(*rows[i].test.corrected_p >= rows[i].test.p_value);
        CHECK(*rows[i].test.corrected_p <= 1.0);
    }
    // words-per-sentence differs sharply between the bands
    CHECK(rows[0].low_mean < rows[0].high_mean);
    CHECK(*rows[0].test.corrected_p < 0.05);

    CHECK_THROWS_AS((void)difficulty::compare_groups({}, high, lex), ValidationError);
}
