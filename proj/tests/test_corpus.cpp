#include <doctest.h>

#include <filesystem>

#include "sspeval/corpus.hpp"
#include "sspeval/errors.hpp"
#include "sspeval/util.hpp"
#include "support/fixture.hpp"

using namespace ssp;
using corpus::Segment;
using corpus::SignalType;
using corpus::Speaker;
using corpus::Subject;

namespace {

corpus::Turn turn(const std::string& visit, double start, const std::string& text,
                  Speaker sp = Speaker::Provider) {
    corpus::Turn t;
    t.visit_id = visit;
    t.speaker = sp;
    t.start_s = start;
    t.end_s = start + 10.0;
    t.text = text;
    return t;
}

}  // namespace

TEST_CASE("signal registry lists the 20 tasks in report order") {
    const auto& reg = corpus::signal_registry();
    REQUIRE(reg.size() == 20);
    for (int i = 0; i < 15; ++i) CHECK(reg[i].signal_type == SignalType::TypeI);
    for (int i = 15; i < 20; ++i) CHECK(reg[i].signal_type == SignalType::TypeII);

    CHECK(reg[0].signal_id == "provider_dominance");
    CHECK(reg[0].display_name == "Provider Dominance");
    CHECK(reg[0].subject == Subject::Provider);
    CHECK(reg[7].signal_id == "patient_dominance");
    CHECK(reg[7].subject == Subject::Patient);
    CHECK(reg[14].signal_id == "provider_hurriedness");
    CHECK(reg[15].signal_id == "provider_irritation");
    CHECK(reg[19].signal_id == "patient_distress");
    CHECK(reg[19].display_name == "Patient Distress");

    CHECK(corpus::signal_by_id("patient_warmth").subject == Subject::Patient);
    CHECK_THROWS_AS((void)corpus::signal_by_id("nope"), ConfigError);
}

TEST_CASE("binarize splits Type-I at 3.5 and Type-II at 1.5") {
    const auto& one = corpus::signal_by_id("provider_warmth");
    const auto& two = corpus::signal_by_id("patient_distress");
    CHECK(corpus::binarize(one, 3.0) == 0);
    CHECK(corpus::binarize(one, 3.5) == 0);
    CHECK(corpus::binarize(one, 4.0) == 1);
    CHECK(corpus::binarize(two, 1.0) == 0);
    CHECK(corpus::binarize(two, 1.5) == 0);
    CHECK(corpus::binarize(two, 2.0) == 1);
    CHECK_THROWS_AS((void)corpus::binarize(one, 0.5), ValidationError);
    CHECK_THROWS_AS((void)corpus::binarize(one, 6.5), ValidationError);
}

TEST_CASE("segment_position marks first, last, and interior slices") {
    CHECK(corpus::segment_position(0, 6) == Segment::Start);
    CHECK(corpus::segment_position(5, 6) == Segment::End);
    for (int i = 1; i < 5; ++i) CHECK(corpus::segment_position(i, 6) == Segment::Middle);
    CHECK(corpus::segment_position(0, 1) == Segment::Start);
    CHECK(corpus::segment_position(1, 2) == Segment::End);
    CHECK_THROWS_AS((void)corpus::segment_position(3, 3), ValidationError);
}

TEST_CASE("slice_visit buckets by start time and re-indexes over gaps") {
    corpus::Visit v;
    v.visit_id = "g1";
    v.turns = {turn("g1", 10.0, "alpha beta"),
               turn("g1", 170.0, "gamma", Speaker::Patient),
               // nothing lands in [180, 360): bucket 1 is empty
               turn("g1", 400.0, "delta epsilon zeta"),
               turn("g1", 900.0, "eta", Speaker::Other)};
    auto slices = corpus::slice_visit(v, 180.0);
    REQUIRE(slices.size() == 3);
    CHECK(slices[0].slice_index == 0);
    CHECK(slices[0].word_count == 3);
    CHECK(slices[0].segment == Segment::Start);
    CHECK(slices[0].joined_text() == "alpha beta gamma");
    CHECK(slices[1].slice_index == 1);  // dense despite the empty bucket
    CHECK(slices[1].word_count == 3);
    CHECK(slices[1].segment == Segment::Middle);
    CHECK(slices[2].slice_index == 2);
    CHECK(slices[2].segment == Segment::End);
}

TEST_CASE("filter_slices keeps indices stable and recomputes segments") {
    corpus::Visit v;
    v.visit_id = "g2";
    v.turns = {turn("g2", 0.0, "one two three four five"),
               turn("g2", 200.0, "tiny"),
               turn("g2", 400.0, "a b c d e f"),
               turn("g2", 600.0, "x y z w")};
    auto sliced = corpus::slice_visit(v, 180.0);
    REQUIRE(sliced.size() == 4);
    auto filtered = corpus::filter_slices(sliced, 4);
    CHECK(filtered.dropped == 1);
    REQUIRE(filtered.slices.size() == 3);
    // index 1 was dropped; survivors keep their original indices
    CHECK(filtered.slices[0].slice_index == 0);
    CHECK(filtered.slices[1].slice_index == 2);
    CHECK(filtered.slices[2].slice_index == 3);
    // segments are reassigned over the survivors
    CHECK(filtered.slices[0].segment == Segment::Start);
    CHECK(filtered.slices[1].segment == Segment::Middle);
    CHECK(filtered.slices[2].segment == Segment::End);
}

TEST_CASE("ingest_transcripts maps speaker aliases and sorts turns") {
    auto dir = testfix::make_temp_dir("ingest");
    auto path = dir + "/t.jsonl";
    ssp::util::write_file(
        path,
        R"({"visit_id":"a","speaker":"clinician","start_s":30,"end_s":40,"text":"late turn"})"
        "\n"
        R"({"visit_id":"a","speaker":"patient","start_s":5,"end_s":12,"text":"early turn"})"
        "\n"
        R"({"visit_id":"a","speaker":"companion","start_s":50,"end_s":60,"text":"someone else"})"
        "\n");
    auto visits = corpus::ingest_transcripts(path);
    REQUIRE(visits.size() == 1);
    REQUIRE(visits[0].turns.size() == 3);
    CHECK(visits[0].turns[0].text == "early turn");
    CHECK(visits[0].turns[0].speaker == Speaker::Patient);
    CHECK(visits[0].turns[1].speaker == Speaker::Provider);
    CHECK(visits[0].turns[2].speaker == Speaker::Other);

    ssp::util::write_file(path, R"({"visit_id":"a","speaker":"martian","start_s":1,"end_s":2,"text":"hm"})"
                                "\n");
    CHECK_THROWS_AS((void)corpus::ingest_transcripts(path), ValidationError);
}

TEST_CASE("fixture corpus has the documented shape") {
    auto dir = testfix::make_temp_dir("corpus-shape");
    auto paths = testfix::write_fixture(dir);
    auto data = testfix::load_fixture(paths);

    CHECK(data.corpus.dropped_slices == 1);
    CHECK(data.corpus.slices.size() == 60);
    auto summary = corpus::summarize(data.corpus);
    CHECK(summary.n_visits == 10);
    CHECK(summary.n_slices == 60);
    CHECK(summary.words_overall.mean > 20.0);

    // every slice clears the word filter
    for (const auto& s : data.corpus.slices) CHECK(s.word_count >= 20);

    // v03 lost its trailing bucket but keeps six dense slices
    auto v03 = data.corpus.visit_slices("v03");
    REQUIRE(v03.size() == 6);
    CHECK(v03.front()->segment == Segment::Start);
    CHECK(v03.back()->segment == Segment::End);
    CHECK(v03.back()->slice_index == 5);

    CHECK(data.corpus.find("v05", 3) != nullptr);
    CHECK(data.corpus.find("v05", 6) == nullptr);
    CHECK(data.corpus.find("zz", 0) == nullptr);

    // full label coverage: 10 visits x 6 slices x 20 signals
    CHECK(data.labels.size() == 1200);
    corpus::LabelIndex index(data.labels);
    for (const auto& s : data.corpus.slices) {
        for (const auto& task : corpus::signal_registry()) {
            auto raw = index.raw(s.visit_id, s.slice_index, task.signal_id);
            REQUIRE(raw.has_value());
            CHECK(*raw >= 1.0);
            CHECK(*raw <= 6.0);
        }
    }

    REQUIRE(data.metadata.size() == 10);
    int non_white = 0;
    for (const auto& m : data.metadata) {
        CHECK(!m.provider_group.empty());
        if (m.patient_race == corpus::Race::NonWhite) ++non_white;
    }
    CHECK(non_white == 3);
}

TEST_CASE("labels csv rejects malformed rows") {
    auto dir = testfix::make_temp_dir("labels-bad");
    auto path = dir + "/l.csv";
    ssp::util::write_file(path, "visit_id,slice_index,signal_id\nv1,0,provider_warmth\n");
    CHECK_THROWS_AS((void)corpus::load_labels(path), ParseError);
    ssp::util::write_file(path,
                          "visit_id,slice_index,signal_id,raw_score\nv1,zero,provider_warmth,4\n");
    CHECK_THROWS_AS((void)corpus::load_labels(path), ParseError);
}

TEST_CASE("race strings accept the common spellings") {
    CHECK(corpus::race_from_string("white") == corpus::Race::White);
    CHECK(corpus::race_from_string("Non-White") == corpus::Race::NonWhite);
    CHECK(corpus::race_from_string("non_white") == corpus::Race::NonWhite);
    CHECK(corpus::race_from_string("") == corpus::Race::Unknown);
    CHECK_THROWS_AS((void)corpus::race_from_string("green"), ValidationError);
}
