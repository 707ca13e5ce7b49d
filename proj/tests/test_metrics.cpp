#include <doctest.h>

#include "sspeval/errors.hpp"
#include "sspeval/metrics.hpp"

using namespace ssp;
using doctest::Approx;
using corpus::Race;
using corpus::Segment;

namespace {

metrics::EvalCell cell(const std::string& visit, int slice, const std::string& signal,
                       const std::string& config, std::optional<int> pred, int label,
                       Segment seg = Segment::Start, Race race = Race::Unknown) {
    metrics::EvalCell c;
    c.visit_id = visit;
    c.slice_index = slice;
    c.signal_id = signal;
    c.config_id = config;
    c.prediction = pred;
    c.label = label;
    c.segment = seg;
    c.race = race;
    return c;
}

metrics::GroupMetric group_with(double ba, long long n, bool degenerate = false) {
    metrics::GroupMetric g;
    g.ba.value = ba;
    g.ba.degenerate = degenerate;
    g.n = n;
    return g;
}

}  // namespace

TEST_CASE("confusion counters and balanced accuracy") {
    metrics::Confusion c;
    c.add(1, 1);
    c.add(1, 1);
    c.add(0, 1);
    c.add(0, 0);
    c.add(1, 0);
    CHECK(c.tp == 2);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
    CHECK(c.fp == 1);
    CHECK(c.total() == 5);
    auto ba = metrics::balanced_accuracy(c);
    CHECK(!ba.degenerate);
    CHECK(ba.value == Approx(0.5 * (2.0 / 3.0 + 0.5)));
    CHECK_THROWS_AS(c.add(2, 0), ValidationError);
    CHECK_THROWS_AS((void)metrics::balanced_accuracy(metrics::Confusion{}), StatError);
}

TEST_CASE("balanced accuracy degenerates to single-class recall") {
    metrics::Confusion only_pos;
    only_pos.add(1, 1);
    only_pos.add(1, 1);
    only_pos.add(0, 1);
    auto r = metrics::balanced_accuracy(only_pos);
    CHECK(r.degenerate);
    CHECK(r.value == Approx(2.0 / 3.0));

    metrics::Confusion only_neg;
    only_neg.add(0, 0);
    only_neg.add(1, 0);
    auto r2 = metrics::balanced_accuracy(only_neg);
    CHECK(r2.degenerate);
    CHECK(r2.value == Approx(0.5));
}

TEST_CASE("correctness matrix counts per slice and flags duplicates") {
    std::vector<metrics::EvalCell> cells = {
        cell("v1", 0, "provider_warmth", "FLAN-ZS", 1, 1),
        cell("v1", 0, "provider_warmth", "Gemma-ZS", 0, 1),
        cell("v1", 0, "patient_warmth", "FLAN-ZS", std::nullopt, 0),
        cell("v1", 1, "provider_warmth", "FLAN-ZS", 0, 0),
        cell("v0", 7, "provider_warmth", "FLAN-ZS", 1, 0),
    };
    auto table = metrics::correctness_matrix(cells);
    REQUIRE(table.per_slice.size() == 3);
    CHECK(table.per_slice[0].visit_id == "v0");  // sorted by key
    CHECK(table.per_slice[1].visit_id == "v1");
    CHECK(table.per_slice[1].slice_index == 0);
    CHECK(table.per_slice[1].correct == 1);
    CHECK(table.per_slice[1].evaluated == 2);
    CHECK(table.per_slice[1].abstained == 1);
    CHECK(table.total_correct == 2);
    CHECK(table.total_evaluated == 4);
    CHECK(table.total_abstained == 1);

    cells.push_back(cell("v1", 0, "provider_warmth", "FLAN-ZS", 0, 1));
    CHECK_THROWS_AS((void)metrics::correctness_matrix(cells), IntegrityError);
}

TEST_CASE("grouped balanced accuracy keys on the requested dimensions") {
    std::vector<metrics::EvalCell> cells = {
        cell("v1", 0, "s1", "A", 1, 1),
        cell("v1", 1, "s1", "A", 0, 0),
        cell("v1", 2, "s1", "B", 0, 1),
        cell("v1", 3, "s1", "B", 0, 0),
        cell("v1", 0, "s2", "A", 1, 0),
        cell("v1", 1, "s2", "A", 1, 1),
        cell("v1", 4, "s2", "A", std::nullopt, 1),
    };
    auto by_task_config = metrics::group_balanced_accuracy(cells, metrics::Grouping::TaskConfig);
    REQUIRE(by_task_config.size() == 3);
    CHECK(by_task_config[0].task == "s1");
    CHECK(by_task_config[0].config == "A");
    CHECK(by_task_config[0].ba.value == Approx(1.0));
    CHECK(by_task_config[0].n == 2);
    CHECK(by_task_config[1].task == "s1");
    CHECK(by_task_config[1].config == "B");
    CHECK(by_task_config[1].ba.value == Approx(0.5));
    CHECK(by_task_config[2].task == "s2");
    CHECK(by_task_config[2].abstained == 1);
    CHECK(by_task_config[2].n == 2);
    CHECK(!by_task_config[0].across_configs.has_value());

    auto by_task = metrics::group_balanced_accuracy(cells, metrics::Grouping::Task);
    REQUIRE(by_task.size() == 2);
    CHECK(by_task[0].n == 4);
}

TEST_CASE("segment grouping aggregates per-config values with mean and sd") {
    std::vector<metrics::EvalCell> cells;
    // config A at balanced accuracy 0.6: 3/5 on each class
    for (int i = 0; i < 5; ++i) {
        cells.push_back(cell("v1", i, "s1", "A", i < 3 ? 1 : 0, 1));
        cells.push_back(cell("v1", i + 5, "s1", "A", i < 3 ? 0 : 1, 0));
    }
    // config B at balanced accuracy 0.5: 1/2 on each class
    cells.push_back(cell("v2", 0, "s1", "B", 1, 1));
    cells.push_back(cell("v2", 1, "s1", "B", 0, 1));
    cells.push_back(cell("v2", 2, "s1", "B", 0, 0));
    cells.push_back(cell("v2", 3, "s1", "B", 1, 0));

    auto groups = metrics::group_balanced_accuracy(cells, metrics::Grouping::Segment);
    REQUIRE(groups.size() == 1);
    const auto& g = groups[0];
    CHECK(g.segment == "start");
    REQUIRE(g.across_configs.has_value());
    CHECK(g.across_configs->n_configs == 2);
    CHECK(g.across_configs->mean == Approx(0.55));
    CHECK(g.across_configs->sd == Approx(0.05));
    CHECK(!g.across_configs->any_degenerate);

    // a config that only ever sees one class flips the degenerate flag
    cells.push_back(cell("v3", 0, "s1", "C", 1, 1));
    auto flagged = metrics::group_balanced_accuracy(cells, metrics::Grouping::Segment);
    REQUIRE(flagged[0].across_configs.has_value());
    CHECK(flagged[0].across_configs->any_degenerate);
}

TEST_CASE("race groupings skip unknown race cells") {
    std::vector<metrics::EvalCell> cells = {
        cell("v1", 0, "s1", "A", 1, 1, Segment::Start, Race::White),
        cell("v1", 1, "s1", "A", 0, 0, Segment::Start, Race::White),
        cell("v2", 0, "s1", "A", 0, 1, Segment::Start, Race::NonWhite),
        cell("v2", 1, "s1", "A", 0, 0, Segment::Start, Race::NonWhite),
        cell("v3", 0, "s1", "A", 1, 1, Segment::Start, Race::Unknown),
    };
    auto groups = metrics::group_balanced_accuracy(cells, metrics::Grouping::Race);
    REQUIRE(groups.size() == 2);
    long long total = 0;
    for (const auto& g : groups) total += g.n;
    CHECK(total == 4);  // the unknown-race cell is not counted anywhere
}

TEST_CASE("fully abstained group reports no defined value") {
    std::vector<metrics::EvalCell> cells = {
        cell("v1", 0, "s1", "A", std::nullopt, 1),
        cell("v1", 1, "s1", "A", std::nullopt, 0),
    };
    auto groups = metrics::group_balanced_accuracy(cells, metrics::Grouping::Task);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].n == 0);
    CHECK(groups[0].abstained == 2);
}

TEST_CASE("disparity ratio flags strictly below four fifths") {
    auto base = group_with(1.0, 10);
    auto r79 = metrics::demographic_parity_ratio(group_with(0.79, 10), base);
    REQUIRE(r79.dpr.has_value());
    CHECK(*r79.dpr == Approx(0.79));
    CHECK(r79.flagged);
    auto r80 = metrics::demographic_parity_ratio(group_with(0.80, 10), base);
    CHECK(!r80.flagged);
    auto r81 = metrics::demographic_parity_ratio(group_with(0.81, 10), base);
    CHECK(!r81.flagged);
    // order of the two groups does not matter
    auto swapped = metrics::demographic_parity_ratio(base, group_with(0.79, 10));
    CHECK(*swapped.dpr == Approx(0.79));

    CHECK(!metrics::demographic_parity_ratio(group_with(0.9, 0), base).dpr.has_value());
    CHECK(!metrics::demographic_parity_ratio(group_with(0.9, 10, true), base).dpr.has_value());
}

TEST_CASE("grouping names parse") {
    CHECK(metrics::grouping_from_string("task") == metrics::Grouping::Task);
    CHECK(metrics::grouping_from_string("task x race") == metrics::Grouping::TaskRace);
    CHECK(metrics::grouping_from_string("task-segment") == metrics::Grouping::TaskSegment);
    CHECK_THROWS_AS((void)metrics::grouping_from_string("nope"), ConfigError);
}
