#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "netside/errors.hpp"
#include "netside/multiclass.hpp"
#include "netside/synth.hpp"

using namespace netside;

namespace {

EvalConfig fast_config(uint64_t seed = 1) {
    EvalConfig cfg;
    cfg.svm = {64.0, 0.05, 1e-4, 500'000};
    cfg.transform = {TransformKind::packet_counts, 100};
    cfg.folds = 5;
    cfg.holdout_fraction = 0.2;
    cfg.seed = seed;
    return cfg;
}

std::vector<UrlProfile> spread_profiles(int n) {
    std::vector<UrlProfile> all = fixtures::eight_profiles();
    // u0/u1 are an intentional clone pair; skip u1 for separable sets
    std::vector<UrlProfile> out = {all[0]};
    for (int i = 3; i < 3 + n - 1; ++i) out.push_back(all[static_cast<size_t>(i)]);
    return out;
}

WebDataset spread_dataset(int urls, int frames_per_url, uint64_t seed) {
    return fixtures::make_web_dataset(spread_profiles(urls), frames_per_url, 30.0,
                                      NoiseSpec::none(), seed);
}

bool results_equal(const MulticlassResult& a, const MulticlassResult& b) {
    if (a.url_ids != b.url_ids || a.confusion != b.confusion) return false;
    if (a.final_ccr != b.final_ccr || a.stages.size() != b.stages.size()) return false;
    for (size_t i = 0; i < a.stages.size(); ++i) {
        const StageReport& x = a.stages[i];
        const StageReport& y = b.stages[i];
        if (x.stage_index != y.stage_index || x.group_size != y.group_size ||
            x.stage_ccr != y.stage_ccr || x.successive_ccr != y.successive_ccr ||
            x.correct_count != y.correct_count || x.total_count != y.total_count)
            return false;
    }
    return true;
}

void check_stage_invariants(const MulticlassResult& r, long expected_tests) {
    REQUIRE(!r.stages.empty());
    double product = 1.0;
    double prev_successive = 1.0;
    for (size_t i = 0; i < r.stages.size(); ++i) {
        const StageReport& s = r.stages[i];
        CHECK(s.stage_index == static_cast<int>(i + 1));
        CHECK(s.total_count == expected_tests);
        CHECK(s.stage_ccr >= 0.0);
        CHECK(s.stage_ccr <= 1.0);
        product *= s.stage_ccr;
        CHECK(s.successive_ccr == doctest::Approx(product).epsilon(1e-12));
        CHECK(s.successive_ccr <= prev_successive + 1e-12);
        CHECK(s.successive_ccr ==
              doctest::Approx(static_cast<double>(s.correct_count) /
                              static_cast<double>(s.total_count))
                  .epsilon(1e-12));
        prev_successive = s.successive_ccr;
    }
    CHECK(r.final_ccr == doctest::Approx(r.stages.back().successive_ccr).epsilon(1e-12));

    long diag = 0, total = 0;
    for (size_t t = 0; t < r.confusion.size(); ++t)
        for (size_t p = 0; p < r.confusion[t].size(); ++p) {
            total += r.confusion[t][p];
            if (t == p) diag += r.confusion[t][p];
        }
    CHECK(total == expected_tests);
    CHECK(r.final_ccr ==
          doctest::Approx(static_cast<double>(diag) / static_cast<double>(total))
              .epsilon(1e-12));
}

} // namespace

TEST_CASE("dataset_from_frames groups by label in sorted order") {
    std::vector<Frame> frames;
    for (const char* label : {"b", "a", "b", "c", "a"}) {
        Frame f;
        f.label = label;
        f.duration_us = 1;
        frames.push_back(std::move(f));
    }
    WebDataset ds = dataset_from_frames(frames);
    REQUIRE(ds.url_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(ds.frames_by_url[0].size() == 2);
    CHECK(ds.frames_by_url[1].size() == 2);
    CHECK(ds.frames_by_url[2].size() == 1);
    CHECK(ds.total_frames() == 5);
    CHECK(ds.index_of("c") == 2);
    CHECK_THROWS_AS(ds.index_of("zzz"), UsageError);
}

TEST_CASE("pairwise matrix is symmetric with an undefined diagonal") {
    WebDataset ds = spread_dataset(3, 40, 101);
    CcrMatrix m = one_vs_one_matrix(ds, fast_config(), 1);
    REQUIRE(m.url_ids.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(std::isnan(m.at(i, i)));
        for (size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(m.at(i, j) == m.at(j, i));
            CHECK(m.at(i, j) >= 0.0);
            CHECK(m.at(i, j) <= 1.0);
        }
    }
    // u0 (40 pkts) vs u6 (90 pkts) is trivially separable
    CHECK(m.at(0, 2) > 0.95);
    double mean = m.mean();
    CHECK(mean > 0.0);
    CHECK(mean <= 1.0);
}

TEST_CASE("an identical-profile pair scores near chance") {
    std::vector<UrlProfile> all = fixtures::eight_profiles();
    std::vector<UrlProfile> clones = {all[0], all[1]};  // same distribution
    WebDataset ds = fixtures::make_web_dataset(clones, 60, 30.0, NoiseSpec::none(), 77);
    CcrMatrix m = one_vs_one_matrix(ds, fast_config(), 1);
    CHECK(m.at(0, 1) < 0.65);
}

TEST_CASE("matrix results do not depend on the worker count") {
    WebDataset ds = spread_dataset(4, 30, 55);
    CcrMatrix a = one_vs_one_matrix(ds, fast_config(), 1);
    CcrMatrix b = one_vs_one_matrix(ds, fast_config(), 3);
    REQUIRE(a.values.size() == b.values.size());
    for (size_t i = 0; i < a.url_ids.size(); ++i)
        for (size_t j = 0; j < a.url_ids.size(); ++j)
            if (i != j) CHECK(a.at(i, j) == b.at(i, j));
}

TEST_CASE("one_vs_all pools and subsamples the negatives") {
    WebDataset ds = spread_dataset(4, 40, 202);
    double ccr = one_vs_all(ds, ds.url_ids[3], fast_config());
    CHECK(ccr > 0.8);
    CHECK(ccr <= 1.0);
    CHECK_THROWS_AS(one_vs_all(ds, "unknown", fast_config()), UsageError);
}

TEST_CASE("cascade halves groups and reports telescoping stage rates") {
    WebDataset ds = spread_dataset(4, 40, 303);
    for (Selection sel : {Selection::random, Selection::greedy}) {
        MulticlassResult r = cascade_classify(ds, sel, fast_config(), 1);
        REQUIRE(r.stages.size() == 2);
        CHECK(r.stages[0].group_size == 4);
        CHECK(r.stages[1].group_size == 2);
        check_stage_invariants(r, 4 * 8);  // 20% of 40 frames held out per url
        CHECK(r.final_ccr > 0.8);          // widely separated profiles
    }
    CHECK_THROWS_AS(cascade_classify(ds, Selection::fixed, fast_config(), 1), UsageError);
}

TEST_CASE("cascade on five urls pads the odd group") {
    WebDataset ds = spread_dataset(5, 25, 404);
    MulticlassResult r = cascade_classify(ds, Selection::random, fast_config(), 1);
    REQUIRE(r.stages.size() == 3);
    CHECK(r.stages[0].group_size == 5);
    CHECK(r.stages[1].group_size == 3);
    CHECK(r.stages[2].group_size == 2);
    check_stage_invariants(r, 5 * 5);
}

TEST_CASE("tree tournament handles byes and keeps the same invariants") {
    WebDataset ds = spread_dataset(5, 25, 505);
    for (Selection sel : {Selection::random, Selection::fixed, Selection::greedy}) {
        MulticlassResult r = tree_classify(ds, sel, fast_config(), 1);
        REQUIRE(r.stages.size() == 3);
        CHECK(r.stages[0].group_size == 5);
        CHECK(r.stages[1].group_size == 3);
        CHECK(r.stages[2].group_size == 2);
        check_stage_invariants(r, 5 * 5);
        CHECK(r.final_ccr > 0.7);
    }
}

TEST_CASE("multiclass runs are deterministic and jobs-independent") {
    WebDataset ds = spread_dataset(4, 30, 606);
    MulticlassResult a = cascade_classify(ds, Selection::greedy, fast_config(9), 1);
    MulticlassResult b = cascade_classify(ds, Selection::greedy, fast_config(9), 4);
    CHECK(results_equal(a, b));
    MulticlassResult c = tree_classify(ds, Selection::random, fast_config(9), 1);
    MulticlassResult d = tree_classify(ds, Selection::random, fast_config(9), 4);
    CHECK(results_equal(c, d));
}

TEST_CASE("stage and confusion reports land on disk with headers") {
    namespace fs = std::filesystem;
    WebDataset ds = spread_dataset(4, 30, 707);
    MulticlassResult r = tree_classify(ds, Selection::fixed, fast_config(), 1);
    fs::path dir = fs::temp_directory_path() / "netside_multiclass_tests";
    fs::create_directories(dir);

    fs::path stages = dir / "stages.csv";
    save_stage_report_csv(r, stages.string(), {{"tool", "netside test"}});
    std::ifstream in(stages);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# tool: netside test");
    bool saw_final = false, saw_columns = false;
    size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# final_ccr:", 0) == 0) saw_final = true;
        else if (line.rfind("stage,", 0) == 0) saw_columns = true;
        else if (!line.empty() && line[0] != '#') ++rows;
    }
    CHECK(saw_final);
    CHECK(saw_columns);
    CHECK(rows == r.stages.size());

    fs::path conf = dir / "confusion.csv";
    save_confusion_csv(r.url_ids, r.confusion, conf.string());
    std::ifstream cin2(conf);
    size_t conf_rows = 0;
    while (std::getline(cin2, line))
        if (!line.empty() && line[0] != '#') ++conf_rows;
    CHECK(conf_rows == r.url_ids.size() + 1);  // column header + one row per url

    CcrMatrix m = one_vs_one_matrix(ds, fast_config(), 1);
    fs::path matrix = dir / "matrix.csv";
    save_ccr_matrix_csv(m, matrix.string());
    std::ifstream min2(matrix);
    size_t matrix_rows = 0;
    while (std::getline(min2, line))
        if (!line.empty() && line[0] != '#') ++matrix_rows;
    CHECK(matrix_rows == m.url_ids.size() + 1);
}

TEST_CASE("holdout needs at least one training frame per url") {
    std::vector<Frame> frames;
    for (int i = 0; i < 2; ++i) {
        Frame f;
        f.label = i == 0 ? "a" : "b";
        f.duration_us = 1;
        frames.push_back(std::move(f));
    }
    WebDataset ds = dataset_from_frames(frames);
    CHECK_THROWS_AS(cascade_classify(ds, Selection::random, fast_config(), 1),
                    InsufficientDataError);
}
