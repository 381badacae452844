#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netside/features.hpp"
#include "netside/svm.hpp"
#include "netside/trace.hpp"

namespace netside {

struct WebDataset {
    std::vector<std::string> url_ids;
    std::vector<std::vector<Frame>> frames_by_url; // parallel to url_ids

    size_t index_of(const std::string& url_id) const; // UsageError if absent
    size_t total_frames() const;
    void validate() const;
};

WebDataset dataset_from_frames(std::span<const Frame> labeled_frames);

struct EvalConfig {
    SvmParams svm;
    TransformSpec transform;
    int folds = 5;
    double holdout_fraction = 0.2;
    uint64_t seed = 0;
};

// Pairwise cross-validated CCR table. Stored as a full square for easy lookup;
// the diagonal is NaN and both triangles mirror each other. Pairs that cannot
// be evaluated (too few samples) stay NaN and leave a note.
struct CcrMatrix {
    std::vector<std::string> url_ids;
    std::vector<std::vector<double>> values;
    std::vector<std::string> notes;

    double at(size_t i, size_t j) const;
    double mean() const; // over defined off-diagonal cells
};

CcrMatrix one_vs_one_matrix(const WebDataset& ds, const EvalConfig& cfg, int jobs = 1);

// Target vs the pooled remainder, with the pool subsampled to the target's
// frame count so neither class dominates; returns cross-validated CCR.
double one_vs_all(const WebDataset& ds, const std::string& target_url, const EvalConfig& cfg);

enum class Selection { random, fixed, greedy };

std::string to_string(Selection sel);
Selection selection_from_string(const std::string& s);

struct StageReport {
    int stage_index = 0;   // 1-based
    long group_size = 0;   // urls in play entering the stage
    double stage_ccr = 0.0;
    double successive_ccr = 0.0;
    long correct_count = 0; // test samples still on their true path after the stage
    long total_count = 0;   // all test samples
};

struct MulticlassResult {
    std::vector<std::string> url_ids;
    std::vector<StageReport> stages;
    double final_ccr = 0.0;
    std::vector<std::vector<long>> confusion; // [true][predicted] on held-out frames
};

// Recursive halving: each stage trains group-vs-group SVMs and routes test
// samples down; stage CCR is conditional on having survived the stages before,
// so the successive CCR is exactly the running product on counts. Selection
// 'greedy' builds groups from a 1v1 matrix computed on the training split only.
MulticlassResult cascade_classify(const WebDataset& ds, Selection selection,
                                  const EvalConfig& cfg, int jobs = 1);

// Tournament over a bracket of binary matches; winners advance, byes advance
// automatically. Selection fixes the bracket order: random shuffle, fixed
// (lexicographic), or greedy max-separability pairing.
MulticlassResult tree_classify(const WebDataset& ds, Selection selection, const EvalConfig& cfg,
                               int jobs = 1);

void save_ccr_matrix_csv(const CcrMatrix& m, const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& header = {});
void save_stage_report_csv(const MulticlassResult& r, const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& header = {});
void save_confusion_csv(const std::vector<std::string>& url_ids,
                        const std::vector<std::vector<long>>& confusion, const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& header = {});

} // namespace netside
