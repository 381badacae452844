#include "netside/multiclass.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "netside/errors.hpp"
#include "netside/parallel.hpp"
#include "netside/rng.hpp"

namespace netside {

namespace {

constexpr uint64_t kTagSplit = 0x73706c74;
constexpr uint64_t kTagPair = 0x70616972;
constexpr uint64_t kTagPool = 0x706f6f6c;
constexpr uint64_t kTagGroup = 0x67727570;
constexpr uint64_t kTagBracket = 0x62726163;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct GroupModel {
    FeaturePipeline pipeline;
    SvmModel model;

    int predict(const Frame& frame) const {
        return model.predict(pipeline(frame).values);
    }
};

GroupModel train_group_model(std::span<const Frame> pos, std::span<const Frame> neg,
                             const EvalConfig& cfg, const std::string& label_pos,
                             const std::string& label_neg) {
    std::vector<Frame> all(pos.begin(), pos.end());
    all.insert(all.end(), neg.begin(), neg.end());
    FeaturePipeline pipeline(cfg.transform, all);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    x.reserve(all.size());
    y.reserve(all.size());
    for (const Frame& f : all) x.push_back(pipeline(f).values);
    y.assign(pos.size(), 1);
    y.insert(y.end(), neg.size(), -1);
    SvmModel model = train_svm(x, y, cfg.svm);
    model.label_pos = label_pos;
    model.label_neg = label_neg;
    return {std::move(pipeline), std::move(model)};
}

struct Holdout {
    WebDataset train;
    WebDataset test;
};

Holdout split_holdout(const WebDataset& ds, const EvalConfig& cfg) {
    Holdout h;
    h.train.url_ids = ds.url_ids;
    h.test.url_ids = ds.url_ids;
    h.train.frames_by_url.resize(ds.url_ids.size());
    h.test.frames_by_url.resize(ds.url_ids.size());
    for (size_t u = 0; u < ds.url_ids.size(); ++u) {
        const std::vector<Frame>& frames = ds.frames_by_url[u];
        size_t n_test = static_cast<size_t>(
            std::llround(cfg.holdout_fraction * static_cast<double>(frames.size())));
        if (n_test < 1) n_test = 1;
        if (frames.size() < n_test + 1)
            throw InsufficientDataError("url '" + ds.url_ids[u] +
                                        "': too few frames for a held-out split");
        std::vector<size_t> idx(frames.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(mix_seed(cfg.seed, kTagSplit, static_cast<uint64_t>(u)));
        rng.shuffle(idx);
        for (size_t i = 0; i < idx.size(); ++i) {
            (i < n_test ? h.test : h.train).frames_by_url[u].push_back(frames[idx[i]]);
        }
    }
    return h;
}

// mean pairwise CCR of `candidate` against the group members; undefined cells
// count as chance level
double mean_ccr_against(const CcrMatrix& m, size_t candidate, const std::vector<size_t>& group) {
    double sum = 0.0;
    for (size_t member : group) {
        double v = m.at(candidate, member);
        sum += std::isnan(v) ? 0.5 : v;
    }
    return sum / static_cast<double>(group.size());
}

struct CascadeNode {
    std::vector<size_t> urls;
    std::vector<size_t> left_urls, right_urls;
    size_t left = SIZE_MAX, right = SIZE_MAX;
    std::optional<GroupModel> model;
};

std::string group_label(const WebDataset& ds, const std::vector<size_t>& urls) {
    std::string s;
    for (size_t u : urls) {
        if (!s.empty()) s += '+';
        s += ds.url_ids[u];
    }
    return s;
}

size_t build_cascade(std::vector<CascadeNode>& nodes, std::vector<size_t> urls,
                     const WebDataset& train, const EvalConfig& cfg, Selection selection,
                     const CcrMatrix* matrix, uint64_t& node_counter) {
    size_t idx = nodes.size();
    nodes.push_back({});
    nodes[idx].urls = urls;
    if (urls.size() < 2) return idx;

    size_t na = (urls.size() + 1) / 2;
    std::vector<size_t> a, b;
    Rng rng(mix_seed(cfg.seed, kTagGroup, node_counter++));
    if (selection == Selection::random) {
        std::vector<size_t> order = urls;
        rng.shuffle(order);
        a.assign(order.begin(), order.begin() + static_cast<long>(na));
        b.assign(order.begin() + static_cast<long>(na), order.end());
    } else {
        // greedy: seed one member at random, then keep pulling the url its
        // group most confuses with into the same group, so the best-separated
        // urls land on opposite sides of the boundary and look-alikes defer to
        // later stages with dedicated models
        std::vector<size_t> remaining = urls;
        size_t pick = static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(remaining.size()) - 1));
        a.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<long>(pick));
        while (a.size() < na) {
            size_t best = 0;
            double best_score = 2.0;
            for (size_t i = 0; i < remaining.size(); ++i) {
                double score = mean_ccr_against(*matrix, remaining[i], a);
                if (score < best_score) {
                    best_score = score;
                    best = i;
                }
            }
            a.push_back(remaining[best]);
            remaining.erase(remaining.begin() + static_cast<long>(best));
        }
        b = remaining;
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    std::vector<Frame> pos, neg;
    for (size_t u : a)
        pos.insert(pos.end(), train.frames_by_url[u].begin(), train.frames_by_url[u].end());
    for (size_t u : b)
        neg.insert(neg.end(), train.frames_by_url[u].begin(), train.frames_by_url[u].end());
    GroupModel model =
        train_group_model(pos, neg, cfg, group_label(train, a), group_label(train, b));

    size_t left = build_cascade(nodes, a, train, cfg, selection, matrix, node_counter);
    size_t right = build_cascade(nodes, b, train, cfg, selection, matrix, node_counter);
    nodes[idx].left_urls = std::move(a);
    nodes[idx].right_urls = std::move(b);
    nodes[idx].left = left;
    nodes[idx].right = right;
    nodes[idx].model.emplace(std::move(model));
    return idx;
}

// Turns per-sample failure stages into stage reports. fail_stage[i] is the
// first stage at which sample i fell off its true path (INT_MAX if never);
// survivors telescope, so successive CCR is exactly the product of the
// conditional stage CCRs on counts.
std::vector<StageReport> stage_reports(const std::vector<int>& fail_stage,
                                       const std::vector<long>& group_sizes) {
    long total = static_cast<long>(fail_stage.size());
    std::vector<StageReport> stages;
    long prev = total;
    for (size_t d = 0; d < group_sizes.size(); ++d) {
        int stage = static_cast<int>(d) + 1;
        long survivors = 0;
        for (int fs : fail_stage)
            if (fs > stage) ++survivors;
        StageReport r;
        r.stage_index = stage;
        r.group_size = group_sizes[d];
        r.correct_count = survivors;
        r.total_count = total;
        r.stage_ccr = prev > 0 ? static_cast<double>(survivors) / static_cast<double>(prev) : 1.0;
        r.successive_ccr = total > 0 ? static_cast<double>(survivors) / static_cast<double>(total) : 0.0;
        stages.push_back(r);
        prev = survivors;
    }
    return stages;
}

CcrMatrix selection_matrix(const WebDataset& train, const EvalConfig& cfg, int jobs) {
    EvalConfig sel_cfg = cfg;
    sel_cfg.seed = mix_seed(cfg.seed, kTagPair, 0x73656c); // decouple from reporting runs
    return one_vs_one_matrix(train, sel_cfg, jobs);
}

} // namespace

size_t WebDataset::index_of(const std::string& url_id) const {
    for (size_t i = 0; i < url_ids.size(); ++i)
        if (url_ids[i] == url_id) return i;
    throw UsageError("unknown url '" + url_id + "'");
}

size_t WebDataset::total_frames() const {
    size_t n = 0;
    for (const auto& v : frames_by_url) n += v.size();
    return n;
}

void WebDataset::validate() const {
    if (url_ids.size() != frames_by_url.size())
        throw UsageError("dataset: url list and frame groups differ in length");
    if (url_ids.empty()) throw InsufficientDataError("dataset: no urls");
    std::set<std::string> seen;
    for (const std::string& id : url_ids) {
        if (id.empty()) throw SchemaError("dataset: empty url id");
        if (!seen.insert(id).second) throw SchemaError("dataset: duplicate url '" + id + "'");
    }
    for (size_t i = 0; i < url_ids.size(); ++i)
        if (frames_by_url[i].empty())
            throw InsufficientDataError("dataset: url '" + url_ids[i] + "' has no frames");
}

WebDataset dataset_from_frames(std::span<const Frame> labeled_frames) {
    std::map<std::string, std::vector<Frame>> by_label;
    for (const Frame& f : labeled_frames) {
        if (f.label.empty()) throw SchemaError("frame without a label");
        by_label[f.label].push_back(f);
    }
    WebDataset ds;
    for (auto& [label, frames] : by_label) {
        ds.url_ids.push_back(label);
        ds.frames_by_url.push_back(std::move(frames));
    }
    ds.validate();
    return ds;
}

double CcrMatrix::at(size_t i, size_t j) const {
    if (i >= values.size() || j >= values.size()) throw UsageError("ccr matrix index out of range");
    return values[i][j];
}

double CcrMatrix::mean() const {
    double sum = 0.0;
    long n = 0;
    for (size_t i = 0; i < values.size(); ++i)
        for (size_t j = i + 1; j < values.size(); ++j)
            if (!std::isnan(values[i][j])) {
                sum += values[i][j];
                ++n;
            }
    if (n == 0) throw InsufficientDataError("ccr matrix has no defined cells");
    return sum / static_cast<double>(n);
}

CcrMatrix one_vs_one_matrix(const WebDataset& ds, const EvalConfig& cfg, int jobs) {
    ds.validate();
    size_t n = ds.url_ids.size();
    if (n < 2) throw InsufficientDataError("1v1 matrix needs at least 2 urls");

    CcrMatrix m;
    m.url_ids = ds.url_ids;
    m.values.assign(n, std::vector<double>(n, kNaN));

    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    std::vector<std::string> notes(pairs.size());
    parallel_for(pairs.size(), jobs, [&](size_t p) {
        auto [i, j] = pairs[p];
        std::vector<Frame> frames(ds.frames_by_url[i].begin(), ds.frames_by_url[i].end());
        frames.insert(frames.end(), ds.frames_by_url[j].begin(), ds.frames_by_url[j].end());
        std::vector<int> labels(ds.frames_by_url[i].size(), 1);
        labels.insert(labels.end(), ds.frames_by_url[j].size(), -1);
        uint64_t pair_seed = mix_seed(cfg.seed, kTagPair, i * n + j);
        try {
            double ccr =
                cross_validate(frames, labels, cfg.folds, cfg.svm, cfg.transform, pair_seed);
            m.values[i][j] = m.values[j][i] = ccr;
        } catch (const InsufficientDataError& e) {
            notes[p] = ds.url_ids[i] + " vs " + ds.url_ids[j] + ": " + e.what();
        }
    });
    for (std::string& note : notes)
        if (!note.empty()) m.notes.push_back(std::move(note));
    return m;
}

double one_vs_all(const WebDataset& ds, const std::string& target_url, const EvalConfig& cfg) {
    ds.validate();
    size_t t = ds.index_of(target_url);
    if (ds.url_ids.size() < 2) throw InsufficientDataError("one-vs-all needs a non-empty pool");

    std::vector<Frame> pool;
    for (size_t u = 0; u < ds.url_ids.size(); ++u) {
        if (u == t) continue;
        pool.insert(pool.end(), ds.frames_by_url[u].begin(), ds.frames_by_url[u].end());
    }
    const std::vector<Frame>& target = ds.frames_by_url[t];

    // draw a pool sample of the target's size so the binary problem is balanced
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(cfg.seed, kTagPool));
    rng.shuffle(idx);
    size_t keep = std::min(pool.size(), target.size());

    std::vector<Frame> frames(target.begin(), target.end());
    std::vector<int> labels(target.size(), 1);
    for (size_t i = 0; i < keep; ++i) frames.push_back(pool[idx[i]]);
    labels.insert(labels.end(), keep, -1);

    return cross_validate(frames, labels, cfg.folds, cfg.svm, cfg.transform,
                          mix_seed(cfg.seed, kTagPool, 1));
}

std::string to_string(Selection sel) {
    switch (sel) {
        case Selection::random: return "random";
        case Selection::fixed: return "fixed";
        case Selection::greedy: return "greedy";
    }
    return "random";
}

Selection selection_from_string(const std::string& s) {
    if (s == "random") return Selection::random;
    if (s == "fixed") return Selection::fixed;
    if (s == "greedy") return Selection::greedy;
    throw SchemaError("unknown selection '" + s + "'");
}

MulticlassResult cascade_classify(const WebDataset& ds, Selection selection,
                                  const EvalConfig& cfg, int jobs) {
    ds.validate();
    if (ds.url_ids.size() < 2) throw InsufficientDataError("cascade needs at least 2 urls");
    if (selection == Selection::fixed)
        throw UsageError("cascade selection must be 'random' or 'greedy'");

    Holdout h = split_holdout(ds, cfg);

    std::optional<CcrMatrix> matrix;
    if (selection == Selection::greedy) matrix.emplace(selection_matrix(h.train, cfg, jobs));

    std::vector<CascadeNode> nodes;
    std::vector<size_t> all(ds.url_ids.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    uint64_t node_counter = 0;
    build_cascade(nodes, all, h.train, cfg, selection,
                  matrix.has_value() ? &*matrix : nullptr, node_counter);

    // depth -> widest group entering a stage at that depth
    std::vector<long> group_sizes;
    {
        std::vector<std::pair<size_t, int>> queue{{0, 0}};
        while (!queue.empty()) {
            auto [idx, depth] = queue.back();
            queue.pop_back();
            const CascadeNode& node = nodes[idx];
            if (node.urls.size() < 2) continue;
            if (static_cast<size_t>(depth) >= group_sizes.size())
                group_sizes.resize(static_cast<size_t>(depth) + 1, 0);
            group_sizes[static_cast<size_t>(depth)] =
                std::max(group_sizes[static_cast<size_t>(depth)],
                         static_cast<long>(node.urls.size()));
            queue.push_back({node.left, depth + 1});
            queue.push_back({node.right, depth + 1});
        }
    }

    MulticlassResult result;
    result.url_ids = ds.url_ids;
    result.confusion.assign(ds.url_ids.size(), std::vector<long>(ds.url_ids.size(), 0));

    std::vector<int> fail_stage;
    for (size_t t = 0; t < h.test.url_ids.size(); ++t) {
        for (const Frame& frame : h.test.frames_by_url[t]) {
            size_t idx = 0;
            int stage = 0;
            int failed_at = std::numeric_limits<int>::max();
            bool on_true_path = true;
            while (nodes[idx].urls.size() > 1) {
                ++stage;
                const CascadeNode& node = nodes[idx];
                bool go_left = node.model->predict(frame) > 0;
                if (on_true_path) {
                    bool true_left = std::binary_search(node.left_urls.begin(),
                                                        node.left_urls.end(), t);
                    if (go_left != true_left) {
                        on_true_path = false;
                        failed_at = stage;
                    }
                }
                idx = go_left ? node.left : node.right;
            }
            fail_stage.push_back(failed_at);
            result.confusion[t][nodes[idx].urls[0]] += 1;
        }
    }

    result.stages = stage_reports(fail_stage, group_sizes);
    result.final_ccr = result.stages.empty() ? 1.0 : result.stages.back().successive_ccr;
    return result;
}

MulticlassResult tree_classify(const WebDataset& ds, Selection selection, const EvalConfig& cfg,
                               int jobs) {
    ds.validate();
    size_t n = ds.url_ids.size();
    if (n < 2) throw InsufficientDataError("tree tournament needs at least 2 urls");

    Holdout h = split_holdout(ds, cfg);

    // bracket order: position 2k meets position 2k+1 in round one
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    if (selection == Selection::fixed) {
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return ds.url_ids[a] < ds.url_ids[b]; });
    } else if (selection == Selection::random) {
        Rng rng(mix_seed(cfg.seed, kTagBracket));
        rng.shuffle(order);
    } else {
        CcrMatrix matrix = selection_matrix(h.train, cfg, jobs);
        Rng rng(mix_seed(cfg.seed, kTagBracket));
        std::vector<size_t> remaining = order;
        order.clear();
        while (!remaining.empty()) {
            size_t pick = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(remaining.size()) - 1));
            size_t u = remaining[pick];
            remaining.erase(remaining.begin() + static_cast<long>(pick));
            order.push_back(u);
            if (remaining.empty()) break;
            // pair it with its most separable opponent
            size_t best = 0;
            double best_score = -1.0;
            for (size_t i = 0; i < remaining.size(); ++i) {
                double v = matrix.at(u, remaining[i]);
                double score = std::isnan(v) ? 0.5 : v;
                if (score > best_score) {
                    best_score = score;
                    best = i;
                }
            }
            order.push_back(remaining[best]);
            remaining.erase(remaining.begin() + static_cast<long>(best));
        }
    }

    // every pair can meet somewhere in the bracket, so train them all
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<std::optional<GroupModel>> models(pairs.size());
    parallel_for(pairs.size(), jobs, [&](size_t p) {
        auto [i, j] = pairs[p];
        models[p].emplace(train_group_model(h.train.frames_by_url[i], h.train.frames_by_url[j],
                                            cfg, ds.url_ids[i], ds.url_ids[j]));
    });
    auto pair_index = [n](size_t i, size_t j) {
        if (i > j) std::swap(i, j);
        // offset of (i, j) in the row-major upper triangle
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    };

    std::vector<long> group_sizes;
    for (size_t alive = n; alive > 1; alive = (alive + 1) / 2)
        group_sizes.push_back(static_cast<long>(alive));

    MulticlassResult result;
    result.url_ids = ds.url_ids;
    result.confusion.assign(n, std::vector<long>(n, 0));

    std::vector<int> fail_stage;
    for (size_t t = 0; t < h.test.url_ids.size(); ++t) {
        for (const Frame& frame : h.test.frames_by_url[t]) {
            std::vector<size_t> alive = order;
            int stage = 0;
            int failed_at = std::numeric_limits<int>::max();
            bool on_true_path = true;
            while (alive.size() > 1) {
                ++stage;
                std::vector<size_t> next;
                for (size_t k = 0; k + 1 < alive.size(); k += 2) {
                    size_t a = alive[k], b = alive[k + 1];
                    const GroupModel& gm = *models[pair_index(a, b)];
                    int pred = gm.predict(frame);
                    size_t winner = (a < b) == (pred > 0) ? a : b;
                    next.push_back(winner);
                    if (on_true_path && (a == t || b == t) && winner != t) {
                        on_true_path = false;
                        failed_at = stage;
                    }
                }
                if (alive.size() % 2 == 1) next.push_back(alive.back()); // bye advances
                alive = std::move(next);
            }
            fail_stage.push_back(failed_at);
            result.confusion[t][alive[0]] += 1;
        }
    }

    result.stages = stage_reports(fail_stage, group_sizes);
    result.final_ccr = result.stages.empty() ? 1.0 : result.stages.back().successive_ccr;
    return result;
}

// --- reports -------------------------------------------------------------------

namespace {

std::ofstream open_report(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& [k, v] : header) out << "# " << k << ": " << v << "\n";
    return out;
}

std::string fmt_ccr(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void save_ccr_matrix_csv(const CcrMatrix& m, const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_report(path, header);
    for (const std::string& note : m.notes) out << "# note: " << note << "\n";
    out << "url";
    for (const std::string& id : m.url_ids) out << "," << id;
    out << "\n";
    for (size_t i = 0; i < m.url_ids.size(); ++i) {
        out << m.url_ids[i];
        for (size_t j = 0; j < m.url_ids.size(); ++j) out << "," << fmt_ccr(m.values[i][j]);
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

void save_stage_report_csv(const MulticlassResult& r, const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_report(path, header);
    out << "# final_ccr: " << fmt_ccr(r.final_ccr) << "\n";
    out << "stage,group_size,stage_ccr,successive_ccr,correct_count,total_count\n";
    for (const StageReport& s : r.stages)
        out << s.stage_index << "," << s.group_size << "," << fmt_ccr(s.stage_ccr) << ","
            << fmt_ccr(s.successive_ccr) << "," << s.correct_count << "," << s.total_count
            << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
}

void save_confusion_csv(const std::vector<std::string>& url_ids,
                        const std::vector<std::vector<long>>& confusion, const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_report(path, header);
    out << "url";
    for (const std::string& id : url_ids) out << "," << id;
    out << "\n";
    for (size_t i = 0; i < url_ids.size(); ++i) {
        out << url_ids[i];
        for (size_t j = 0; j < url_ids.size(); ++j) out << "," << confusion[i][j];
        out << "\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace netside
