#include "netside/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "netside/config.hpp"
#include "netside/countermeasures.hpp"
#include "netside/errors.hpp"
#include "netside/features.hpp"
#include "netside/location.hpp"
#include "netside/multiclass.hpp"
#include "netside/parallel.hpp"
#include "netside/rng.hpp"
#include "netside/svm.hpp"
#include "netside/synth.hpp"
#include "netside/trace.hpp"

namespace netside {

namespace {

namespace fs = std::filesystem;

using Header = std::vector<std::pair<std::string, std::string>>;

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string quote_arg(const std::string& a) {
    if (!a.empty() && a.find_first_of(" \t\"'") == std::string::npos) return a;
    std::string q = "\"";
    for (char ch : a) {
        if (ch == '"' || ch == '\\') q += '\\';
        q += ch;
    }
    q += '"';
    return q;
}

struct Common {
    uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir;
    std::string command;

    Header header() const {
        return {{"tool", kToolVersion},
                {"command", command},
                {"seed", std::to_string(seed)},
                {"jobs", std::to_string(jobs)}};
    }

    // relative output paths land in --out / NETSIDE_OUT_DIR
    std::string out_path(const std::string& p) const {
        fs::path path(p);
        fs::path full =
            (path.is_absolute() || out_dir.empty()) ? path : fs::path(out_dir) / path;
        if (full.has_parent_path()) {
            std::error_code ec;
            fs::create_directories(full.parent_path(), ec);
        }
        return full.string();
    }
};

std::ofstream open_artifact(const std::string& path, const Header& header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& [k, v] : header) out << "# " << k << ": " << v << "\n";
    return out;
}

void finish_artifact(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::string meta_or(const CounterTrace& t, const std::string& key, const std::string& def) {
    auto it = t.meta.find(key);
    return it == t.meta.end() ? def : it->second;
}

double meta_double(const CounterTrace& t, const std::string& key, const std::string& origin) {
    auto it = t.meta.find(key);
    if (it == t.meta.end()) throw SchemaError(origin + ": missing meta." + key);
    try {
        return std::stod(it->second);
    } catch (...) {
        throw SchemaError(origin + ": meta." + key + " is not a number");
    }
}

double meta_double_or(const CounterTrace& t, const std::string& key, double def) {
    auto it = t.meta.find(key);
    if (it == t.meta.end()) return def;
    try {
        return std::stod(it->second);
    } catch (...) {
        return def;
    }
}

std::vector<std::string> list_csv_files(const std::string& dir) {
    std::error_code ec;
    fs::directory_iterator it(dir, ec), end;
    if (ec) throw IoError("cannot read directory '" + dir + "': " + ec.message());
    std::vector<std::string> files;
    for (; it != end; it.increment(ec)) {
        if (ec) throw IoError("cannot read directory '" + dir + "': " + ec.message());
        if (it->path().extension() == ".csv") files.push_back(it->path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InsufficientDataError("no .csv files in '" + dir + "'");
    return files;
}

std::vector<Frame> load_frames(const std::string& trace_path, const std::string& labels_path,
                               double frame_s) {
    CounterTrace trace = load_trace_csv(trace_path);
    std::vector<PacketEvent> events = reconstruct_packet_events(trace);
    std::vector<std::pair<int64_t, std::string>> requests = load_labels_csv(labels_path);
    return slice_frames(events, requests, std::llround(frame_s * 1e6));
}

void binary_frames(const WebDataset& ds, const std::string& pos, const std::string& neg,
                   std::vector<Frame>& frames, std::vector<int>& labels) {
    size_t p = ds.index_of(pos);
    size_t n = ds.index_of(neg);
    if (p == n) throw UsageError("--pos and --neg must name different urls");
    frames.assign(ds.frames_by_url[p].begin(), ds.frames_by_url[p].end());
    labels.assign(frames.size(), 1);
    frames.insert(frames.end(), ds.frames_by_url[n].begin(), ds.frames_by_url[n].end());
    labels.insert(labels.end(), ds.frames_by_url[n].size(), -1);
}

std::string dist_echo(const std::vector<std::pair<int64_t, double>>& dist) {
    std::string s;
    for (const auto& [size, prob] : dist) {
        if (!s.empty()) s += ' ';
        s += std::to_string(size) + ":" + fmt_g(prob);
    }
    return s;
}

void noise_header(Header& h, const NoiseSpec& noise) {
    h.push_back({"noise.rate_pps", fmt_g(noise.rate_pps)});
    if (!noise.size_dist.empty()) h.push_back({"noise.size_dist", dist_echo(noise.size_dist)});
    h.push_back({"noise.incoming_ratio", fmt_g(noise.incoming_ratio)});
}

// "lo:hi" or "lo:hi:step", exponents of 2 for the sweep axes
std::vector<double> parse_range(const std::string& s, const char* which) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.size() < 2 || parts.size() > 3)
        throw UsageError(std::string(which) + ": expected 'lo:hi' or 'lo:hi:step'");
    auto num = [&](const std::string& p) {
        try {
            size_t pos = 0;
            double v = std::stod(p, &pos);
            if (pos != p.size()) throw std::invalid_argument(p);
            return v;
        } catch (...) {
            throw UsageError(std::string(which) + ": '" + p + "' is not a number");
        }
    };
    double lo = num(parts[0]);
    double hi = num(parts[1]);
    double step = parts.size() == 3 ? num(parts[2]) : 1.0;
    if (step <= 0.0) throw UsageError(std::string(which) + ": step must be positive");
    if (hi < lo) throw UsageError(std::string(which) + ": range is empty");
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9; v += step) {
        out.push_back(v);
        if (out.size() > 4096) throw UsageError(std::string(which) + ": range too large");
    }
    return out;
}

// ---- per-command option bags ---------------------------------------------

struct GenWebOpts {
    std::string profiles;
    int frames = 150;
    double frame_s = 30.0;
    std::string trace = "web_trace.csv";
    std::string labels = "web_labels.csv";
};

struct GenMapOpts {
    std::string config;
    std::string level = "device";
    double still_s = 15.0;
    std::string trace = "map_trace.csv";
};

struct PipelineOpts {
    std::string trace;
    std::string labels;
    std::string transform = "packet_counts";
    int64_t cutoff = 100;
    double frame_s = 30.0;

    TransformSpec spec() const {
        return {transform_kind_from_string(transform), cutoff};
    }
    void echo(Header& h) const {
        h.push_back({"trace", trace});
        h.push_back({"labels", labels});
        h.push_back({"transform", transform});
        h.push_back({"cutoff_bytes", std::to_string(cutoff)});
        h.push_back({"frame_s", fmt_g(frame_s)});
    }
};

struct SvmOpts {
    double c = SvmParams{}.C;
    double gamma = SvmParams{}.gamma;
    double tolerance = SvmParams{}.tolerance;
    long max_iter = SvmParams{}.max_iter;

    SvmParams params() const { return {c, gamma, tolerance, max_iter}; }
    void echo(Header& h) const {
        h.push_back({"svm.c", fmt_g(c)});
        h.push_back({"svm.gamma", fmt_g(gamma)});
        h.push_back({"svm.tolerance", fmt_g(tolerance)});
        h.push_back({"svm.max_iter", std::to_string(max_iter)});
    }
};

void add_pipeline_opts(CLI::App* sub, PipelineOpts& o) {
    sub->add_option("--trace", o.trace, "counter trace CSV")->required();
    sub->add_option("--labels", o.labels, "request schedule CSV")->required();
    sub->add_option("--transform", o.transform, "feature transform")
        ->check(CLI::IsMember({"packet_counts", "tf_cosine", "onion"}))
        ->capture_default_str();
    sub->add_option("--cutoff", o.cutoff, "drop packets with |size| below this")
        ->capture_default_str();
    sub->add_option("--frame-s", o.frame_s, "frame length in seconds")->capture_default_str();
}

void add_svm_opts(CLI::App* sub, SvmOpts& o) {
    sub->add_option("--c", o.c, "soft-margin C")->capture_default_str();
    sub->add_option("--gamma", o.gamma, "RBF gamma")->capture_default_str();
    sub->add_option("--tolerance", o.tolerance, "KKT convergence tolerance")
        ->capture_default_str();
    sub->add_option("--max-iter", o.max_iter, "SMO iteration cap")->capture_default_str();
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    std::string command = "netside";
    for (const std::string& a : args) command += " " + quote_arg(a);

    CLI::App app{"traffic side-channel analysis toolkit"};
    app.require_subcommand(1);

    Common c;
    c.command = command;
    if (const char* env_out = std::getenv("NETSIDE_OUT_DIR")) c.out_dir = env_out;
    app.add_option("--seed", c.seed, "base random seed")->capture_default_str();
    app.add_option("--jobs", c.jobs, "worker threads for independent trainings")
        ->capture_default_str();
    app.add_option("--out", c.out_dir,
                   "directory for relative output paths (default $NETSIDE_OUT_DIR)");

    // --- generators ---------------------------------------------------------

    GenWebOpts gw;
    CLI::App* gen_web = app.add_subcommand("gen-web", "synthesize a website-session trace");
    gen_web->fallthrough();
    gen_web->add_option("--profiles", gw.profiles, "url profile config")->required();
    gen_web->add_option("--frames", gw.frames, "frames per url")->capture_default_str();
    gen_web->add_option("--frame-s", gw.frame_s, "frame length in seconds")
        ->capture_default_str();
    gen_web->add_option("--trace", gw.trace, "output trace CSV")->capture_default_str();
    gen_web->add_option("--labels", gw.labels, "output request schedule CSV")
        ->capture_default_str();
    gen_web->callback([&] {
        if (gw.frames < 1) throw UsageError("--frames must be >= 1");
        ConfigFile cfg = load_config(gw.profiles);
        std::vector<UrlProfile> profiles = url_profiles_from_config(cfg);
        NoiseSpec noise = noise_from_config(cfg, NoiseSpec::web_background());
        int64_t frame_us = std::llround(gw.frame_s * 1e6);
        std::vector<std::pair<int64_t, std::string>> schedule;
        schedule.reserve(static_cast<size_t>(gw.frames) * profiles.size());
        for (int rep = 0; rep < gw.frames; ++rep)
            for (size_t u = 0; u < profiles.size(); ++u)
                schedule.emplace_back(
                    (static_cast<int64_t>(rep) * static_cast<int64_t>(profiles.size()) +
                     static_cast<int64_t>(u)) *
                        frame_us,
                    profiles[u].url_id);
        CounterTrace trace = gen_web_trace(profiles, schedule, noise, gw.frame_s, c.seed);
        Header h = c.header();
        h.push_back({"profiles", gw.profiles});
        h.push_back({"urls", std::to_string(profiles.size())});
        h.push_back({"frames_per_url", std::to_string(gw.frames)});
        h.push_back({"frame_s", fmt_g(gw.frame_s)});
        noise_header(h, noise);
        save_trace_csv(trace, c.out_path(gw.trace), h);
        save_labels_csv(schedule, c.out_path(gw.labels), h);
        std::cout << "wrote " << c.out_path(gw.trace) << " (" << trace.samples.size()
                  << " samples) and " << c.out_path(gw.labels) << " (" << schedule.size()
                  << " requests)\n";
    });

    GenMapOpts gm;
    CLI::App* gen_map = app.add_subcommand("gen-map", "synthesize a map-tile trace for a drive");
    gen_map->fallthrough();
    gen_map->add_option("--config", gm.config, "path/map/noise config")->required();
    gen_map->add_option("--level", gm.level, "counter scope")
        ->check(CLI::IsMember({"app", "device"}))
        ->capture_default_str();
    gen_map->add_option("--still", gm.still_s, "still prefix before motion, seconds")
        ->capture_default_str();
    gen_map->add_option("--trace", gm.trace, "output trace CSV")->capture_default_str();
    gen_map->callback([&] {
        ConfigFile cfg = load_config(gm.config);
        TraceScope scope = trace_scope_from_string(gm.level);
        MapModel base =
            scope == TraceScope::device ? MapModel::device_default() : MapModel::app_default();
        MapModel model = map_model_from_config(cfg, base);
        PathSpec path = path_from_config(cfg);
        NoiseSpec noise = noise_from_config(
            cfg, scope == TraceScope::device ? NoiseSpec::device_background() : NoiseSpec::none());
        CounterTrace trace = gen_map_trace(path, model, noise, scope, gm.still_s, c.seed);
        Header h = c.header();
        h.push_back({"config", gm.config});
        h.push_back({"level", gm.level});
        h.push_back({"still_prefix_s", fmt_g(gm.still_s)});
        h.push_back({"tile_bytes", fmt_g(model.tile_bytes)});
        h.push_back({"tile_miles", fmt_g(model.tile_miles)});
        h.push_back({"jitter", fmt_g(model.jitter)});
        h.push_back({"environment", to_string(path.environment)});
        noise_header(h, noise);
        save_trace_csv(trace, c.out_path(gm.trace), h);
        std::cout << "wrote " << c.out_path(gm.trace) << " (" << trace.samples.size()
                  << " samples, " << meta_or(trace, "distance_mi", "?") << " mi)\n";
    });

    // --- feature extraction and binary training ------------------------------

    PipelineOpts ex;
    std::string ex_out = "features.csv";
    CLI::App* extract = app.add_subcommand("extract", "turn a trace into feature vectors");
    extract->fallthrough();
    add_pipeline_opts(extract, ex);
    extract->add_option("--features", ex_out, "output feature CSV")->capture_default_str();
    extract->callback([&] {
        std::vector<Frame> frames = load_frames(ex.trace, ex.labels, ex.frame_s);
        if (frames.empty()) throw InsufficientDataError("no frames matched the schedule");
        FeaturePipeline pipeline(ex.spec(), frames);
        std::vector<std::string> labels;
        std::vector<FeatureVector> features;
        labels.reserve(frames.size());
        features.reserve(frames.size());
        for (const Frame& f : frames) {
            labels.push_back(f.label);
            features.push_back(pipeline(f));
        }
        Header h = c.header();
        ex.echo(h);
        if (ex.spec().kind == TransformKind::tf_cosine)
            h.push_back({"vocabulary_size", std::to_string(pipeline.vocabulary().sizes.size())});
        save_features_csv(labels, features, c.out_path(ex_out), h);
        std::cout << "wrote " << c.out_path(ex_out) << " (" << features.size() << " rows)\n";
    });

    PipelineOpts tr;
    SvmOpts tr_svm;
    std::string tr_pos, tr_neg, tr_model = "model.json";
    CLI::App* train = app.add_subcommand("train", "train one binary SVM");
    train->fallthrough();
    add_pipeline_opts(train, tr);
    add_svm_opts(train, tr_svm);
    train->add_option("--pos", tr_pos, "url bound to +1")->required();
    train->add_option("--neg", tr_neg, "url bound to -1")->required();
    train->add_option("--model", tr_model, "output model JSON")->capture_default_str();
    train->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(tr.trace, tr.labels, tr.frame_s));
        std::vector<Frame> frames;
        std::vector<int> labels;
        binary_frames(ds, tr_pos, tr_neg, frames, labels);
        FeaturePipeline pipeline(tr.spec(), frames);
        std::vector<std::vector<double>> x;
        x.reserve(frames.size());
        for (const Frame& f : frames) x.push_back(pipeline(f).values);
        SvmModel model = train_svm(x, labels, tr_svm.params());
        model.label_pos = tr_pos;
        model.label_neg = tr_neg;
        save_model_json(model, c.out_path(tr_model));
        std::cout << "trained " << tr_pos << " vs " << tr_neg << ": "
                  << model.support_vectors.size() << " support vectors, bias "
                  << fmt_g(model.bias) << ", " << model.iterations << " iterations -> "
                  << c.out_path(tr_model) << "\n";
    });

    PipelineOpts cv;
    SvmOpts cv_svm;
    std::string cv_pos, cv_neg, cv_report = "cv_report.csv";
    int cv_folds = 5;
    CLI::App* cv_cmd = app.add_subcommand("cv", "cross-validate one url pair");
    cv_cmd->fallthrough();
    add_pipeline_opts(cv_cmd, cv);
    add_svm_opts(cv_cmd, cv_svm);
    cv_cmd->add_option("--pos", cv_pos, "url bound to +1")->required();
    cv_cmd->add_option("--neg", cv_neg, "url bound to -1")->required();
    cv_cmd->add_option("--folds", cv_folds, "cross-validation folds")->capture_default_str();
    cv_cmd->add_option("--report", cv_report, "output report CSV")->capture_default_str();
    cv_cmd->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(cv.trace, cv.labels, cv.frame_s));
        std::vector<Frame> frames;
        std::vector<int> labels;
        binary_frames(ds, cv_pos, cv_neg, frames, labels);
        double ccr = cross_validate(frames, labels, cv_folds, cv_svm.params(), cv.spec(), c.seed);
        Header h = c.header();
        cv.echo(h);
        cv_svm.echo(h);
        h.push_back({"folds", std::to_string(cv_folds)});
        std::string path = c.out_path(cv_report);
        std::ofstream out = open_artifact(path, h);
        out << "pos,neg,ccr\n" << cv_pos << "," << cv_neg << "," << fmt_g(ccr) << "\n";
        finish_artifact(out, path);
        std::cout << cv_pos << " vs " << cv_neg << ": ccr " << fmt_g(ccr) << "\n";
    });

    // --- multi-class schemes --------------------------------------------------

    PipelineOpts mx;
    SvmOpts mx_svm;
    int mx_folds = 5;
    std::string mx_out = "ccr_matrix.csv";
    CLI::App* matrix = app.add_subcommand("matrix-1v1", "pairwise CCR matrix over all urls");
    matrix->fallthrough();
    add_pipeline_opts(matrix, mx);
    add_svm_opts(matrix, mx_svm);
    matrix->add_option("--folds", mx_folds, "cross-validation folds")->capture_default_str();
    matrix->add_option("--matrix", mx_out, "output matrix CSV")->capture_default_str();
    matrix->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(mx.trace, mx.labels, mx.frame_s));
        EvalConfig cfg{mx_svm.params(), mx.spec(), mx_folds, 0.2, c.seed};
        CcrMatrix m = one_vs_one_matrix(ds, cfg, c.jobs);
        Header h = c.header();
        mx.echo(h);
        mx_svm.echo(h);
        h.push_back({"folds", std::to_string(mx_folds)});
        try {
            h.push_back({"mean_ccr", fmt_g(m.mean())});
        } catch (const InsufficientDataError&) {
        }
        save_ccr_matrix_csv(m, c.out_path(mx_out), h);
        std::cout << "wrote " << c.out_path(mx_out) << "\n";
    });

    PipelineOpts ova;
    SvmOpts ova_svm;
    int ova_folds = 5;
    std::string ova_target, ova_report = "one_vs_all.csv";
    CLI::App* onevall = app.add_subcommand("one-vs-all", "one url against the pooled rest");
    onevall->fallthrough();
    add_pipeline_opts(onevall, ova);
    add_svm_opts(onevall, ova_svm);
    onevall->add_option("--target", ova_target, "target url")->required();
    onevall->add_option("--folds", ova_folds, "cross-validation folds")->capture_default_str();
    onevall->add_option("--report", ova_report, "output report CSV")->capture_default_str();
    onevall->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(ova.trace, ova.labels, ova.frame_s));
        EvalConfig cfg{ova_svm.params(), ova.spec(), ova_folds, 0.2, c.seed};
        double ccr = one_vs_all(ds, ova_target, cfg);
        size_t t = ds.index_of(ova_target);
        size_t pool = ds.total_frames() - ds.frames_by_url[t].size();
        Header h = c.header();
        ova.echo(h);
        ova_svm.echo(h);
        h.push_back({"folds", std::to_string(ova_folds)});
        std::string path = c.out_path(ova_report);
        std::ofstream out = open_artifact(path, h);
        out << "target,target_frames,pool_frames,ccr\n"
            << ova_target << "," << ds.frames_by_url[t].size() << "," << pool << ","
            << fmt_g(ccr) << "\n";
        finish_artifact(out, path);
        std::cout << ova_target << " vs rest: ccr " << fmt_g(ccr) << "\n";
    });

    auto add_scheme_cmd = [&](const char* name, const char* desc, bool is_tree,
                              PipelineOpts& po, SvmOpts& so, std::string& selection,
                              int& folds, double& holdout, std::string& stages_out,
                              std::string& confusion_out) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->fallthrough();
        add_pipeline_opts(sub, po);
        add_svm_opts(sub, so);
        std::vector<std::string> sels = is_tree
                                            ? std::vector<std::string>{"random", "fixed", "greedy"}
                                            : std::vector<std::string>{"random", "greedy"};
        sub->add_option("--selection", selection, "grouping strategy")
            ->check(CLI::IsMember(sels))
            ->capture_default_str();
        sub->add_option("--folds", folds, "folds for the selection matrix")
            ->capture_default_str();
        sub->add_option("--holdout", holdout, "held-out fraction per url")
            ->capture_default_str();
        sub->add_option("--stages", stages_out, "output per-stage CSV")->capture_default_str();
        sub->add_option("--confusion", confusion_out, "output confusion CSV")
            ->capture_default_str();
        return sub;
    };

    PipelineOpts ca;
    SvmOpts ca_svm;
    std::string ca_sel = "random", ca_stages = "cascade_stages.csv",
                ca_conf = "cascade_confusion.csv";
    int ca_folds = 5;
    double ca_holdout = 0.2;
    CLI::App* cascade = add_scheme_cmd("cascade", "recursive group-halving classifier", false,
                                       ca, ca_svm, ca_sel, ca_folds, ca_holdout, ca_stages,
                                       ca_conf);
    cascade->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(ca.trace, ca.labels, ca.frame_s));
        EvalConfig cfg{ca_svm.params(), ca.spec(), ca_folds, ca_holdout, c.seed};
        MulticlassResult r = cascade_classify(ds, selection_from_string(ca_sel), cfg, c.jobs);
        Header h = c.header();
        ca.echo(h);
        ca_svm.echo(h);
        h.push_back({"selection", ca_sel});
        h.push_back({"holdout", fmt_g(ca_holdout)});
        h.push_back({"urls", std::to_string(ds.url_ids.size())});
        save_stage_report_csv(r, c.out_path(ca_stages), h);
        save_confusion_csv(r.url_ids, r.confusion, c.out_path(ca_conf), h);
        std::cout << "cascade (" << ca_sel << "): final ccr " << fmt_g(r.final_ccr) << "\n";
    });

    PipelineOpts te;
    SvmOpts te_svm;
    std::string te_sel = "random", te_stages = "tree_stages.csv", te_conf = "tree_confusion.csv";
    int te_folds = 5;
    double te_holdout = 0.2;
    CLI::App* tree = add_scheme_cmd("tree", "pairwise elimination tournament", true, te, te_svm,
                                    te_sel, te_folds, te_holdout, te_stages, te_conf);
    tree->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(te.trace, te.labels, te.frame_s));
        EvalConfig cfg{te_svm.params(), te.spec(), te_folds, te_holdout, c.seed};
        MulticlassResult r = tree_classify(ds, selection_from_string(te_sel), cfg, c.jobs);
        Header h = c.header();
        te.echo(h);
        te_svm.echo(h);
        h.push_back({"selection", te_sel});
        h.push_back({"holdout", fmt_g(te_holdout)});
        h.push_back({"urls", std::to_string(ds.url_ids.size())});
        save_stage_report_csv(r, c.out_path(te_stages), h);
        save_confusion_csv(r.url_ids, r.confusion, c.out_path(te_conf), h);
        std::cout << "tree (" << te_sel << "): final ccr " << fmt_g(r.final_ccr) << "\n";
    });

    // --- countermeasure study -------------------------------------------------

    PipelineOpts ce;
    SvmOpts ce_svm;
    CountermeasureSpec ce_spec;
    std::string ce_scheme = "all", ce_pos, ce_neg, ce_report = "counter_eval.csv";
    int ce_folds = 5;
    CLI::App* counter = app.add_subcommand("counter-eval",
                                           "binary CCR before/after traffic shaping");
    counter->fallthrough();
    add_pipeline_opts(counter, ce);
    add_svm_opts(counter, ce_svm);
    counter->add_option("--pos", ce_pos, "url bound to +1")->required();
    counter->add_option("--neg", ce_neg, "url bound to -1")->required();
    {
        std::vector<std::string> names{"all"};
        for (Scheme s : all_schemes()) names.push_back(to_string(s));
        counter->add_option("--scheme", ce_scheme, "scheme to evaluate, or 'all'")
            ->check(CLI::IsMember(names))
            ->capture_default_str();
    }
    counter->add_option("--folds", ce_folds, "cross-validation folds")->capture_default_str();
    counter->add_option("--pad-min", ce_spec.pad_min, "random pad lower bound")
        ->capture_default_str();
    counter->add_option("--pad-max", ce_spec.pad_max, "random pad upper bound")
        ->capture_default_str();
    counter->add_option("--ceiling", ce_spec.ceiling, "pad_to_ceilings step")
        ->capture_default_str();
    counter->add_option("--max-size", ce_spec.max_size, "pad_to_max target size")
        ->capture_default_str();
    counter->add_option("--linear-pad", ce_spec.linear_pad_bytes, "linear_pad constant")
        ->capture_default_str();
    counter->add_option("--pad-prob", ce_spec.pad_probability,
                        "random_packet_pad_to_max probability")
        ->capture_default_str();
    counter->add_option("--insert-rate", ce_spec.insertion_rate_pps, "insertions per second")
        ->capture_default_str();
    counter->add_option("--insert-min", ce_spec.insert_min, "inserted size lower bound")
        ->capture_default_str();
    counter->add_option("--insert-max", ce_spec.insert_max, "inserted size upper bound")
        ->capture_default_str();
    counter->add_option("--session-prob", ce_spec.session_probability,
                        "session_random_adding frame probability")
        ->capture_default_str();
    counter->add_option("--report", ce_report, "output report CSV")->capture_default_str();
    counter->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(ce.trace, ce.labels, ce.frame_s));
        std::vector<Frame> frames;
        std::vector<int> labels;
        binary_frames(ds, ce_pos, ce_neg, frames, labels);
        std::vector<Scheme> schemes;
        if (ce_scheme == "all")
            schemes.assign(all_schemes().begin(), all_schemes().end());
        else
            schemes.push_back(scheme_from_string(ce_scheme));

        Header h = c.header();
        ce.echo(h);
        ce_svm.echo(h);
        h.push_back({"pos", ce_pos});
        h.push_back({"neg", ce_neg});
        h.push_back({"folds", std::to_string(ce_folds)});
        h.push_back({"pad_min", std::to_string(ce_spec.pad_min)});
        h.push_back({"pad_max", std::to_string(ce_spec.pad_max)});
        h.push_back({"ceiling", std::to_string(ce_spec.ceiling)});
        h.push_back({"max_size", std::to_string(ce_spec.max_size)});
        h.push_back({"linear_pad", std::to_string(ce_spec.linear_pad_bytes)});
        h.push_back({"pad_probability", fmt_g(ce_spec.pad_probability)});
        h.push_back({"insertion_rate_pps", fmt_g(ce_spec.insertion_rate_pps)});
        h.push_back({"insert_min", std::to_string(ce_spec.insert_min)});
        h.push_back({"insert_max", std::to_string(ce_spec.insert_max)});
        h.push_back({"session_probability", fmt_g(ce_spec.session_probability)});

        std::string path = c.out_path(ce_report);
        std::ofstream out = open_artifact(path, h);
        out << "scheme,ccr\n";
        double base = cross_validate(frames, labels, ce_folds, ce_svm.params(), ce.spec(),
                                     c.seed);
        out << "none," << fmt_g(base) << "\n";
        for (size_t i = 0; i < schemes.size(); ++i) {
            CountermeasureSpec spec = ce_spec;
            spec.scheme = schemes[i];
            spec.seed = mix_seed(c.seed, 0x636d73, i);
            std::vector<Frame> shaped = apply_countermeasure(frames, spec);
            double ccr = cross_validate(shaped, labels, ce_folds, ce_svm.params(), ce.spec(),
                                        c.seed);
            out << to_string(schemes[i]) << "," << fmt_g(ccr) << "\n";
        }
        finish_artifact(out, path);
        std::cout << "wrote " << path << " (base ccr " << fmt_g(base) << ")\n";
    });

    // --- location inference -----------------------------------------------------

    std::string lm_trace, lm_report = "motion_report.csv";
    double lm_baseline = 10.0, lm_k = 3.0, lm_persist = 2.0;
    CLI::App* loc_motion = app.add_subcommand("loc-motion", "detect motion onset in traces");
    loc_motion->fallthrough();
    loc_motion->add_option("--trace", lm_trace, "trace CSV (counter resets split it)")
        ->required();
    loc_motion->add_option("--baseline", lm_baseline, "baseline window, seconds")
        ->capture_default_str();
    loc_motion->add_option("--k-sigma", lm_k, "threshold stdevs above baseline mean")
        ->capture_default_str();
    loc_motion->add_option("--persist", lm_persist, "required persistence, seconds")
        ->capture_default_str();
    loc_motion->add_option("--report", lm_report, "output report CSV")->capture_default_str();
    loc_motion->callback([&] {
        std::vector<CounterTrace> traces = load_traces_csv(lm_trace);
        Header h = c.header();
        h.push_back({"trace", lm_trace});
        h.push_back({"baseline_s", fmt_g(lm_baseline)});
        h.push_back({"k_sigma", fmt_g(lm_k)});
        h.push_back({"persistence_s", fmt_g(lm_persist)});
        std::string path = c.out_path(lm_report);
        std::ofstream out = open_artifact(path, h);
        out << "trace,onset_us,true_onset_us\n";
        for (size_t i = 0; i < traces.size(); ++i) {
            std::optional<int64_t> onset =
                detect_motion_onset(traces[i], lm_baseline, lm_k, lm_persist);
            out << i << "," << (onset.has_value() ? std::to_string(*onset) : "") << ","
                << meta_or(traces[i], "onset_us", "") << "\n";
        }
        finish_artifact(out, path);
        std::cout << "wrote " << path << " (" << traces.size() << " traces)\n";
    });

    std::string ls_dir, ls_report = "speed_fit.csv";
    double ls_quiet = 0.5;
    CLI::App* loc_speed = app.add_subcommand("loc-speed",
                                             "fit interval = a/speed over recorded drives");
    loc_speed->fallthrough();
    loc_speed->add_option("--traces", ls_dir, "directory of trace CSVs")->required();
    loc_speed->add_option("--quiet-gap", ls_quiet, "burst separation gap, seconds")
        ->capture_default_str();
    loc_speed->add_option("--report", ls_report, "output report CSV")->capture_default_str();
    loc_speed->callback([&] {
        std::vector<std::string> files = list_csv_files(ls_dir);
        std::vector<std::pair<double, double>> points;
        std::vector<std::string> names;
        std::optional<TraceScope> scope;
        for (const std::string& f : files) {
            CounterTrace trace = load_trace_csv(f);
            if (scope.has_value() && trace.scope != *scope)
                throw SchemaError("mixed app/device traces in '" + ls_dir + "'");
            scope = trace.scope;
            double speed = meta_double(trace, "speed_mph", f);
            double interval;
            if (trace.scope == TraceScope::app) {
                interval = median_burst_gap_s(trace, ls_quiet);
            } else {
                double still = meta_double_or(trace, "still_prefix_s", 0.0);
                interval = byte_interval_s(trace, still, still);
            }
            points.emplace_back(speed, interval);
            names.push_back(f);
        }
        SpeedModel::Unit unit = *scope == TraceScope::app ? SpeedModel::Unit::per_tile
                                                          : SpeedModel::Unit::per_byte;
        SpeedModel fit = fit_inverse_speed(points, unit);
        Header h = c.header();
        h.push_back({"traces", ls_dir});
        h.push_back({"level", to_string(*scope)});
        h.push_back({"unit", fit.unit == SpeedModel::Unit::per_tile ? "seconds_mph_per_tile"
                                                                    : "seconds_mph_per_byte"});
        h.push_back({"a", fmt_g(fit.a)});
        h.push_back({"coeff_variance", fmt_g(fit.coeff_variance)});
        std::string path = c.out_path(ls_report);
        std::ofstream out = open_artifact(path, h);
        out << "trace,speed_mph,interval_s,fitted_interval_s\n";
        for (size_t i = 0; i < points.size(); ++i)
            out << names[i] << "," << fmt_g(points[i].first) << "," << fmt_g(points[i].second)
                << "," << fmt_g(fit.a / points[i].first) << "\n";
        finish_artifact(out, path);
        std::cout << "a = " << fmt_g(fit.a) << ", coefficient variance "
                  << fmt_g(fit.coeff_variance) << "\n";
    });

    std::string ld_dir, ld_report = "distance_report.csv";
    double ld_tile_bytes = 0.0, ld_tile_miles = 0.125;
    CLI::App* loc_dist = app.add_subcommand("loc-distance",
                                            "integrate tile bytes into distance estimates");
    loc_dist->fallthrough();
    loc_dist->add_option("--traces", ld_dir, "directory of trace CSVs")->required();
    loc_dist->add_option("--tile-bytes", ld_tile_bytes, "bytes per map tile")->required();
    loc_dist->add_option("--tile-miles", ld_tile_miles, "miles per map tile")
        ->capture_default_str();
    loc_dist->add_option("--report", ld_report, "output report CSV")->capture_default_str();
    loc_dist->callback([&] {
        std::vector<std::string> files = list_csv_files(ld_dir);
        std::vector<std::array<std::string, 4>> rows;
        long with_truth = 0, within_quarter = 0;
        for (const std::string& f : files) {
            CounterTrace trace = load_trace_csv(f);
            double prefix = meta_double_or(trace, "still_prefix_s", 0.0);
            double est = estimate_distance_miles(trace, ld_tile_bytes, ld_tile_miles, prefix);
            std::string truth = meta_or(trace, "distance_mi", "");
            std::string err;
            if (!truth.empty()) {
                double e = std::fabs(est - std::stod(truth));
                err = fmt_g(e);
                ++with_truth;
                if (e <= 0.25) ++within_quarter;
            }
            rows.push_back({f, fmt_g(est), truth, err});
        }
        Header h = c.header();
        h.push_back({"traces", ld_dir});
        h.push_back({"tile_bytes", fmt_g(ld_tile_bytes)});
        h.push_back({"tile_miles", fmt_g(ld_tile_miles)});
        if (with_truth > 0)
            h.push_back({"within_quarter_mile",
                         fmt_g(static_cast<double>(within_quarter) /
                               static_cast<double>(with_truth))});
        std::string path = c.out_path(ld_report);
        std::ofstream out = open_artifact(path, h);
        out << "trace,estimate_mi,true_mi,abs_error_mi\n";
        for (const auto& r : rows) out << r[0] << "," << r[1] << "," << r[2] << "," << r[3]
                                       << "\n";
        finish_artifact(out, path);
        std::cout << "wrote " << path << " (" << files.size() << " traces)\n";
    });

    std::string le_train, le_eval, le_report = "env_report.csv";
    CLI::App* loc_env = app.add_subcommand("loc-env",
                                           "urban/rural nearest-centroid classification");
    loc_env->fallthrough();
    loc_env->add_option("--train", le_train, "directory of labeled training traces")
        ->required();
    loc_env->add_option("--eval", le_eval, "directory of traces to classify")->required();
    loc_env->add_option("--report", le_report, "output report CSV")->capture_default_str();
    loc_env->callback([&] {
        std::vector<CounterTrace> train_traces;
        std::vector<Environment> train_labels;
        for (const std::string& f : list_csv_files(le_train)) {
            CounterTrace trace = load_trace_csv(f);
            auto it = trace.meta.find("environment");
            if (it == trace.meta.end()) throw SchemaError(f + ": missing meta.environment");
            train_labels.push_back(environment_from_string(it->second));
            train_traces.push_back(std::move(trace));
        }
        EnvCentroids centroids = learn_env_centroids(train_traces, train_labels);
        train_traces.clear();

        long with_truth = 0, correct = 0;
        std::vector<std::array<std::string, 4>> rows;
        for (const std::string& f : list_csv_files(le_eval)) {
            CounterTrace trace = load_trace_csv(f);
            Environment predicted = classify_environment(trace, centroids);
            std::string truth = meta_or(trace, "environment", "");
            if (!truth.empty()) {
                ++with_truth;
                if (environment_from_string(truth) == predicted) ++correct;
            }
            rows.push_back({f, fmt_g(average_rate_bps(trace)), to_string(predicted), truth});
        }
        Header h = c.header();
        h.push_back({"train", le_train});
        h.push_back({"eval", le_eval});
        h.push_back({"urban_rate_bps", fmt_g(centroids.urban_rate_bps)});
        h.push_back({"rural_rate_bps", fmt_g(centroids.rural_rate_bps)});
        if (with_truth > 0)
            h.push_back(
                {"ccr", fmt_g(static_cast<double>(correct) / static_cast<double>(with_truth))});
        std::string path = c.out_path(le_report);
        std::ofstream out = open_artifact(path, h);
        out << "trace,avg_rate_bps,predicted,true\n";
        for (const auto& r : rows) out << r[0] << "," << r[1] << "," << r[2] << "," << r[3]
                                       << "\n";
        finish_artifact(out, path);
        if (with_truth > 0)
            std::cout << "ccr " << fmt_g(static_cast<double>(correct) /
                                         static_cast<double>(with_truth))
                      << " over " << with_truth << " labeled traces\n";
        else
            std::cout << "wrote " << path << "\n";
    });

    std::string lp_labeled, lp_unlabeled, lp_report = "path_report.csv";
    double lp_period = 1.0;
    CLI::App* loc_path = app.add_subcommand("loc-path",
                                            "identify a drive by rate-series correlation");
    loc_path->fallthrough();
    loc_path->add_option("--labeled", lp_labeled, "directory of labeled recordings")
        ->required();
    loc_path->add_option("--unlabeled", lp_unlabeled, "trace CSV to identify")->required();
    loc_path->add_option("--period", lp_period, "resample period, seconds")
        ->capture_default_str();
    loc_path->add_option("--report", lp_report, "output report CSV")->capture_default_str();
    loc_path->callback([&] {
        std::vector<std::pair<std::string, RateSeries>> labeled;
        for (const std::string& f : list_csv_files(lp_labeled)) {
            CounterTrace trace = load_trace_csv(f);
            labeled.emplace_back(fs::path(f).stem().string(), rate_series(trace, lp_period));
        }
        RateSeries series = rate_series(load_trace_csv(lp_unlabeled), lp_period);
        std::string best = classify_path(series, labeled);
        std::vector<std::pair<std::string, double>> scores = path_scores(series, labeled);
        Header h = c.header();
        h.push_back({"labeled", lp_labeled});
        h.push_back({"unlabeled", lp_unlabeled});
        h.push_back({"period_s", fmt_g(lp_period)});
        h.push_back({"label", best});
        std::string path = c.out_path(lp_report);
        std::ofstream out = open_artifact(path, h);
        out << "label,pcc\n";
        for (const auto& [label, pcc] : scores) out << label << "," << fmt_g(pcc) << "\n";
        finish_artifact(out, path);
        std::cout << "label: " << best << "\n";
    });

    // --- hyper-parameter sweep ----------------------------------------------------

    PipelineOpts sw;
    std::string sw_pos, sw_neg, sw_c_range = "-24:16", sw_g_range = "-24:16",
                sw_out = "sweep_grid.csv";
    int sw_folds = 5;
    double sw_tolerance = SvmParams{}.tolerance;
    long sw_max_iter = SvmParams{}.max_iter;
    CLI::App* sweep = app.add_subcommand("sweep", "grid CCR over powers of 2 for C and gamma");
    sweep->fallthrough();
    add_pipeline_opts(sweep, sw);
    sweep->add_option("--pos", sw_pos, "url bound to +1")->required();
    sweep->add_option("--neg", sw_neg, "url bound to -1")->required();
    sweep->add_option("--c-range", sw_c_range, "exponent range lo:hi[:step] for C")
        ->capture_default_str();
    sweep->add_option("--gamma-range", sw_g_range, "exponent range lo:hi[:step] for gamma")
        ->capture_default_str();
    sweep->add_option("--folds", sw_folds, "cross-validation folds")->capture_default_str();
    sweep->add_option("--tolerance", sw_tolerance, "KKT convergence tolerance")
        ->capture_default_str();
    sweep->add_option("--max-iter", sw_max_iter, "SMO iteration cap")->capture_default_str();
    sweep->add_option("--grid", sw_out, "output grid CSV")->capture_default_str();
    sweep->callback([&] {
        WebDataset ds = dataset_from_frames(load_frames(sw.trace, sw.labels, sw.frame_s));
        std::vector<Frame> frames;
        std::vector<int> labels;
        binary_frames(ds, sw_pos, sw_neg, frames, labels);
        std::vector<double> c_exps = parse_range(sw_c_range, "--c-range");
        std::vector<double> g_exps = parse_range(sw_g_range, "--gamma-range");
        struct Cell {
            double c_exp, g_exp, ccr;
        };
        std::vector<Cell> cells(c_exps.size() * g_exps.size());
        TransformSpec tspec = sw.spec();
        parallel_for(cells.size(), c.jobs, [&](size_t i) {
            double ce = c_exps[i / g_exps.size()];
            double ge = g_exps[i % g_exps.size()];
            SvmParams params{std::exp2(ce), std::exp2(ge), sw_tolerance, sw_max_iter};
            double ccr;
            try {
                ccr = cross_validate(frames, labels, sw_folds, params, tspec, c.seed);
            } catch (const NumericalError&) {
                ccr = std::numeric_limits<double>::quiet_NaN(); // did not converge at this cell
            }
            cells[i] = {ce, ge, ccr};
        });
        Header h = c.header();
        sw.echo(h);
        h.push_back({"pos", sw_pos});
        h.push_back({"neg", sw_neg});
        h.push_back({"folds", std::to_string(sw_folds)});
        h.push_back({"c_range", sw_c_range});
        h.push_back({"gamma_range", sw_g_range});
        std::string path = c.out_path(sw_out);
        std::ofstream out = open_artifact(path, h);
        out << "c_exp,gamma_exp,c,gamma,ccr\n";
        for (const Cell& cell : cells)
            out << fmt_g(cell.c_exp) << "," << fmt_g(cell.g_exp) << ","
                << fmt_g(std::exp2(cell.c_exp)) << "," << fmt_g(std::exp2(cell.g_exp)) << ","
                << (std::isnan(cell.ccr) ? "" : fmt_g(cell.ccr)) << "\n";
        finish_artifact(out, path);
        std::cout << "wrote " << path << " (" << cells.size() << " cells)\n";
    });

    // --- dispatch -----------------------------------------------------------------

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("netside");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: schema: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 4;
    } catch (const InsufficientDataError& e) {
        std::cerr << "error: insufficient-data: " << e.what() << "\n";
        return 5;
    }
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(argc > 0 ? static_cast<size_t>(argc - 1) : 0);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace netside
