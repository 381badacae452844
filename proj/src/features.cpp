#include "netside/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "netside/errors.hpp"

namespace netside {

std::string to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::packet_counts: return "packet_counts";
        case TransformKind::tf_cosine: return "tf_cosine";
        case TransformKind::onion: return "onion";
    }
    return "?";
}

TransformKind transform_kind_from_string(const std::string& s) {
    if (s == "packet_counts" || s == "packet-counts") return TransformKind::packet_counts;
    if (s == "tf_cosine" || s == "tf-cosine") return TransformKind::tf_cosine;
    if (s == "onion") return TransformKind::onion;
    throw SchemaError("unknown transform '" + s + "'");
}

Frame filter_packets(const Frame& frame, int64_t cutoff_bytes) {
    Frame out;
    out.duration_us = frame.duration_us;
    out.label = frame.label;
    out.events.reserve(frame.events.size());
    for (const PacketEvent& e : frame.events)
        if (std::llabs(e.size_bytes) >= cutoff_bytes) out.events.push_back(e);
    return out;
}

FeatureVector transform_packet_counts(const Frame& frame) {
    double in = 0, out = 0;
    for (const PacketEvent& e : frame.events)
        (e.size_bytes > 0 ? in : out) += 1.0;
    return {TransformKind::packet_counts, {in, out}};
}

TfVocabulary TfVocabulary::from_frames(std::span<const Frame> frames) {
    std::set<int64_t> sizes;
    for (const Frame& f : frames)
        for (const PacketEvent& e : f.events) sizes.insert(e.size_bytes);
    TfVocabulary v;
    v.sizes.assign(sizes.begin(), sizes.end());
    return v;
}

FeatureVector transform_tf_cosine(const Frame& frame, const TfVocabulary& vocab) {
    std::vector<double> v(vocab.sizes.size(), 0.0);
    for (const PacketEvent& e : frame.events) {
        auto it = std::lower_bound(vocab.sizes.begin(), vocab.sizes.end(), e.size_bytes);
        if (it != vocab.sizes.end() && *it == e.size_bytes)
            v[static_cast<size_t>(it - vocab.sizes.begin())] += 1.0;
        // sizes outside the vocabulary are dropped
    }
    double norm2 = 0.0;
    for (double& x : v) {
        x = std::log1p(x);
        norm2 += x * x;
    }
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return {TransformKind::tf_cosine, std::move(v)};
}

FeatureVector transform_tf_cosine(const Frame& frame) {
    return transform_tf_cosine(frame, TfVocabulary::from_frames({&frame, 1}));
}

double round_to_multiple(double value, double step) {
    if (step <= 0.0) throw UsageError("rounding step must be positive");
    return std::floor(value / step + 0.5) * step;
}

FeatureVector transform_onion(const Frame& frame) {
    std::vector<double> v(kOnionDims, 0.0);

    double cum_bytes = 0, cum_pkts = 0;
    double in_bytes = 0, out_bytes = 0, in_pkts = 0, out_pkts = 0;
    std::set<int64_t> distinct;
    int prev_sign = 0;
    size_t marker = 0;
    for (const PacketEvent& e : frame.events) {
        int sign = e.size_bytes > 0 ? +1 : -1;
        if (prev_sign != 0 && sign != prev_sign && marker < kOnionMarkers) {
            // totals accumulated before the event that flips direction
            v[marker] = round_to_multiple(cum_bytes, 600.0);
            v[kOnionMarkers + marker] = cum_pkts;
            ++marker;
        }
        prev_sign = sign;
        double sz = static_cast<double>(std::llabs(e.size_bytes));
        cum_bytes += sz;
        cum_pkts += 1;
        distinct.insert(std::llabs(e.size_bytes));
        if (sign > 0) {
            in_bytes += sz;
            in_pkts += 1;
        } else {
            out_bytes += sz;
            out_pkts += 1;
        }
    }

    v[32] = round_to_multiple(in_bytes, 10000.0);
    v[33] = round_to_multiple(out_bytes, 10000.0);
    v[34] = round_to_multiple(in_pkts, 15.0);
    v[35] = round_to_multiple(out_pkts, 15.0);
    v[36] = static_cast<double>(distinct.size());
    double total_pkts = in_pkts + out_pkts;
    v[37] = total_pkts > 0 ? round_to_multiple(100.0 * in_pkts / total_pkts, 5.0) : 0.0;
    return {TransformKind::onion, std::move(v)};
}

FeaturePipeline::FeaturePipeline(const TransformSpec& spec, std::span<const Frame> training_frames)
    : spec_(spec) {
    if (spec_.kind == TransformKind::tf_cosine) {
        std::vector<Frame> filtered;
        filtered.reserve(training_frames.size());
        for (const Frame& f : training_frames)
            filtered.push_back(filter_packets(f, spec_.cutoff_bytes));
        vocab_ = TfVocabulary::from_frames(filtered);
    }
}

FeatureVector FeaturePipeline::operator()(const Frame& frame) const {
    Frame filtered = filter_packets(frame, spec_.cutoff_bytes);
    switch (spec_.kind) {
        case TransformKind::packet_counts: return transform_packet_counts(filtered);
        case TransformKind::tf_cosine: return transform_tf_cosine(filtered, vocab_);
        case TransformKind::onion: return transform_onion(filtered);
    }
    throw UsageError("unhandled transform kind");
}

void save_features_csv(const std::vector<std::string>& labels,
                       const std::vector<FeatureVector>& features, const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& header) {
    if (labels.size() != features.size())
        throw UsageError("label/feature count mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.precision(17);
    for (const auto& [k, val] : header) out << "# " << k << ": " << val << "\n";
    size_t dims = features.empty() ? 0 : features.front().values.size();
    out << "label";
    for (size_t d = 0; d < dims; ++d) out << ",f" << d;
    out << "\n";
    for (size_t i = 0; i < features.size(); ++i) {
        if (features[i].values.size() != dims)
            throw UsageError("inconsistent feature dimensions in dump");
        out << labels[i];
        for (double x : features[i].values) out << ',' << x;
        out << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

FeatureTable load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    FeatureTable table;
    std::string line;
    size_t lineno = 0;
    bool header_seen = false;
    size_t dims = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("label", 0) != 0)
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": expected feature header starting with 'label'");
            dims = static_cast<size_t>(std::count(line.begin(), line.end(), ','));
            header_seen = true;
            continue;
        }
        size_t pos = line.find(',');
        std::string label = pos == std::string::npos ? line : line.substr(0, pos);
        std::vector<double> row;
        row.reserve(dims);
        while (pos != std::string::npos) {
            size_t next = line.find(',', pos + 1);
            std::string cell = line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                              : next - pos - 1);
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw SchemaError(path + ":" + std::to_string(lineno) + ": bad feature value '" +
                                  cell + "'");
            }
            pos = next;
        }
        if (row.size() != dims)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(dims) + " feature values");
        table.labels.push_back(std::move(label));
        table.rows.push_back(std::move(row));
    }
    if (!header_seen) throw SchemaError(path + ": missing feature header row");
    return table;
}

} // namespace netside
