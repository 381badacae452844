#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netside/trace.hpp"

namespace netside {

enum class TransformKind { packet_counts, tf_cosine, onion };

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& s);

struct FeatureVector {
    TransformKind kind = TransformKind::packet_counts;
    std::vector<double> values;
};

struct TransformSpec {
    TransformKind kind = TransformKind::packet_counts;
    int64_t cutoff_bytes = 100;  // |size| below this is dropped before transforming
};

// keeps events with |size| >= cutoff
Frame filter_packets(const Frame& frame, int64_t cutoff_bytes);

// [incoming packet count, outgoing packet count]
FeatureVector transform_packet_counts(const Frame& frame);

// Ordered list of the distinct signed packet sizes a tf-cosine model knows about.
// Built from the training set; sizes outside the vocabulary are dropped at
// transform time.
struct TfVocabulary {
    std::vector<int64_t> sizes;  // sorted ascending, unique

    static TfVocabulary from_frames(std::span<const Frame> frames);
};

// term-frequency vector over the vocabulary: f* = log(1 + f), then unit-norm.
// All-zero frames stay all-zero.
FeatureVector transform_tf_cosine(const Frame& frame, const TfVocabulary& vocab);

// convenience: vocabulary taken from the frame itself
FeatureVector transform_tf_cosine(const Frame& frame);

// Fixed-layout coarse descriptor (38 dims):
//   [ 0..15] cumulative byte totals at direction changes, rounded to 600
//   [16..31] cumulative packet totals at direction changes
//   [32]     total incoming bytes rounded to 10000
//   [33]     total outgoing bytes rounded to 10000
//   [34]     total incoming packets rounded to 15
//   [35]     total outgoing packets rounded to 15
//   [36]     count of distinct |size| values
//   [37]     incoming percentage of packets, rounded to a 5-point grid
// Marker lists are zero-padded / truncated to 16 entries.
FeatureVector transform_onion(const Frame& frame);

inline constexpr size_t kOnionDims = 38;
inline constexpr size_t kOnionMarkers = 16;

// rounding used throughout the onion transform: nearest multiple, ties toward +inf
double round_to_multiple(double value, double step);

// Applies cutoff filtering plus the configured transform; for tf_cosine the
// vocabulary comes from the (filtered) training frames handed to the constructor.
class FeaturePipeline {
public:
    FeaturePipeline(const TransformSpec& spec, std::span<const Frame> training_frames);

    FeatureVector operator()(const Frame& frame) const;
    const TransformSpec& spec() const { return spec_; }
    const TfVocabulary& vocabulary() const { return vocab_; }

private:
    TransformSpec spec_;
    TfVocabulary vocab_;
};

// --- feature dump format ----------------------------------------------------
// CSV, one frame per row, label first, then the feature values. The transform
// kind and parameters travel in the '#' header block.

void save_features_csv(const std::vector<std::string>& labels,
                       const std::vector<FeatureVector>& features, const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& header = {});

struct FeatureTable {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
};

FeatureTable load_features_csv(const std::string& path);

} // namespace netside
