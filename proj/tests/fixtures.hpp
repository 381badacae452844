#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netside/multiclass.hpp"
#include "netside/synth.hpp"
#include "netside/trace.hpp"

namespace netside::fixtures {

// Two urls separated only by mean incoming packet count; every packet size is
// at least 300 bytes so the default cutoff never touches profile traffic.
std::vector<UrlProfile> binary_profiles();

// Eight urls: u0 and u1 share one profile (an indistinguishable control pair),
// u2 sits close to them, the rest fan out.
std::vector<UrlProfile> eight_profiles();

// Sixteen urls: a tight eight-member cluster (c0..c7) plus eight widely spread
// singletons (s0..s7).
std::vector<UrlProfile> sixteen_profiles();

// End-to-end corpus: build a round-robin request schedule, synthesize the
// counter trace, reconstruct packet events, slice labeled frames, group by url.
WebDataset make_web_dataset(std::span<const UrlProfile> profiles, int frames_per_url,
                            double frame_s, const NoiseSpec& noise, uint64_t seed);

// Flattened frames + (+1/-1) labels for a url pair out of a dataset.
void binary_split(const WebDataset& ds, const std::string& pos, const std::string& neg,
                  std::vector<Frame>& frames, std::vector<int>& labels);

} // namespace netside::fixtures
