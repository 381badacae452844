#include "fixtures.hpp"

#include <cmath>
#include <utility>

namespace netside::fixtures {

namespace {

const std::vector<std::pair<int64_t, double>> kInSizes = {
    {300, 0.5}, {600, 0.3}, {1200, 0.2}};
const std::vector<std::pair<int64_t, double>> kOutSizes = {{150, 0.7}, {400, 0.3}};

UrlProfile profile(std::string id, double in_mean, double in_stdev, double out_mean,
                   double out_stdev) {
    UrlProfile p;
    p.url_id = std::move(id);
    p.in_pkts_mean = in_mean;
    p.in_pkts_stdev = in_stdev;
    p.out_pkts_mean = out_mean;
    p.out_pkts_stdev = out_stdev;
    p.in_size_dist = kInSizes;
    p.out_size_dist = kOutSizes;
    return p;
}

} // namespace

std::vector<UrlProfile> binary_profiles() {
    return {profile("alpha", 40.0, 0.7, 10.0, 0.7), profile("bravo", 42.6, 0.7, 10.0, 0.7)};
}

std::vector<UrlProfile> eight_profiles() {
    return {
        profile("u0", 40.0, 2.0, 10.0, 2.0),  // control pair: u0 == u1
        profile("u1", 40.0, 2.0, 10.0, 2.0),
        profile("u2", 42.5, 2.0, 10.8, 2.0),
        profile("u3", 46.0, 2.0, 12.0, 2.0),
        profile("u4", 55.0, 2.0, 18.0, 2.0),
        profile("u5", 70.0, 2.0, 25.0, 2.0),
        profile("u6", 90.0, 2.0, 32.0, 2.0),
        profile("u7", 120.0, 2.0, 45.0, 2.0),
    };
}

std::vector<UrlProfile> sixteen_profiles() {
    std::vector<UrlProfile> out;
    for (int k = 0; k < 8; ++k)
        out.push_back(profile("c" + std::to_string(k), 57.0 + 0.85 * k, 3.0,
                              14.0 + 0.25 * k, 3.0));
    const double spread[8][2] = {{20, 5},   {100, 30}, {140, 10}, {30, 45},
                                 {170, 60}, {80, 90},  {200, 25}, {10, 70}};
    for (int k = 0; k < 8; ++k)
        out.push_back(profile("s" + std::to_string(k), spread[k][0], 1.0, spread[k][1], 1.0));
    return out;
}

WebDataset make_web_dataset(std::span<const UrlProfile> profiles, int frames_per_url,
                            double frame_s, const NoiseSpec& noise, uint64_t seed) {
    int64_t frame_us = std::llround(frame_s * 1e6);
    std::vector<std::pair<int64_t, std::string>> schedule;
    schedule.reserve(static_cast<size_t>(frames_per_url) * profiles.size());
    for (int rep = 0; rep < frames_per_url; ++rep)
        for (size_t u = 0; u < profiles.size(); ++u)
            schedule.emplace_back(
                (static_cast<int64_t>(rep) * static_cast<int64_t>(profiles.size()) +
                 static_cast<int64_t>(u)) *
                    frame_us,
                profiles[u].url_id);
    CounterTrace trace = gen_web_trace(profiles, schedule, noise, frame_s, seed);
    std::vector<PacketEvent> events = reconstruct_packet_events(trace);
    std::vector<Frame> frames = slice_frames(events, schedule, frame_us);
    return dataset_from_frames(frames);
}

void binary_split(const WebDataset& ds, const std::string& pos, const std::string& neg,
                  std::vector<Frame>& frames, std::vector<int>& labels) {
    size_t p = ds.index_of(pos);
    size_t n = ds.index_of(neg);
    frames.assign(ds.frames_by_url[p].begin(), ds.frames_by_url[p].end());
    labels.assign(frames.size(), 1);
    frames.insert(frames.end(), ds.frames_by_url[n].begin(), ds.frames_by_url[n].end());
    labels.insert(labels.end(), ds.frames_by_url[n].size(), -1);
}

} // namespace netside::fixtures
