#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netside/config.hpp"
#include "netside/location.hpp"
#include "netside/trace.hpp"

namespace netside {

enum class Direction { north, northeast, east };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

// A straight drive broken into steps of equal distance; per-step intervals give
// each step its own speed so two paths can share a common segment.
struct PathSpec {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    Direction direction = Direction::north;
    int n_steps = 10;
    double step_interval_s = 30.0;
    double step_distance_mi = 0.25;
    Environment environment = Environment::urban;
    std::string location; // optional preset name; overrides environment density
    std::vector<double> step_intervals_s; // optional per-step override

    double interval_s(int step) const;
    double speed_mph(int step) const;
    double total_duration_s() const;
    double total_distance_mi() const;
    void validate() const;
};

struct MapModel {
    double tile_bytes = 1000.0;
    double tile_miles = 0.125;
    double urban_density = 1.0;
    double rural_density = 0.5;
    double packet_size_bytes = 500.0;
    double jitter = 0.1;
    int view_tiles = 3; // tiles fetched up front when motion starts
    double view_fetch_s = 2.5;
    double burst_s = 0.2;
    int64_t sample_period_us = 100'000;

    double density(Environment env) const;
    void validate() const;

    static MapModel app_default();
    static MapModel device_default();
};

struct NoiseSpec {
    double rate_pps = 0.0;
    std::vector<std::pair<int64_t, double>> size_dist; // (bytes, probability)
    double incoming_ratio = 0.5;

    void validate() const;

    static NoiseSpec none();
    static NoiseSpec device_background();
    static NoiseSpec web_background();
};

struct LocationPreset {
    std::string name;
    Environment environment;
    double density;
};

std::span<const LocationPreset> location_presets();
const LocationPreset* find_location_preset(const std::string& name);

struct UrlProfile {
    enum class BurstShape { uniform, front_loaded };

    std::string url_id;
    double in_pkts_mean = 0.0;
    double in_pkts_stdev = 0.0;
    double out_pkts_mean = 0.0;
    double out_pkts_stdev = 0.0;
    std::vector<std::pair<int64_t, double>> in_size_dist;
    std::vector<std::pair<int64_t, double>> out_size_dist;
    BurstShape burst_shape = BurstShape::uniform;
    double front_tau_s = 3.0;

    void validate() const;
};

std::string to_string(UrlProfile::BurstShape shape);
UrlProfile::BurstShape burst_shape_from_string(const std::string& s);

// Map-tile traffic under emulated motion. App-level output carries map bytes
// only; device-level superimposes background noise over the whole recording,
// so the still prefix is noise-only.
std::vector<PacketEvent> gen_map_events(const PathSpec& path, const MapModel& model,
                                        const NoiseSpec& noise, TraceScope scope,
                                        double still_prefix_s, uint64_t seed);
CounterTrace gen_map_trace(const PathSpec& path, const MapModel& model, const NoiseSpec& noise,
                           TraceScope scope, double still_prefix_s, uint64_t seed);

// Per-URL sessions at scheduled request times, merged with noise into
// device-level counters sampled every millisecond.
std::vector<PacketEvent> gen_web_events(std::span<const UrlProfile> profiles,
                                        std::span<const std::pair<int64_t, std::string>> schedule,
                                        const NoiseSpec& noise, double frame_s, uint64_t seed);
CounterTrace gen_web_trace(std::span<const UrlProfile> profiles,
                           std::span<const std::pair<int64_t, std::string>> schedule,
                           const NoiseSpec& noise, double frame_s, uint64_t seed);

// Byte-rate series of one traversal (no still prefix), for path correlation.
RateSeries gen_path_profile_series(const PathSpec& path, const MapModel& model, double resample_hz,
                                   uint64_t seed);

constexpr int64_t kWebSamplePeriodUs = 1000;

// Configuration sections: [map], [path], [noise], and one [url <id>] per profile.
MapModel map_model_from_config(const ConfigFile& cfg, const MapModel& base);
PathSpec path_from_config(const ConfigFile& cfg);
NoiseSpec noise_from_config(const ConfigFile& cfg, const NoiseSpec& base);
std::vector<UrlProfile> url_profiles_from_config(const ConfigFile& cfg);

} // namespace netside
