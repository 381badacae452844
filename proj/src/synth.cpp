#include "netside/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "netside/errors.hpp"
#include "netside/rng.hpp"

namespace netside {

std::string to_string(Direction d) {
    switch (d) {
        case Direction::north: return "north";
        case Direction::northeast: return "northeast";
        case Direction::east: return "east";
    }
    return "north";
}

Direction direction_from_string(const std::string& s) {
    if (s == "north" || s == "N") return Direction::north;
    if (s == "northeast" || s == "NE") return Direction::northeast;
    if (s == "east" || s == "E") return Direction::east;
    throw SchemaError("unknown direction '" + s + "'");
}

double PathSpec::interval_s(int step) const {
    if (!step_intervals_s.empty()) return step_intervals_s[static_cast<size_t>(step)];
    return step_interval_s;
}

double PathSpec::speed_mph(int step) const {
    return step_distance_mi / interval_s(step) * 3600.0;
}

double PathSpec::total_duration_s() const {
    double total = 0.0;
    for (int k = 0; k < n_steps; ++k) total += interval_s(k);
    return total;
}

double PathSpec::total_distance_mi() const {
    return step_distance_mi * n_steps;
}

void PathSpec::validate() const {
    if (n_steps < 1) throw UsageError("path: n_steps must be >= 1");
    if (!step_intervals_s.empty() &&
        step_intervals_s.size() != static_cast<size_t>(n_steps))
        throw UsageError("path: step interval override must list one value per step");
    for (int k = 0; k < n_steps; ++k)
        if (interval_s(k) <= 0.0) throw UsageError("path: step intervals must be positive");
    if (step_distance_mi < 0.0) throw UsageError("path: step distance must be >= 0");
    if (!location.empty() && find_location_preset(location) == nullptr)
        throw SchemaError("unknown location preset '" + location + "'");
}

double MapModel::density(Environment env) const {
    return env == Environment::urban ? urban_density : rural_density;
}

void MapModel::validate() const {
    if (tile_bytes <= 0.0) throw UsageError("map model: tile_bytes must be positive");
    if (tile_miles <= 0.0) throw UsageError("map model: tile_miles must be positive");
    if (rural_density <= 0.0 || urban_density <= rural_density)
        throw UsageError("map model: densities must satisfy urban > rural > 0");
    if (packet_size_bytes < 1.0) throw UsageError("map model: packet size must be >= 1 byte");
    if (jitter < 0.0) throw UsageError("map model: jitter must be >= 0");
    if (view_tiles < 0) throw UsageError("map model: view_tiles must be >= 0");
    if (view_fetch_s <= 0.0) throw UsageError("map model: view_fetch_s must be positive");
    if (burst_s <= 0.0) throw UsageError("map model: burst_s must be positive");
    if (sample_period_us < 1) throw UsageError("map model: sample period must be >= 1 us");
}

MapModel MapModel::app_default() {
    return MapModel{};
}

MapModel MapModel::device_default() {
    MapModel m;
    // sized so that one tile per 450/v seconds comes out at 0.0071617 s·mph/byte
    m.tile_bytes = 62834.0;
    m.packet_size_bytes = 1400.0;
    return m;
}

void NoiseSpec::validate() const {
    if (rate_pps < 0.0) throw SchemaError("noise: rate must be >= 0");
    if (rate_pps > 0.0 && size_dist.empty())
        throw SchemaError("noise: positive rate needs a size distribution");
    if (incoming_ratio < 0.0 || incoming_ratio > 1.0)
        throw SchemaError("noise: incoming ratio must lie in [0, 1]");
    double total = 0.0;
    for (const auto& [size, prob] : size_dist) {
        if (size <= 0) throw SchemaError("noise: packet sizes must be positive");
        if (prob < 0.0) throw SchemaError("noise: probabilities must be >= 0");
        total += prob;
    }
    if (!size_dist.empty() && std::fabs(total - 1.0) > 1e-9)
        throw SchemaError("noise: probabilities must sum to 1");
}

NoiseSpec NoiseSpec::none() {
    return NoiseSpec{};
}

NoiseSpec NoiseSpec::device_background() {
    NoiseSpec n;
    n.rate_pps = 40.0;
    n.size_dist = {{40, 0.25}, {60, 0.5}, {80, 0.25}};
    n.incoming_ratio = 0.7;
    return n;
}

NoiseSpec NoiseSpec::web_background() {
    NoiseSpec n;
    n.rate_pps = 2.0;
    n.size_dist = {{40, 0.5}, {60, 0.3}, {80, 0.2}}; // below the 100-byte filter cutoff
    n.incoming_ratio = 0.6;
    return n;
}

namespace {

const std::array<LocationPreset, 12> kPresets = {{
    {"boston", Environment::urban, 1.60},
    {"new_delhi", Environment::urban, 1.45},
    {"moscow", Environment::urban, 1.30},
    {"dresden", Environment::urban, 1.20},
    {"bangalore", Environment::urban, 1.10},
    {"denver", Environment::urban, 1.00},
    {"siberia", Environment::rural, 1.05},
    {"rural_india", Environment::rural, 0.95},
    {"niger_basin", Environment::rural, 0.85},
    {"chad_plain", Environment::rural, 0.75},
    {"montana", Environment::rural, 0.65},
    {"wyoming", Environment::rural, 0.55},
}};

constexpr uint64_t kTagTile = 0x74696c65;    // map tile draws
constexpr uint64_t kTagNoise = 0x6e6f6973;   // background packets
constexpr uint64_t kTagSession = 0x73657373; // one web request

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double effective_density(const PathSpec& path, const MapModel& model) {
    if (!path.location.empty()) {
        const LocationPreset* preset = find_location_preset(path.location);
        if (preset == nullptr)
            throw SchemaError("unknown location preset '" + path.location + "'");
        return preset->density;
    }
    return model.density(path.environment);
}

// seconds from motion start until `mi` miles have been covered
double time_at_distance_s(const PathSpec& path, double mi) {
    double covered = 0.0, elapsed = 0.0;
    for (int k = 0; k < path.n_steps; ++k) {
        if (mi <= covered + path.step_distance_mi) {
            double frac = path.step_distance_mi > 0.0
                              ? (mi - covered) / path.step_distance_mi
                              : 0.0;
            return elapsed + frac * path.interval_s(k);
        }
        covered += path.step_distance_mi;
        elapsed += path.interval_s(k);
    }
    return elapsed;
}

int step_at_distance(const PathSpec& path, double mi) {
    double covered = 0.0;
    for (int k = 0; k < path.n_steps; ++k) {
        covered += path.step_distance_mi;
        if (mi <= covered) return k;
    }
    return path.n_steps - 1;
}

void append_tile_burst(std::vector<PacketEvent>& events, double start_s, double bytes_f,
                       const MapModel& model) {
    int64_t bytes = std::llround(bytes_f);
    if (bytes < 1) bytes = 1;
    int64_t pkts = (bytes + static_cast<int64_t>(model.packet_size_bytes) - 1) /
                   static_cast<int64_t>(model.packet_size_bytes);
    if (pkts < 1) pkts = 1;
    int64_t base = bytes / pkts;
    for (int64_t i = 0; i < pkts; ++i) {
        double t = start_s + model.burst_s * static_cast<double>(i) / static_cast<double>(pkts);
        int64_t size = base;
        if (i == pkts - 1) size = bytes - base * (pkts - 1);
        if (size < 1) size = 1;
        events.push_back({std::llround(t * 1e6), size});
    }
}

void append_noise(std::vector<PacketEvent>& events, const NoiseSpec& noise, double duration_s,
                  uint64_t seed) {
    if (noise.rate_pps <= 0.0) return;
    Rng rng(mix_seed(seed, kTagNoise));
    double t = 0.0;
    while (true) {
        t += rng.exponential(noise.rate_pps);
        if (t >= duration_s) break;
        int64_t size = noise.size_dist[rng.weighted_index(noise.size_dist)].first;
        bool incoming = rng.uniform() < noise.incoming_ratio;
        events.push_back({std::llround(t * 1e6), incoming ? size : -size});
    }
}

} // namespace

std::span<const LocationPreset> location_presets() {
    return {kPresets.data(), kPresets.size()};
}

const LocationPreset* find_location_preset(const std::string& name) {
    for (const LocationPreset& p : kPresets)
        if (p.name == name) return &p;
    return nullptr;
}

void UrlProfile::validate() const {
    if (url_id.empty()) throw SchemaError("url profile: empty url_id");
    if (in_pkts_mean < 0.0 || out_pkts_mean < 0.0)
        throw SchemaError("url profile '" + url_id + "': packet means must be >= 0");
    if (in_pkts_stdev < 0.0 || out_pkts_stdev < 0.0)
        throw SchemaError("url profile '" + url_id + "': packet stdevs must be >= 0");
    auto check_dist = [this](const std::vector<std::pair<int64_t, double>>& dist,
                             const char* which) {
        double total = 0.0;
        for (const auto& [size, prob] : dist) {
            if (size <= 0)
                throw SchemaError("url profile '" + url_id + "': " + which +
                                  " sizes must be positive");
            if (prob < 0.0)
                throw SchemaError("url profile '" + url_id + "': " + which +
                                  " probabilities must be >= 0");
            total += prob;
        }
        if (std::fabs(total - 1.0) > 1e-9)
            throw SchemaError("url profile '" + url_id + "': " + which +
                              " probabilities must sum to 1");
    };
    if (in_pkts_mean > 0.0 && in_size_dist.empty())
        throw SchemaError("url profile '" + url_id + "': missing incoming size distribution");
    if (out_pkts_mean > 0.0 && out_size_dist.empty())
        throw SchemaError("url profile '" + url_id + "': missing outgoing size distribution");
    if (!in_size_dist.empty()) check_dist(in_size_dist, "incoming");
    if (!out_size_dist.empty()) check_dist(out_size_dist, "outgoing");
    if (front_tau_s <= 0.0)
        throw SchemaError("url profile '" + url_id + "': front_tau_s must be positive");
}

std::string to_string(UrlProfile::BurstShape shape) {
    return shape == UrlProfile::BurstShape::uniform ? "uniform" : "front_loaded";
}

UrlProfile::BurstShape burst_shape_from_string(const std::string& s) {
    if (s == "uniform") return UrlProfile::BurstShape::uniform;
    if (s == "front_loaded" || s == "front-loaded") return UrlProfile::BurstShape::front_loaded;
    throw SchemaError("unknown burst shape '" + s + "'");
}

std::vector<PacketEvent> gen_map_events(const PathSpec& path, const MapModel& model,
                                        const NoiseSpec& noise, TraceScope scope,
                                        double still_prefix_s, uint64_t seed) {
    path.validate();
    model.validate();
    noise.validate();
    if (still_prefix_s < 0.0) throw UsageError("still prefix must be >= 0");

    double density = effective_density(path, model);
    double t0_s = still_prefix_s;
    double total_s = still_prefix_s + path.total_duration_s();
    long tiles = std::lround(path.total_distance_mi() / model.tile_miles);

    std::vector<PacketEvent> events;
    for (long m = 1; m <= tiles; ++m) {
        Rng rng(mix_seed(seed, kTagTile, static_cast<uint64_t>(m)));
        double bytes_f = model.tile_bytes * density;
        if (model.jitter > 0.0) bytes_f *= 1.0 + model.jitter * rng.normal();
        double start_s;
        if (m <= model.view_tiles) {
            // the first screenful of tiles downloads as soon as motion starts
            start_s = t0_s + static_cast<double>(m - 1) * model.view_fetch_s /
                                 static_cast<double>(std::max(model.view_tiles, 1));
        } else {
            // each later tile is fetched one tile ahead of the crossing
            double d = static_cast<double>(m - 1) * model.tile_miles;
            start_s = t0_s + time_at_distance_s(path, d);
            if (model.jitter > 0.0) {
                double v = path.speed_mph(step_at_distance(path, d));
                double tile_interval = model.tile_miles / v * 3600.0;
                start_s += model.jitter * tile_interval * rng.normal();
            }
        }
        if (start_s < t0_s) start_s = t0_s;
        append_tile_burst(events, start_s, bytes_f, model);
    }

    if (scope == TraceScope::device) append_noise(events, noise, total_s, seed);

    std::stable_sort(events.begin(), events.end(),
                     [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });
    return events;
}

CounterTrace gen_map_trace(const PathSpec& path, const MapModel& model, const NoiseSpec& noise,
                           TraceScope scope, double still_prefix_s, uint64_t seed) {
    std::vector<PacketEvent> events =
        gen_map_events(path, model, noise, scope, still_prefix_s, seed);
    double total_s = still_prefix_s + path.total_duration_s();
    double mean_speed = path.total_duration_s() > 0.0
                            ? path.total_distance_mi() / path.total_duration_s() * 3600.0
                            : 0.0;
    std::map<std::string, std::string> meta;
    meta["environment"] = to_string(path.environment);
    meta["speed_mph"] = fmt_double(mean_speed);
    meta["distance_mi"] = fmt_double(path.total_distance_mi());
    meta["still_prefix_s"] = fmt_double(still_prefix_s);
    meta["onset_us"] = std::to_string(std::llround(still_prefix_s * 1e6));
    if (!path.location.empty()) meta["location"] = path.location;
    return trace_from_events(events, model.sample_period_us, scope, std::move(meta),
                             std::llround(total_s * 1e6));
}

std::vector<PacketEvent> gen_web_events(std::span<const UrlProfile> profiles,
                                        std::span<const std::pair<int64_t, std::string>> schedule,
                                        const NoiseSpec& noise, double frame_s, uint64_t seed) {
    noise.validate();
    if (frame_s <= 0.0) throw UsageError("frame duration must be positive");
    std::map<std::string, const UrlProfile*> by_id;
    for (const UrlProfile& p : profiles) {
        p.validate();
        by_id[p.url_id] = &p;
    }
    for (size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].first < schedule[i - 1].first)
            throw UsageError("request schedule must be sorted by time");

    // keep session packets clear of the frame's trailing sample so the rebuilt
    // events land inside the half-open request window
    double limit_s = frame_s - 2.0 * static_cast<double>(kWebSamplePeriodUs) / 1e6;

    std::vector<PacketEvent> events;
    for (size_t i = 0; i < schedule.size(); ++i) {
        const auto& [t_req, url_id] = schedule[i];
        if (t_req < 0) throw UsageError("request times must be >= 0");
        auto it = by_id.find(url_id);
        if (it == by_id.end()) throw SchemaError("no profile for url '" + url_id + "'");
        const UrlProfile& prof = *it->second;

        Rng rng(mix_seed(seed, kTagSession, static_cast<uint64_t>(i)));
        long n_in = std::lround(rng.normal(prof.in_pkts_mean, prof.in_pkts_stdev));
        long n_out = std::lround(rng.normal(prof.out_pkts_mean, prof.out_pkts_stdev));
        if (n_in < 0) n_in = 0;
        if (n_out < 0) n_out = 0;

        auto offset_s = [&]() {
            if (prof.burst_shape == UrlProfile::BurstShape::front_loaded)
                return std::min(rng.exponential(1.0 / prof.front_tau_s), limit_s);
            return rng.uniform(0.0, limit_s);
        };
        for (long k = 0; k < n_in; ++k) {
            double off = offset_s();
            int64_t size = prof.in_size_dist[rng.weighted_index(prof.in_size_dist)].first;
            events.push_back({t_req + std::llround(off * 1e6), size});
        }
        for (long k = 0; k < n_out; ++k) {
            double off = offset_s();
            int64_t size = prof.out_size_dist[rng.weighted_index(prof.out_size_dist)].first;
            events.push_back({t_req + std::llround(off * 1e6), -size});
        }
    }

    double end_s = schedule.empty()
                       ? frame_s
                       : static_cast<double>(schedule.back().first) / 1e6 + frame_s;
    append_noise(events, noise, end_s, seed);

    std::stable_sort(events.begin(), events.end(),
                     [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });
    return events;
}

CounterTrace gen_web_trace(std::span<const UrlProfile> profiles,
                           std::span<const std::pair<int64_t, std::string>> schedule,
                           const NoiseSpec& noise, double frame_s, uint64_t seed) {
    std::vector<PacketEvent> events = gen_web_events(profiles, schedule, noise, frame_s, seed);
    int64_t end_us = schedule.empty()
                         ? std::llround(frame_s * 1e6)
                         : schedule.back().first + std::llround(frame_s * 1e6);
    std::map<std::string, std::string> meta;
    meta["frame_s"] = fmt_double(frame_s);
    meta["n_requests"] = std::to_string(schedule.size());
    return trace_from_events(events, kWebSamplePeriodUs, TraceScope::device, std::move(meta),
                             end_us);
}

RateSeries gen_path_profile_series(const PathSpec& path, const MapModel& model,
                                   double resample_hz, uint64_t seed) {
    if (resample_hz <= 0.0) throw UsageError("resample rate must be positive");
    std::vector<PacketEvent> events =
        gen_map_events(path, model, NoiseSpec::none(), TraceScope::app, 0.0, seed);
    double period_s = 1.0 / resample_hz;
    size_t buckets =
        static_cast<size_t>(std::ceil(path.total_duration_s() / period_s));
    if (buckets == 0) buckets = 1;
    RateSeries series;
    series.period_s = period_s;
    series.values.assign(buckets, 0.0);
    for (const PacketEvent& e : events) {
        size_t b = static_cast<size_t>(static_cast<double>(e.t_us) / 1e6 / period_s);
        if (b >= buckets) b = buckets - 1;
        series.values[b] += static_cast<double>(std::llabs(e.size_bytes));
    }
    for (double& v : series.values) v /= period_s;
    return series;
}

// --- configuration ------------------------------------------------------------

MapModel map_model_from_config(const ConfigFile& cfg, const MapModel& base) {
    MapModel m = base;
    const ConfigSection* sec = cfg.find("map");
    if (sec == nullptr) return m;
    m.tile_bytes = sec->get_double_or("tile_bytes", m.tile_bytes);
    m.tile_miles = sec->get_double_or("tile_miles", m.tile_miles);
    m.urban_density = sec->get_double_or("urban_density", m.urban_density);
    m.rural_density = sec->get_double_or("rural_density", m.rural_density);
    m.packet_size_bytes = sec->get_double_or("packet_size_bytes", m.packet_size_bytes);
    m.jitter = sec->get_double_or("jitter", m.jitter);
    m.view_tiles = static_cast<int>(sec->get_int_or("view_tiles", m.view_tiles));
    m.view_fetch_s = sec->get_double_or("view_fetch_s", m.view_fetch_s);
    m.burst_s = sec->get_double_or("burst_s", m.burst_s);
    m.sample_period_us = sec->get_int_or("sample_period_us", m.sample_period_us);
    m.validate();
    return m;
}

PathSpec path_from_config(const ConfigFile& cfg) {
    const ConfigSection& sec = cfg.require("path");
    PathSpec p;
    if (sec.has("origin")) {
        std::vector<double> origin = sec.get_doubles("origin");
        if (origin.size() != 2) throw SchemaError("path: origin needs 'lat lon'");
        p.origin_lat = origin[0];
        p.origin_lon = origin[1];
    }
    if (sec.has("direction")) p.direction = direction_from_string(sec.get("direction"));
    p.n_steps = static_cast<int>(sec.get_int_or("n_steps", p.n_steps));
    p.step_interval_s = sec.get_double_or("step_interval_s", p.step_interval_s);
    p.step_distance_mi = sec.get_double_or("step_distance_mi", p.step_distance_mi);
    if (sec.has("location")) {
        p.location = sec.get("location");
        const LocationPreset* preset = find_location_preset(p.location);
        if (preset == nullptr) throw SchemaError("unknown location preset '" + p.location + "'");
        p.environment = preset->environment;
    }
    if (sec.has("environment"))
        p.environment = environment_from_string(sec.get("environment"));
    if (sec.has("step_intervals_s")) p.step_intervals_s = sec.get_doubles("step_intervals_s");
    p.validate();
    return p;
}

NoiseSpec noise_from_config(const ConfigFile& cfg, const NoiseSpec& base) {
    NoiseSpec n = base;
    const ConfigSection* sec = cfg.find("noise");
    if (sec == nullptr) return n;
    n.rate_pps = sec->get_double_or("rate_pps", n.rate_pps);
    if (sec->has("size_dist")) n.size_dist = sec->get_dist("size_dist");
    n.incoming_ratio = sec->get_double_or("incoming_ratio", n.incoming_ratio);
    n.validate();
    return n;
}

std::vector<UrlProfile> url_profiles_from_config(const ConfigFile& cfg) {
    std::vector<UrlProfile> profiles;
    for (const ConfigSection* sec : cfg.all("url ")) {
        UrlProfile p;
        p.url_id = sec->name.substr(4);
        std::vector<double> in = sec->get_doubles("in_pkts");
        std::vector<double> out = sec->get_doubles("out_pkts");
        if (in.size() != 2 || out.size() != 2)
            throw SchemaError("url profile '" + p.url_id + "': in_pkts/out_pkts need 'mean stdev'");
        p.in_pkts_mean = in[0];
        p.in_pkts_stdev = in[1];
        p.out_pkts_mean = out[0];
        p.out_pkts_stdev = out[1];
        if (sec->has("in_sizes")) p.in_size_dist = sec->get_dist("in_sizes");
        if (sec->has("out_sizes")) p.out_size_dist = sec->get_dist("out_sizes");
        if (sec->has("burst_shape"))
            p.burst_shape = burst_shape_from_string(sec->get("burst_shape"));
        p.front_tau_s = sec->get_double_or("front_tau_s", p.front_tau_s);
        p.validate();
        profiles.push_back(std::move(p));
    }
    if (profiles.empty()) throw SchemaError("no [url <id>] sections in profile config");
    return profiles;
}

} // namespace netside
