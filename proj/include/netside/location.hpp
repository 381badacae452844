#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netside/trace.hpp"

namespace netside {

enum class Environment { urban, rural };

std::string to_string(Environment env);
Environment environment_from_string(const std::string& s);

// least-squares fit of y = a / x
struct SpeedModel {
    enum class Unit { per_tile, per_byte };
    double a = 0.0;
    Unit unit = Unit::per_tile;
    double coeff_variance = 0.0;  // var(a_hat) = RSS/(n-1) / sum(1/x_i^2)
};

struct EnvCentroids {
    double urban_rate_bps = 0.0;  // mean download rate of urban training traces
    double rural_rate_bps = 0.0;  // must be < urban
};

struct RateSeries {
    std::vector<double> values;  // bytes per second per bucket
    double period_s = 1.0;
};

// rx+tx byte rate per period bucket; cumulative counters are linearly
// interpolated at bucket edges, so sparse samples still yield exact totals
RateSeries rate_series(const CounterTrace& trace, double period_s = 1.0);

// total bytes / duration over the whole trace
double average_rate_bps(const CounterTrace& trace);

// First bucket where the rolling 1 s byte rate exceeds
// baseline_mean + k_sigma * baseline_stdev and stays above it for
// persistence_s consecutive seconds. Baseline statistics come from the first
// baseline_window_s of the trace. Returns nullopt when the trace never leaves
// the baseline regime.
std::optional<int64_t> detect_motion_onset(const CounterTrace& trace,
                                           double baseline_window_s = 10.0,
                                           double k_sigma = 3.0,
                                           double persistence_s = 2.0);

SpeedModel fit_inverse_speed(std::span<const std::pair<double, double>> speed_interval_points,
                             SpeedModel::Unit unit);

// median gap between burst starts; a burst is a run of traffic separated from
// the next by at least quiet_gap_s of silence (app-level tile interval measure)
double median_burst_gap_s(const CounterTrace& trace, double quiet_gap_s = 0.5);

// seconds per byte over the motion window, with the background rate estimated
// from [0, noise_prefix_s) subtracted when the prefix is nonzero
double byte_interval_s(const CounterTrace& trace, double motion_start_s,
                       double noise_prefix_s = 0.0);

// tile integration: distance = map_bytes / tile_bytes * tile_miles, where
// map_bytes is the rx total minus the still-prefix background estimate
double estimate_distance_miles(const CounterTrace& trace, double tile_bytes, double tile_miles,
                               double noise_prefix_s = 0.0);

EnvCentroids learn_env_centroids(std::span<const CounterTrace> traces,
                                 std::span<const Environment> labels);

// nearest centroid on average download rate; exact midpoint goes urban
Environment classify_environment(const CounterTrace& trace, const EnvCentroids& centroids);

// sample Pearson correlation; equal lengths >= 2 required, constant series are
// a NumericalError
double pearson(const RateSeries& a, const RateSeries& b);

// PCC of the unlabeled series against every labeled one (series truncated to
// the common length); candidates with undefined correlation are skipped
std::vector<std::pair<std::string, double>> path_scores(
    const RateSeries& unlabeled,
    std::span<const std::pair<std::string, RateSeries>> labeled);

// label of the maximum-PCC candidate; ties resolve to the earliest list entry
std::string classify_path(const RateSeries& unlabeled,
                          std::span<const std::pair<std::string, RateSeries>> labeled);

} // namespace netside
