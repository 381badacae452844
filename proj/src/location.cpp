#include "netside/location.hpp"

#include <algorithm>
#include <cmath>

#include "netside/errors.hpp"

namespace netside {

std::string to_string(Environment env) {
    return env == Environment::urban ? "urban" : "rural";
}

Environment environment_from_string(const std::string& s) {
    if (s == "urban") return Environment::urban;
    if (s == "rural") return Environment::rural;
    throw SchemaError("unknown environment '" + s + "'");
}

namespace {

// cumulative rx+tx bytes at time t, linearly interpolated between samples
double cum_bytes_at(const CounterTrace& trace, double t_us) {
    const auto& s = trace.samples;
    auto total = [](const CounterSample& c) {
        return static_cast<double>(c.rx_bytes) + static_cast<double>(c.tx_bytes);
    };
    if (t_us <= static_cast<double>(s.front().t_us)) return total(s.front());
    if (t_us >= static_cast<double>(s.back().t_us)) return total(s.back());
    auto it = std::lower_bound(s.begin(), s.end(), t_us, [](const CounterSample& c, double t) {
        return static_cast<double>(c.t_us) < t;
    });
    const CounterSample& hi = *it;
    const CounterSample& lo = *(it - 1);
    double span = static_cast<double>(hi.t_us - lo.t_us);
    double w = (t_us - static_cast<double>(lo.t_us)) / span;
    return total(lo) + w * (total(hi) - total(lo));
}

double cum_rx_at(const CounterTrace& trace, double t_us) {
    const auto& s = trace.samples;
    if (t_us <= static_cast<double>(s.front().t_us))
        return static_cast<double>(s.front().rx_bytes);
    if (t_us >= static_cast<double>(s.back().t_us))
        return static_cast<double>(s.back().rx_bytes);
    auto it = std::lower_bound(s.begin(), s.end(), t_us, [](const CounterSample& c, double t) {
        return static_cast<double>(c.t_us) < t;
    });
    const CounterSample& hi = *it;
    const CounterSample& lo = *(it - 1);
    double span = static_cast<double>(hi.t_us - lo.t_us);
    double w = (t_us - static_cast<double>(lo.t_us)) / span;
    return static_cast<double>(lo.rx_bytes) +
           w * (static_cast<double>(hi.rx_bytes) - static_cast<double>(lo.rx_bytes));
}

} // namespace

RateSeries rate_series(const CounterTrace& trace, double period_s) {
    if (period_s <= 0.0) throw UsageError("rate_series: period must be positive");
    if (trace.samples.size() < 2)
        throw InsufficientDataError("rate_series: trace has fewer than 2 samples");
    double period_us = period_s * 1e6;
    double start = static_cast<double>(trace.start_us());
    double end = static_cast<double>(trace.end_us());
    size_t buckets = static_cast<size_t>((end - start) / period_us);
    if (buckets == 0)
        throw InsufficientDataError("rate_series: trace shorter than one period");
    RateSeries out;
    out.period_s = period_s;
    out.values.reserve(buckets);
    double prev = cum_bytes_at(trace, start);
    for (size_t b = 1; b <= buckets; ++b) {
        double cur = cum_bytes_at(trace, start + static_cast<double>(b) * period_us);
        out.values.push_back((cur - prev) / period_s);
        prev = cur;
    }
    return out;
}

double average_rate_bps(const CounterTrace& trace) {
    if (trace.samples.size() < 2)
        throw InsufficientDataError("average_rate_bps: trace has fewer than 2 samples");
    double dur_s = static_cast<double>(trace.duration_us()) / 1e6;
    if (dur_s <= 0.0) throw InsufficientDataError("average_rate_bps: zero-length trace");
    double bytes = static_cast<double>(trace.total_rx_bytes() + trace.total_tx_bytes());
    return bytes / dur_s;
}

std::optional<int64_t> detect_motion_onset(const CounterTrace& trace, double baseline_window_s,
                                           double k_sigma, double persistence_s) {
    RateSeries rates = rate_series(trace, 1.0);
    size_t baseline_n = static_cast<size_t>(baseline_window_s);
    if (baseline_n < 2 || rates.values.size() <= baseline_n)
        throw InsufficientDataError("detect_motion_onset: trace shorter than baseline window");

    double mean = 0.0;
    for (size_t i = 0; i < baseline_n; ++i) mean += rates.values[i];
    mean /= static_cast<double>(baseline_n);
    double var = 0.0;
    for (size_t i = 0; i < baseline_n; ++i) {
        double d = rates.values[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(baseline_n);
    double threshold = mean + k_sigma * std::sqrt(var);

    size_t need = std::max<size_t>(1, static_cast<size_t>(std::ceil(persistence_s)));
    size_t run = 0;
    for (size_t i = 0; i < rates.values.size(); ++i) {
        if (rates.values[i] > threshold) {
            ++run;
            if (run >= need) {
                int64_t bucket = static_cast<int64_t>(i - need + 1);
                return trace.start_us() + bucket * 1'000'000;
            }
        } else {
            run = 0;
        }
    }
    return std::nullopt;
}

SpeedModel fit_inverse_speed(std::span<const std::pair<double, double>> points,
                             SpeedModel::Unit unit) {
    if (points.size() < 2)
        throw InsufficientDataError("fit_inverse_speed: need at least 2 points");
    double num = 0.0, den = 0.0;
    for (const auto& [x, y] : points) {
        if (x <= 0.0) throw UsageError("fit_inverse_speed: speeds must be positive");
        num += y / x;
        den += 1.0 / (x * x);
    }
    if (den <= 0.0) throw NumericalError("fit_inverse_speed: degenerate design");
    SpeedModel model;
    model.unit = unit;
    model.a = num / den;
    double rss = 0.0;
    for (const auto& [x, y] : points) {
        double r = y - model.a / x;
        rss += r * r;
    }
    model.coeff_variance = rss / static_cast<double>(points.size() - 1) / den;
    return model;
}

double median_burst_gap_s(const CounterTrace& trace, double quiet_gap_s) {
    std::vector<CounterDelta> ds = deltas(trace);
    int64_t quiet_us = static_cast<int64_t>(quiet_gap_s * 1e6);
    std::vector<int64_t> burst_starts;
    int64_t last_activity = std::numeric_limits<int64_t>::min() / 2;
    for (const CounterDelta& d : ds) {
        if (d.rx_bytes == 0 && d.tx_bytes == 0) continue;
        if (d.t_us - last_activity > quiet_us) burst_starts.push_back(d.t_us);
        last_activity = d.t_us;
    }
    if (burst_starts.size() < 2)
        throw InsufficientDataError("median_burst_gap_s: fewer than 2 bursts in trace");
    std::vector<int64_t> gaps;
    gaps.reserve(burst_starts.size() - 1);
    for (size_t i = 1; i < burst_starts.size(); ++i)
        gaps.push_back(burst_starts[i] - burst_starts[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    return static_cast<double>(gaps[gaps.size() / 2]) / 1e6;
}

double byte_interval_s(const CounterTrace& trace, double motion_start_s, double noise_prefix_s) {
    if (trace.samples.size() < 2)
        throw InsufficientDataError("byte_interval_s: trace has fewer than 2 samples");
    double start = static_cast<double>(trace.start_us());
    double end = static_cast<double>(trace.end_us());
    double motion_us = start + motion_start_s * 1e6;
    if (motion_us >= end) throw UsageError("byte_interval_s: motion start beyond trace end");
    double window_s = (end - motion_us) / 1e6;
    double bytes = cum_bytes_at(trace, end) - cum_bytes_at(trace, motion_us);
    if (noise_prefix_s > 0.0) {
        double prefix_us = start + noise_prefix_s * 1e6;
        if (prefix_us > end) throw UsageError("byte_interval_s: noise prefix beyond trace end");
        double noise_rate = (cum_bytes_at(trace, prefix_us) - cum_bytes_at(trace, start)) /
                            noise_prefix_s;
        bytes -= noise_rate * window_s;
    }
    if (bytes <= 0.0)
        throw InsufficientDataError("byte_interval_s: no traffic above background in window");
    return window_s / bytes;
}

double estimate_distance_miles(const CounterTrace& trace, double tile_bytes, double tile_miles,
                               double noise_prefix_s) {
    if (tile_bytes <= 0.0 || tile_miles <= 0.0)
        throw UsageError("estimate_distance_miles: tile parameters must be positive");
    if (trace.samples.size() < 2)
        throw InsufficientDataError("estimate_distance_miles: trace has fewer than 2 samples");
    double start = static_cast<double>(trace.start_us());
    double end = static_cast<double>(trace.end_us());
    double bytes = cum_rx_at(trace, end) - cum_rx_at(trace, start);
    if (noise_prefix_s > 0.0) {
        double prefix_us = start + noise_prefix_s * 1e6;
        if (prefix_us > end)
            throw UsageError("estimate_distance_miles: noise prefix beyond trace end");
        double noise_rate = (cum_rx_at(trace, prefix_us) - cum_rx_at(trace, start)) /
                            noise_prefix_s;
        bytes -= noise_rate * (end - start) / 1e6;
    }
    if (bytes < 0.0) bytes = 0.0;
    return bytes / tile_bytes * tile_miles;
}

EnvCentroids learn_env_centroids(std::span<const CounterTrace> traces,
                                 std::span<const Environment> labels) {
    if (traces.size() != labels.size())
        throw UsageError("learn_env_centroids: trace/label count mismatch");
    double urban_sum = 0, rural_sum = 0;
    long urban_n = 0, rural_n = 0;
    for (size_t i = 0; i < traces.size(); ++i) {
        double r = average_rate_bps(traces[i]);
        if (labels[i] == Environment::urban) {
            urban_sum += r;
            ++urban_n;
        } else {
            rural_sum += r;
            ++rural_n;
        }
    }
    if (urban_n == 0 || rural_n == 0)
        throw InsufficientDataError("learn_env_centroids: need both classes in training data");
    EnvCentroids c;
    c.urban_rate_bps = urban_sum / static_cast<double>(urban_n);
    c.rural_rate_bps = rural_sum / static_cast<double>(rural_n);
    if (c.urban_rate_bps <= c.rural_rate_bps)
        throw NumericalError("learn_env_centroids: urban centroid not above rural");
    return c;
}

Environment classify_environment(const CounterTrace& trace, const EnvCentroids& centroids) {
    double r = average_rate_bps(trace);
    double du = std::fabs(r - centroids.urban_rate_bps);
    double dr = std::fabs(r - centroids.rural_rate_bps);
    return du <= dr ? Environment::urban : Environment::rural;
}

double pearson(const RateSeries& a, const RateSeries& b) {
    if (a.values.size() != b.values.size())
        throw UsageError("pearson: series lengths differ");
    size_t n = a.values.size();
    if (n < 2) throw InsufficientDataError("pearson: need at least 2 points");
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a.values[i];
        mb += b.values[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < n; ++i) {
        double da = a.values[i] - ma;
        double db = b.values[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw NumericalError("pearson: correlation undefined for constant series");
    return sab / std::sqrt(saa * sbb);
}

std::vector<std::pair<std::string, double>> path_scores(
    const RateSeries& unlabeled, std::span<const std::pair<std::string, RateSeries>> labeled) {
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& [label, series] : labeled) {
        size_t n = std::min(unlabeled.values.size(), series.values.size());
        if (n < 2) continue;
        RateSeries a{std::vector<double>(unlabeled.values.begin(),
                                         unlabeled.values.begin() + static_cast<long>(n)),
                     unlabeled.period_s};
        RateSeries b{std::vector<double>(series.values.begin(),
                                         series.values.begin() + static_cast<long>(n)),
                     series.period_s};
        try {
            scores.emplace_back(label, pearson(a, b));
        } catch (const NumericalError&) {
            // constant candidate: correlation undefined, skip it
        }
    }
    return scores;
}

std::string classify_path(const RateSeries& unlabeled,
                          std::span<const std::pair<std::string, RateSeries>> labeled) {
    if (labeled.empty()) throw InsufficientDataError("classify_path: no labeled paths");
    std::vector<std::pair<std::string, double>> scores = path_scores(unlabeled, labeled);
    if (scores.empty())
        throw InsufficientDataError("classify_path: no labeled path has a defined correlation");
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i].second > scores[best].second) best = i;
    return scores[best].first;
}

} // namespace netside
