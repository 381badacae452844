#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace netside {

// Time is carried as int64 microseconds everywhere; byte/packet counters are
// cumulative uint64, mirroring per-app interface counters that only ever grow.

enum class TraceScope { app, device };

std::string to_string(TraceScope scope);
TraceScope trace_scope_from_string(const std::string& s);

struct CounterSample {
    int64_t t_us = 0;
    uint64_t rx_bytes = 0;
    uint64_t tx_bytes = 0;
    uint64_t rx_pkts = 0;
    uint64_t tx_pkts = 0;
};

struct CounterTrace {
    TraceScope scope = TraceScope::device;
    std::vector<CounterSample> samples;       // strictly increasing t_us, monotone counters
    std::map<std::string, std::string> meta;  // free-form provenance (speed_mph, environment, ...)

    int64_t start_us() const { return samples.empty() ? 0 : samples.front().t_us; }
    int64_t end_us() const { return samples.empty() ? 0 : samples.back().t_us; }
    int64_t duration_us() const { return end_us() - start_us(); }
    uint64_t total_rx_bytes() const;
    uint64_t total_tx_bytes() const;
};

// Reconstructed packet: positive size = incoming (rx), negative = outgoing (tx).
struct PacketEvent {
    int64_t t_us = 0;
    int64_t size_bytes = 0;  // never 0
};

struct Frame {
    std::vector<PacketEvent> events;  // times relative to frame start, < duration_us
    int64_t duration_us = 0;
    std::string label;
};

struct CounterDelta {
    int64_t t_us = 0;  // end of the interval the delta covers
    uint64_t rx_bytes = 0;
    uint64_t tx_bytes = 0;
    uint64_t rx_pkts = 0;
    uint64_t tx_pkts = 0;
};

// throws SchemaError on non-monotone counters or non-increasing timestamps
void validate(const CounterTrace& trace);

// per-interval differences; throws InsufficientDataError for traces with < 2 samples
std::vector<CounterDelta> deltas(const CounterTrace& trace);

// Turns counter deltas back into signed packet events. Bytes that show up in an
// interval without packets attach to the nearest subsequent interval that has
// packets, as long as it arrives within orphan_window_us; stale orphan bytes are
// dropped. Within an interval the byte total is split evenly over the packets,
// remainder on the last one.
std::vector<PacketEvent> reconstruct_packet_events(const CounterTrace& trace,
                                                   int64_t orphan_window_us = 50'000);

// Cuts labeled frames out of an event stream. Windows are half-open
// [request_t, request_t + duration); event times are re-based to the frame start.
std::vector<Frame> slice_frames(std::span<const PacketEvent> events,
                                const std::vector<std::pair<int64_t, std::string>>& requests,
                                int64_t duration_us);

// Inverse of reconstruction for generators and round-trip tests: buckets events
// at the sampling period and emits the cumulative counter sequence (a sample per
// non-empty bucket, plus samples at t=0 and at end_us).
CounterTrace trace_from_events(std::span<const PacketEvent> events,
                               int64_t period_us,
                               TraceScope scope,
                               std::map<std::string, std::string> meta = {},
                               int64_t end_us = -1);

// --- file formats ---------------------------------------------------------
// Trace CSV: header "t_us,rx_bytes,tx_bytes,rx_pkts,tx_pkts"; leading '#' lines
// carry the artifact header block and "meta.<key>: <value>" pairs.

void save_trace_csv(const CounterTrace& trace, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& header = {});

// splits on counter resets (a wrapped/rebooted counter starts a fresh trace)
std::vector<CounterTrace> load_traces_csv(const std::string& path);

// convenience: first trace of the file (errors if the file holds none)
CounterTrace load_trace_csv(const std::string& path);

void save_events_csv(std::span<const PacketEvent> events, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header = {});
std::vector<PacketEvent> load_events_csv(const std::string& path);

void save_labels_csv(const std::vector<std::pair<int64_t, std::string>>& requests,
                     const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header = {});
std::vector<std::pair<int64_t, std::string>> load_labels_csv(const std::string& path);

} // namespace netside
