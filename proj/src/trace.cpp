#include "netside/trace.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <sstream>

#include "netside/errors.hpp"

namespace netside {

std::string to_string(TraceScope scope) {
    return scope == TraceScope::app ? "app" : "device";
}

TraceScope trace_scope_from_string(const std::string& s) {
    if (s == "app") return TraceScope::app;
    if (s == "device") return TraceScope::device;
    throw SchemaError("unknown trace scope '" + s + "'");
}

uint64_t CounterTrace::total_rx_bytes() const {
    return samples.empty() ? 0 : samples.back().rx_bytes - samples.front().rx_bytes;
}

uint64_t CounterTrace::total_tx_bytes() const {
    return samples.empty() ? 0 : samples.back().tx_bytes - samples.front().tx_bytes;
}

void validate(const CounterTrace& trace) {
    for (size_t i = 1; i < trace.samples.size(); ++i) {
        const CounterSample& a = trace.samples[i - 1];
        const CounterSample& b = trace.samples[i];
        if (b.t_us <= a.t_us)
            throw SchemaError("trace timestamps must be strictly increasing (sample " +
                              std::to_string(i) + ")");
        if (b.rx_bytes < a.rx_bytes || b.tx_bytes < a.tx_bytes || b.rx_pkts < a.rx_pkts ||
            b.tx_pkts < a.tx_pkts)
            throw SchemaError("cumulative counters decreased at sample " + std::to_string(i) +
                              "; counter resets must be split into separate traces");
    }
}

std::vector<CounterDelta> deltas(const CounterTrace& trace) {
    if (trace.samples.size() < 2)
        throw InsufficientDataError("trace has fewer than 2 samples, no intervals to diff");
    validate(trace);
    std::vector<CounterDelta> out;
    out.reserve(trace.samples.size() - 1);
    for (size_t i = 1; i < trace.samples.size(); ++i) {
        const CounterSample& a = trace.samples[i - 1];
        const CounterSample& b = trace.samples[i];
        out.push_back({b.t_us, b.rx_bytes - a.rx_bytes, b.tx_bytes - a.tx_bytes,
                       b.rx_pkts - a.rx_pkts, b.tx_pkts - a.tx_pkts});
    }
    return out;
}

namespace {

struct OrphanBytes {
    int64_t origin_us;
    uint64_t bytes;
};

// one direction of the reconstruction; sign is +1 for rx, -1 for tx
void reconstruct_direction(const std::vector<CounterDelta>& ds, bool rx, int sign,
                           int64_t orphan_window_us, std::vector<PacketEvent>& out) {
    std::deque<OrphanBytes> pending;
    for (const CounterDelta& d : ds) {
        uint64_t bytes = rx ? d.rx_bytes : d.tx_bytes;
        uint64_t pkts = rx ? d.rx_pkts : d.tx_pkts;
        while (!pending.empty() && d.t_us - pending.front().origin_us > orphan_window_us)
            pending.pop_front();
        if (pkts == 0) {
            if (bytes > 0) pending.push_back({d.t_us, bytes});
            continue;
        }
        uint64_t total = bytes;
        for (const OrphanBytes& p : pending) total += p.bytes;
        pending.clear();
        if (total == 0) continue;  // packet count ticked with no bytes: nothing to emit
        uint64_t base = total / pkts;
        for (uint64_t k = 0; k < pkts; ++k) {
            uint64_t size = (k + 1 == pkts) ? total - base * (pkts - 1) : base;
            if (size == 0) continue;
            out.push_back({d.t_us, sign * static_cast<int64_t>(size)});
        }
    }
}

} // namespace

std::vector<PacketEvent> reconstruct_packet_events(const CounterTrace& trace,
                                                   int64_t orphan_window_us) {
    std::vector<CounterDelta> ds = deltas(trace);
    std::vector<PacketEvent> rx_events, tx_events;
    reconstruct_direction(ds, true, +1, orphan_window_us, rx_events);
    reconstruct_direction(ds, false, -1, orphan_window_us, tx_events);

    std::vector<PacketEvent> merged;
    merged.reserve(rx_events.size() + tx_events.size());
    std::merge(rx_events.begin(), rx_events.end(), tx_events.begin(), tx_events.end(),
               std::back_inserter(merged),
               [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });
    return merged;
}

std::vector<Frame> slice_frames(std::span<const PacketEvent> events,
                                const std::vector<std::pair<int64_t, std::string>>& requests,
                                int64_t duration_us) {
    if (duration_us <= 0) throw UsageError("frame duration must be positive");
    std::vector<Frame> frames;
    frames.reserve(requests.size());
    for (const auto& [start, label] : requests) {
        Frame f;
        f.duration_us = duration_us;
        f.label = label;
        auto lo = std::lower_bound(events.begin(), events.end(), start,
                                   [](const PacketEvent& e, int64_t t) { return e.t_us < t; });
        for (auto it = lo; it != events.end() && it->t_us < start + duration_us; ++it)
            f.events.push_back({it->t_us - start, it->size_bytes});
        frames.push_back(std::move(f));
    }
    return frames;
}

CounterTrace trace_from_events(std::span<const PacketEvent> events, int64_t period_us,
                               TraceScope scope, std::map<std::string, std::string> meta,
                               int64_t end_us) {
    if (period_us <= 0) throw UsageError("sampling period must be positive");
    std::vector<PacketEvent> sorted(events.begin(), events.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });

    CounterTrace trace;
    trace.scope = scope;
    trace.meta = std::move(meta);
    CounterSample cur;  // t=0, all zero
    trace.samples.push_back(cur);

    size_t i = 0;
    int64_t last_bucket = -1;
    while (i < sorted.size()) {
        if (sorted[i].t_us < 0) throw UsageError("event time before trace start");
        int64_t bucket = sorted[i].t_us / period_us;
        int64_t t_sample = (bucket + 1) * period_us;
        // close the idle gap with a flat sample so interpolating consumers
        // never smear this bucket's bytes back across the silence before it
        if (bucket > last_bucket + 1 && bucket > 0) {
            cur.t_us = bucket * period_us;
            trace.samples.push_back(cur);
        }
        last_bucket = bucket;
        while (i < sorted.size() && sorted[i].t_us / period_us == bucket) {
            const PacketEvent& e = sorted[i];
            if (e.size_bytes > 0) {
                cur.rx_bytes += static_cast<uint64_t>(e.size_bytes);
                cur.rx_pkts += 1;
            } else if (e.size_bytes < 0) {
                cur.tx_bytes += static_cast<uint64_t>(-e.size_bytes);
                cur.tx_pkts += 1;
            }
            ++i;
        }
        cur.t_us = t_sample;
        trace.samples.push_back(cur);
    }

    if (end_us >= 0) {
        int64_t t_final = ((end_us + period_us - 1) / period_us) * period_us;
        if (t_final > trace.samples.back().t_us) {
            cur.t_us = t_final;
            trace.samples.push_back(cur);
        }
    }
    return trace;
}

// --- CSV ---------------------------------------------------------------------

namespace {

void write_header_lines(std::ofstream& out,
                        const std::vector<std::pair<std::string, std::string>>& header,
                        const std::map<std::string, std::string>& meta) {
    for (const auto& [k, v] : header) out << "# " << k << ": " << v << "\n";
    for (const auto& [k, v] : meta) out << "# meta." << k << ": " << v << "\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

bool parse_meta_comment(const std::string& line, std::map<std::string, std::string>& meta,
                        TraceScope& scope, bool& scope_seen) {
    // lines look like "# meta.speed_mph: 30"
    const std::string tag = "# meta.";
    if (line.rfind(tag, 0) != 0) return false;
    size_t colon = line.find(':', tag.size());
    if (colon == std::string::npos) return false;
    std::string key = line.substr(tag.size(), colon - tag.size());
    std::string value = line.substr(colon + 1);
    size_t start = value.find_first_not_of(" \t");
    value = start == std::string::npos ? "" : value.substr(start);
    if (key == "scope") {
        scope = trace_scope_from_string(value);
        scope_seen = true;
    } else {
        meta[key] = value;
    }
    return true;
}

uint64_t parse_u64(const std::string& s, const std::string& what) {
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError("bad " + what + " value '" + s + "'");
    return v;
}

int64_t parse_i64(const std::string& s, const std::string& what) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError("bad " + what + " value '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

void save_trace_csv(const CounterTrace& trace, const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_out(path);
    write_header_lines(out, header, trace.meta);
    out << "# meta.scope: " << to_string(trace.scope) << "\n";
    out << "t_us,rx_bytes,tx_bytes,rx_pkts,tx_pkts\n";
    for (const CounterSample& s : trace.samples)
        out << s.t_us << ',' << s.rx_bytes << ',' << s.tx_bytes << ',' << s.rx_pkts << ','
            << s.tx_pkts << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<CounterTrace> load_traces_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::map<std::string, std::string> meta;
    TraceScope scope = TraceScope::device;
    bool scope_seen = false;
    bool header_seen = false;
    std::vector<CounterTrace> traces;
    CounterTrace cur;

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            parse_meta_comment(line, meta, scope, scope_seen);
            continue;
        }
        if (!header_seen) {
            if (line != "t_us,rx_bytes,tx_bytes,rx_pkts,tx_pkts")
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": expected trace header t_us,rx_bytes,tx_bytes,rx_pkts,tx_pkts");
            header_seen = true;
            continue;
        }
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 5)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 5 columns, got " +
                              std::to_string(f.size()));
        CounterSample s;
        s.t_us = parse_i64(f[0], "t_us");
        s.rx_bytes = parse_u64(f[1], "rx_bytes");
        s.tx_bytes = parse_u64(f[2], "tx_bytes");
        s.rx_pkts = parse_u64(f[3], "rx_pkts");
        s.tx_pkts = parse_u64(f[4], "tx_pkts");

        if (!cur.samples.empty()) {
            const CounterSample& prev = cur.samples.back();
            bool reset = s.rx_bytes < prev.rx_bytes || s.tx_bytes < prev.tx_bytes ||
                         s.rx_pkts < prev.rx_pkts || s.tx_pkts < prev.tx_pkts;
            if (reset) {
                // counter wrap or reboot: hard break, start a new trace
                traces.push_back(std::move(cur));
                cur = CounterTrace{};
            } else if (s.t_us <= prev.t_us) {
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": timestamps must be strictly increasing");
            }
        }
        cur.samples.push_back(s);
    }
    if (!header_seen) throw SchemaError(path + ": missing trace header row");
    if (!cur.samples.empty()) traces.push_back(std::move(cur));
    for (CounterTrace& t : traces) {
        t.scope = scope;
        t.meta = meta;
        validate(t);
    }
    if (traces.empty()) throw InsufficientDataError(path + ": no samples in trace file");
    (void)scope_seen;
    return traces;
}

CounterTrace load_trace_csv(const std::string& path) {
    return load_traces_csv(path).front();
}

void save_events_csv(std::span<const PacketEvent> events, const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_out(path);
    write_header_lines(out, header, {});
    out << "t_us,size_bytes\n";
    for (const PacketEvent& e : events) out << e.t_us << ',' << e.size_bytes << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<PacketEvent> load_events_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<PacketEvent> events;
    std::string line;
    size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "t_us,size_bytes")
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": expected event header t_us,size_bytes");
            header_seen = true;
            continue;
        }
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 2)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 2 columns");
        PacketEvent e;
        e.t_us = parse_i64(f[0], "t_us");
        e.size_bytes = parse_i64(f[1], "size_bytes");
        if (e.size_bytes == 0)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": event size must be nonzero");
        events.push_back(e);
    }
    if (!header_seen) throw SchemaError(path + ": missing event header row");
    return events;
}

void save_labels_csv(const std::vector<std::pair<int64_t, std::string>>& requests,
                     const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& header) {
    std::ofstream out = open_out(path);
    write_header_lines(out, header, {});
    out << "request_t_us,label\n";
    for (const auto& [t, label] : requests) out << t << ',' << label << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<std::pair<int64_t, std::string>> load_labels_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<std::pair<int64_t, std::string>> requests;
    std::string line;
    size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "request_t_us,label")
                throw SchemaError(path + ":" + std::to_string(lineno) +
                                  ": expected label header request_t_us,label");
            header_seen = true;
            continue;
        }
        size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 2 columns");
        requests.emplace_back(parse_i64(line.substr(0, comma), "request_t_us"),
                              line.substr(comma + 1));
    }
    if (!header_seen) throw SchemaError(path + ": missing label header row");
    return requests;
}

} // namespace netside
