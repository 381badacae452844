#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "netside/errors.hpp"
#include "netside/rng.hpp"
#include "netside/trace.hpp"

using namespace netside;

namespace {

CounterTrace make_trace(const std::vector<std::array<int64_t, 5>>& rows,
                        TraceScope scope = TraceScope::device) {
    CounterTrace t;
    t.scope = scope;
    for (const auto& r : rows)
        t.samples.push_back({r[0], static_cast<uint64_t>(r[1]), static_cast<uint64_t>(r[2]),
                             static_cast<uint64_t>(r[3]), static_cast<uint64_t>(r[4])});
    return t;
}

std::filesystem::path temp_file(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "netside_trace_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("deltas are per-interval differences") {
    CounterTrace t = make_trace({{0, 0, 0, 0, 0}, {100000, 101, 0, 2, 0}, {200000, 101, 100, 2, 3}});
    std::vector<CounterDelta> d = deltas(t);
    REQUIRE(d.size() == 2);
    CHECK(d[0].t_us == 100000);
    CHECK(d[0].rx_bytes == 101);
    CHECK(d[0].rx_pkts == 2);
    CHECK(d[0].tx_bytes == 0);
    CHECK(d[1].t_us == 200000);
    CHECK(d[1].tx_bytes == 100);
    CHECK(d[1].tx_pkts == 3);
    CHECK_THROWS_AS(deltas(make_trace({{0, 0, 0, 0, 0}})), InsufficientDataError);
}

TEST_CASE("validate rejects decreasing counters and timestamps") {
    CHECK_THROWS_AS(validate(make_trace({{0, 10, 0, 1, 0}, {100, 5, 0, 1, 0}})), SchemaError);
    CHECK_THROWS_AS(validate(make_trace({{100, 0, 0, 0, 0}, {100, 1, 0, 1, 0}})), SchemaError);
    CHECK_NOTHROW(validate(make_trace({{0, 0, 0, 0, 0}, {100, 1, 0, 1, 0}})));
}

TEST_CASE("byte totals split evenly over packets, remainder on the last") {
    CounterTrace t = make_trace({{0, 0, 0, 0, 0}, {100000, 0, 100, 0, 3}});
    std::vector<PacketEvent> ev = reconstruct_packet_events(t);
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].size_bytes == -33);
    CHECK(ev[1].size_bytes == -33);
    CHECK(ev[2].size_bytes == -34);
    for (const PacketEvent& e : ev) CHECK(e.t_us == 100000);

    CounterTrace rx = make_trace({{0, 0, 0, 0, 0}, {100000, 101, 0, 2, 0}});
    std::vector<PacketEvent> rev = reconstruct_packet_events(rx);
    REQUIRE(rev.size() == 2);
    CHECK(rev[0].size_bytes == 50);
    CHECK(rev[1].size_bytes == 51);
}

TEST_CASE("orphan bytes attach to the next packet-bearing interval inside the window") {
    CounterTrace t = make_trace(
        {{0, 0, 0, 0, 0}, {100000, 500, 0, 0, 0}, {140000, 800, 0, 1, 0}});
    std::vector<PacketEvent> ev = reconstruct_packet_events(t);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].t_us == 140000);
    CHECK(ev[0].size_bytes == 800);
}

TEST_CASE("stale orphan bytes are dropped") {
    CounterTrace t = make_trace(
        {{0, 0, 0, 0, 0}, {100000, 500, 0, 0, 0}, {220000, 600, 0, 1, 0}});
    std::vector<PacketEvent> ev = reconstruct_packet_events(t, 50000);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].t_us == 220000);
    CHECK(ev[0].size_bytes == 100);
}

TEST_CASE("event round trip conserves bytes and packet counts exactly") {
    Rng rng(42);
    std::vector<PacketEvent> events;
    int64_t rx_bytes = 0, tx_bytes = 0;
    size_t rx_n = 0, tx_n = 0;
    for (int i = 0; i < 200; ++i) {
        int64_t t = rng.uniform_int(0, 4'999'999);
        int64_t size = rng.uniform_int(40, 1500);
        if (rng.uniform() < 0.5) size = -size;
        events.push_back({t, size});
        if (size > 0) {
            rx_bytes += size;
            ++rx_n;
        } else {
            tx_bytes -= size;
            ++tx_n;
        }
    }
    CounterTrace trace = trace_from_events(events, 100'000, TraceScope::app);
    CHECK(trace.total_rx_bytes() == static_cast<uint64_t>(rx_bytes));
    CHECK(trace.total_tx_bytes() == static_cast<uint64_t>(tx_bytes));
    CHECK(trace.samples.back().rx_pkts == rx_n);
    CHECK(trace.samples.back().tx_pkts == tx_n);

    std::vector<PacketEvent> back = reconstruct_packet_events(trace);
    int64_t rx2 = 0, tx2 = 0;
    for (const PacketEvent& e : back) (e.size_bytes > 0 ? rx2 : tx2) += std::abs(e.size_bytes);
    CHECK(rx2 == rx_bytes);
    CHECK(tx2 == tx_bytes);
    size_t rx_back = 0, tx_back = 0;
    for (const PacketEvent& e : back) (e.size_bytes > 0 ? rx_back : tx_back) += 1;
    CHECK(rx_back == rx_n);
    CHECK(tx_back == tx_n);
}

TEST_CASE("reconstructed event times stay within one sampling period") {
    std::vector<PacketEvent> events = {{12'345, 100}, {512'000, -200}, {512'500, 300}};
    CounterTrace trace = trace_from_events(events, 100'000, TraceScope::app);
    std::vector<PacketEvent> back = reconstruct_packet_events(trace);
    REQUIRE(back.size() == 3);
    CHECK(back[0].t_us == 100'000);
    CHECK(back[1].t_us == 600'000);
    CHECK(back[2].t_us == 600'000);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back[i].t_us >= events[i].t_us);
        CHECK(back[i].t_us - events[i].t_us <= 100'000);
    }
}

TEST_CASE("trace_from_events emits a start sample and a final boundary sample") {
    std::vector<PacketEvent> events = {{150'000, 100}};
    CounterTrace trace = trace_from_events(events, 100'000, TraceScope::device, {}, 950'000);
    REQUIRE(trace.samples.size() >= 2);
    CHECK(trace.samples.front().t_us == 0);
    CHECK(trace.samples.front().rx_bytes == 0);
    CHECK(trace.samples.back().t_us == 1'000'000);
    CHECK(trace.samples.back().rx_bytes == 100);
}

TEST_CASE("slice_frames cuts half-open re-based windows") {
    std::vector<PacketEvent> events = {{0, 10},        {50'000, -20},   {999'999, 30},
                                       {1'000'000, 40}, {1'500'000, -50}, {2'999'999, 60}};
    std::vector<std::pair<int64_t, std::string>> requests = {{0, "a"}, {1'000'000, "b"}};
    std::vector<Frame> frames = slice_frames(events, requests, 1'000'000);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].label == "a");
    REQUIRE(frames[0].events.size() == 3);
    CHECK(frames[0].events[2].t_us == 999'999);
    CHECK(frames[1].label == "b");
    REQUIRE(frames[1].events.size() == 2);
    CHECK(frames[1].events[0].t_us == 0);
    CHECK(frames[1].events[0].size_bytes == 40);
    CHECK(frames[1].events[1].t_us == 500'000);
    CHECK(frames[0].duration_us == 1'000'000);
}

TEST_CASE("trace CSV round trip keeps samples, scope and meta") {
    CounterTrace t = make_trace({{0, 0, 0, 0, 0}, {1000, 120, 40, 2, 1}}, TraceScope::app);
    t.meta["environment"] = "urban";
    t.meta["speed_mph"] = "30";
    auto path = temp_file("roundtrip.csv");
    save_trace_csv(t, path.string(), {{"tool", "netside test"}});
    CounterTrace back = load_trace_csv(path.string());
    CHECK(back.scope == TraceScope::app);
    REQUIRE(back.samples.size() == 2);
    CHECK(back.samples[1].t_us == 1000);
    CHECK(back.samples[1].rx_bytes == 120);
    CHECK(back.samples[1].tx_bytes == 40);
    CHECK(back.samples[1].rx_pkts == 2);
    CHECK(back.samples[1].tx_pkts == 1);
    CHECK(back.meta.at("environment") == "urban");
    CHECK(back.meta.at("speed_mph") == "30");
}

TEST_CASE("counter resets split a file into separate traces") {
    CounterTrace a = make_trace({{0, 0, 0, 0, 0}, {1000, 500, 0, 1, 0}});
    auto path = temp_file("resets.csv");
    save_trace_csv(a, path.string());
    // append a second run whose counters restart below the previous values
    {
        std::ofstream out(path.string(), std::ios::app);
        out << "2000,10,0,1,0\n3000,20,0,2,0\n";
    }
    std::vector<CounterTrace> traces = load_traces_csv(path.string());
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].samples.size() == 2);
    CHECK(traces[1].samples.size() == 2);
    CHECK(traces[1].samples[0].rx_bytes == 10);
}

TEST_CASE("missing trace file raises an io error") {
    CHECK_THROWS_AS(load_trace_csv("/nonexistent/never/trace.csv"), IoError);
}

TEST_CASE("events and labels CSV round trips") {
    std::vector<PacketEvent> events = {{100, 500}, {200, -40}};
    auto epath = temp_file("events.csv");
    save_events_csv(events, epath.string());
    std::vector<PacketEvent> eback = load_events_csv(epath.string());
    REQUIRE(eback.size() == 2);
    CHECK(eback[0].t_us == 100);
    CHECK(eback[0].size_bytes == 500);
    CHECK(eback[1].size_bytes == -40);

    std::vector<std::pair<int64_t, std::string>> reqs = {{0, "alpha"}, {30'000'000, "bravo"}};
    auto lpath = temp_file("labels.csv");
    save_labels_csv(reqs, lpath.string());
    auto lback = load_labels_csv(lpath.string());
    REQUIRE(lback.size() == 2);
    CHECK(lback[0].second == "alpha");
    CHECK(lback[1].first == 30'000'000);
}
