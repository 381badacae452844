#include "netside/countermeasures.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "netside/errors.hpp"
#include "netside/rng.hpp"

namespace netside {

namespace {

constexpr std::array<std::pair<Scheme, const char*>, 10> kSchemeNames = {{
    {Scheme::random_session_pad, "random_session_pad"},
    {Scheme::random_packet_pad, "random_packet_pad"},
    {Scheme::pad_to_ceilings, "pad_to_ceilings"},
    {Scheme::exponential_pad, "exponential_pad"},
    {Scheme::linear_pad, "linear_pad"},
    {Scheme::pad_to_max, "pad_to_max"},
    {Scheme::random_packet_pad_to_max, "random_packet_pad_to_max"},
    {Scheme::random_insertions, "random_insertions"},
    {Scheme::uniform_adding, "uniform_adding"},
    {Scheme::session_random_adding, "session_random_adding"},
}};

constexpr uint64_t kTagFrame = 0x6672616d;

int64_t next_multiple(int64_t size, int64_t step) {
    return (size + step - 1) / step * step;
}

int64_t next_power_of_two(int64_t size) {
    int64_t p = 1;
    while (p < size) p *= 2;
    return p;
}

// grow |size| keeping the sign
void resize_packet(PacketEvent& e, int64_t new_abs) {
    int64_t abs = std::llabs(e.size_bytes);
    if (new_abs < abs) new_abs = abs;
    e.size_bytes = e.size_bytes > 0 ? new_abs : -new_abs;
}

void insert_random_packets(Frame& frame, const CountermeasureSpec& spec, Rng& rng) {
    long count = rng.poisson(spec.insertion_rate_pps * static_cast<double>(frame.duration_us) /
                             1e6);
    for (long k = 0; k < count; ++k) {
        int64_t t = rng.uniform_int(0, frame.duration_us - 1);
        int64_t size = rng.uniform_int(spec.insert_min, spec.insert_max);
        bool incoming = rng.uniform() < 0.5;
        frame.events.push_back({t, incoming ? size : -size});
    }
}

void flatten_per_second_counts(Frame& frame, const CountermeasureSpec& spec, Rng& rng) {
    int64_t seconds = (frame.duration_us + 999'999) / 1'000'000;
    if (seconds <= 0) return;
    std::vector<long> in_counts(static_cast<size_t>(seconds), 0);
    std::vector<long> out_counts(static_cast<size_t>(seconds), 0);
    for (const PacketEvent& e : frame.events) {
        size_t b = static_cast<size_t>(e.t_us / 1'000'000);
        if (b >= static_cast<size_t>(seconds)) b = static_cast<size_t>(seconds) - 1;
        (e.size_bytes > 0 ? in_counts : out_counts)[b] += 1;
    }
    auto fill = [&](const std::vector<long>& counts, bool incoming) {
        long target = *std::max_element(counts.begin(), counts.end());
        for (size_t b = 0; b < counts.size(); ++b) {
            int64_t lo = static_cast<int64_t>(b) * 1'000'000;
            int64_t hi = std::min(lo + 1'000'000, frame.duration_us) - 1;
            for (long k = counts[b]; k < target; ++k) {
                int64_t t = rng.uniform_int(lo, hi);
                int64_t size = rng.uniform_int(spec.insert_min, spec.insert_max);
                frame.events.push_back({t, incoming ? size : -size});
            }
        }
    };
    fill(in_counts, true);
    fill(out_counts, false);
}

} // namespace

std::string to_string(Scheme scheme) {
    for (const auto& [s, name] : kSchemeNames)
        if (s == scheme) return name;
    return "random_session_pad";
}

Scheme scheme_from_string(const std::string& s) {
    std::string key = s;
    std::replace(key.begin(), key.end(), '-', '_');
    for (const auto& [scheme, name] : kSchemeNames)
        if (key == name) return scheme;
    throw SchemaError("unknown countermeasure scheme '" + s + "'");
}

std::span<const Scheme> all_schemes() {
    static const std::array<Scheme, 10> schemes = [] {
        std::array<Scheme, 10> a{};
        for (size_t i = 0; i < kSchemeNames.size(); ++i) a[i] = kSchemeNames[i].first;
        return a;
    }();
    return {schemes.data(), schemes.size()};
}

bool is_padding_scheme(Scheme scheme) {
    switch (scheme) {
        case Scheme::random_insertions:
        case Scheme::uniform_adding:
        case Scheme::session_random_adding:
            return false;
        default:
            return true;
    }
}

void CountermeasureSpec::validate() const {
    if (pad_min < 0 || pad_max < pad_min)
        throw UsageError("countermeasure: pad bounds must satisfy 0 <= min <= max");
    if (ceiling < 1) throw UsageError("countermeasure: ceiling must be >= 1");
    if (max_size < 1) throw UsageError("countermeasure: max_size must be >= 1");
    if (linear_pad_bytes < 0) throw UsageError("countermeasure: linear pad must be >= 0");
    if (pad_probability < 0.0 || pad_probability > 1.0)
        throw UsageError("countermeasure: pad probability must lie in [0, 1]");
    if (insertion_rate_pps < 0.0) throw UsageError("countermeasure: insertion rate must be >= 0");
    if (insert_min < 1 || insert_max < insert_min)
        throw UsageError("countermeasure: insert bounds must satisfy 1 <= min <= max");
    if (session_probability < 0.0 || session_probability > 1.0)
        throw UsageError("countermeasure: session probability must lie in [0, 1]");
}

std::vector<Frame> apply_countermeasure(std::span<const Frame> frames,
                                        const CountermeasureSpec& spec) {
    spec.validate();
    std::vector<Frame> out;
    out.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        Frame frame = frames[i];
        Rng rng(mix_seed(spec.seed, kTagFrame, static_cast<uint64_t>(i)));
        switch (spec.scheme) {
            case Scheme::random_session_pad: {
                int64_t pad = rng.uniform_int(spec.pad_min, spec.pad_max);
                for (PacketEvent& e : frame.events)
                    resize_packet(e, std::llabs(e.size_bytes) + pad);
                break;
            }
            case Scheme::random_packet_pad:
                for (PacketEvent& e : frame.events) {
                    int64_t pad = rng.uniform_int(spec.pad_min, spec.pad_max);
                    resize_packet(e, std::llabs(e.size_bytes) + pad);
                }
                break;
            case Scheme::pad_to_ceilings:
                for (PacketEvent& e : frame.events)
                    resize_packet(e, next_multiple(std::llabs(e.size_bytes), spec.ceiling));
                break;
            case Scheme::exponential_pad:
                for (PacketEvent& e : frame.events)
                    resize_packet(e, next_power_of_two(std::llabs(e.size_bytes)));
                break;
            case Scheme::linear_pad:
                for (PacketEvent& e : frame.events)
                    resize_packet(e, std::llabs(e.size_bytes) + spec.linear_pad_bytes);
                break;
            case Scheme::pad_to_max:
                for (PacketEvent& e : frame.events) resize_packet(e, spec.max_size);
                break;
            case Scheme::random_packet_pad_to_max:
                for (PacketEvent& e : frame.events)
                    if (rng.uniform() < spec.pad_probability) resize_packet(e, spec.max_size);
                break;
            case Scheme::random_insertions:
                insert_random_packets(frame, spec, rng);
                break;
            case Scheme::uniform_adding:
                flatten_per_second_counts(frame, spec, rng);
                break;
            case Scheme::session_random_adding:
                if (rng.uniform() < spec.session_probability)
                    insert_random_packets(frame, spec, rng);
                break;
        }
        std::stable_sort(frame.events.begin(), frame.events.end(),
                         [](const PacketEvent& a, const PacketEvent& b) { return a.t_us < b.t_us; });
        out.push_back(std::move(frame));
    }
    return out;
}

} // namespace netside
