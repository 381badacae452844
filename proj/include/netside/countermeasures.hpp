#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netside/trace.hpp"

namespace netside {

enum class Scheme {
    random_session_pad,
    random_packet_pad,
    pad_to_ceilings,
    exponential_pad,
    linear_pad,
    pad_to_max,
    random_packet_pad_to_max,
    random_insertions,
    uniform_adding,
    session_random_adding,
};

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& s);
std::span<const Scheme> all_schemes();

bool is_padding_scheme(Scheme scheme);

struct CountermeasureSpec {
    Scheme scheme = Scheme::random_session_pad;
    uint64_t seed = 0;
    int64_t pad_min = 0;
    int64_t pad_max = 255;
    int64_t ceiling = 128;
    int64_t max_size = 1500;
    int64_t linear_pad_bytes = 128;
    double pad_probability = 0.5;      // random_packet_pad_to_max
    double insertion_rate_pps = 5.0;   // random_insertions / session_random_adding
    int64_t insert_min = 100;
    int64_t insert_max = 1500;
    double session_probability = 0.5;  // session_random_adding

    void validate() const;
};

// Reshapes each frame's packet stream. Padding schemes only grow |size| and
// never touch count, order, or sign; insertion schemes only append packets.
// Deterministic: each frame draws from a substream of spec.seed.
std::vector<Frame> apply_countermeasure(std::span<const Frame> frames,
                                        const CountermeasureSpec& spec);

} // namespace netside
