#pragma once

#include <cstdint>
#include <string_view>

namespace crawl {

// Counter-based generator (Philox4x32-10). Every output is a pure function of
// (seed, stream, counter), so independently named streams can be consumed in
// any order or in parallel and still reproduce bit-identical results on every
// platform.
class RngStream {
public:
    RngStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    // Stable ids for named streams, optionally combined with indices
    // (e.g. one stream per walk).
    static uint64_t stream_id(std::string_view name);
    static uint64_t stream_id(std::string_view name, uint64_t a);
    static uint64_t stream_id(std::string_view name, uint64_t a, uint64_t b);

    uint64_t next_u64();

    // [0, 1)
    double uniform();

    // Unbiased draw from [0, bound), bound >= 1.
    uint64_t uniform_int(uint64_t bound);

    double normal();

    // U(-r, r)
    double uniform_symmetric(double r) { return (2.0 * uniform() - 1.0) * r; }

private:
    void refill();

    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
    uint32_t buf_[4] = {0, 0, 0, 0};
    int buf_pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace crawl
