#include "crawl/rng.hpp"

#include <cmath>

#include "crawl/error.hpp"

namespace crawl {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(uint32_t c[4], uint32_t k0, uint32_t k1) {
    uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * c[0];
    uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * c[2];
    uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    uint32_t out[4] = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    c[0] = out[0];
    c[1] = out[1];
    c[2] = out[2];
    c[3] = out[3];
}

inline void philox4x32_10(uint64_t key, const uint32_t ctr_in[4], uint32_t out[4]) {
    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    for (int i = 0; i < 4; ++i) out[i] = ctr_in[i];
    for (int r = 0; r < 10; ++r) {
        philox_round(out, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

uint64_t RngStream::stream_id(std::string_view name) { return fnv1a64(name); }

uint64_t RngStream::stream_id(std::string_view name, uint64_t a) {
    return splitmix64(fnv1a64(name) ^ splitmix64(a));
}

uint64_t RngStream::stream_id(std::string_view name, uint64_t a, uint64_t b) {
    return splitmix64(stream_id(name, a) ^ splitmix64(~b));
}

void RngStream::refill() {
    uint32_t ctr[4] = {
        static_cast<uint32_t>(counter_),
        static_cast<uint32_t>(counter_ >> 32),
        static_cast<uint32_t>(stream_),
        static_cast<uint32_t>(stream_ >> 32),
    };
    philox4x32_10(seed_, ctr, buf_);
    ++counter_;
    buf_pos_ = 0;
}

uint64_t RngStream::next_u64() {
    if (buf_pos_ > 2) refill();
    uint64_t lo = buf_[buf_pos_];
    uint64_t hi = buf_[buf_pos_ + 1];
    buf_pos_ += 2;
    return lo | (hi << 32);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t RngStream::uniform_int(uint64_t bound) {
    if (bound == 0) throw InvalidArgument("uniform_int: bound must be positive");
    if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
    uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % bound;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

}  // namespace crawl
