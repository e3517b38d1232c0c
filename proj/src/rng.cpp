#include "kinlim/rng.hpp"

#include <cmath>
#include <numbers>

namespace kinlim {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
__extension__ typedef unsigned __int128 u128;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t master_seed, std::uint64_t stream_id)
    : key_(mix64(mix64(master_seed + kGolden) ^ (stream_id * kGolden + 0x632BE59BD9B4E019ULL))) {}

Stream::Stream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t substream)
    : Stream(Stream(master_seed, stream_id).key_, substream) {}

Stream::result_type Stream::operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double Stream::uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

double Stream::uniform_open() { return (double((*this)() >> 11) + 1.0) * 0x1.0p-53; }

double Stream::exponential(double rate) { return -std::log(uniform_open()) / rate; }

double Stream::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Stream::below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection of the biased zone.
    std::uint64_t x = (*this)();
    u128 m = u128(x) * n;
    std::uint64_t l = std::uint64_t(m);
    if (l < n) {
        const std::uint64_t t = (0 - n) % n;
        while (l < t) {
            x = (*this)();
            m = u128(x) * n;
            l = std::uint64_t(m);
        }
    }
    return std::uint64_t(m >> 64);
}

}  // namespace kinlim
