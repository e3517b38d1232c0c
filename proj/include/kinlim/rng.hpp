#pragma once

#include <cstdint>
#include <limits>

namespace kinlim {

std::uint64_t mix64(std::uint64_t z);

// Counter-based stream: the n-th output is a pure function of (key, n), so
// streams derived from (master seed, index) are reproducible in any order.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(std::uint64_t master_seed, std::uint64_t stream_id);
    Stream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t substream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform on (0, 1], safe for logarithms.
    double uniform_open();
    double exponential(double rate);
    double normal();
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace kinlim
