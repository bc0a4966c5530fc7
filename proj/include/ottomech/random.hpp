#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace ottomech {

// Counter-based stream derivation: trajectory i always sees the same
// generator state for a given base seed, independent of how many other
// trajectories run or in what order.  splitmix64 is the usual mixer for
// turning (seed, counter) into well-separated 64-bit states.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Self-contained Gaussian stream.  The normal_distribution cache lives
// inside, so interleaving several streams never couples their draws.
class NoiseStream {
  public:
    NoiseStream(std::uint64_t base_seed, std::uint64_t stream_index)
        : gen_(splitmix64(base_seed ^ splitmix64(stream_index + 0x51DEB00Cull))) {}

    double normal() { return n01_(gen_); }

    // Unit-variance circular complex Gaussian: E[z z*] = 1, E[z z] = 0.
    std::complex<double> complex_normal() {
        const double re = n01_(gen_), im = n01_(gen_);
        return {re * 0.7071067811865476, im * 0.7071067811865476};
    }

    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> n01_;
};

} // namespace ottomech
