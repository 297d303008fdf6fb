#ifndef SLAFC_RNG_HPP
#define SLAFC_RNG_HPP

#include <cstdint>
#include <string_view>

namespace slafc {

// Splittable counter-based random stream (splitmix64). Every consumer derives
// its own key from a (seed, purpose...) tuple, so streams never interleave:
// adding a cell or a channel to a scenario leaves every other stream intact.
class Rng {
public:
    explicit Rng(std::uint64_t key);

    std::uint64_t next_u64();

    // [0, 1), 53-bit resolution.
    double uniform01();

    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; draws a fresh pair per call.
    double normal();

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);

private:
    std::uint64_t state_;
};

// FNV-1a based key derivation chain.
std::uint64_t stream_key(std::uint64_t seed, std::string_view domain);
std::uint64_t mix_key(std::uint64_t key, std::uint64_t value);
std::uint64_t mix_key(std::uint64_t key, std::string_view text);

} // namespace slafc

#endif // SLAFC_RNG_HPP
