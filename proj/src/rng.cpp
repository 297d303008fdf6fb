#include "slafc/rng.hpp"

#include <cmath>
#include <numbers>

namespace slafc {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

std::uint64_t fnv_step(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xFFu;
        h *= kFnvPrime;
    }
    return h;
}

} // namespace

Rng::Rng(std::uint64_t key) : state_(key) {}

std::uint64_t Rng::next_u64() {
    state_ += kGamma;
    return mix64(state_);
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
    // Box-Muller; u1 shifted away from zero so the log stays finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view domain) {
    return mix_key(fnv_step(kFnvOffset, seed), domain);
}

std::uint64_t mix_key(std::uint64_t key, std::uint64_t value) {
    return mix64(fnv_step(key, value));
}

std::uint64_t mix_key(std::uint64_t key, std::string_view text) {
    std::uint64_t h = key;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return mix64(h);
}

} // namespace slafc
