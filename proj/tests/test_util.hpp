#ifndef SLAFC_TEST_UTIL_HPP
#define SLAFC_TEST_UTIL_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "slafc/synthgen.hpp"

namespace slafc_test {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
struct TempDir {
    fs::path path;

    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("slafc-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

// A small single-cell scenario used across tests: daily cycle, weekend dip,
// occasional spikes, mild noise.
inline slafc::ScenarioConfig basic_scenario(int weeks, std::uint64_t seed) {
    slafc::ScenarioConfig config;
    config.weeks = weeks;
    config.seed = seed;
    config.aux_feature_noise = 0.5;
    slafc::CellProfile profile;
    profile.base_load = 100.0;
    profile.daily_amplitude = 60.0;
    profile.weekend_factor = 0.8;
    profile.spike_rate = 0.3;
    profile.spike_magnitude = 1.6;
    profile.noise_std = 1.0;
    config.cells.push_back({slafc::CellId{"A", 1}, {{slafc::SliceKind::Total, profile}}});
    return config;
}

} // namespace slafc_test

#endif // SLAFC_TEST_UTIL_HPP
