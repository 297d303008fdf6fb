#ifndef SLAFC_CHECKPOINT_HPP
#define SLAFC_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "slafc/pipeline.hpp"

namespace slafc {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kCheckpointVersion = 1;

// JSON checkpoint carrying the network shape, parameters, per-group schema
// (channels, normalization statistics, peak flags), per-head calibration,
// and fold identity. Round-trips are lossless: numbers are emitted with
// shortest-round-trip formatting.
std::string checkpoint_to_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const std::string& text); // throws CheckpointMismatch

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

} // namespace slafc

#endif // SLAFC_CHECKPOINT_HPP
