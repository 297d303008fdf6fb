#include "slafc/error.hpp"

namespace slafc {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DuplicateTimestamp: return "DuplicateTimestamp";
    case Errc::MixedSliceSchema: return "MixedSliceSchema";
    case Errc::InconsistentDurations: return "InconsistentDurations";
    case Errc::GapInSeries: return "GapInSeries";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::NoNeighbors: return "NoNeighbors";
    case Errc::MissingNeighborSeries: return "MissingNeighborSeries";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::MisalignedGroups: return "MisalignedGroups";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::HorizonZero: return "HorizonZero";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::CheckpointMismatch: return "CheckpointMismatch";
    }
    return "UnknownError";
}

} // namespace slafc
