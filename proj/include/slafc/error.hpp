#ifndef SLAFC_ERROR_HPP
#define SLAFC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace slafc {

// Stable failure categories surfaced by the toolkit. Tests match on these
// instead of message text.
enum class Errc {
    MalformedRow,
    DuplicateTimestamp,
    MixedSliceSchema,
    InconsistentDurations,
    GapInSeries,
    DegenerateInput,
    UnknownLabel,
    NoNeighbors,
    MissingNeighborSeries,
    WindowTooLong,
    ShapeMismatch,
    NonFiniteGradient,
    EmptyInput,
    EmptyDataset,
    NonFiniteLoss,
    MisalignedGroups,
    EmptyGrid,
    HorizonZero,
    ConfigError,
    IoError,
    CheckpointMismatch,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace slafc

#endif // SLAFC_ERROR_HPP
