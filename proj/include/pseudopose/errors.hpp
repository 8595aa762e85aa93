#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pseudopose {

// Error taxonomy used across the library. Everything derives from Error so
// the CLI can catch one type and emit a machine-readable report.
struct Error : std::runtime_error {
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind(std::move(kind)) {}
    std::string kind;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data", msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error("format", msg) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& msg) : Error("integrity", msg) {}
};

struct GeometryError : Error {
    explicit GeometryError(const std::string& msg) : Error("geometry", msg) {}
};

struct BehindCameraError : Error {
    BehindCameraError(const std::string& msg, std::vector<int> indices)
        : Error("behind_camera", msg), indices(std::move(indices)) {}
    std::vector<int> indices;
};

struct TrainingDivergedError : Error {
    TrainingDivergedError(const std::string& msg, long step)
        : Error("training_diverged", msg), step(step) {}
    long step;
};

struct JoinError : Error {
    JoinError(const std::string& msg, std::vector<std::string> missing)
        : Error("join", msg), missing_ids(std::move(missing)) {}
    std::vector<std::string> missing_ids;
};

}  // namespace pseudopose
