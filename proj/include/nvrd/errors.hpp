#pragma once

#include <stdexcept>
#include <string>

namespace nvrd {

// Thrown when tensor/model shapes disagree with what an operation requires.
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when an input is structurally valid but numerically degenerate
// (constant series where a correlation is needed, zero vector where an
// angle is needed, and so on).
struct degenerate_input_error : std::domain_error {
    explicit degenerate_input_error(const std::string& msg) : std::domain_error(msg) {}
};

// Thrown when a file or directory is missing, unreadable, or malformed.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a user-supplied configuration cannot be used.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a pipeline stage fails or its prerequisites are absent.
struct stage_error : std::runtime_error {
    explicit stage_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw shape_error(msg);
}

inline void require_config(bool cond, const std::string& msg) {
    if (!cond) throw config_error(msg);
}

inline void require_io(bool cond, const std::string& msg) {
    if (!cond) throw io_error(msg);
}

}  // namespace nvrd
