#include "vmg/errors.hpp"

namespace vmg {

ParseError::ParseError(const std::string& what, std::size_t record)
    : std::runtime_error("record " + std::to_string(record) + ": " + what), record_(record) {}

ExecutionError::ExecutionError(const std::string& what, std::size_t episode, std::size_t step)
    : std::runtime_error("episode " + std::to_string(episode) + ", step " + std::to_string(step) + ": " + what),
      episode_(episode),
      step_(step) {}

ConfigError::ConfigError(std::string key, const std::string& constraint)
    : std::runtime_error(constraint), key_(std::move(key)) {}

HashMismatch::HashMismatch(std::string stage, const std::string& path)
    : std::runtime_error("stage '" + stage + "': content hash mismatch for " + path),
      stage_(std::move(stage)) {}

}  // namespace vmg
