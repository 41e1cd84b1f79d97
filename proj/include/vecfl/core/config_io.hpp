#ifndef VECFL_CORE_CONFIG_IO_HPP_
#define VECFL_CORE_CONFIG_IO_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include "vecfl/core/types.hpp"

namespace vecfl {

// Thrown on malformed documents, unknown fields, or failed validation.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Parses a config document. Field names mirror the struct members; unknown
// fields are rejected. The result is validated; a ConfigError carries the
// full violation list in its message.
SystemConfig parse_config(const std::string& json_text);
SystemConfig load_config(const std::string& path);

// Canonical serialization (sorted keys, stable float formatting). Parsing
// the output yields an equal config.
std::string serialize_config(const SystemConfig& cfg);

// FNV-1a over the canonical serialization; identifies the instance in all
// emitted artifacts.
std::uint64_t config_hash(const SystemConfig& cfg);

bool operator==(const SystemConfig& a, const SystemConfig& b);

}  // namespace vecfl

#endif  // VECFL_CORE_CONFIG_IO_HPP_
