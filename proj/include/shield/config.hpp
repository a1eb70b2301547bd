#pragma once

// Run configuration as JSON (schema "shield-config-1"). Every key is
// optional and falls back to the defaults in SimConfig; unknown keys are
// rejected. dump_config writes the complete effective configuration, and
// load_config(dump_config(c)) reproduces c exactly.

#include <filesystem>
#include <stdexcept>
#include <string>

#include "shield/sim.hpp"

namespace shield {

inline constexpr const char* kConfigSchema = "shield-config-1";
inline constexpr const char* kConfigEnvVar = "SHIELD_CONFIG";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

SimConfig parse_config(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);
std::string dump_config(const SimConfig& cfg);

/// FNV-1a hash of dump_config(cfg).
std::string config_hash(const SimConfig& cfg);

}  // namespace shield
