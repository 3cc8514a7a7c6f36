#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mcvd {

inline constexpr char const* kToolVersion = "0.1.0";

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string const& data);

/// Hash of a configuration object, taken over its compact JSON dump.
std::string config_hash(nlohmann::json const& config);

/// Provenance record written as `manifest.json` next to a run's artifacts.
struct RunManifest
{
    std::string tool_version = kToolVersion;
    std::string command;
    nlohmann::json config;  ///< effective configuration, hashed into config_hash
    std::string config_hash;
    std::map<std::string, std::uint64_t> seeds;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;
};

/// Current time as ISO-8601 UTC with second resolution.
std::string utc_now();

RunManifest make_manifest(std::string command, nlohmann::json config);

void to_json(nlohmann::json& j, RunManifest const& m);
void from_json(nlohmann::json const& j, RunManifest& m);

/// Writes `<dir>/manifest.json`, replacing any previous one, and returns its path.
std::string write_manifest(RunManifest const& m, std::string const& dir);

}  // namespace mcvd
