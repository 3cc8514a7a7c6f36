#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mcvd/geometry.hpp"

namespace mcvd {

/// Physical and simulation parameters shared by every module.
///
/// Units: lengths in micrometers, times in seconds, D in um^2/s.
struct SceneConfig
{
    double r = 5.0;             ///< receiver radius
    double D = 100.0;           ///< diffusion coefficient
    std::int64_t N = 2000;      ///< molecules per pilot
    double delta = 0.5;         ///< tube tip offset beyond the surface
    double dt = 1e-4;           ///< base simulation step
    double T_pilot = 5.0;       ///< per-pilot observation window (guard time)
    double bin_width = 0.01;    ///< histogram bin for peak detection
    double cull_radius = 1000;  ///< molecules beyond this are lost
    double d_min = 20.0;        ///< sampling range for |p_A|
    double d_max = 50.0;
    std::uint64_t seed = 20240917;

    [[nodiscard]] NodeLayout layout() const { return NodeLayout(r, delta); }

    friend bool operator==(SceneConfig const&, SceneConfig const&) = default;
};

/// Every violated constraint, empty when the config is valid.
std::vector<std::string> config_violations(SceneConfig const& cfg);

/// Returns cfg unchanged when valid; throws ConfigError listing all
/// violations otherwise.
SceneConfig const& validate_config(SceneConfig const& cfg);

void to_json(nlohmann::json& j, SceneConfig const& cfg);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
void from_json(nlohmann::json const& j, SceneConfig& cfg);

SceneConfig load_scene_config(std::string const& path);

}  // namespace mcvd
