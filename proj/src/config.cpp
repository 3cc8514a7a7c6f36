#include "mcvd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mcvd/errors.hpp"

namespace mcvd {

namespace {

std::string join(std::vector<std::string> const& parts)
{
    std::string out;
    for (auto const& p : parts)
    {
        if (!out.empty())
        {
            out += "; ";
        }
        out += p;
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid configuration: " + join(violations)),
      violations_(std::move(violations))
{
}

std::vector<std::string> config_violations(SceneConfig const& cfg)
{
    std::vector<std::string> out;
    auto require = [&out](bool ok, char const* msg) {
        if (!ok)
        {
            out.emplace_back(msg);
        }
    };
    auto finite = [](double v) { return std::isfinite(v); };

    require(finite(cfg.r) && cfg.r > 0, "r > 0");
    require(finite(cfg.D) && cfg.D > 0, "D > 0");
    require(cfg.N >= 1, "N >= 1");
    require(finite(cfg.delta) && cfg.delta > 0, "delta > 0");
    require(finite(cfg.dt) && cfg.dt > 0, "dt > 0");
    require(finite(cfg.T_pilot) && cfg.T_pilot >= 100 * cfg.dt, "T_pilot >= 100*dt");
    require(finite(cfg.bin_width) && cfg.bin_width >= cfg.dt && cfg.bin_width > 0,
            "bin_width >= dt");
    require(finite(cfg.d_min) && cfg.d_min > 2 * cfg.r + cfg.delta, "d_min must exceed 2r+delta");
    require(finite(cfg.d_max) && cfg.d_max > cfg.d_min, "d_max > d_min");
    require(finite(cfg.cull_radius) && cfg.cull_radius > 2 * cfg.d_max,
            "cull_radius > 2*d_max");
    return out;
}

SceneConfig const& validate_config(SceneConfig const& cfg)
{
    auto v = config_violations(cfg);
    if (!v.empty())
    {
        throw ConfigError(std::move(v));
    }
    return cfg;
}

void to_json(nlohmann::json& j, SceneConfig const& cfg)
{
    j = nlohmann::json{{"r", cfg.r},
                       {"D", cfg.D},
                       {"N", cfg.N},
                       {"delta", cfg.delta},
                       {"dt", cfg.dt},
                       {"T_pilot", cfg.T_pilot},
                       {"bin_width", cfg.bin_width},
                       {"cull_radius", cfg.cull_radius},
                       {"d_min", cfg.d_min},
                       {"d_max", cfg.d_max},
                       {"seed", cfg.seed}};
}

void from_json(nlohmann::json const& j, SceneConfig& cfg)
{
    if (!j.is_object())
    {
        throw ConfigError("scene config must be a JSON object");
    }
    static std::set<std::string> const known{"r",       "D",         "N",           "delta",
                                             "dt",      "T_pilot",   "bin_width",   "cull_radius",
                                             "d_min",   "d_max",     "seed"};
    std::vector<std::string> unknown;
    for (auto const& [key, _] : j.items())
    {
        if (!known.count(key))
        {
            unknown.push_back("unknown key '" + key + "'");
        }
    }
    if (!unknown.empty())
    {
        throw ConfigError(std::move(unknown));
    }
    try
    {
        auto get = [&j](char const* key, auto& field) {
            if (j.contains(key))
            {
                j.at(key).get_to(field);
            }
        };
        get("r", cfg.r);
        get("D", cfg.D);
        get("N", cfg.N);
        get("delta", cfg.delta);
        get("dt", cfg.dt);
        get("T_pilot", cfg.T_pilot);
        get("bin_width", cfg.bin_width);
        get("cull_radius", cfg.cull_radius);
        get("d_min", cfg.d_min);
        get("d_max", cfg.d_max);
        get("seed", cfg.seed);
    }
    catch (nlohmann::json::exception const& e)
    {
        throw ConfigError(std::string("bad field type: ") + e.what());
    }
}

SceneConfig load_scene_config(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config file " + path);
    }
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw ConfigError(std::string("malformed config JSON: ") + e.what());
    }
    return j.get<SceneConfig>();
}

}  // namespace mcvd
