#include "mcvd/manifest.hpp"

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace mcvd {

std::string sha256_hex(std::string const& data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i)
    {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string config_hash(nlohmann::json const& config)
{
    return sha256_hex(config.dump());
}

std::string utc_now()
{
    auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

RunManifest make_manifest(std::string command, nlohmann::json config)
{
    RunManifest m;
    m.command = std::move(command);
    m.config_hash = config_hash(config);
    m.config = std::move(config);
    m.started_utc = utc_now();
    return m;
}

void to_json(nlohmann::json& j, RunManifest const& m)
{
    j = nlohmann::json{{"tool_version", m.tool_version}, {"command", m.command},
                       {"config", m.config},             {"config_hash", m.config_hash},
                       {"seeds", m.seeds},               {"started_utc", m.started_utc},
                       {"finished_utc", m.finished_utc}, {"outputs", m.outputs}};
}

void from_json(nlohmann::json const& j, RunManifest& m)
{
    j.at("tool_version").get_to(m.tool_version);
    j.at("command").get_to(m.command);
    m.config = j.at("config");
    j.at("config_hash").get_to(m.config_hash);
    j.at("seeds").get_to(m.seeds);
    j.at("started_utc").get_to(m.started_utc);
    j.at("finished_utc").get_to(m.finished_utc);
    j.at("outputs").get_to(m.outputs);
}

std::string write_manifest(RunManifest const& m, std::string const& dir)
{
    std::filesystem::create_directories(dir);
    auto path = (std::filesystem::path(dir) / "manifest.json").string();
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << nlohmann::json(m).dump(2) << '\n';
    return path;
}

}  // namespace mcvd
