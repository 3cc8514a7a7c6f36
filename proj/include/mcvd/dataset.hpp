#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcvd/config.hpp"
#include "mcvd/features.hpp"
#include "mcvd/geometry.hpp"
#include "mcvd/rng.hpp"

namespace mcvd {

inline constexpr char const* kLayoutVersion = "mcvd-locate/v1";
/// position (3) + quaternion (4) + transmitter positions (18)
inline constexpr std::size_t kLabelLength = 25;

struct SampleRecord
{
    std::int64_t sample_id = 0;
    std::array<double, kFeatureLength> features{};
    Vec3 label_position;
    UnitQuaternion label_quat;
    std::array<Vec3, kNumTx> label_tx;
    std::uint64_t seed_used = 0;

    [[nodiscard]] Pose pose() const { return {label_position, label_quat}; }
    /// Labels in file order: pos_x..z, quat_w..z, tx0_x..tx5_z.
    [[nodiscard]] std::array<double, kLabelLength> labels() const;

    friend bool operator==(SampleRecord const&, SampleRecord const&) = default;
};

struct DatasetMeta
{
    SceneConfig scene;
    std::uint64_t seed = 0;
    std::int64_t n_samples = 0;
};

struct Dataset
{
    DatasetMeta meta;
    std::vector<SampleRecord> records;
};

std::vector<std::string> label_names();

/// Uniform direction, |p| uniform on [d_min, d_max], uniform orientation.
Pose sample_pose(SceneConfig const& cfg, Xoshiro256pp& rng);

/// Seed of sample `sample_id` under the dataset seed.
std::uint64_t sample_seed(std::uint64_t dataset_seed, std::int64_t sample_id);

/// Simulates one labeled sample.
SampleRecord generate_sample(SceneConfig const& cfg, std::int64_t sample_id,
                             std::uint64_t dataset_seed);

/// Deterministic in (cfg, n_samples, seed); `workers` only affects speed.
/// `progress` is called with the number of finished samples.
Dataset generate_dataset(SceneConfig const& cfg, std::int64_t n_samples, std::uint64_t seed,
                         unsigned workers = 1,
                         std::function<void(std::int64_t)> const& progress = {});

struct SplitSpec
{
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t split_seed = 7;
};

struct SplitIndices
{
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Largest-remainder sizes for n items; throws std::invalid_argument for a
/// bad spec.
std::array<std::size_t, 3> split_sizes(std::size_t n, SplitSpec const& spec);

/// Partition of record positions. Assignment is keyed by sample_id and
/// split_seed, so it does not depend on record order.
SplitIndices split(std::span<SampleRecord const> records, SplitSpec const& spec);

/// Writes `<base>.meta.json` and `<base>.data.csv`.
void save_dataset(Dataset const& ds, std::string const& base);
/// Throws VersionError, HeaderError or TruncationError on bad input.
Dataset load_dataset(std::string const& base);

std::string meta_path(std::string const& base);
std::string data_path(std::string const& base);

/// Shortest decimal that parses back to exactly v.
std::string format_real(double v);
double parse_real(std::string_view s);

}  // namespace mcvd
