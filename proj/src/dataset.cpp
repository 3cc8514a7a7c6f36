#include "mcvd/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mcvd/errors.hpp"
#include "mcvd/simulator.hpp"

namespace mcvd {

namespace {

// Stream key for pose sampling; pilot streams use keys 0..5.
constexpr std::uint64_t kPoseStreamKey = 0x706f7365;

std::vector<std::string> split_csv_line(std::string const& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true)
    {
        auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos)
        {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::string header_line()
{
    std::string h = "sample_id";
    for (auto const& n : feature_names())
    {
        h += "," + n;
    }
    for (auto const& n : label_names())
    {
        h += "," + n;
    }
    h += ",seed_used";
    return h;
}

template<class T>
T parse_int(std::string_view s)
{
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        throw FormatError("malformed integer '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

std::string format_real(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_real(std::string_view s)
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
    {
        throw FormatError("malformed real '" + std::string(s) + "'");
    }
    return v;
}

std::array<double, kLabelLength> SampleRecord::labels() const
{
    std::array<double, kLabelLength> out{};
    out[0] = label_position.x;
    out[1] = label_position.y;
    out[2] = label_position.z;
    auto q = label_quat.components();
    std::copy(q.begin(), q.end(), out.begin() + 3);
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        out[7 + 3 * k] = label_tx[k].x;
        out[8 + 3 * k] = label_tx[k].y;
        out[9 + 3 * k] = label_tx[k].z;
    }
    return out;
}

std::vector<std::string> label_names()
{
    std::vector<std::string> names{"pos_x", "pos_y", "pos_z", "quat_w", "quat_x", "quat_y",
                                   "quat_z"};
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        for (char axis : {'x', 'y', 'z'})
        {
            names.push_back("tx" + std::to_string(k) + "_" + axis);
        }
    }
    return names;
}

Pose sample_pose(SceneConfig const& cfg, Xoshiro256pp& rng)
{
    std::normal_distribution<double> gauss;
    Vec3 dir;
    do
    {
        dir = {gauss(rng), gauss(rng), gauss(rng)};
    } while (dir.norm() < 1e-12);
    double radius = cfg.d_min + (cfg.d_max - cfg.d_min) * rng.uniform();

    double w, x, y, z, n;
    do
    {
        w = gauss(rng);
        x = gauss(rng);
        y = gauss(rng);
        z = gauss(rng);
        n = std::sqrt(w * w + x * x + y * y + z * z);
    } while (n < 1e-12);
    return {unit(dir) * radius, UnitQuaternion(w, x, y, z)};
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::int64_t sample_id)
{
    return derive_seed(dataset_seed, static_cast<std::uint64_t>(sample_id));
}

SampleRecord generate_sample(SceneConfig const& cfg, std::int64_t sample_id,
                             std::uint64_t dataset_seed)
{
    SampleRecord rec;
    rec.sample_id = sample_id;
    rec.seed_used = sample_seed(dataset_seed, sample_id);
    Xoshiro256pp rng(derive_seed(rec.seed_used, kPoseStreamKey));
    Pose pose = sample_pose(cfg, rng);
    auto log = simulate_scene(cfg, pose, rec.seed_used);
    rec.features = flatten(build_features(log));
    rec.label_position = pose.position;
    rec.label_quat = pose.orientation;
    rec.label_tx = tx_world_positions(pose, cfg.layout());
    return rec;
}

Dataset generate_dataset(SceneConfig const& cfg, std::int64_t n_samples, std::uint64_t seed,
                         unsigned workers, std::function<void(std::int64_t)> const& progress)
{
    validate_config(cfg);
    if (n_samples < 1)
    {
        throw std::invalid_argument("n_samples must be >= 1");
    }
    Dataset ds;
    ds.meta = {cfg, seed, n_samples};
    ds.records.resize(static_cast<std::size_t>(n_samples));

    std::atomic<std::int64_t> next{0};
    std::atomic<std::int64_t> done{0};
    std::mutex progress_mutex;
    std::exception_ptr failure;
    std::int64_t failed_id = -1;

    auto worker = [&] {
        for (std::int64_t id = next++; id < n_samples; id = next++)
        {
            try
            {
                ds.records[static_cast<std::size_t>(id)] = generate_sample(cfg, id, seed);
            }
            catch (...)
            {
                std::lock_guard lock(progress_mutex);
                if (!failure || id < failed_id)
                {
                    failure = std::current_exception();
                    failed_id = id;
                }
                next = n_samples;
                return;
            }
            auto finished = ++done;
            if (progress)
            {
                std::lock_guard lock(progress_mutex);
                progress(finished);
            }
        }
    };

    workers = std::max(1u, workers);
    if (workers == 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
        {
            pool.emplace_back(worker);
        }
    }
    if (failure)
    {
        try
        {
            std::rethrow_exception(failure);
        }
        catch (std::exception const& e)
        {
            throw std::runtime_error("sample " + std::to_string(failed_id) + " failed: " + e.what());
        }
    }
    return ds;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, SplitSpec const& spec)
{
    std::array<double, 3> frac{spec.train, spec.val, spec.test};
    double total = frac[0] + frac[1] + frac[2];
    for (double f : frac)
    {
        if (!(f > 0) || !std::isfinite(f))
        {
            throw std::invalid_argument("split fractions must be positive");
        }
    }
    if (std::abs(total - 1.0) > 1e-9)
    {
        throw std::invalid_argument("split fractions must sum to 1");
    }

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i)
    {
        double exact = frac[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned)
    {
        ++sizes[order[i % 3]];
    }
    return sizes;
}

SplitIndices split(std::span<SampleRecord const> records, SplitSpec const& spec)
{
    if (records.empty())
    {
        throw std::invalid_argument("cannot split an empty dataset");
    }
    auto sizes = split_sizes(records.size(), spec);

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
        auto id = static_cast<std::uint64_t>(records[i].sample_id);
        return std::pair{derive_seed(spec.split_seed, id), records[i].sample_id};
    };
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    SplitIndices out;
    auto first = order.begin();
    out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
    first += static_cast<std::ptrdiff_t>(sizes[0]);
    out.val.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
    first += static_cast<std::ptrdiff_t>(sizes[1]);
    out.test.assign(first, order.end());
    for (auto* part : {&out.train, &out.val, &out.test})
    {
        std::sort(part->begin(), part->end());
    }
    return out;
}

std::string meta_path(std::string const& base)
{
    return base + ".meta.json";
}

std::string data_path(std::string const& base)
{
    return base + ".data.csv";
}

void save_dataset(Dataset const& ds, std::string const& base)
{
    nlohmann::ordered_json meta;
    meta["format"] = kLayoutVersion;
    meta["n_samples"] = ds.records.size();
    meta["seed"] = ds.meta.seed;
    meta["scene"] = nlohmann::ordered_json::parse(nlohmann::json(ds.meta.scene).dump());
    meta["feature_columns"] = kFeatureLength;
    meta["label_columns"] = kLabelLength;
    {
        std::ofstream out(meta_path(base));
        if (!out)
        {
            throw std::runtime_error("cannot write " + meta_path(base));
        }
        out << meta.dump(2) << '\n';
    }

    std::ofstream out(data_path(base), std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + data_path(base));
    }
    out << header_line() << '\n';
    std::string line;
    for (auto const& rec : ds.records)
    {
        line = std::to_string(rec.sample_id);
        for (double v : rec.features)
        {
            line += ',';
            line += format_real(v);
        }
        for (double v : rec.labels())
        {
            line += ',';
            line += format_real(v);
        }
        line += ',';
        line += std::to_string(rec.seed_used);
        out << line << '\n';
    }
    if (!out)
    {
        throw std::runtime_error("write failed for " + data_path(base));
    }
}

Dataset load_dataset(std::string const& base)
{
    Dataset ds;
    std::ifstream meta_in(meta_path(base));
    if (!meta_in)
    {
        throw std::runtime_error("cannot open " + meta_path(base));
    }
    nlohmann::json meta;
    try
    {
        meta_in >> meta;
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw HeaderError(std::string("malformed metadata: ") + e.what());
    }
    if (!meta.is_object() || !meta.contains("format") || !meta["format"].is_string())
    {
        throw HeaderError("metadata lacks a format string");
    }
    if (meta["format"].get<std::string>() != kLayoutVersion)
    {
        throw VersionError("unsupported dataset format '" + meta["format"].get<std::string>()
                           + "', expected " + kLayoutVersion);
    }
    try
    {
        ds.meta.scene = meta.at("scene").get<SceneConfig>();
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.n_samples = meta.at("n_samples").get<std::int64_t>();
        if (meta.at("feature_columns").get<std::size_t>() != kFeatureLength
            || meta.at("label_columns").get<std::size_t>() != kLabelLength)
        {
            throw HeaderError("column counts do not match layout");
        }
    }
    catch (nlohmann::json::exception const& e)
    {
        throw HeaderError(std::string("bad metadata field: ") + e.what());
    }
    catch (ConfigError const& e)
    {
        throw HeaderError(std::string("bad scene in metadata: ") + e.what());
    }

    std::ifstream in(data_path(base), std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot open " + data_path(base));
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.empty())
    {
        throw TruncationError("data file is empty");
    }
    if (content.back() != '\n')
    {
        throw TruncationError("data file does not end with a complete row");
    }

    std::istringstream lines(content);
    std::string line;
    std::getline(lines, line);
    if (line != header_line())
    {
        throw HeaderError("data header does not match layout " + std::string(kLayoutVersion));
    }

    constexpr std::size_t kColumns = 1 + kFeatureLength + kLabelLength + 1;
    std::int64_t row = 0;
    while (std::getline(lines, line))
    {
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != kColumns)
        {
            throw TruncationError("row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " +
                                  std::to_string(kColumns));
        }
        SampleRecord rec;
        rec.sample_id = parse_int<std::int64_t>(cells[0]);
        for (std::size_t i = 0; i < kFeatureLength; ++i)
        {
            rec.features[i] = parse_real(cells[1 + i]);
        }
        std::array<double, kLabelLength> lab{};
        for (std::size_t i = 0; i < kLabelLength; ++i)
        {
            lab[i] = parse_real(cells[1 + kFeatureLength + i]);
        }
        rec.label_position = {lab[0], lab[1], lab[2]};
        rec.label_quat = UnitQuaternion::from_unit_components(lab[3], lab[4], lab[5], lab[6]);
        for (std::size_t k = 0; k < kNumTx; ++k)
        {
            rec.label_tx[k] = {lab[7 + 3 * k], lab[8 + 3 * k], lab[9 + 3 * k]};
        }
        rec.seed_used = parse_int<std::uint64_t>(cells.back());
        ds.records.push_back(rec);
    }
    if (static_cast<std::int64_t>(ds.records.size()) != ds.meta.n_samples)
    {
        throw TruncationError("expected " + std::to_string(ds.meta.n_samples) + " rows, found " +
                              std::to_string(ds.records.size()));
    }
    return ds;
}

}  // namespace mcvd
