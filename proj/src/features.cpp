#include "mcvd/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mcvd/channel.hpp"

namespace mcvd {

namespace {

struct Histogram
{
    double bin_width;
    std::vector<std::int64_t> counts;

    Histogram(double window, double width)
        : bin_width(width),
          counts(static_cast<std::size_t>(std::max(1.0, std::ceil(window / width))), 0)
    {
    }

    void add(double t)
    {
        auto last = static_cast<std::int64_t>(counts.size()) - 1;
        auto idx = std::clamp(static_cast<std::int64_t>(std::floor(t / bin_width)),
                              std::int64_t{0}, last);
        ++counts[static_cast<std::size_t>(idx)];
    }

    /// (bin center, count) of the fullest bin, earliest on ties.
    [[nodiscard]] std::pair<double, std::int64_t> peak() const
    {
        auto it = std::max_element(counts.begin(), counts.end());
        auto idx = std::distance(counts.begin(), it);
        return {(static_cast<double>(idx) + 0.5) * bin_width, *it};
    }
};

}  // namespace

std::vector<std::string> feature_names()
{
    std::vector<std::string> names;
    names.reserve(kFeatureLength);
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        std::string p = "p" + std::to_string(k) + "_";
        for (std::size_t j = 0; j < kNumOctants; ++j)
        {
            std::string o = p + "o" + std::to_string(j) + "_";
            names.push_back(o + "peak_time");
            names.push_back(o + "peak_count");
            names.push_back(o + "total");
        }
        for (char const* s : {"total", "d_time", "d_count", "dir_x", "dir_y", "dir_z", "is_top2",
                              "rank"})
        {
            names.push_back(p + s);
        }
    }
    return names;
}

std::array<OctantFeatures, kNumOctants> extract_octant_features(
    std::span<AbsorptionEvent const> events_at_b, SceneConfig const& cfg)
{
    std::array<OctantFeatures, kNumOctants> out{};
    std::vector<Histogram> hist(kNumOctants, Histogram(cfg.T_pilot, cfg.bin_width));
    for (auto const& e : events_at_b)
    {
        if (e.absorber != Absorber::NodeB)
        {
            throw std::invalid_argument("octant features take Node-B events only");
        }
        // Node B is the frame origin.
        auto o = static_cast<std::size_t>(octant_index(e.surface_point));
        hist[o].add(e.time);
        ++out[o].total_count;
    }
    for (std::size_t o = 0; o < kNumOctants; ++o)
    {
        if (out[o].total_count > 0)
        {
            auto [t, c] = hist[o].peak();
            out[o].peak_time = t;
            out[o].peak_count = c;
        }
    }
    return out;
}

PilotToken build_token(PilotResult const& pilot, SceneConfig const& cfg)
{
    std::vector<AbsorptionEvent> at_b;
    std::copy_if(pilot.events.begin(), pilot.events.end(), std::back_inserter(at_b),
                 [](auto const& e) { return e.absorber == Absorber::NodeB; });

    PilotToken tok;
    tok.octants = extract_octant_features(at_b, cfg);
    tok.pilot_total = static_cast<std::int64_t>(at_b.size());
    if (at_b.empty())
    {
        return tok;
    }

    Histogram all(cfg.T_pilot, cfg.bin_width);
    Vec3 sum;
    for (auto const& e : at_b)
    {
        all.add(e.time);
        sum += unit(e.surface_point);
    }
    tok.d_hat_time = channel::invert_distance_from_peak(all.peak().first, cfg.r, cfg.D);
    tok.d_hat_count = channel::invert_distance_from_count(tok.pilot_total, cfg.N, cfg.r);
    // Perfectly cancelling directions leave no usable centroid.
    if (sum.norm() > 1e-12)
    {
        tok.centroid_dir = unit(sum);
    }
    return tok;
}

std::array<int, kNumTx> pilot_ranks(std::array<PilotToken, kNumTx> const& tokens)
{
    std::array<int, kNumTx> order;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&tokens](int a, int b) {
        return tokens[static_cast<std::size_t>(a)].pilot_total
               > tokens[static_cast<std::size_t>(b)].pilot_total;
    });
    std::array<int, kNumTx> rank{};
    for (std::size_t place = 0; place < kNumTx; ++place)
    {
        rank[static_cast<std::size_t>(order[place])] = static_cast<int>(place);
    }
    return rank;
}

std::pair<int, int> select_top2(std::array<PilotToken, kNumTx> const& tokens)
{
    auto rank = pilot_ranks(tokens);
    int first = static_cast<int>(std::find(rank.begin(), rank.end(), 0) - rank.begin());
    int second = static_cast<int>(std::find(rank.begin(), rank.end(), 1) - rank.begin());
    return {first, second};
}

FeatureMatrix build_features(AbsorptionLog const& log)
{
    FeatureMatrix fm;
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        fm.tokens[k] = build_token(log.pilots[k], log.scene);
    }
    fm.top2 = select_top2(fm.tokens);
    return fm;
}

std::array<double, kFeatureLength> flatten(FeatureMatrix const& features)
{
    std::array<double, kFeatureLength> out{};
    auto rank = pilot_ranks(features.tokens);
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        auto const& tok = features.tokens[k];
        double* row = out.data() + k * kTokenWidth;
        for (std::size_t j = 0; j < kNumOctants; ++j)
        {
            row[3 * j + 0] = tok.octants[j].peak_time;
            row[3 * j + 1] = static_cast<double>(tok.octants[j].peak_count);
            row[3 * j + 2] = static_cast<double>(tok.octants[j].total_count);
        }
        row[token_slot::kPilotTotal] = static_cast<double>(tok.pilot_total);
        row[token_slot::kDistanceTime] = tok.d_hat_time.value_or(kSentinel);
        row[token_slot::kDistanceCount] = tok.d_hat_count.value_or(kSentinel);
        row[token_slot::kCentroid + 0] = tok.centroid_dir.x;
        row[token_slot::kCentroid + 1] = tok.centroid_dir.y;
        row[token_slot::kCentroid + 2] = tok.centroid_dir.z;
        bool top = static_cast<int>(k) == features.top2.first
                   || static_cast<int>(k) == features.top2.second;
        row[token_slot::kIsTop2] = top ? 1.0 : 0.0;
        row[token_slot::kRank] = static_cast<double>(rank[k]);
    }
    return out;
}

FeatureMatrix unflatten(std::span<double const, kFeatureLength> flat)
{
    FeatureMatrix fm;
    int first = -1;
    int second = -1;
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        double const* row = flat.data() + k * kTokenWidth;
        auto& tok = fm.tokens[k];
        for (std::size_t j = 0; j < kNumOctants; ++j)
        {
            tok.octants[j].peak_time = row[3 * j + 0];
            tok.octants[j].peak_count = std::llround(row[3 * j + 1]);
            tok.octants[j].total_count = std::llround(row[3 * j + 2]);
        }
        tok.pilot_total = std::llround(row[token_slot::kPilotTotal]);
        auto opt = [](double v) { return v == kSentinel ? std::nullopt : std::optional(v); };
        tok.d_hat_time = opt(row[token_slot::kDistanceTime]);
        tok.d_hat_count = opt(row[token_slot::kDistanceCount]);
        tok.centroid_dir = {row[token_slot::kCentroid], row[token_slot::kCentroid + 1],
                            row[token_slot::kCentroid + 2]};
        auto r = std::llround(row[token_slot::kRank]);
        if (r == 0)
        {
            first = static_cast<int>(k);
        }
        else if (r == 1)
        {
            second = static_cast<int>(k);
        }
    }
    fm.top2 = (first >= 0 && second >= 0) ? std::pair{first, second} : select_top2(fm.tokens);
    return fm;
}

}  // namespace mcvd
