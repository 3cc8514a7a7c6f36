#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcvd/config.hpp"
#include "mcvd/geometry.hpp"
#include "mcvd/simulator.hpp"

namespace mcvd {

/// Encoded value for undefined times and distances.
inline constexpr double kSentinel = -1.0;

struct OctantFeatures
{
    double peak_time = kSentinel;  ///< center of the fullest histogram bin
    std::int64_t peak_count = 0;   ///< molecules in that bin
    std::int64_t total_count = 0;  ///< all molecules in the octant

    friend bool operator==(OctantFeatures const&, OctantFeatures const&) = default;
};

struct PilotToken
{
    std::array<OctantFeatures, kNumOctants> octants;
    std::int64_t pilot_total = 0;
    std::optional<double> d_hat_time;   ///< from the all-octant peak time
    std::optional<double> d_hat_count;  ///< from pilot_total / N
    Vec3 centroid_dir;                  ///< unit, or zero without events

    friend bool operator==(PilotToken const&, PilotToken const&) = default;
};

struct FeatureMatrix
{
    std::array<PilotToken, kNumTx> tokens;
    std::pair<int, int> top2{0, 1};

    friend bool operator==(FeatureMatrix const&, FeatureMatrix const&) = default;
};

/// Reals per token as produced by the simulator-side statistics.
inline constexpr std::size_t kTokenStats = 30;
/// Model-facing token width: the statistics plus {is_top2, rank}.
inline constexpr std::size_t kTokenWidth = kTokenStats + 2;
inline constexpr std::size_t kFeatureLength = kNumTx * kTokenWidth;  // 192

/// Token layout (offsets within a kTokenWidth block):
///   [3j + 0, 3j + 1, 3j + 2]  octant j peak_time, peak_count, total_count (j = 0..7)
///   24  pilot_total
///   25  d_hat_time   (kSentinel when undefined)
///   26  d_hat_count  (kSentinel when undefined)
///   27, 28, 29  centroid_dir x, y, z
///   30  is_top2 (0 or 1)
///   31  rank among pilots by pilot_total, 0 = strongest
namespace token_slot {
inline constexpr std::size_t kPilotTotal = 24;
inline constexpr std::size_t kDistanceTime = 25;
inline constexpr std::size_t kDistanceCount = 26;
inline constexpr std::size_t kCentroid = 27;
inline constexpr std::size_t kIsTop2 = 30;
inline constexpr std::size_t kRank = 31;
}  // namespace token_slot

/// Column names of the flattened layout, e.g. "p0_o3_peak_count".
std::vector<std::string> feature_names();

/// Per-octant histogram statistics of Node-B events. Throws
/// std::invalid_argument if an event was absorbed by Node A.
std::array<OctantFeatures, kNumOctants> extract_octant_features(
    std::span<AbsorptionEvent const> events_at_b, SceneConfig const& cfg);

/// Token for one pilot; Node-A events in the result are ignored.
PilotToken build_token(PilotResult const& pilot, SceneConfig const& cfg);

/// Two pilots with the largest totals, lower pilot id first on ties.
std::pair<int, int> select_top2(std::array<PilotToken, kNumTx> const& tokens);

/// Pilot order by descending total (ties by id); rank[k] is pilot k's place.
std::array<int, kNumTx> pilot_ranks(std::array<PilotToken, kNumTx> const& tokens);

FeatureMatrix build_features(AbsorptionLog const& log);

std::array<double, kFeatureLength> flatten(FeatureMatrix const& features);
FeatureMatrix unflatten(std::span<double const, kFeatureLength> flat);

}  // namespace mcvd
