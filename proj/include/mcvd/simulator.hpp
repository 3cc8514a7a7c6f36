#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "mcvd/config.hpp"
#include "mcvd/geometry.hpp"
#include "mcvd/rng.hpp"

namespace mcvd {

enum class Absorber : std::uint8_t
{
    NodeA = 0,
    NodeB = 1,
};

char const* to_string(Absorber a);

struct AbsorptionEvent
{
    double time = 0.0;
    Vec3 surface_point;
    Absorber absorber = Absorber::NodeB;
    int pilot_id = 0;
    std::int64_t molecule_id = 0;

    friend bool operator==(AbsorptionEvent const&, AbsorptionEvent const&) = default;
};

/// Outcome of one pilot release. Events are sorted by (time, molecule_id).
struct PilotResult
{
    int pilot_id = 0;
    std::vector<AbsorptionEvent> events;
    std::int64_t n_lost = 0;

    friend bool operator==(PilotResult const&, PilotResult const&) = default;
};

struct AbsorptionLog
{
    SceneConfig scene;
    Pose pose_A;
    std::uint64_t sample_seed = 0;
    std::array<PilotResult, kNumTx> pilots;
};

struct PathCounts
{
    std::int64_t lost = 0;  ///< escaped or never absorbed in the window
    std::int64_t to_B = 0;  ///< direct reception at Node B
    std::int64_t to_A = 0;  ///< reabsorbed by the emitting node

    friend bool operator==(PathCounts const&, PathCounts const&) = default;
};

/// Absorbing sphere seen by the random walk.
struct AbsorbingSphere
{
    Vec3 center;
    double radius = 0.0;
    Absorber id = Absorber::NodeB;
};

/// Free-space region with absorbing spheres. This is the stepper's whole
/// world; tests build single-sphere domains directly.
struct DiffusionDomain
{
    std::vector<AbsorbingSphere> spheres;
    Vec3 cull_center;
    double cull_radius = 1000.0;
    double D = 100.0;
    double dt = 1e-4;
    double t_end = 5.0;

    /// Step growth far from every surface: the step is enlarged to
    /// floor(gap^2 / (far_field_sigmas^2 * 2 D dt)) base steps. Zero disables
    /// adaptive stepping.
    double far_field_sigmas = 8.0;
    /// Absorb with the Brownian-bridge crossing probability when a step
    /// ends outside a sphere.
    bool bridge_correction = true;
};

struct Hit
{
    double time;
    Vec3 surface_point;
    Absorber absorber;
};

/// Walks one molecule from `start` until absorption, culling, or t_end.
/// Returns the absorption, or nullopt for a lost molecule.
std::optional<Hit> walk_molecule(DiffusionDomain const& domain, Vec3 const& start,
                                 Xoshiro256pp& rng);

/// Releases `n` molecules from `start`. Molecule m draws from the stream
/// derive_seed(pilot_seed, m); results do not depend on `workers`.
PilotResult release_molecules(DiffusionDomain const& domain, Vec3 const& start, std::int64_t n,
                              int pilot_id, std::uint64_t pilot_seed, unsigned workers = 1);

/// Two-node domain for a scene: Node B at the origin, Node A at pose_A.
DiffusionDomain scene_domain(SceneConfig const& cfg, Pose const& pose_A);

/// Throws ConfigError if pilot_id is out of range or the emitter is
/// inside either sphere.
PilotResult simulate_pilot(SceneConfig const& cfg, Pose const& pose_A, int pilot_id,
                           std::uint64_t sample_seed, unsigned workers = 1);

/// All six pilots, each on its own derived seed (full inter-pilot isolation).
AbsorptionLog simulate_scene(SceneConfig const& cfg, Pose const& pose_A,
                             std::uint64_t sample_seed, unsigned workers = 1);

/// Path taxonomy counts; lost + to_B + to_A equals the number released.
PathCounts classify_paths(PilotResult const& result);

}  // namespace mcvd
