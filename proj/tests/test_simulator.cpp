#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mcvd/channel.hpp"
#include "mcvd/dataset.hpp"
#include "mcvd/errors.hpp"
#include "mcvd/simulator.hpp"
#include "mcvd/validation.hpp"

using namespace mcvd;

namespace {

DiffusionDomain single_sphere(double t_end, double dt = 1e-4)
{
    DiffusionDomain d;
    d.spheres = {{Vec3{0, 0, 0}, 5.0, Absorber::NodeB}};
    d.cull_center = {0, 0, 0};
    d.cull_radius = 1000.0;
    d.D = 100.0;
    d.dt = dt;
    d.t_end = t_end;
    return d;
}

SceneConfig small_scene(std::int64_t n = 300)
{
    SceneConfig cfg;
    cfg.N = n;
    return cfg;
}

Pose on_x_axis(double d) { return {{d, 0, 0}, {}}; }

}  // namespace

TEST(Stepper, ZeroDiffusionNeverMoves)
{
    auto dom = single_sphere(1.0);
    dom.D = 0.0;
    auto res = release_molecules(dom, {20, 0, 0}, 100, 0, 1);
    EXPECT_TRUE(res.events.empty());
    EXPECT_EQ(res.n_lost, 100);
}

TEST(Stepper, EventsLieOnSurfaceWithinWindow)
{
    auto dom = single_sphere(2.0);
    auto res = release_molecules(dom, {8, 0, 0}, 2000, 0, 77);
    ASSERT_FALSE(res.events.empty());
    for (auto const& e : res.events)
    {
        EXPECT_NEAR(e.surface_point.norm(), 5.0, 1e-6);
        EXPECT_GE(e.time, 0.0);
        EXPECT_LE(e.time, 2.0);
    }
    EXPECT_EQ(static_cast<std::int64_t>(res.events.size()) + res.n_lost, 2000);
}

TEST(Stepper, ResultIndependentOfWorkerCount)
{
    auto dom = single_sphere(2.0);
    auto one = release_molecules(dom, {12, 0, 0}, 3000, 2, 1234, 1);
    auto four = release_molecules(dom, {12, 0, 0}, 3000, 2, 1234, 4);
    EXPECT_EQ(one, four);
    for (std::size_t i = 1; i < one.events.size(); ++i)
    {
        auto const& a = one.events[i - 1];
        auto const& b = one.events[i];
        EXPECT_TRUE(a.time < b.time || (a.time == b.time && a.molecule_id < b.molecule_id));
    }
}

TEST(Stepper, SingleSphereAbsorbedFractionShortWindow)
{
    // Faster sibling of the full 50 s acceptance run.
    auto dom = single_sphere(5.0);
    auto res = release_molecules(dom, {20, 0, 0}, 40000, 0, 99);
    double p = channel::hit_cdf({5, 20, 100, 5.0});
    double se = std::sqrt(p * (1 - p) / 40000);
    double frac = static_cast<double>(res.events.size()) / 40000;
    EXPECT_LT(std::abs(frac - p), 3 * se) << "fraction " << frac << " expected " << p;
}

TEST(Stepper, HalvingStepChangesFractionWithinNoise)
{
    auto coarse = release_molecules(single_sphere(5.0, 1e-4), {20, 0, 0}, 40000, 0, 5);
    auto fine = release_molecules(single_sphere(5.0, 5e-5), {20, 0, 0}, 40000, 0, 5);
    double p = channel::hit_cdf({5, 20, 100, 5.0});
    double se = std::sqrt(p * (1 - p) / 40000);
    double a = static_cast<double>(coarse.events.size()) / 40000;
    double b = static_cast<double>(fine.events.size()) / 40000;
    EXPECT_LT(std::abs(a - b), 3 * se);
}

TEST(Stepper, UniformStepsAgreeWithAdaptiveSteps)
{
    auto adaptive = single_sphere(0.6);
    auto plain = single_sphere(0.6);
    plain.far_field_sigmas = 0.0;
    plain.bridge_correction = false;
    auto a = release_molecules(adaptive, {12, 0, 0}, 6000, 0, 8);
    auto b = release_molecules(plain, {12, 0, 0}, 6000, 0, 8);
    double p = channel::hit_cdf({5, 12, 100, 0.6});
    double se = std::sqrt(p * (1 - p) / 6000);
    EXPECT_LT(std::abs(static_cast<double>(a.events.size()) / 6000 - p), 3 * se);
    EXPECT_LT(std::abs(static_cast<double>(b.events.size()) / 6000 - p), 4 * se);
}

TEST(Validation, ChiSquareTailAgainstKnownValues)
{
    EXPECT_NEAR(chi_square_sf(0.0, 3), 1.0, 1e-15);
    EXPECT_NEAR(chi_square_sf(2.0, 2), std::exp(-1.0), 1e-12);
    EXPECT_NEAR(chi_square_sf(66.3386, 49), 0.05, 1e-4);
}

TEST(Validation, PeakFitRecoversLaw)
{
    // Exact quantiles of the conditional law: the fit must land on the peak.
    double r = 5, d = 20, D = 100, T = 50;
    double total = channel::hit_cdf({r, d, D, T});
    std::vector<double> times;
    for (int i = 0; i < 20000; ++i)
    {
        double p = (i + 0.5) / 20000 * total;
        double lo = 0, hi = T;
        for (int k = 0; k < 100; ++k)
        {
            double mid = 0.5 * (lo + hi);
            (channel::hit_cdf({r, d, D, mid}) < p ? lo : hi) = mid;
        }
        times.push_back(0.5 * (lo + hi));
    }
    EXPECT_NEAR(fit_peak_time(times, T), 0.375, 2e-3);
}

TEST(Scene, DeterministicAndConserving)
{
    auto cfg = small_scene();
    auto a = simulate_scene(cfg, on_x_axis(20), 42);
    auto b = simulate_scene(cfg, on_x_axis(20), 42);
    for (std::size_t k = 0; k < kNumTx; ++k)
    {
        EXPECT_EQ(a.pilots[k], b.pilots[k]);
        EXPECT_EQ(a.pilots[k].pilot_id, static_cast<int>(k));
        auto c = classify_paths(a.pilots[k]);
        EXPECT_EQ(c.lost + c.to_A + c.to_B, cfg.N);
        EXPECT_EQ(static_cast<std::int64_t>(a.pilots[k].events.size()) + a.pilots[k].n_lost,
                  cfg.N);
    }
}

TEST(Scene, PilotResultsKeyedByPilotId)
{
    auto cfg = small_scene(200);
    Pose pose{{0, 25, 5}, UnitQuaternion(0.3, 0.1, -0.5, 0.8)};
    auto log = simulate_scene(cfg, pose, 7);
    for (int k : {4, 1, 3})
    {
        EXPECT_EQ(simulate_pilot(cfg, pose, k, 7), log.pilots[static_cast<std::size_t>(k)]);
    }
}

TEST(Scene, SurfacePointsOnTheAbsorbingNode)
{
    auto cfg = small_scene(400);
    Pose pose{{14, -12, 9}, UnitQuaternion(0.2, 0.9, 0.1, -0.3)};
    auto log = simulate_scene(cfg, pose, 3);
    for (auto const& p : log.pilots)
    {
        for (auto const& e : p.events)
        {
            Vec3 center = e.absorber == Absorber::NodeB ? Vec3{0, 0, 0} : pose.position;
            EXPECT_NEAR(distance(e.surface_point, center), cfg.r, 1e-6);
            EXPECT_LE(e.time, cfg.T_pilot);
        }
    }
}

TEST(Scene, InvalidPilotOrEmitterRejected)
{
    auto cfg = small_scene(10);
    EXPECT_THROW(simulate_pilot(cfg, on_x_axis(20), 6, 1), ConfigError);
    EXPECT_THROW(simulate_pilot(cfg, on_x_axis(20), -1, 1), ConfigError);
    // Node A so close that its -x tube tip sits inside Node B.
    EXPECT_THROW(simulate_pilot(cfg, on_x_axis(10), 1, 1), ConfigError);
}

TEST(Paths, DegenerateAndConservation)
{
    PilotResult empty{0, {}, 2000};
    EXPECT_EQ(classify_paths(empty), (PathCounts{2000, 0, 0}));
}

TEST(Paths, FacingPilotStrongestAndReabsorptionDominates)
{
    auto cfg = SceneConfig{};
    int facing_wins = 0;
    constexpr int kSeeds = 10;
    for (int s = 0; s < kSeeds; ++s)
    {
        auto log = simulate_scene(cfg, on_x_axis(20), 1000 + static_cast<std::uint64_t>(s));
        std::array<std::int64_t, kNumTx> to_b{};
        for (std::size_t k = 0; k < kNumTx; ++k)
        {
            to_b[k] = classify_paths(log.pilots[k]).to_B;
        }
        auto best = std::max_element(to_b.begin(), to_b.end()) - to_b.begin();
        facing_wins += best == 1 ? 1 : 0;
        auto c = classify_paths(log.pilots[1]);
        EXPECT_GT(c.to_A, c.to_B);
    }
    EXPECT_EQ(facing_wins, kSeeds);
}
