#include "mcvd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "mcvd/errors.hpp"

namespace mcvd {

char const* to_string(Absorber a)
{
    return a == Absorber::NodeA ? "A" : "B";
}

namespace {

// exp(-x) below this is treated as zero crossing probability.
constexpr double kBridgeExponentCutoff = 40.0;

Vec3 project_to_sphere(AbsorbingSphere const& s, Vec3 const& p)
{
    Vec3 rel = p - s.center;
    double n = rel.norm();
    if (n == 0.0)
    {
        return s.center + Vec3{s.radius, 0, 0};
    }
    return s.center + rel * (s.radius / n);
}

// First parameter in [0, 1] at which x + s*v touches the sphere, if any.
// x is assumed to lie outside the sphere.
std::optional<double> segment_entry(AbsorbingSphere const& s, Vec3 const& x, Vec3 const& v)
{
    Vec3 rel = x - s.center;
    double a = v.squared_norm();
    if (a == 0.0)
    {
        return std::nullopt;
    }
    double b = dot(rel, v);
    double c = rel.squared_norm() - s.radius * s.radius;
    double disc = b * b - a * c;
    if (disc < 0.0)
    {
        return std::nullopt;
    }
    double root = (-b - std::sqrt(disc)) / a;
    if (root < 0.0 || root > 1.0)
    {
        return std::nullopt;
    }
    return root;
}

}  // namespace

std::optional<Hit> walk_molecule(DiffusionDomain const& domain, Vec3 const& start,
                                 Xoshiro256pp& rng)
{
    if (domain.D <= 0.0)
    {
        return std::nullopt;
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    double const base_var = 2.0 * domain.D * domain.dt;
    double const far_scale = domain.far_field_sigmas * domain.far_field_sigmas * base_var;
    double const cull_sq = domain.cull_radius * domain.cull_radius;

    Vec3 x = start;
    double t = 0.0;
    std::array<double, 4> gaps{};
    auto const n_spheres = domain.spheres.size();

    while (t < domain.t_end)
    {
        if ((x - domain.cull_center).squared_norm() > cull_sq)
        {
            return std::nullopt;
        }
        double gap_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_spheres; ++i)
        {
            auto const& s = domain.spheres[i];
            gaps[i] = (x - s.center).norm() - s.radius;
            gap_min = std::min(gap_min, gaps[i]);
        }

        double h = domain.dt;
        if (domain.far_field_sigmas > 0.0)
        {
            double k = std::floor(gap_min * gap_min / far_scale);
            if (k > 1.0)
            {
                h = domain.dt * k;
            }
        }
        h = std::min(h, domain.t_end - t);
        double const sigma = std::sqrt(2.0 * domain.D * h);
        Vec3 const v{sigma * gauss(rng), sigma * gauss(rng), sigma * gauss(rng)};

        std::optional<double> entry;
        std::size_t entry_sphere = 0;
        for (std::size_t i = 0; i < n_spheres; ++i)
        {
            if (auto s = segment_entry(domain.spheres[i], x, v); s && (!entry || *s < *entry))
            {
                entry = s;
                entry_sphere = i;
            }
        }
        if (entry)
        {
            auto const& s = domain.spheres[entry_sphere];
            return Hit{t + *entry * h, project_to_sphere(s, x + *entry * v), s.id};
        }

        Vec3 const y = x + v;
        if (domain.bridge_correction)
        {
            for (std::size_t i = 0; i < n_spheres; ++i)
            {
                auto const& s = domain.spheres[i];
                double g0 = gaps[i];
                double g1 = (y - s.center).norm() - s.radius;
                double exponent = g0 * g1 / (domain.D * h);
                if (exponent < kBridgeExponentCutoff && rng.uniform() < std::exp(-exponent))
                {
                    double frac = g0 / (g0 + g1);
                    return Hit{t + frac * h, project_to_sphere(s, x + frac * v), s.id};
                }
            }
        }
        x = y;
        t += h;
    }
    return std::nullopt;
}

PilotResult release_molecules(DiffusionDomain const& domain, Vec3 const& start, std::int64_t n,
                              int pilot_id, std::uint64_t pilot_seed, unsigned workers)
{
    std::vector<std::optional<Hit>> hits(static_cast<std::size_t>(n));
    auto run_range = [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t m = begin; m < end; ++m)
        {
            Xoshiro256pp rng(derive_seed(pilot_seed, static_cast<std::uint64_t>(m)));
            hits[static_cast<std::size_t>(m)] = walk_molecule(domain, start, rng);
        }
    };

    workers = std::max(1u, workers);
    if (workers == 1 || n < 2)
    {
        run_range(0, n);
    }
    else
    {
        std::vector<std::jthread> pool;
        std::int64_t chunk = (n + workers - 1) / workers;
        for (std::int64_t b = 0; b < n; b += chunk)
        {
            pool.emplace_back(run_range, b, std::min(n, b + chunk));
        }
    }

    PilotResult out;
    out.pilot_id = pilot_id;
    for (std::int64_t m = 0; m < n; ++m)
    {
        auto const& h = hits[static_cast<std::size_t>(m)];
        if (h)
        {
            out.events.push_back({h->time, h->surface_point, h->absorber, pilot_id, m});
        }
        else
        {
            ++out.n_lost;
        }
    }
    std::stable_sort(out.events.begin(), out.events.end(), [](auto const& a, auto const& b) {
        return a.time < b.time || (a.time == b.time && a.molecule_id < b.molecule_id);
    });
    return out;
}

DiffusionDomain scene_domain(SceneConfig const& cfg, Pose const& pose_A)
{
    DiffusionDomain d;
    d.spheres = {AbsorbingSphere{pose_A.position, cfg.r, Absorber::NodeA},
                 AbsorbingSphere{Vec3{}, cfg.r, Absorber::NodeB}};
    d.cull_center = pose_A.position * 0.5;
    d.cull_radius = cfg.cull_radius;
    d.D = cfg.D;
    d.dt = cfg.dt;
    d.t_end = cfg.T_pilot;
    return d;
}

PilotResult simulate_pilot(SceneConfig const& cfg, Pose const& pose_A, int pilot_id,
                           std::uint64_t sample_seed, unsigned workers)
{
    if (pilot_id < 0 || pilot_id >= static_cast<int>(kNumTx))
    {
        throw ConfigError("pilot_id must be in [0, 5]");
    }
    auto const tx = tx_world_positions(pose_A, cfg.layout());
    Vec3 const emitter = tx[static_cast<std::size_t>(pilot_id)];
    auto domain = scene_domain(cfg, pose_A);
    for (auto const& s : domain.spheres)
    {
        if (distance(emitter, s.center) <= s.radius)
        {
            throw ConfigError("emission point inside an absorbing sphere");
        }
    }
    return release_molecules(domain, emitter, cfg.N, pilot_id,
                             derive_seed(sample_seed, static_cast<std::uint64_t>(pilot_id)),
                             workers);
}

AbsorptionLog simulate_scene(SceneConfig const& cfg, Pose const& pose_A,
                             std::uint64_t sample_seed, unsigned workers)
{
    AbsorptionLog log;
    log.scene = cfg;
    log.pose_A = pose_A;
    log.sample_seed = sample_seed;
    for (int k = 0; k < static_cast<int>(kNumTx); ++k)
    {
        log.pilots[static_cast<std::size_t>(k)] =
            simulate_pilot(cfg, pose_A, k, sample_seed, workers);
    }
    return log;
}

PathCounts classify_paths(PilotResult const& result)
{
    PathCounts c;
    c.lost = result.n_lost;
    for (auto const& e : result.events)
    {
        (e.absorber == Absorber::NodeB ? c.to_B : c.to_A) += 1;
    }
    return c;
}

}  // namespace mcvd
