#include "mcvd/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "mcvd/channel.hpp"
#include "mcvd/simulator.hpp"

namespace mcvd {

double chi_square_sf(double x, int dof)
{
    if (dof < 1)
    {
        throw std::invalid_argument("chi-square needs dof >= 1");
    }
    if (x <= 0)
    {
        return 1.0;
    }
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

double fit_peak_time(std::vector<double> const& times, double horizon)
{
    if (times.empty())
    {
        throw std::invalid_argument("peak fit needs at least one hitting time");
    }
    double inv_sum = 0.0;
    for (double t : times)
    {
        inv_sum += 1.0 / t;
    }
    auto n = static_cast<double>(times.size());
    // Log-likelihood of a, up to a constant; concave on the bracket used.
    auto ll = [&](double a) {
        return 0.5 * n * std::log(a) - a * inv_sum - n * std::log(std::erfc(std::sqrt(a / horizon)));
    };
    double lo = 1e-9;
    double hi = 10.0 * n / inv_sum + horizon;
    constexpr double kGolden = 0.6180339887498949;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i)
    {
        double m1 = hi - kGolden * (hi - lo);
        double m2 = lo + kGolden * (hi - lo);
        if (ll(m1) < ll(m2))
        {
            lo = m1;
        }
        else
        {
            hi = m2;
        }
    }
    return 0.5 * (lo + hi) / 1.5;
}

SingleSphereRun simulate_single_sphere(ChannelCheckConfig const& cfg)
{
    DiffusionDomain domain;
    domain.spheres = {{Vec3{0, 0, 0}, cfg.r, Absorber::NodeB}};
    domain.cull_center = {0, 0, 0};
    domain.cull_radius = cfg.cull_radius;
    domain.D = cfg.D;
    domain.dt = cfg.dt;
    domain.t_end = cfg.horizon;

    PilotResult res =
        release_molecules(domain, {cfg.distance, 0, 0}, cfg.molecules, 0, cfg.seed, cfg.workers);
    SingleSphereRun run;
    run.lost = res.n_lost;
    run.times.reserve(res.events.size());
    for (auto const& e : res.events)
    {
        run.times.push_back(e.time);
    }
    return run;
}

ChannelCheckResult run_channel_check(ChannelCheckConfig const& cfg)
{
    auto start = std::chrono::steady_clock::now();
    SingleSphereRun run = simulate_single_sphere(cfg);
    ChannelCheckResult out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto n = static_cast<double>(cfg.molecules);
    out.absorbed = static_cast<std::int64_t>(run.times.size());
    out.fraction = static_cast<double>(out.absorbed) / n;
    out.expected_fraction = channel::hit_cdf({cfg.r, cfg.distance, cfg.D, cfg.horizon});
    out.standard_error = std::sqrt(out.expected_fraction * (1 - out.expected_fraction) / n);
    out.z = (out.fraction - out.expected_fraction) / out.standard_error;
    out.fraction_ok = std::abs(out.z) <= cfg.sigma_tolerance;

    auto n_bins = static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.bin_width));
    std::vector<double> counts(n_bins, 0.0);
    for (double t : run.times)
    {
        auto b = std::min(n_bins - 1, static_cast<std::size_t>(t / cfg.bin_width));
        counts[b] += 1.0;
    }
    auto mode_bin = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    out.histogram_mode = (static_cast<double>(mode_bin) + 0.5) * cfg.bin_width;
    out.analytic_peak = channel::peak_time(cfg.r, cfg.distance, cfg.D);
    auto peak_bin = static_cast<long>(out.analytic_peak / cfg.bin_width);
    out.mode_offset_bins = static_cast<int>(static_cast<long>(mode_bin) - peak_bin);
    out.mode_ok = std::abs(out.mode_offset_bins) <= cfg.mode_tolerance_bins;

    if (!run.times.empty())
    {
        out.fitted_peak = fit_peak_time(run.times, cfg.horizon);
    }

    constexpr std::size_t kHalf = 4;
    double best = -1.0;
    for (std::size_t b = kHalf; b + kHalf < n_bins; ++b)
    {
        double s = 0.0;
        for (std::size_t k = b - kHalf; k <= b + kHalf; ++k)
        {
            s += counts[k];
        }
        if (s > best)
        {
            best = s;
            out.smoothed_mode = (static_cast<double>(b) + 0.5) * cfg.bin_width;
        }
    }

    if (out.absorbed == 0)
    {
        return out;
    }

    // Equal-probability cells under the hitting-time law conditioned on
    // absorption within the horizon.
    auto cdf = [&](double t) { return channel::hit_cdf({cfg.r, cfg.distance, cfg.D, t}); };
    auto quantile = [&](double p) {
        double lo = 0.0;
        double hi = cfg.horizon;
        for (int i = 0; i < 200 && hi - lo > 1e-14 * cfg.horizon; ++i)
        {
            double mid = 0.5 * (lo + hi);
            (cdf(mid) / out.expected_fraction < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::vector<double> edges;
    for (int k = 1; k < cfg.chi_square_cells; ++k)
    {
        edges.push_back(quantile(static_cast<double>(k) / cfg.chi_square_cells));
    }
    std::vector<double> observed(static_cast<std::size_t>(cfg.chi_square_cells), 0.0);
    for (double t : run.times)
    {
        auto cell = std::upper_bound(edges.begin(), edges.end(), t) - edges.begin();
        observed[static_cast<std::size_t>(cell)] += 1.0;
    }
    double expected = static_cast<double>(out.absorbed) / cfg.chi_square_cells;
    double chi2 = 0.0;
    for (double o : observed)
    {
        chi2 += (o - expected) * (o - expected) / expected;
    }
    int cells = cfg.chi_square_cells;
    out.chi_square = chi2;
    out.dof = cells - 1;
    out.p_value = chi_square_sf(chi2, out.dof);
    out.fit_ok = out.p_value > cfg.min_p_value;
    return out;
}

}  // namespace mcvd
