#pragma once

#include <cstdint>
#include <vector>

namespace mcvd {

/// Single absorbing sphere at the origin, molecules released at distance
/// `distance` from its center and observed for `horizon` seconds.
struct ChannelCheckConfig
{
    double r = 5.0;
    double D = 100.0;
    double distance = 20.0;
    double horizon = 50.0;
    double dt = 1e-4;
    double bin_width = 0.01;
    double cull_radius = 1000.0;
    std::int64_t molecules = 100000;
    double sigma_tolerance = 3.0;  ///< allowed |z| of the absorbed fraction
    int mode_tolerance_bins = 2;
    int chi_square_cells = 50;
    double min_p_value = 0.01;
    std::uint64_t seed = 20240917;
    unsigned workers = 1;
};

struct ChannelCheckResult
{
    std::int64_t absorbed = 0;
    double fraction = 0.0;
    double expected_fraction = 0.0;
    double standard_error = 0.0;  ///< binomial, at the expected fraction
    double z = 0.0;

    double analytic_peak = 0.0;
    double histogram_mode = 0.0;    ///< center of the fullest bin
    double smoothed_mode = 0.0;     ///< mode after a 9-bin moving average
    int mode_offset_bins = 0;       ///< histogram_mode bin minus analytic peak bin
    /// Peak of the hitting-time law with its shape parameter fitted by
    /// maximum likelihood to the observed times (diagnostic only).
    double fitted_peak = 0.0;

    double chi_square = 0.0;
    int dof = 0;
    double p_value = 0.0;

    double seconds = 0.0;

    bool fraction_ok = false;
    bool mode_ok = false;
    bool fit_ok = false;
    [[nodiscard]] bool passed() const { return fraction_ok && mode_ok && fit_ok; }
};

/// Monte Carlo against the closed-form hitting statistics. The goodness of
/// fit compares absorbed molecules' times with the hitting-time law
/// conditioned on absorption within the horizon, over cells of equal
/// probability.
ChannelCheckResult run_channel_check(ChannelCheckConfig const& cfg);

/// Hitting times of a single-sphere run, ascending, and the lost count.
struct SingleSphereRun
{
    std::vector<double> times;
    std::int64_t lost = 0;
};
SingleSphereRun simulate_single_sphere(ChannelCheckConfig const& cfg);

/// Maximum-likelihood peak time of f(t) ~ t^-1.5 exp(-a / t) truncated to
/// [0, horizon], i.e. a_hat / 1.5.
double fit_peak_time(std::vector<double> const& times, double horizon);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, int dof);

}  // namespace mcvd
