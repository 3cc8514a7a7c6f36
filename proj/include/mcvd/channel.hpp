#pragma once

#include <cstdint>
#include <optional>

namespace mcvd::channel {

/// First-passage query for a point emitter and one absorbing sphere.
struct HitQuery
{
    double r;  ///< absorber radius
    double d;  ///< emitter to absorber-center distance
    double D;  ///< diffusion coefficient
    double t;  ///< elapsed time
};

/// First-hitting-time density of a fully absorbing sphere, 1/s.
/// Throws std::domain_error when d <= r or other inputs are out of domain.
double hit_pdf(HitQuery const& q);

/// Probability of absorption by time t: (r/d) erfc((d-r)/sqrt(4Dt)).
/// Accepts t = +inf, returning the total hit probability r/d.
double hit_cdf(HitQuery const& q);

/// Mode of hit_pdf in time: (d-r)^2 / (6D).
double peak_time(double r, double d, double D);

/// Distance for which peak_time(r, d, D) == t_peak.
double invert_distance_from_peak(double t_peak, double r, double D);

/// Distance implied by a total hit probability r/d = n_received/N.
/// Returns nullopt when nothing was received (distance unobservable).
/// Throws std::invalid_argument when n_received > N or N < 1.
std::optional<double> invert_distance_from_count(std::int64_t n_received, std::int64_t N,
                                                 double r);

/// Distance d solving emitted * hit_cdf(r, d, D, window) == n_received,
/// i.e. the count inversion with a finite observation window.
/// Returns nullopt when n_received == 0. Saturates at `d_floor` when the
/// count exceeds what any distance >= d_floor can explain.
std::optional<double> invert_distance_from_windowed_count(double n_received, double emitted,
                                                          double r, double D, double window,
                                                          double d_floor);

struct CountQuery
{
    std::int64_t N;
    double r;
    double d_AB;   ///< center-to-center distance of the two nodes
    double d_ATB;  ///< transmitter to Node B center
    double d_ATA;  ///< transmitter to Node A center
    int n_max = 64;
    double eps_series = 1e-12;
};

struct CountResult
{
    double value;
    bool physically_valid;  ///< value lies in [0, N]
    int terms;              ///< series terms summed
};

/// Superposition count model: N * sum_n (r/d_AB)^(2n) * (r/d_ATB - r/d_ATA),
/// series truncated at the first term below eps_series or at n_max terms.
/// The raw value is returned even when it is negative.
CountResult expected_count_superposition(CountQuery const& q);

}  // namespace mcvd::channel
