#include "mcvd/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mcvd::channel {

namespace {

void check_hit_domain(HitQuery const& q)
{
    if (!(q.r > 0) || !(q.D > 0) || !std::isfinite(q.r) || !std::isfinite(q.D)
        || !std::isfinite(q.d))
    {
        throw std::domain_error("hit query requires r > 0 and D > 0");
    }
    if (!(q.d > q.r))
    {
        throw std::domain_error("emitter on or inside absorbing surface");
    }
    if (!(q.t >= 0) || std::isnan(q.t))
    {
        throw std::domain_error("hit query requires t >= 0");
    }
}

}  // namespace

double hit_pdf(HitQuery const& q)
{
    check_hit_domain(q);
    if (q.t == 0 || std::isinf(q.t))
    {
        return 0.0;
    }
    double gap = q.d - q.r;
    double norm = q.r * gap / (q.d * std::sqrt(4.0 * std::numbers::pi * q.t * q.t * q.t * q.D));
    return norm * std::exp(-gap * gap / (4.0 * q.D * q.t));
}

double hit_cdf(HitQuery const& q)
{
    check_hit_domain(q);
    if (q.t == 0)
    {
        return 0.0;
    }
    double p_total = q.r / q.d;
    if (std::isinf(q.t))
    {
        return p_total;
    }
    return p_total * std::erfc((q.d - q.r) / std::sqrt(4.0 * q.D * q.t));
}

double peak_time(double r, double d, double D)
{
    if (!(r > 0) || !(D > 0))
    {
        throw std::domain_error("peak_time requires r > 0 and D > 0");
    }
    if (!(d > r))
    {
        throw std::domain_error("emitter on or inside absorbing surface");
    }
    double gap = d - r;
    return gap * gap / (6.0 * D);
}

double invert_distance_from_peak(double t_peak, double r, double D)
{
    if (!(t_peak > 0) || !std::isfinite(t_peak))
    {
        throw std::domain_error("peak time must be positive");
    }
    if (!(r > 0) || !(D > 0))
    {
        throw std::domain_error("distance inversion requires r > 0 and D > 0");
    }
    return r + std::sqrt(6.0 * D * t_peak);
}

std::optional<double> invert_distance_from_count(std::int64_t n_received, std::int64_t N,
                                                 double r)
{
    if (N < 1 || n_received < 0)
    {
        throw std::invalid_argument("count inversion requires N >= 1 and n_received >= 0");
    }
    if (n_received > N)
    {
        throw std::invalid_argument("received count exceeds emitted count");
    }
    if (n_received == 0)
    {
        return std::nullopt;
    }
    return r * static_cast<double>(N) / static_cast<double>(n_received);
}

std::optional<double> invert_distance_from_windowed_count(double n_received, double emitted,
                                                          double r, double D, double window,
                                                          double d_floor)
{
    if (!(emitted > 0) || n_received < 0 || !(d_floor > r) || !(window > 0))
    {
        throw std::invalid_argument("windowed count inversion: bad arguments");
    }
    if (n_received == 0)
    {
        return std::nullopt;
    }
    auto expected = [&](double d) { return emitted * hit_cdf({r, d, D, window}); };
    if (n_received >= expected(d_floor))
    {
        return d_floor;
    }
    // expected(d) decreases monotonically in d; bracket then bisect.
    double lo = d_floor;
    double hi = 2.0 * d_floor;
    while (expected(hi) > n_received)
    {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12)
        {
            return hi;
        }
    }
    for (int i = 0; i < 100 && hi - lo > 1e-12 * hi; ++i)
    {
        double mid = 0.5 * (lo + hi);
        (expected(mid) > n_received ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

CountResult expected_count_superposition(CountQuery const& q)
{
    if (!(q.r > 0) || q.N < 1)
    {
        throw std::domain_error("count query requires r > 0 and N >= 1");
    }
    if (!(q.d_AB > 2 * q.r))
    {
        throw std::domain_error("nodes overlap: d_AB must exceed 2r");
    }
    if (!(q.d_ATB > q.r) || !(q.d_ATA > q.r))
    {
        throw std::domain_error("transmitter on or inside an absorbing surface");
    }
    if (q.n_max < 1 || !(q.eps_series > 0))
    {
        throw std::domain_error("series needs n_max >= 1 and eps_series > 0");
    }

    double ratio = (q.r / q.d_AB) * (q.r / q.d_AB);
    double sum = 0.0;
    double term = 1.0;
    int terms = 0;
    for (int n = 0; n < q.n_max; ++n)
    {
        if (term < q.eps_series)
        {
            break;
        }
        sum += term;
        ++terms;
        term *= ratio;
    }
    double bracket = q.r / q.d_ATB - q.r / q.d_ATA;
    double value = static_cast<double>(q.N) * sum * bracket;
    bool valid = value >= 0.0 && value <= static_cast<double>(q.N);
    return {value, valid, terms};
}

}  // namespace mcvd::channel
