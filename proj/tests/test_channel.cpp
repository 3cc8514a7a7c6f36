#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mcvd/channel.hpp"

using namespace mcvd::channel;

namespace {

// Adaptive Simpson quadrature; independent of the closed-form integral.
double simpson(std::function<double(double)> const& f, double a, double b, double fa,
               double fm, double fb, double whole, double tol, int depth)
{
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m);
    double rm = 0.5 * (m + b);
    double flm = f(lm);
    double frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
    {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1)
           + simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(std::function<double(double)> const& f, double a, double b, double tol)
{
    double fa = f(a);
    double fb = f(b);
    double fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4 * fm + fb), tol, 60);
}

}  // namespace

TEST(HitPdf, ReferenceValue)
{
    EXPECT_NEAR(hit_pdf({5, 10, 100, 0.1}), 1.1937, 1e-4);
    // Direct evaluation of the density expression.
    double r = 5, d = 10, D = 100, t = 0.1;
    double ref = r * (d - r) / (d * std::sqrt(4 * std::numbers::pi * t * t * t * D))
                 * std::exp(-(d - r) * (d - r) / (4 * D * t));
    EXPECT_NEAR(hit_pdf({r, d, D, t}), ref, 1e-14);
}

TEST(HitPdf, VanishesAtZeroAndIsUnimodalAroundPeak)
{
    EXPECT_LT(hit_pdf({5, 20, 100, 1e-6}), 1e-100);
    EXPECT_EQ(hit_pdf({5, 20, 100, 0.0}), 0.0);
    double tp = peak_time(5, 10, 100);
    double fp = hit_pdf({5, 10, 100, tp});
    EXPECT_GE(fp, hit_pdf({5, 10, 100, 1.1 * tp}));
    EXPECT_GE(fp, hit_pdf({5, 10, 100, 0.9 * tp}));
}

TEST(HitPdf, NonNegativeAndDomainChecked)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i)
    {
        double r = 0.1 + 10 * u(rng);
        double d = r * (1.0001 + 20 * u(rng));
        EXPECT_GE(hit_pdf({r, d, 1 + 500 * u(rng), 1e-3 + 100 * u(rng)}), 0.0);
    }
    EXPECT_THROW(hit_pdf({5, 5, 100, 1}), std::domain_error);
    EXPECT_THROW(hit_pdf({5, 4, 100, 1}), std::domain_error);
    EXPECT_THROW(hit_cdf({5, 5, 100, 1}), std::domain_error);
}

TEST(HitCdf, ReferenceValuesAndLimits)
{
    EXPECT_NEAR(hit_cdf({5, 20, 100, INFINITY}), 0.25, 1e-15);
    EXPECT_NEAR(hit_cdf({5, 20, 100, 1e12}), 0.25, 1e-6);
    EXPECT_NEAR(hit_cdf({5, 10, 100, 0.1}), 0.1318, 1e-4);
    EXPECT_EQ(hit_cdf({5, 20, 100, 0.0}), 0.0);
    EXPECT_LT(hit_cdf({5, 20, 100, 1e-6}), 1e-100);
    EXPECT_NEAR(hit_cdf({5, 20, 100, 50}), 0.25 * std::erfc(15 / std::sqrt(20000.0)), 1e-15);
    EXPECT_NEAR(hit_cdf({5, 20, 100, 50}), 0.2202, 1e-4);
}

TEST(HitCdf, MonotoneOnGrid)
{
    for (double d : {6.0, 10.0, 20.0, 50.0})
    {
        double prev = 0.0;
        for (int i = 1; i <= 1000; ++i)
        {
            double v = hit_cdf({5, d, 100, 0.01 * i});
            EXPECT_GE(v, prev);
            prev = v;
        }
        EXPECT_NEAR(hit_cdf({5, d, 100, INFINITY}), 5 / d, 1e-9);
    }
}

TEST(HitCdf, MatchesQuadratureOfDensity)
{
    for (double T : {0.1, 1.0, 10.0})
    {
        for (double d : {10.0, 20.0, 50.0})
        {
            double q = integrate([&](double t) { return hit_pdf({5, d, 100, t}); }, 0.0, T,
                                 1e-11);
            EXPECT_NEAR(q, hit_cdf({5, d, 100, T}), 1e-6) << "T=" << T << " d=" << d;
        }
    }
}

TEST(PeakTime, ReferenceValuesAndScaling)
{
    EXPECT_NEAR(peak_time(5, 20, 100), 0.375, 1e-15);
    EXPECT_NEAR(peak_time(5, 5 + 1e-6, 100), 0.0, 1e-12);
    EXPECT_NEAR(peak_time(5, 30, 200), 0.5 * peak_time(5, 30, 100), 1e-15);
    EXPECT_THROW(peak_time(5, 5, 100), std::domain_error);
}

TEST(PeakTime, IsArgmaxOnDenseGrid)
{
    double tp = peak_time(5, 20, 100);
    double best_t = 0, best = -1;
    for (int i = 1; i <= 200000; ++i)
    {
        double t = 1e-5 * i;
        double v = hit_pdf({5, 20, 100, t});
        if (v > best)
        {
            best = v;
            best_t = t;
        }
    }
    EXPECT_NEAR(best_t, tp, 1e-5);
}

TEST(Inversion, FromPeak)
{
    EXPECT_NEAR(invert_distance_from_peak(0.375, 5, 100), 20.0, 1e-12);
    EXPECT_NEAR(invert_distance_from_peak(1e-14, 5, 100), 5.0, 1e-5);
    EXPECT_THROW(invert_distance_from_peak(0.0, 5, 100), std::domain_error);
    EXPECT_THROW(invert_distance_from_peak(-1.0, 5, 100), std::domain_error);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(5.0, 500.0);
    for (int i = 0; i < 1000; ++i)
    {
        double d = u(rng);
        if (d <= 5.0)
        {
            continue;
        }
        double back = invert_distance_from_peak(peak_time(5, d, 100), 5, 100);
        EXPECT_NEAR(back / d, 1.0, 1e-9);
    }
}

TEST(Inversion, FromCount)
{
    EXPECT_NEAR(*invert_distance_from_count(500, 2000, 5), 20.0, 1e-12);
    EXPECT_NEAR(*invert_distance_from_count(2000, 2000, 5), 5.0, 1e-12);
    EXPECT_FALSE(invert_distance_from_count(0, 2000, 5).has_value());
    EXPECT_THROW(invert_distance_from_count(2001, 2000, 5), std::invalid_argument);
}

TEST(Inversion, WindowedCountInvertsExpectedCount)
{
    for (double d : {12.0, 20.0, 35.0, 80.0})
    {
        double n = 1000 * hit_cdf({5, d, 100, 5.0});
        auto back = invert_distance_from_windowed_count(n, 1000, 5, 100, 5.0, 10.5);
        ASSERT_TRUE(back.has_value());
        EXPECT_NEAR(*back, d, 1e-8 * d);
    }
    EXPECT_FALSE(invert_distance_from_windowed_count(0, 1000, 5, 100, 5.0, 10.5).has_value());
    EXPECT_DOUBLE_EQ(*invert_distance_from_windowed_count(999, 1000, 5, 100, 5.0, 10.5), 10.5);
}

TEST(Superposition, ReferenceValue)
{
    auto res = expected_count_superposition({1000, 5, 20, 14.5, 25.5});
    double S = 1.0 / (1.0 - 1.0 / 16.0);
    EXPECT_NEAR(S, 1.06667, 1e-5);
    EXPECT_NEAR(res.value, 158.7, 0.05);
    EXPECT_NEAR(res.value, 1000 * S * (5 / 14.5 - 5 / 25.5), 1e-9);
    EXPECT_TRUE(res.physically_valid);
}

TEST(Superposition, SignAnomalyIsFlaggedNotClamped)
{
    auto res = expected_count_superposition({1000, 5, 20, 14.5, 5.5});
    EXPECT_NEAR(res.value, -601.9, 0.05);
    EXPECT_FALSE(res.physically_valid);
}

TEST(Superposition, CollapsesToDirectTerm)
{
    auto res = expected_count_superposition({1000, 5, 1e9, 14.5, 1e12});
    EXPECT_NEAR(res.value, 1000 * 5 / 14.5, 1e-6);
    EXPECT_EQ(res.terms, 1);
}

TEST(Superposition, TruncationIsStable)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i)
    {
        double r = 5;
        double d_ab = 2 * r * (1.0001 + 5 * u(rng));
        CountQuery q{2000, r, d_ab, r * (1.01 + 10 * u(rng)), r * (1.01 + 10 * u(rng))};
        auto cut = expected_count_superposition(q);
        CountQuery longer = q;
        longer.n_max = 5000;
        longer.eps_series = 1e-300;
        auto full = expected_count_superposition(longer);
        EXPECT_LT(std::abs(full.value - cut.value), q.eps_series * q.N);
        EXPECT_LE(cut.terms, q.n_max);
    }
}

TEST(Superposition, DomainErrors)
{
    EXPECT_THROW(expected_count_superposition({1000, 5, 10, 14.5, 25.5}), std::domain_error);
    EXPECT_THROW(expected_count_superposition({1000, 5, 9, 14.5, 25.5}), std::domain_error);
}
