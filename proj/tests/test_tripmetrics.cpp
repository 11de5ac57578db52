#include <doctest.h>

#include <numbers>

#include "emob/error.hpp"
#include "emob/tripmetrics.hpp"
#include "support.hpp"

using namespace emob;
using emob::test::sample_at;
using emob::test::straight_trace;

TEST_CASE("haversine")
{
    const GeoPoint a{53.3854, -6.2564};
    CHECK(haversine(a, a) == 0.0);
    CHECK(haversine(a, {53.3855, -6.2566}) == doctest::Approx(17.3).epsilon(0.2 / 17.3));
    CHECK(haversine({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * 6371000.0).epsilon(1000.0 / 2e7));
    const GeoPoint b{48.1, 11.5};
    CHECK(haversine(a, b) == haversine(b, a));
    CHECK(haversine(a, b) > 0.0);
}

TEST_CASE("flat two-sample trip")
{
    TripTrace t;
    t.samples = {sample_at(0, 0, 50, 18), sample_at(200, 1000, 50, 18)};
    const auto s = summarize(t, 5);
    CHECK(s.distance_km == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.avg_speed_kmh == 18.0);
    CHECK(s.total_ascent_m == 0.0);
    CHECK(s.avg_slope_pct == 0.0);
    CHECK(s.duration_s == 200.0);
}

TEST_CASE("stationary trip is degenerate")
{
    TripTrace t;
    t.samples = {sample_at(0, 0, 50, 0), sample_at(10, 0, 50, 0), sample_at(20, 0, 50, 0)};
    CHECK_THROWS_AS(summarize(t, 5), Error);
    try {
        summarize(t, 5);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateTrip);
    }
}

TEST_CASE("ramp: 10 samples, 5 m over 500 m")
{
    const auto t = straight_trace(VehicleKind::ebike, 10, 500.0, 50.0, 55.0, 18.0);
    const auto s = summarize(t, 5);
    CHECK(s.distance_km == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(s.total_ascent_m == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.avg_slope_pct == doctest::Approx(1.0).epsilon(1e-9));

    const auto sc = summarize(straight_trace(VehicleKind::escooter, 10, 500.0, 50.0, 55.0, 18.0), 5);
    CHECK(sc.altitude_diff_m == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sc.avg_slope_pct == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("e-scooter slope is net, e-bike slope is ascent only")
{
    auto t = straight_trace(VehicleKind::ebike, 21, 1000.0, 50.0, 50.0, 18.0);
    for (int i = 0; i < 21; ++i)
        t.samples[i].altitude = 50.0 + (i <= 10 ? i : 20 - i);
    const auto bike = summarize(t, 1);
    CHECK(bike.total_ascent_m == doctest::Approx(10.0));
    CHECK(bike.altitude_diff_m == doctest::Approx(0.0));
    CHECK(bike.avg_slope_pct == doctest::Approx(1.0));

    t.kind = VehicleKind::escooter;
    for (auto& s : t.samples)
        s.soc = 90.0;
    CHECK(summarize(t, 1).avg_slope_pct == doctest::Approx(0.0));
}

TEST_CASE("smoothing keeps endpoints and linear profiles")
{
    const std::vector<double> ramp = {0, 1, 2, 3, 4, 5, 6};
    CHECK(smooth_altitude(ramp, 5) == ramp);
    const std::vector<double> noisy = {10, 14, 9, 15, 10, 13, 11};
    const auto sm = smooth_altitude(noisy, 5);
    CHECK(sm.front() == 10.0);
    CHECK(sm.back() == 11.0);
    CHECK(total_ascent(sm) < total_ascent(noisy));
    CHECK(smooth_altitude(noisy, 1) == noisy);
}

TEST_CASE("avg speed skips stopped samples")
{
    auto t = straight_trace(VehicleKind::ebike, 5, 400.0, 50.0, 50.0, 20.0);
    t.samples[2].speed = 0.0;
    CHECK(summarize(t).avg_speed_kmh == 20.0);
}

TEST_CASE("avg speed agrees with distance / duration at constant speed")
{
    // 18 km/h = 5 m/s; 50 m per 10 s sample step
    const auto t = straight_trace(VehicleKind::ebike, 30, 29 * 50.0, 50.0, 50.0, 18.0);
    const auto s = summarize(t);
    const double derived = s.distance_km / (s.duration_s / 3600.0);
    CHECK(std::abs(derived - s.avg_speed_kmh) / s.avg_speed_kmh < 0.01);
}

TEST_CASE("odometer overrides trajectory distance for e-bikes")
{
    auto t = straight_trace(VehicleKind::ebike, 10, 500.0, 50.0, 55.0, 18.0);
    t.odometer_km = 0.6;
    const auto s = summarize(t);
    CHECK(s.distance_km == 0.6);
    CHECK(s.avg_slope_pct == doctest::Approx(100.0 * 5.0 / 600.0));
}

TEST_CASE("reversal: same distance, ascent becomes descent")
{
    auto t = straight_trace(VehicleKind::ebike, 12, 800.0, 50.0, 50.0, 18.0);
    const double alt[] = {50, 52, 51, 55, 57, 56, 60, 58, 61, 59, 62, 64};
    for (int i = 0; i < 12; ++i)
        t.samples[i].altitude = alt[i];
    auto r = t;
    std::reverse(r.samples.begin(), r.samples.end());
    for (std::size_t i = 0; i < r.samples.size(); ++i)
        r.samples[i].timestamp = t.samples[i].timestamp;

    const auto a = summarize(t, 3);
    const auto b = summarize(r, 3);
    CHECK(b.distance_km == doctest::Approx(a.distance_km).epsilon(1e-12));
    CHECK(b.total_ascent_m == doctest::Approx(a.total_descent_m).epsilon(1e-12));
}

TEST_CASE("duplicate final sample changes nothing")
{
    auto t = straight_trace(VehicleKind::ebike, 9, 700.0, 40.0, 47.0, 15.0);
    t.samples[4].speed = 0.0;
    t.samples[5].altitude = 49.0;
    const auto a = summarize(t);
    t.samples.push_back(t.samples.back());
    const auto b = summarize(t);
    CHECK(a.distance_km == b.distance_km);
    CHECK(a.avg_speed_kmh == b.avg_speed_kmh);
    CHECK(a.total_ascent_m == b.total_ascent_m);
    CHECK(a.altitude_diff_m == b.altitude_diff_m);
    CHECK(a.avg_slope_pct == b.avg_slope_pct);
    CHECK(a.duration_s == b.duration_s);
}

TEST_CASE("monotone altitude slope is exact")
{
    auto t = straight_trace(VehicleKind::escooter, 15, 1200.0, 30.0, 30.0, 12.0);
    double alt = 30.0;
    for (auto& s : t.samples) {
        s.altitude = alt;
        alt += 0.7 + 0.1 * (static_cast<int>(alt) % 3);
    }
    const auto s = summarize(t, 5);
    CHECK(s.avg_slope_pct == doctest::Approx(100.0 * s.altitude_diff_m / (1000.0 * s.distance_km)).epsilon(1e-14));

    t.kind = VehicleKind::ebike;
    const auto b = summarize(t, 5);
    CHECK(b.total_ascent_m == doctest::Approx(b.altitude_diff_m).epsilon(1e-12));
    CHECK(b.avg_slope_pct == doctest::Approx(100.0 * b.altitude_diff_m / (1000.0 * b.distance_km)).epsilon(1e-12));
}
