#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "emob/battery.hpp"
#include "emob/error.hpp"

using namespace emob;

namespace {

OcvCurve reference_curve(int cells = 1)
{
    OcvCurve c;
    c.k << 3.5, 0.7, -0.01, 0.15, -0.05;
    c.cells_in_series = cells;
    return c;
}

std::vector<OcvPoint> sample_points(const OcvCurve& c, int n, double lo = 0.05, double hi = 0.95)
{
    std::vector<OcvPoint> pts;
    for (int i = 0; i < n; ++i) {
        const double s = lo + (hi - lo) * i / (n - 1);
        pts.push_back({s, ocv_cell_voltage(c.k, s)});
    }
    return pts;
}

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an emob::Error");
    return ErrorCode::Io;
}

} // namespace

TEST_CASE("ocv_voltage")
{
    OcvCurve flat;
    flat.k << 4.2, 0, 0, 0, 0;
    for (double s : {0.02, 0.3, 0.77, 0.98})
        CHECK(ocv_voltage(flat, s) == doctest::Approx(4.2).epsilon(1e-15));

    CHECK(ocv_voltage(reference_curve(), 0.5) == doctest::Approx(3.76069).epsilon(1e-5 / 3.76));
    CHECK(ocv_voltage(reference_curve(10), 0.5) == doctest::Approx(37.6069).epsilon(1e-4 / 37.6));

    CHECK(code_of([] { ocv_voltage(reference_curve(), 0.01); }) == ErrorCode::DomainError);
    CHECK(code_of([] { ocv_voltage(reference_curve(), 0.99); }) == ErrorCode::DomainError);
}

TEST_CASE("pack scaling")
{
    const auto one = reference_curve(1);
    const auto many = reference_curve(13);
    for (double s = 0.02; s <= 0.98; s += 0.01)
        CHECK(ocv_voltage(many, s) == doctest::Approx(13.0 * ocv_voltage(one, s)).epsilon(1e-14));
}

TEST_CASE("fit_ocv recovers noiseless coefficients")
{
    const auto ref = reference_curve();
    const auto fit = fit_ocv(sample_points(ref, 50), 1);
    for (int i = 0; i < 5; ++i)
        CHECK(std::abs(fit.k(i) - ref.k(i)) <= 1e-6 * std::abs(ref.k(i)));
    CHECK(fit.soc_lo == doctest::Approx(0.05));
    CHECK(fit.soc_hi == doctest::Approx(0.95));
    CHECK(is_strictly_increasing(fit));
}

TEST_CASE("fit_ocv domain is clipped")
{
    const auto fit = fit_ocv(sample_points(reference_curve(), 30, 0.01, 0.99), 1);
    CHECK(fit.soc_lo == kSocClipLo);
    CHECK(fit.soc_hi == kSocClipHi);
}

TEST_CASE("fit_ocv failures")
{
    std::vector<OcvPoint> same(5, OcvPoint{0.5, 3.7});
    CHECK(code_of([&] { fit_ocv(same, 1); }) == ErrorCode::RankDeficient);
    CHECK(code_of([] { fit_ocv(std::vector<OcvPoint>{{0.2, 3.6}, {0.4, 3.7}, {0.6, 3.8}, {0.8, 3.9}}, 1); })
          == ErrorCode::RankDeficient);

    OcvCurve down;
    down.k << 4.0, -0.7, 0, 0, 0;
    CHECK(code_of([&] { fit_ocv(sample_points(down, 20), 1); }) == ErrorCode::NonMonotoneFit);
}

TEST_CASE("voltage_to_soc")
{
    const auto c = reference_curve();
    CHECK(voltage_to_soc(c, ocv_voltage(c, 0.5)) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(voltage_to_soc(c, 3.76069) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(code_of([&] { voltage_to_soc(c, ocv_voltage(c, 0.98) + 0.01); }) == ErrorCode::OutOfRange);
    CHECK(code_of([&] { voltage_to_soc(c, ocv_voltage(c, 0.02) - 0.01); }) == ErrorCode::OutOfRange);

    for (double s = 0.05; s <= 0.95; s += 0.005) {
        const double v = ocv_voltage(c, s);
        const double back = voltage_to_soc(c, v);
        CHECK(std::abs(back - s) < 1e-8);
        CHECK(std::abs(ocv_voltage(c, back) - v) < 1e-9);
    }
}

TEST_CASE("trip_energy")
{
    const auto c = reference_curve();
    const BatterySpec scooter{446.0, 1};
    const BatterySpec bike{450.0, 1};

    const double v = ocv_voltage(c, 0.6);
    CHECK(trip_energy(v, v, c, bike) == 0.0);
    CHECK(soc_drop_energy(0.97, 0.87, scooter) == doctest::Approx(44.6));
    CHECK(trip_energy(ocv_voltage(c, 0.80), ocv_voltage(c, 0.767), c, bike) == doctest::Approx(14.85).epsilon(1e-7));
    CHECK(code_of([&] { trip_energy(ocv_voltage(c, 0.5), ocv_voltage(c, 0.6), c, bike); }) == ErrorCode::NegativeDrop);

    SUBCASE("additive over intermediate voltages")
    {
        const double v1 = ocv_voltage(c, 0.9), v2 = ocv_voltage(c, 0.55), v3 = ocv_voltage(c, 0.2);
        CHECK(trip_energy(v1, v3, c, bike)
              == doctest::Approx(trip_energy(v1, v2, c, bike) + trip_energy(v2, v3, c, bike)).epsilon(1e-10));
    }
}

TEST_CASE("energy_efficiency")
{
    CHECK(energy_efficiency(44.6, 3.0) == doctest::Approx(14.8667).epsilon(1e-4 / 14.8));
    CHECK(energy_efficiency(0.0, 7.0) == 0.0);
    CHECK(code_of([] { energy_efficiency(1.0, 0.0); }) == ErrorCode::DegenerateTrip);
    CHECK(code_of([] { energy_efficiency(1.0, -2.0); }) == ErrorCode::DegenerateTrip);

    // 5 % of the scooter pack over 2 km sits inside the 5-30 Wh/km band
    const double wh_per_km = energy_efficiency(soc_drop_energy(0.97, 0.92, kEscooterBattery), 2.0);
    CHECK(wh_per_km == doctest::Approx(11.15));
    CHECK(wh_per_km > 5.0);
    CHECK(wh_per_km < 30.0);
}

TEST_CASE("OCV CSV and JSON")
{
    const auto pts = parse_ocv_points_text("soc,voltage\n0.1,3.4\n0.5,3.7\n");
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].voltage == 3.7);
    CHECK(code_of([] { parse_ocv_points_text("x,y\n0.1,3.4\n"); }) == ErrorCode::MissingColumn);

    auto c = reference_curve(7);
    c.soc_lo = 0.05;
    const auto back = ocv_curve_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(back.k == c.k);
    CHECK(back.soc_lo == c.soc_lo);
    CHECK(back.soc_hi == c.soc_hi);
    CHECK(back.cells_in_series == 7);
}
