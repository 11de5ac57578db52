#include <doctest.h>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/features.hpp"
#include "emob/physics.hpp"
#include "emob/rng.hpp"

using namespace emob;

namespace {

TripRecord scooter_record()
{
    TripRecord r;
    r.kind = VehicleKind::escooter;
    r.avg_speed_kmh = 25.0;
    r.avg_slope_pct = 0.0;
    r.altitude_diff_m = 0.0;
    r.weather = "Dry";
    r.height_mid_cm = 175.0;
    r.weight_mid_kg = 80.0;
    return r;
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

TEST_CASE("demand_per_meter")
{
    const PhysicsParams p;
    CHECK(demand_per_meter(DemandQuery{100, 0, 0}, p) == doctest::Approx(0.981).epsilon(1e-12));
    CHECK(demand_per_meter(DemandQuery{80, 0, 25}, p) == doctest::Approx(11.6716).epsilon(1e-3 / 11.67));
    CHECK(demand_per_meter(DemandQuery{80, 0.05, 25}, p) == doctest::Approx(50.9116).epsilon(1e-3 / 50.9));
    // downhill stays negative here; clamping is the caller's call
    CHECK(demand_per_meter(DemandQuery{80, -0.1, 10}, p) < 0.0);
}

TEST_CASE("array evaluation matches the scalar form")
{
    const PhysicsParams p;
    Eigen::ArrayXd m(3), s(3), v(3);
    m << 60, 80, 120;
    s << 0.0, 0.03, -0.02;
    v << 0, 18, 32;
    const Eigen::ArrayXd out = demand_per_meter(m, s, v, p);
    for (int i = 0; i < 3; ++i)
        CHECK(out(i) == demand_per_meter(DemandQuery{m(i), s(i), v(i)}, p));
}

TEST_CASE("demand_wh_per_km")
{
    const PhysicsParams p;
    const DemandQuery q{80, 0, 25};
    CHECK(demand_wh_per_km(q, p, VehicleKind::escooter) == doctest::Approx(3.2421).epsilon(1e-3 / 3.24));

    auto q0 = q;
    q0.assist_level = 0.0;
    CHECK(demand_wh_per_km(q0, p, VehicleKind::ebike) == 0.0);
    auto q1 = q;
    q1.assist_level = 1.0;
    CHECK(demand_wh_per_km(q1, p, VehicleKind::ebike) == demand_wh_per_km(q, p, VehicleKind::escooter));

    CHECK(code_of([&] { demand_wh_per_km(q, p, VehicleKind::ebike); }) == ErrorCode::MissingAssistLevel);
    CHECK(demand_wh_per_km(DemandQuery{80, -0.2, 10}, p, VehicleKind::escooter) == 0.0);
}

TEST_CASE("physics_predict")
{
    const PhysicsParams p;
    SUBCASE("weight (75, 85) with a 25 kg device, flat, 25 km/h")
    {
        // m = 105 kg: 1.03005 + 10.88685 = 11.9169 J/m = 3.3103 Wh/km
        const DeviceMasses masses{25.0, 25.0};
        auto r = scooter_record();
        r.weight_mid_kg = midpoint({75.0, 85.0});
        const auto q = demand_query(r, masses);
        CHECK(q.mass_kg == 105.0);
        CHECK(physics_predict(r, p, masses) == doctest::Approx(3.3103).epsilon(1e-4 / 3.31));
    }
    SUBCASE("missing weight")
    {
        auto r = scooter_record();
        r.weight_mid_kg.reset();
        CHECK(code_of([&] { physics_predict(r, p); }) == ErrorCode::MissingFeature);
    }
    SUBCASE("assist level is multiplicative")
    {
        auto r = scooter_record();
        r.kind = VehicleKind::ebike;
        r.distance_km = 3.0;
        r.total_ascent_m = 30.0;
        r.avg_slope_pct = 1.0;
        r.assist_level = 1.0;
        const double full = physics_predict(r, p);
        r.assist_level = 0.5;
        CHECK(physics_predict(r, p) == doctest::Approx(0.5 * full).epsilon(1e-15));
        r.assist_level.reset();
        CHECK(code_of([&] { physics_predict(r, p); }) == ErrorCode::MissingFeature);
    }
    SUBCASE("slope is percent grade")
    {
        auto r = scooter_record();
        r.avg_slope_pct = 5.0;
        CHECK(demand_query(r).slope == doctest::Approx(0.05));
    }
}

TEST_CASE("monotonicity and decomposition")
{
    const PhysicsParams p;
    CounterRng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double m = rng.uniform(40, 150), s = rng.uniform(0, 0.1), v = rng.uniform(0, 40);
        const double base = demand_per_meter(DemandQuery{m, s, v}, p);
        CHECK(demand_per_meter(DemandQuery{m + 1, s, v}, p) > base);
        CHECK(demand_per_meter(DemandQuery{m, s + 0.01, v}, p) > base);
        CHECK(demand_per_meter(DemandQuery{m, s, v + 1}, p) > base);

        const double drag = base - demand_per_meter(DemandQuery{m, s, 0}, p);
        const double drag_other_mass = demand_per_meter(DemandQuery{m + 37, s, v}, p)
            - demand_per_meter(DemandQuery{m + 37, s, 0}, p);
        CHECK(drag == doctest::Approx(drag_other_mass).epsilon(1e-12));
    }
}

TEST_CASE("linear in assist level")
{
    const PhysicsParams p;
    DemandQuery q{95, 0.02, 21};
    q.assist_level = 1.0;
    const double full = demand_wh_per_km(q, p, VehicleKind::ebike);
    for (double a : {0.0, 0.1, 0.25, 0.6, 0.9}) {
        q.assist_level = a;
        CHECK(demand_wh_per_km(q, p, VehicleKind::ebike) == doctest::Approx(a * full).epsilon(1e-14));
    }
}

TEST_CASE("params JSON and validation")
{
    PhysicsParams p;
    p.rolling_coefficient = 0.01;
    const auto back = physics_params_from_json(nlohmann::json::parse(to_json(p).dump()));
    CHECK(back.rolling_coefficient == 0.01);
    CHECK(back.g == 9.81);

    const auto partial = physics_params_from_json(nlohmann::json{{"air_density", 1.2}});
    CHECK(partial.air_density == 1.2);
    CHECK(partial.frontal_area == 0.5);

    p.frontal_area = 0.0;
    CHECK(code_of([&] { validate(p); }) == ErrorCode::InvalidArgument);
}
