#include "emob/physics.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/features.hpp"

namespace emob {

void validate(const PhysicsParams& p)
{
    if (!(p.g > 0.0 && p.rolling_coefficient > 0.0 && p.air_density > 0.0 && p.frontal_area > 0.0
          && p.drag_coefficient > 0.0))
        throw Error(ErrorCode::InvalidArgument, "physics parameters must be strictly positive");
}

double demand_per_meter(const DemandQuery& q, const PhysicsParams& p)
{
    if (!(q.mass_kg > 0.0) || !(q.speed_kmh >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "demand query needs mass > 0 and speed >= 0");
    return demand_per_meter(q.mass_kg, q.slope, q.speed_kmh, p);
}

double demand_wh_per_km(const DemandQuery& q, const PhysicsParams& p, VehicleKind kind)
{
    double wh_per_km = joule_per_meter_to_wh_per_km(demand_per_meter(q, p));
    if (kind == VehicleKind::ebike) {
        if (!q.assist_level)
            throw Error(ErrorCode::MissingAssistLevel, "e-bike demand needs an assistance level");
        if (!(*q.assist_level >= 0.0 && *q.assist_level <= 1.0))
            throw Error(ErrorCode::InvalidArgument, "assistance level must lie in [0, 1]");
        wh_per_km *= *q.assist_level;
    }
    return std::max(0.0, wh_per_km);
}

DemandQuery demand_query(const TripRecord& record, const DeviceMasses& masses)
{
    if (!record.weight_mid_kg)
        throw Error(ErrorCode::MissingFeature, "physics baseline needs the rider weight range");
    DemandQuery q;
    q.mass_kg = masses.of(record.kind) + *record.weight_mid_kg;
    q.slope = record.avg_slope_pct / 100.0;
    q.speed_kmh = record.avg_speed_kmh;
    if (record.kind == VehicleKind::ebike) {
        if (!record.assist_level)
            throw Error(ErrorCode::MissingFeature, "e-bike physics baseline needs the assistance level");
        q.assist_level = record.assist_level;
    }
    return q;
}

double physics_predict(const TripRecord& record, const PhysicsParams& p, const DeviceMasses& masses)
{
    return demand_wh_per_km(demand_query(record, masses), p, record.kind);
}

nlohmann::json to_json(const PhysicsParams& p)
{
    return {{"g", p.g},
            {"rolling_coefficient", p.rolling_coefficient},
            {"air_density", p.air_density},
            {"frontal_area", p.frontal_area},
            {"drag_coefficient", p.drag_coefficient}};
}

PhysicsParams physics_params_from_json(const nlohmann::json& j, PhysicsParams base)
{
    auto take = [&](const char* key, double& field) {
        if (j.contains(key))
            field = j.at(key).get<double>();
    };
    take("g", base.g);
    take("rolling_coefficient", base.rolling_coefficient);
    take("air_density", base.air_density);
    take("frontal_area", base.frontal_area);
    take("drag_coefficient", base.drag_coefficient);
    validate(base);
    return base;
}

} // namespace emob
