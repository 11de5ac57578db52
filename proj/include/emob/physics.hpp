#ifndef EMOB_PHYSICS_HPP
#define EMOB_PHYSICS_HPP

#include <optional>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "emob/telemetry.hpp"

namespace emob {

struct TripRecord;

struct PhysicsParams {
    double g = 9.81;                    // m/s^2
    double rolling_coefficient = 0.001; // C_r, kept as published for asphalt
    double air_density = 1.29;          // kg/m^3
    double frontal_area = 0.5;          // m^2, device + rider
    double drag_coefficient = 0.7;      // C_d
};

// Configuration, not measured values.
struct DeviceMasses {
    double ebike_kg = 25.0;
    double escooter_kg = 14.2;

    double of(VehicleKind kind) const noexcept { return kind == VehicleKind::ebike ? ebike_kg : escooter_kg; }
};

struct DemandQuery {
    double mass_kg = 0.0;                // device + rider
    double slope = 0.0;                  // grade, rise/run
    double speed_kmh = 0.0;
    std::optional<double> assist_level;  // e-bike only, [0, 1]
};

void validate(const PhysicsParams& p);

// Resistive force per unit distance (J/m = N):
//   g*m*s + C_r*m*g + 0.5*C_d*rho*A*v^2,  v in m/s.
// Works element-wise on Eigen arrays as well as on scalars.
template <typename Mass, typename Slope, typename Speed>
auto demand_per_meter(const Mass& mass_kg, const Slope& slope, const Speed& speed_kmh, const PhysicsParams& p)
{
    const auto v = speed_kmh / 3.6;
    return p.g * mass_kg * slope + p.rolling_coefficient * mass_kg * p.g
        + 0.5 * p.drag_coefficient * p.air_density * p.frontal_area * v * v;
}

double demand_per_meter(const DemandQuery& q, const PhysicsParams& p);

// J/m -> Wh/km is a division by 3.6.
inline constexpr double joule_per_meter_to_wh_per_km(double j_per_m) noexcept { return j_per_m / 3.6; }

// E-scooter: full demand. E-bike: demand scaled by the assistance level.
// Clamped at 0 (no regeneration). Throws MissingAssistLevel for an e-bike
// query without assist_level.
double demand_wh_per_km(const DemandQuery& q, const PhysicsParams& p, VehicleKind kind);

// Builds m = device mass + rider weight midpoint, s = avg_slope/100 and
// v = avg_speed from the record. Throws MissingFeature when the weight or
// (e-bike) assistance level is absent.
DemandQuery demand_query(const TripRecord& record, const DeviceMasses& masses = {});
double physics_predict(const TripRecord& record, const PhysicsParams& p, const DeviceMasses& masses = {});

nlohmann::json to_json(const PhysicsParams& p);
PhysicsParams physics_params_from_json(const nlohmann::json& j, PhysicsParams base = {});

} // namespace emob

#endif // EMOB_PHYSICS_HPP
