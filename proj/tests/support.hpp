#ifndef EMOB_TESTS_SUPPORT_HPP
#define EMOB_TESTS_SUPPORT_HPP

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "emob/telemetry.hpp"
#include "emob/tripmetrics.hpp"

namespace emob::test {

// Degrees of latitude spanning `m` meters along a meridian.
inline double lat_degrees(double m) { return m / kEarthRadiusM * 180.0 / std::numbers::pi; }

inline Timestamp t0() { return parse_timestamp("06/07/2023 09:04:23"); }

inline TripSample sample_at(int second, double north_m, double altitude, double speed,
                            std::optional<double> soc = std::nullopt)
{
    TripSample s;
    s.timestamp = t0() + std::chrono::seconds(second);
    s.latitude = 53.3854 + lat_degrees(north_m);
    s.longitude = -6.2564;
    s.altitude = altitude;
    s.speed = speed;
    s.soc = soc;
    s.wind_speed = 16.9;
    s.wind_direction = "S";
    s.weather = "Cloudy";
    return s;
}

// n samples dt_s apart, evenly covering `length_m` north with a linear
// altitude ramp.
inline TripTrace straight_trace(VehicleKind kind, int n, double length_m, double alt0, double alt1, double speed,
                                int dt_s = 10)
{
    TripTrace t;
    t.kind = kind;
    for (int i = 0; i < n; ++i) {
        const double f = static_cast<double>(i) / (n - 1);
        std::optional<double> soc;
        if (kind == VehicleKind::escooter)
            soc = 97.0 - 5.0 * f;
        t.samples.push_back(sample_at(i * dt_s, f * length_m, alt0 + f * (alt1 - alt0), speed, soc));
    }
    return t;
}

} // namespace emob::test

#endif
