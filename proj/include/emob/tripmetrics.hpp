#ifndef EMOB_TRIPMETRICS_HPP
#define EMOB_TRIPMETRICS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "emob/telemetry.hpp"

namespace emob {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
    double latitude;   // degrees
    double longitude;  // degrees
};

// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine(GeoPoint a, GeoPoint b) noexcept;

struct TripSummary {
    VehicleKind kind = VehicleKind::ebike;
    double distance_km = 0.0;
    double avg_speed_kmh = 0.0;
    double total_ascent_m = 0.0;
    double total_descent_m = 0.0;
    double altitude_diff_m = 0.0;
    double avg_slope_pct = 0.0;
    double duration_s = 0.0;
    std::optional<double> assist_level;
};

inline constexpr std::size_t kDefaultSmoothingWindow = 5;

// Centered moving average whose half-width shrinks near the ends, so the
// first and last values are kept and linear profiles pass through unchanged.
std::vector<double> smooth_altitude(std::span<const double> altitude, std::size_t window);

// Sum of positive consecutive deltas.
double total_ascent(std::span<const double> profile) noexcept;

// Consecutive samples that are exact duplicates are collapsed first; all other
// samples, including repeated timestamps, are used in positional order.
//
// distance: odometer_km when present (e-bike), otherwise summed haversine.
// avg_speed: mean speed over samples with speed > 0 (distance/duration when
// the trip has no moving sample).
// avg_slope: 100 * total_ascent / distance for e-bikes, 100 * altitude_diff /
// distance for e-scooters.
//
// Throws DegenerateTrip for zero distance or zero duration.
TripSummary summarize(const TripTrace& trace, std::size_t smoothing_window = kDefaultSmoothingWindow);

nlohmann::json to_json(const TripSummary& summary);

} // namespace emob

#endif // EMOB_TRIPMETRICS_HPP
