#ifndef EMOB_TELEMETRY_HPP
#define EMOB_TELEMETRY_HPP

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace emob {

enum class VehicleKind { ebike, escooter };

std::string_view to_string(VehicleKind kind) noexcept;
VehicleKind parse_vehicle_kind(std::string_view text);

// Naive local time, one-second resolution.
using Timestamp = std::chrono::sys_seconds;

// "dd/mm/yyyy HH:MM:SS"
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

// Bearing in degrees clockwise from north for the 16-point compass rose
// (N, NNE, ..., NNW); "calm" and unknown tokens return nullopt.
std::optional<double> compass_bearing(std::string_view token) noexcept;
bool is_wind_token(std::string_view token) noexcept;

struct TripSample {
    Timestamp timestamp{};
    double latitude = 0.0;       // degrees
    double longitude = 0.0;      // degrees
    double altitude = 0.0;       // m
    double speed = 0.0;          // km/h
    std::optional<double> soc;   // percent
    double wind_speed = 0.0;     // km/h
    std::string wind_direction;  // compass token
    std::string weather;
    std::optional<double> temperature;    // degrees C
    std::optional<double> precipitation;  // mm

    bool operator==(const TripSample&) const = default;
};

struct RiderProfile {
    std::pair<double, double> height_range;  // cm
    std::pair<double, double> weight_range;  // kg

    bool operator==(const RiderProfile&) const = default;
};

struct VoltageEndpoints {
    double v_start = 0.0;  // V
    double v_end = 0.0;    // V

    bool operator==(const VoltageEndpoints&) const = default;
};

struct TripTrace {
    VehicleKind kind = VehicleKind::ebike;
    std::vector<TripSample> samples;
    std::optional<double> assist_level;  // e-bike only, [0, 1]
    std::optional<VoltageEndpoints> voltage_endpoints;
    std::optional<RiderProfile> rider;
    std::optional<double> odometer_km;  // overrides trajectory distance when present

    bool operator==(const TripTrace&) const = default;
};

struct SocEvent {
    Timestamp timestamp{};
    double soc = 0.0;  // percent
};

// Column order of the published tables.
const std::vector<std::string>& required_columns(VehicleKind kind);

// Parses an e-bike or e-scooter trip CSV. Columns are matched by header
// name; the optional columns soc, temperature and precipitation may follow
// the required ones. Row errors name the physical line and column.
TripTrace parse_trip_csv(const std::filesystem::path& path, VehicleKind kind);
TripTrace parse_trip_csv_text(std::string_view text, VehicleKind kind);

// Inverse of parse_trip_csv_text for the per-sample fields.
std::string write_trip_csv(const TripTrace& trace);

std::vector<SocEvent> parse_soc_events(const std::filesystem::path& path);
std::vector<SocEvent> parse_soc_events_text(std::string_view text);

// Throws InvalidTrace when the trace has fewer than two samples, decreasing
// timestamps, or (e-scooter) a sample without soc; OutOfRangeValue for sample
// or metadata fields outside their ranges.
void check_trace(const TripTrace& trace);

// Step-function alignment: each sample takes the soc of the latest event at or
// before its timestamp; samples before the first event take the first value.
TripTrace align_soc_events(const TripTrace& trace, const std::vector<SocEvent>& events);

struct Warning {
    enum class Kind { gps_jump, time_gap, soc_increase };
    Kind kind;
    std::size_t index;  // second sample of the offending pair
    std::string message;
};

std::string_view to_string(Warning::Kind kind) noexcept;

inline constexpr double kMaxPlausibleSpeedKmh = 60.0;
inline constexpr double kMaxSampleGapS = 60.0;
inline constexpr double kSocIncreaseTolerancePct = 1.0;

std::vector<Warning> validate_trace(const TripTrace& trace);

nlohmann::json to_json(const TripTrace& trace);
TripTrace trace_from_json(const nlohmann::json& j);

} // namespace emob

#endif // EMOB_TELEMETRY_HPP
