#ifndef EMOB_FEATURES_HPP
#define EMOB_FEATURES_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "emob/battery.hpp"
#include "emob/telemetry.hpp"
#include "emob/tripmetrics.hpp"

namespace emob {

// One summarized trip. Which trip fields are meaningful depends on the kind:
// e-bike uses distance, total ascent and assist level; e-scooter uses the
// altitude difference. Speed and slope are shared.
struct TripRecord {
    VehicleKind kind = VehicleKind::ebike;

    std::optional<double> distance_km;
    double avg_speed_kmh = 0.0;
    std::optional<double> total_ascent_m;
    std::optional<double> altitude_diff_m;
    double avg_slope_pct = 0.0;
    std::optional<double> assist_level;

    double wind_speed = 0.0;
    double wind_we = 0.0;
    double wind_ns = 0.0;
    std::string weather;
    std::optional<double> precipitation_mm;
    std::optional<double> temperature_c;

    std::optional<double> height_mid_cm;
    std::optional<double> weight_mid_kg;

    double label_wh_per_km = 0.0;

    bool operator==(const TripRecord&) const = default;
};

// Unit vector of the direction the wind blows FROM on (east, north) axes;
// "calm" maps to (0, 0). Throws UnknownDirection.
std::pair<double, double> encode_wind(std::string_view direction);

inline double midpoint(std::pair<double, double> range) noexcept { return 0.5 * (range.first + range.second); }

enum class UnknownTokenPolicy { error, reserved_code };
inline constexpr int kUnknownWeatherCode = -1;

struct FeatureSchema {
    VehicleKind kind = VehicleKind::ebike;
    std::vector<std::string> names;           // column order
    std::vector<std::string> weather_tokens;  // sorted; code = index
    bool include_rider = true;

    // FNV-1a over kind, column names and weather vocabulary, as 16 hex digits.
    std::string fingerprint() const;

    bool operator==(const FeatureSchema&) const = default;
};

int encode_weather(std::string_view token, const FeatureSchema& schema,
                   UnknownTokenPolicy policy = UnknownTokenPolicy::error);

struct Dataset {
    Eigen::MatrixXd features;  // rows x schema.names.size()
    Eigen::VectorXd labels;    // Wh/km
    FeatureSchema schema;
};

// Column order: trip features, weather features, then rider midpoints when
// include_rider. Optional weather columns (temperature, precipitation) are
// present only when every record carries them. Throws MixedKinds,
// MissingFeature, EmptyDataset, OutOfRangeValue (negative label).
Dataset build_dataset(std::span<const TripRecord> records, bool include_rider);

// Encodes records against a frozen schema (inference / held-out data).
Dataset encode_records(std::span<const TripRecord> records, const FeatureSchema& schema,
                       UnknownTokenPolicy policy = UnknownTokenPolicy::error);
Eigen::VectorXd feature_row(const TripRecord& record, const FeatureSchema& schema,
                            UnknownTokenPolicy policy = UnknownTokenPolicy::error);

struct LabelOptions {
    std::optional<OcvCurve> ocv;  // e-bike voltage path
    std::optional<BatterySpec> battery;
    std::size_t smoothing_window = kDefaultSmoothingWindow;
};

// Energy used over the trip in Wh: voltage endpoints through the OCV curve for
// e-bikes, first/last soc sample otherwise.
double trip_energy_wh(const TripTrace& trace, const LabelOptions& options);

// summarize + energy + Wh/km label + per-trip weather aggregation (means of
// numeric fields, most frequent token for wind direction and weather).
TripRecord label_trip(const TripTrace& trace, const LabelOptions& options = {});

nlohmann::json to_json(const TripRecord& record);
TripRecord trip_record_from_json(const nlohmann::json& j);
// Accepts a single record object or an array of them.
std::vector<TripRecord> trip_records_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema feature_schema_from_json(const nlohmann::json& j);

inline constexpr std::string_view kLabelColumn = "label_wh_per_km";

std::string dataset_csv(const Dataset& dataset);
// Parses a dataset CSV written by dataset_csv and checks its header against
// the schema.
Dataset parse_dataset_csv(std::string_view text, const FeatureSchema& schema);

// The schema sidecar lives next to the CSV as "<csv>.schema.json".
std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path);
Dataset load_dataset(const std::filesystem::path& csv_path);

} // namespace emob

#endif // EMOB_FEATURES_HPP
