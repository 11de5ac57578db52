#include "emob/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "emob/error.hpp"
#include "emob/io.hpp"

namespace emob {

namespace {

// Snap sin/cos noise so the axis directions encode exactly.
double clean(double v) noexcept { return std::abs(v) < 1e-15 ? 0.0 : v; }

template <typename T>
std::string most_frequent(const std::vector<T>& values)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& v : values)
        ++counts[v];
    std::string best;
    std::size_t best_count = 0;
    for (const auto& v : values)  // first occurrence wins ties
        if (counts[v] > best_count) {
            best = v;
            best_count = counts[v];
        }
    return best;
}

std::optional<double> mean_if_all(const std::vector<TripSample>& samples, std::optional<double> TripSample::*member)
{
    double sum = 0.0;
    for (const auto& s : samples) {
        if (!(s.*member))
            return std::nullopt;
        sum += *(s.*member);
    }
    return sum / static_cast<double>(samples.size());
}

std::vector<std::string> trip_columns(VehicleKind kind)
{
    if (kind == VehicleKind::ebike)
        return {"distance_km", "avg_speed_kmh", "total_ascent_m", "avg_slope_pct", "assist_level"};
    return {"avg_speed_kmh", "altitude_diff_m", "avg_slope_pct"};
}

std::optional<double> column_value(const TripRecord& r, const std::string& name, const FeatureSchema& schema,
                                   UnknownTokenPolicy policy)
{
    if (name == "distance_km") return r.distance_km;
    if (name == "avg_speed_kmh") return r.avg_speed_kmh;
    if (name == "total_ascent_m") return r.total_ascent_m;
    if (name == "altitude_diff_m") return r.altitude_diff_m;
    if (name == "avg_slope_pct") return r.avg_slope_pct;
    if (name == "assist_level") return r.assist_level;
    if (name == "wind_speed") return r.wind_speed;
    if (name == "wind_we") return r.wind_we;
    if (name == "wind_ns") return r.wind_ns;
    if (name == "weather_code") return static_cast<double>(encode_weather(r.weather, schema, policy));
    if (name == "precipitation_mm") return r.precipitation_mm;
    if (name == "temperature_c") return r.temperature_c;
    if (name == "height_mid_cm") return r.height_mid_cm;
    if (name == "weight_mid_kg") return r.weight_mid_kg;
    throw Error(ErrorCode::SchemaMismatch, "unknown feature column '" + name + "'");
}

} // namespace

std::pair<double, double> encode_wind(std::string_view direction)
{
    if (direction == "calm" || direction == "CALM" || direction == "Calm")
        return {0.0, 0.0};
    const auto bearing = compass_bearing(direction);
    if (!bearing)
        throw Error(ErrorCode::UnknownDirection, "unknown wind direction '" + std::string(direction) + "'");
    const double rad = *bearing * std::numbers::pi / 180.0;
    return {clean(std::sin(rad)), clean(std::cos(rad))};
}

std::string FeatureSchema::fingerprint() const
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto feed = [&](std::string_view s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        h ^= 0x1F;  // field separator
        h *= 0x100000001B3ULL;
    };
    feed(to_string(kind));
    for (const auto& n : names)
        feed(n);
    feed("|");
    for (const auto& t : weather_tokens)
        feed(t);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int encode_weather(std::string_view token, const FeatureSchema& schema, UnknownTokenPolicy policy)
{
    const auto it = std::lower_bound(schema.weather_tokens.begin(), schema.weather_tokens.end(), token);
    if (it != schema.weather_tokens.end() && *it == token)
        return static_cast<int>(it - schema.weather_tokens.begin());
    if (policy == UnknownTokenPolicy::reserved_code)
        return kUnknownWeatherCode;
    throw Error(ErrorCode::UnknownToken, "weather token '" + std::string(token) + "' not seen in training data");
}

Dataset build_dataset(std::span<const TripRecord> records, bool include_rider)
{
    if (records.empty())
        throw Error(ErrorCode::EmptyDataset, "no trip records");
    const VehicleKind kind = records.front().kind;
    for (const auto& r : records)
        if (r.kind != kind)
            throw Error(ErrorCode::MixedKinds, "records mix e-bike and e-scooter trips");

    FeatureSchema schema;
    schema.kind = kind;
    schema.include_rider = include_rider;
    std::set<std::string> tokens;
    for (const auto& r : records)
        tokens.insert(r.weather);
    schema.weather_tokens.assign(tokens.begin(), tokens.end());

    schema.names = trip_columns(kind);
    for (const char* name : {"wind_speed", "wind_we", "wind_ns", "weather_code"})
        schema.names.emplace_back(name);
    auto all = [&](std::optional<double> TripRecord::*member) {
        return std::all_of(records.begin(), records.end(), [&](const TripRecord& r) { return (r.*member).has_value(); });
    };
    if (all(&TripRecord::precipitation_mm))
        schema.names.emplace_back("precipitation_mm");
    if (all(&TripRecord::temperature_c))
        schema.names.emplace_back("temperature_c");
    if (include_rider) {
        schema.names.emplace_back("height_mid_cm");
        schema.names.emplace_back("weight_mid_kg");
    }
    return encode_records(records, schema);
}

Eigen::VectorXd feature_row(const TripRecord& record, const FeatureSchema& schema, UnknownTokenPolicy policy)
{
    if (record.kind != schema.kind)
        throw Error(ErrorCode::MixedKinds, "record kind does not match the feature schema");
    Eigen::VectorXd row(static_cast<Eigen::Index>(schema.names.size()));
    for (std::size_t c = 0; c < schema.names.size(); ++c) {
        const auto v = column_value(record, schema.names[c], schema, policy);
        if (!v)
            throw Error(ErrorCode::MissingFeature, "record lacks feature '" + schema.names[c] + "'");
        if (!std::isfinite(*v))
            throw Error(ErrorCode::NonFiniteInput, "feature '" + schema.names[c] + "' is not finite");
        row(static_cast<Eigen::Index>(c)) = *v;
    }
    return row;
}

Dataset encode_records(std::span<const TripRecord> records, const FeatureSchema& schema, UnknownTokenPolicy policy)
{
    if (records.empty())
        throw Error(ErrorCode::EmptyDataset, "no trip records");
    Dataset out;
    out.schema = schema;
    const auto n = static_cast<Eigen::Index>(records.size());
    out.features.resize(n, static_cast<Eigen::Index>(schema.names.size()));
    out.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        if (!(r.label_wh_per_km >= 0.0) || !std::isfinite(r.label_wh_per_km))
            throw Error(ErrorCode::OutOfRangeValue, "record " + std::to_string(i) + ": label must be >= 0");
        out.features.row(i) = feature_row(r, schema, policy).transpose();
        out.labels(i) = r.label_wh_per_km;
    }
    return out;
}

double trip_energy_wh(const TripTrace& trace, const LabelOptions& options)
{
    const BatterySpec spec = options.battery.value_or(trace.kind == VehicleKind::ebike ? kEbikeBattery
                                                                                      : kEscooterBattery);
    if (trace.kind == VehicleKind::ebike && trace.voltage_endpoints) {
        if (!options.ocv)
            throw Error(ErrorCode::InvalidArgument, "e-bike voltage endpoints need a fitted OCV curve");
        return trip_energy(trace.voltage_endpoints->v_start, trace.voltage_endpoints->v_end, *options.ocv, spec);
    }
    const auto& first = trace.samples.front().soc;
    const auto& last = trace.samples.back().soc;
    if (!first || !last)
        throw Error(ErrorCode::MissingSoc, "trip has neither voltage endpoints nor soc readings");
    return soc_drop_energy(*first / 100.0, *last / 100.0, spec);
}

TripRecord label_trip(const TripTrace& trace, const LabelOptions& options)
{
    const TripSummary summary = summarize(trace, options.smoothing_window);
    TripRecord r;
    r.kind = trace.kind;
    r.avg_speed_kmh = summary.avg_speed_kmh;
    r.avg_slope_pct = summary.avg_slope_pct;
    if (trace.kind == VehicleKind::ebike) {
        r.distance_km = summary.distance_km;
        r.total_ascent_m = summary.total_ascent_m;
        r.assist_level = trace.assist_level;
    } else {
        r.altitude_diff_m = summary.altitude_diff_m;
    }

    double wind = 0.0;
    std::vector<std::string> directions, weathers;
    for (const auto& s : trace.samples) {
        wind += s.wind_speed;
        directions.push_back(s.wind_direction);
        weathers.push_back(s.weather);
    }
    r.wind_speed = wind / static_cast<double>(trace.samples.size());
    std::tie(r.wind_we, r.wind_ns) = encode_wind(most_frequent(directions));
    r.weather = most_frequent(weathers);
    r.temperature_c = mean_if_all(trace.samples, &TripSample::temperature);
    r.precipitation_mm = mean_if_all(trace.samples, &TripSample::precipitation);

    if (trace.rider) {
        r.height_mid_cm = midpoint(trace.rider->height_range);
        r.weight_mid_kg = midpoint(trace.rider->weight_range);
    }

    r.label_wh_per_km = energy_efficiency(trip_energy_wh(trace, options), summary.distance_km);
    return r;
}

nlohmann::json to_json(const TripRecord& r)
{
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {
        {"kind", to_string(r.kind)},
        {"distance_km", opt(r.distance_km)},
        {"avg_speed_kmh", r.avg_speed_kmh},
        {"total_ascent_m", opt(r.total_ascent_m)},
        {"altitude_diff_m", opt(r.altitude_diff_m)},
        {"avg_slope_pct", r.avg_slope_pct},
        {"assist_level", opt(r.assist_level)},
        {"wind_speed", r.wind_speed},
        {"wind_we", r.wind_we},
        {"wind_ns", r.wind_ns},
        {"weather", r.weather},
        {"precipitation_mm", opt(r.precipitation_mm)},
        {"temperature_c", opt(r.temperature_c)},
        {"height_mid_cm", opt(r.height_mid_cm)},
        {"weight_mid_kg", opt(r.weight_mid_kg)},
        {"label_wh_per_km", r.label_wh_per_km},
    };
}

TripRecord trip_record_from_json(const nlohmann::json& j)
{
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null())
            return std::nullopt;
        return j.at(key).get<double>();
    };
    try {
        TripRecord r;
        r.kind = parse_vehicle_kind(j.at("kind").get<std::string>());
        r.distance_km = opt("distance_km");
        r.avg_speed_kmh = j.at("avg_speed_kmh").get<double>();
        r.total_ascent_m = opt("total_ascent_m");
        r.altitude_diff_m = opt("altitude_diff_m");
        r.avg_slope_pct = j.at("avg_slope_pct").get<double>();
        r.assist_level = opt("assist_level");
        r.wind_speed = j.at("wind_speed").get<double>();
        r.wind_we = j.at("wind_we").get<double>();
        r.wind_ns = j.at("wind_ns").get<double>();
        r.weather = j.at("weather").get<std::string>();
        r.precipitation_mm = opt("precipitation_mm");
        r.temperature_c = opt("temperature_c");
        r.height_mid_cm = opt("height_mid_cm");
        r.weight_mid_kg = opt("weight_mid_kg");
        r.label_wh_per_km = j.at("label_wh_per_km").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MissingFeature, std::string("malformed trip record JSON: ") + e.what());
    }
}

std::vector<TripRecord> trip_records_from_json(const nlohmann::json& j)
{
    std::vector<TripRecord> out;
    if (j.is_array())
        for (const auto& item : j)
            out.push_back(trip_record_from_json(item));
    else
        out.push_back(trip_record_from_json(j));
    return out;
}

nlohmann::json to_json(const FeatureSchema& schema)
{
    return {
        {"format_version", 1},
        {"kind", to_string(schema.kind)},
        {"names", schema.names},
        {"weather_tokens", schema.weather_tokens},
        {"include_rider", schema.include_rider},
        {"fingerprint", schema.fingerprint()},
    };
}

FeatureSchema feature_schema_from_json(const nlohmann::json& j)
{
    try {
        FeatureSchema s;
        s.kind = parse_vehicle_kind(j.at("kind").get<std::string>());
        s.names = j.at("names").get<std::vector<std::string>>();
        s.weather_tokens = j.at("weather_tokens").get<std::vector<std::string>>();
        s.include_rider = j.at("include_rider").get<bool>();
        if (!std::is_sorted(s.weather_tokens.begin(), s.weather_tokens.end())
            || std::adjacent_find(s.weather_tokens.begin(), s.weather_tokens.end()) != s.weather_tokens.end())
            throw Error(ErrorCode::SchemaMismatch, "weather vocabulary must be sorted and unique");
        std::set<std::string> unique(s.names.begin(), s.names.end());
        if (unique.size() != s.names.size())
            throw Error(ErrorCode::SchemaMismatch, "feature names must be unique");
        if (j.contains("fingerprint") && j.at("fingerprint").get<std::string>() != s.fingerprint())
            throw Error(ErrorCode::SchemaMismatch, "schema fingerprint does not match its contents");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed schema JSON: ") + e.what());
    }
}

std::string dataset_csv(const Dataset& d)
{
    std::ostringstream out;
    for (const auto& n : d.schema.names)
        out << n << ',';
    out << kLabelColumn << '\n';
    for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
        for (Eigen::Index c = 0; c < d.features.cols(); ++c)
            out << format_double(d.features(i, c)) << ',';
        out << format_double(d.labels(i)) << '\n';
    }
    return out.str();
}

Dataset parse_dataset_csv(std::string_view text, const FeatureSchema& schema)
{
    const auto rows = csv::lines(text);
    if (rows.empty())
        throw Error(ErrorCode::MissingColumn, "empty dataset file");
    auto expected = schema.names;
    expected.emplace_back(kLabelColumn);
    if (csv::split_line(rows.front().text) != expected)
        throw Error(ErrorCode::SchemaMismatch, "dataset header does not match the schema column order");

    Dataset d;
    d.schema = schema;
    const auto n = static_cast<Eigen::Index>(rows.size() - 1);
    const auto p = static_cast<Eigen::Index>(schema.names.size());
    d.features.resize(n, p);
    d.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i) + 1];
        const auto fields = csv::split_line(row.text);
        if (static_cast<Eigen::Index>(fields.size()) != p + 1)
            throw Error(ErrorCode::MissingColumn, "line " + std::to_string(row.number) + ": wrong field count");
        for (Eigen::Index c = 0; c <= p; ++c) {
            const auto v = parse_double(fields[static_cast<std::size_t>(c)]);
            if (!v || !std::isfinite(*v))
                throw Error(ErrorCode::NonFiniteInput, "line " + std::to_string(row.number) + ", column '"
                                                           + expected[static_cast<std::size_t>(c)]
                                                           + "': not a finite number");
            if (c < p)
                d.features(i, c) = *v;
            else
                d.labels(i) = *v;
        }
    }
    return d;
}

std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path)
{
    auto p = csv_path;
    p += ".schema.json";
    return p;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path)
{
    write_file_atomic(csv_path, dataset_csv(dataset));
    write_file_atomic(schema_sidecar_path(csv_path), to_json(dataset.schema).dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& csv_path)
{
    const auto schema_text = read_text_file(schema_sidecar_path(csv_path));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(schema_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("schema sidecar is not JSON: ") + e.what());
    }
    return parse_dataset_csv(read_text_file(csv_path), feature_schema_from_json(j));
}

} // namespace emob
