#include "emob/telemetry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "emob/error.hpp"
#include "emob/io.hpp"
#include "emob/tripmetrics.hpp"

namespace emob {

namespace {

constexpr std::array<std::string_view, 16> kCompass = {
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW",
};

std::string upper(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

// Canonical spelling of a wind token; empty when unknown.
std::string canonical_wind_token(std::string_view token)
{
    const auto u = upper(csv::trim(token));
    if (u == "CALM")
        return "calm";
    for (auto name : kCompass)
        if (u == name)
            return u;
    return {};
}

bool two_digits(std::string_view s, std::size_t pos, int& out)
{
    if (pos + 2 > s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))
        || !std::isdigit(static_cast<unsigned char>(s[pos + 1])))
        return false;
    out = (s[pos] - '0') * 10 + (s[pos + 1] - '0');
    return true;
}

std::string where(std::size_t line, std::string_view column)
{
    return "line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

const std::vector<std::string> kOptionalColumns = {"soc", "temperature", "precipitation"};

} // namespace

std::string_view to_string(VehicleKind kind) noexcept
{
    return kind == VehicleKind::ebike ? "ebike" : "escooter";
}

VehicleKind parse_vehicle_kind(std::string_view text)
{
    const auto t = csv::trim(text);
    if (t == "ebike" || t == "e-bike")
        return VehicleKind::ebike;
    if (t == "escooter" || t == "e-scooter")
        return VehicleKind::escooter;
    throw Error(ErrorCode::InvalidArgument, "unknown vehicle kind '" + std::string(t) + "'");
}

Timestamp parse_timestamp(std::string_view text)
{
    const auto t = csv::trim(text);
    int dd = 0, mm = 0, hh = 0, mi = 0, ss = 0, yy_hi = 0, yy_lo = 0;
    const bool shape_ok = t.size() == 19 && t[2] == '/' && t[5] == '/' && t[10] == ' ' && t[13] == ':'
        && t[16] == ':' && two_digits(t, 0, dd) && two_digits(t, 3, mm) && two_digits(t, 6, yy_hi)
        && two_digits(t, 8, yy_lo) && two_digits(t, 11, hh) && two_digits(t, 14, mi) && two_digits(t, 17, ss);
    if (!shape_ok)
        throw Error(ErrorCode::MalformedTimestamp, "expected 'dd/mm/yyyy HH:MM:SS', got '" + std::string(t) + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{yy_hi * 100 + yy_lo}, month{static_cast<unsigned>(mm)},
                             day{static_cast<unsigned>(dd)}};
    if (!ymd.ok() || hh > 23 || mi > 59 || ss > 59)
        throw Error(ErrorCode::MalformedTimestamp, "invalid calendar time '" + std::string(t) + "'");
    return sys_days{ymd} + hours{hh} + minutes{mi} + seconds{ss};
}

std::string format_timestamp(Timestamp t)
{
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{t - day_start};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%02u/%02u/%04d %02d:%02d:%02d", static_cast<unsigned>(ymd.day()),
                  static_cast<unsigned>(ymd.month()), static_cast<int>(ymd.year()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::optional<double> compass_bearing(std::string_view token) noexcept
{
    for (std::size_t i = 0; i < kCompass.size(); ++i)
        if (token == kCompass[i])
            return 22.5 * static_cast<double>(i);
    return std::nullopt;
}

bool is_wind_token(std::string_view token) noexcept
{
    return token == "calm" || compass_bearing(token).has_value();
}

const std::vector<std::string>& required_columns(VehicleKind kind)
{
    static const std::vector<std::string> ebike = {"timestamp", "latitude", "longitude",
                                                   "altitude", "speed", "wind_speed",
                                                   "wind_direction", "weather", "temperature"};
    static const std::vector<std::string> escooter = {"timestamp", "latitude", "longitude",
                                                      "speed", "altitude", "soc",
                                                      "wind_speed", "wind_direction", "weather"};
    return kind == VehicleKind::ebike ? ebike : escooter;
}

TripTrace parse_trip_csv(const std::filesystem::path& path, VehicleKind kind)
{
    return parse_trip_csv_text(read_text_file(path), kind);
}

TripTrace parse_trip_csv_text(std::string_view text, VehicleKind kind)
{
    const auto rows = csv::lines(text);
    if (rows.empty())
        throw Error(ErrorCode::MissingColumn, "empty file: no header, expected column 'timestamp'");

    const auto header = csv::split_line(rows.front().text);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i)
        index.emplace(header[i], i);

    const auto& required = required_columns(kind);
    for (const auto& name : required)
        if (!index.contains(name))
            throw Error(ErrorCode::MissingColumn,
                        "column '" + name + "' not in header of " + std::string(to_string(kind)) + " trip file");
    for (const auto& name : header)
        if (std::find(required.begin(), required.end(), name) == required.end()
            && std::find(kOptionalColumns.begin(), kOptionalColumns.end(), name) == kOptionalColumns.end())
            throw Error(ErrorCode::MissingColumn, "unexpected column '" + name + "' in header");

    TripTrace trace;
    trace.kind = kind;
    trace.samples.reserve(rows.size() - 1);

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const auto fields = csv::split_line(row.text);
        if (fields.size() != header.size())
            throw Error(ErrorCode::MissingColumn, "line " + std::to_string(row.number) + ": expected "
                                                      + std::to_string(header.size()) + " fields, got "
                                                      + std::to_string(fields.size()));

        auto field = [&](const std::string& name) -> const std::string& { return fields[index.at(name)]; };
        auto number = [&](const std::string& name) {
            const auto v = parse_double(field(name));
            if (!v || !std::isfinite(*v))
                throw Error(ErrorCode::OutOfRangeValue,
                            where(row.number, name) + ": not a finite number '" + field(name) + "'");
            return *v;
        };
        auto optional_number = [&](const std::string& name) -> std::optional<double> {
            if (!index.contains(name) || field(name).empty())
                return std::nullopt;
            return number(name);
        };
        auto in_range = [&](const std::string& name, double v, double lo, double hi) {
            if (!(v >= lo && v <= hi))
                throw Error(ErrorCode::OutOfRangeValue, where(row.number, name) + ": value " + format_double(v)
                                                            + " outside [" + format_double(lo) + ", "
                                                            + format_double(hi) + "]");
        };

        TripSample s;
        try {
            s.timestamp = parse_timestamp(field("timestamp"));
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedTimestamp, where(row.number, "timestamp") + ": " + e.detail());
        }
        s.latitude = number("latitude");
        in_range("latitude", s.latitude, -90.0, 90.0);
        s.longitude = number("longitude");
        in_range("longitude", s.longitude, -180.0, 180.0);
        s.altitude = number("altitude");
        s.speed = number("speed");
        in_range("speed", s.speed, 0.0, HUGE_VAL);
        s.soc = optional_number("soc");
        if (s.soc)
            in_range("soc", *s.soc, 0.0, 100.0);
        else if (kind == VehicleKind::escooter)
            throw Error(ErrorCode::OutOfRangeValue, where(row.number, "soc") + ": required for e-scooter trips");
        s.wind_speed = number("wind_speed");
        in_range("wind_speed", s.wind_speed, 0.0, HUGE_VAL);
        s.wind_direction = canonical_wind_token(field("wind_direction"));
        if (s.wind_direction.empty())
            throw Error(ErrorCode::UnknownDirection,
                        where(row.number, "wind_direction") + ": unknown token '" + field("wind_direction") + "'");
        s.weather = field("weather");
        if (s.weather.empty())
            throw Error(ErrorCode::OutOfRangeValue, where(row.number, "weather") + ": empty weather token");
        s.temperature = optional_number("temperature");
        s.precipitation = optional_number("precipitation");
        if (s.precipitation)
            in_range("precipitation", *s.precipitation, 0.0, HUGE_VAL);

        if (!trace.samples.empty() && s.timestamp < trace.samples.back().timestamp)
            throw Error(ErrorCode::MalformedTimestamp,
                        where(row.number, "timestamp") + ": earlier than the previous sample");
        trace.samples.push_back(std::move(s));
    }

    check_trace(trace);
    return trace;
}

std::string write_trip_csv(const TripTrace& trace)
{
    auto columns = required_columns(trace.kind);
    auto any = [&](auto member) {
        return std::any_of(trace.samples.begin(), trace.samples.end(),
                           [&](const TripSample& s) { return (s.*member).has_value(); });
    };
    if (trace.kind == VehicleKind::ebike && any(&TripSample::soc))
        columns.emplace_back("soc");
    if (trace.kind == VehicleKind::escooter && any(&TripSample::temperature))
        columns.emplace_back("temperature");
    if (any(&TripSample::precipitation))
        columns.emplace_back("precipitation");

    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& s : trace.samples) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            const auto& c = columns[i];
            std::string v;
            if (c == "timestamp") v = format_timestamp(s.timestamp);
            else if (c == "latitude") v = format_double(s.latitude);
            else if (c == "longitude") v = format_double(s.longitude);
            else if (c == "altitude") v = format_double(s.altitude);
            else if (c == "speed") v = format_double(s.speed);
            else if (c == "soc") v = opt(s.soc);
            else if (c == "wind_speed") v = format_double(s.wind_speed);
            else if (c == "wind_direction") v = s.wind_direction;
            else if (c == "weather") v = csv::escape(s.weather);
            else if (c == "temperature") v = opt(s.temperature);
            else if (c == "precipitation") v = opt(s.precipitation);
            out << (i ? "," : "") << v;
        }
        out << '\n';
    }
    return out.str();
}

std::vector<SocEvent> parse_soc_events(const std::filesystem::path& path)
{
    return parse_soc_events_text(read_text_file(path));
}

std::vector<SocEvent> parse_soc_events_text(std::string_view text)
{
    const auto rows = csv::lines(text);
    if (rows.empty())
        throw Error(ErrorCode::MissingColumn, "empty SoC event file: expected header 'timestamp,soc'");
    const auto header = csv::split_line(rows.front().text);
    if (header.size() != 2 || header[0] != "timestamp" || header[1] != "soc")
        throw Error(ErrorCode::MissingColumn, "SoC event header must be 'timestamp,soc'");

    std::vector<SocEvent> events;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto fields = csv::split_line(rows[r].text);
        if (fields.size() != 2)
            throw Error(ErrorCode::MissingColumn, "line " + std::to_string(rows[r].number) + ": expected 2 fields");
        SocEvent e;
        try {
            e.timestamp = parse_timestamp(fields[0]);
        } catch (const Error& err) {
            throw Error(ErrorCode::MalformedTimestamp, where(rows[r].number, "timestamp") + ": " + err.detail());
        }
        const auto soc = parse_double(fields[1]);
        if (!soc || !(*soc >= 0.0 && *soc <= 100.0))
            throw Error(ErrorCode::OutOfRangeValue, where(rows[r].number, "soc") + ": '" + fields[1]
                                                        + "' is not a percentage in [0, 100]");
        e.soc = *soc;
        events.push_back(e);
    }
    return events;
}

void check_trace(const TripTrace& trace)
{
    if (trace.samples.size() < 2)
        throw Error(ErrorCode::InvalidTrace, "a trip needs at least 2 samples, got "
                                                 + std::to_string(trace.samples.size()));
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const auto& s = trace.samples[i];
        const auto at = "sample " + std::to_string(i);
        if (i > 0 && s.timestamp < trace.samples[i - 1].timestamp)
            throw Error(ErrorCode::InvalidTrace, at + ": timestamps must be non-decreasing");
        if (!(s.latitude >= -90.0 && s.latitude <= 90.0) || !(s.longitude >= -180.0 && s.longitude <= 180.0))
            throw Error(ErrorCode::OutOfRangeValue, at + ": coordinates out of range");
        if (!(s.speed >= 0.0) || !(s.wind_speed >= 0.0) || !std::isfinite(s.altitude))
            throw Error(ErrorCode::OutOfRangeValue, at + ": speed, wind_speed or altitude invalid");
        if (s.soc && !(*s.soc >= 0.0 && *s.soc <= 100.0))
            throw Error(ErrorCode::OutOfRangeValue, at + ": soc outside [0, 100]");
        if (trace.kind == VehicleKind::escooter && !s.soc)
            throw Error(ErrorCode::InvalidTrace, at + ": e-scooter samples must carry soc");
        if (!is_wind_token(s.wind_direction))
            throw Error(ErrorCode::UnknownDirection, at + ": unknown wind direction '" + s.wind_direction + "'");
    }
    if (trace.assist_level && !(*trace.assist_level >= 0.0 && *trace.assist_level <= 1.0))
        throw Error(ErrorCode::OutOfRangeValue, "assist_level outside [0, 1]");
    if (trace.rider) {
        const auto& h = trace.rider->height_range;
        const auto& w = trace.rider->weight_range;
        if (!(h.first > 0.0 && h.first <= h.second) || !(w.first > 0.0 && w.first <= w.second))
            throw Error(ErrorCode::OutOfRangeValue, "rider ranges must be positive with low <= high");
    }
    if (trace.odometer_km && !(*trace.odometer_km >= 0.0))
        throw Error(ErrorCode::OutOfRangeValue, "odometer_km must be non-negative");
}

TripTrace align_soc_events(const TripTrace& trace, const std::vector<SocEvent>& events)
{
    if (events.empty())
        throw Error(ErrorCode::NoOverlap, "no SoC events supplied");
    if (trace.samples.empty())
        throw Error(ErrorCode::InvalidTrace, "trace has no samples");
    for (std::size_t i = 1; i < events.size(); ++i)
        if (events[i].timestamp < events[i - 1].timestamp)
            throw Error(ErrorCode::InvalidArgument, "SoC events must be sorted by timestamp");

    const auto trace_begin = trace.samples.front().timestamp;
    const auto trace_end = trace.samples.back().timestamp;
    if (events.front().timestamp > trace_end || events.back().timestamp < trace_begin)
        throw Error(ErrorCode::NoOverlap, "SoC events [" + format_timestamp(events.front().timestamp) + ", "
                                              + format_timestamp(events.back().timestamp)
                                              + "] do not overlap the trip ["
                                              + format_timestamp(trace_begin) + ", "
                                              + format_timestamp(trace_end) + "]");

    TripTrace out = trace;
    std::size_t next = 0;  // first event strictly after the current sample
    for (auto& s : out.samples) {
        while (next < events.size() && events[next].timestamp <= s.timestamp)
            ++next;
        s.soc = next == 0 ? events.front().soc : events[next - 1].soc;
    }
    return out;
}

std::string_view to_string(Warning::Kind kind) noexcept
{
    switch (kind) {
    case Warning::Kind::gps_jump: return "gps_jump";
    case Warning::Kind::time_gap: return "time_gap";
    case Warning::Kind::soc_increase: return "soc_increase";
    }
    return "unknown";
}

std::vector<Warning> validate_trace(const TripTrace& trace)
{
    std::vector<Warning> warnings;
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const auto& a = trace.samples[i - 1];
        const auto& b = trace.samples[i];
        const double dt = static_cast<double>((b.timestamp - a.timestamp).count());
        const double meters = haversine({a.latitude, a.longitude}, {b.latitude, b.longitude});

        if (meters > 0.0) {
            const double implied_kmh = dt > 0.0 ? meters / dt * 3.6 : HUGE_VAL;
            if (implied_kmh > kMaxPlausibleSpeedKmh)
                warnings.push_back({Warning::Kind::gps_jump, i,
                                    "GPS jump of " + format_double(meters) + " m in " + format_double(dt)
                                        + " s implies " + format_double(implied_kmh) + " km/h"});
        }
        if (dt > kMaxSampleGapS)
            warnings.push_back({Warning::Kind::time_gap, i, "gap of " + format_double(dt) + " s between samples"});
        // SoC is displayed in whole percent, so a one-step rise is already a
        // charging artifact.
        if (a.soc && b.soc && *b.soc - *a.soc >= kSocIncreaseTolerancePct)
            warnings.push_back({Warning::Kind::soc_increase, i,
                                "soc rose from " + format_double(*a.soc) + " to " + format_double(*b.soc)});
    }
    return warnings;
}

nlohmann::json to_json(const TripTrace& trace)
{
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

    json samples = json::array();
    for (const auto& s : trace.samples) {
        samples.push_back({
            {"timestamp", format_timestamp(s.timestamp)},
            {"latitude_deg", s.latitude},
            {"longitude_deg", s.longitude},
            {"altitude_m", s.altitude},
            {"speed_kmh", s.speed},
            {"soc_pct", opt(s.soc)},
            {"wind_speed_kmh", s.wind_speed},
            {"wind_direction", s.wind_direction},
            {"weather", s.weather},
            {"temperature_c", opt(s.temperature)},
            {"precipitation_mm", opt(s.precipitation)},
        });
    }
    json j = {
        {"format_version", 1},
        {"kind", to_string(trace.kind)},
        {"assist_level", opt(trace.assist_level)},
        {"odometer_km", opt(trace.odometer_km)},
        {"voltage_endpoints", nullptr},
        {"rider", nullptr},
        {"samples", std::move(samples)},
    };
    if (trace.voltage_endpoints)
        j["voltage_endpoints"] = {{"v_start_v", trace.voltage_endpoints->v_start},
                                  {"v_end_v", trace.voltage_endpoints->v_end}};
    if (trace.rider)
        j["rider"] = {{"height_range_cm", {trace.rider->height_range.first, trace.rider->height_range.second}},
                      {"weight_range_kg", {trace.rider->weight_range.first, trace.rider->weight_range.second}}};
    return j;
}

TripTrace trace_from_json(const nlohmann::json& j)
{
    auto opt = [](const nlohmann::json& o, const char* key) -> std::optional<double> {
        if (!o.contains(key) || o.at(key).is_null())
            return std::nullopt;
        return o.at(key).get<double>();
    };
    try {
        if (j.at("format_version").get<int>() != 1)
            throw Error(ErrorCode::VersionMismatch, "unsupported trace format_version");
        TripTrace trace;
        trace.kind = parse_vehicle_kind(j.at("kind").get<std::string>());
        trace.assist_level = opt(j, "assist_level");
        trace.odometer_km = opt(j, "odometer_km");
        if (j.contains("voltage_endpoints") && !j.at("voltage_endpoints").is_null()) {
            const auto& v = j.at("voltage_endpoints");
            trace.voltage_endpoints = VoltageEndpoints{v.at("v_start_v").get<double>(), v.at("v_end_v").get<double>()};
        }
        if (j.contains("rider") && !j.at("rider").is_null()) {
            const auto& r = j.at("rider");
            const auto h = r.at("height_range_cm").get<std::vector<double>>();
            const auto w = r.at("weight_range_kg").get<std::vector<double>>();
            if (h.size() != 2 || w.size() != 2)
                throw Error(ErrorCode::OutOfRangeValue, "rider ranges must have two entries");
            trace.rider = RiderProfile{{h[0], h[1]}, {w[0], w[1]}};
        }
        for (const auto& s : j.at("samples")) {
            TripSample sample;
            sample.timestamp = parse_timestamp(s.at("timestamp").get<std::string>());
            sample.latitude = s.at("latitude_deg").get<double>();
            sample.longitude = s.at("longitude_deg").get<double>();
            sample.altitude = s.at("altitude_m").get<double>();
            sample.speed = s.at("speed_kmh").get<double>();
            sample.soc = opt(s, "soc_pct");
            sample.wind_speed = s.at("wind_speed_kmh").get<double>();
            sample.wind_direction = canonical_wind_token(s.at("wind_direction").get<std::string>());
            if (sample.wind_direction.empty())
                throw Error(ErrorCode::UnknownDirection, "unknown wind direction in trace JSON");
            sample.weather = s.at("weather").get<std::string>();
            sample.temperature = opt(s, "temperature_c");
            sample.precipitation = opt(s, "precipitation_mm");
            trace.samples.push_back(std::move(sample));
        }
        check_trace(trace);
        return trace;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MissingColumn, std::string("malformed trace JSON: ") + e.what());
    }
}

} // namespace emob
