#include "emob/tripmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "emob/error.hpp"

namespace emob {

double haversine(GeoPoint a, GeoPoint b) noexcept
{
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = a.latitude * deg;
    const double phi2 = b.latitude * deg;
    const double dphi = (b.latitude - a.latitude) * deg;
    const double dlambda = (b.longitude - a.longitude) * deg;
    const double h = std::sin(dphi / 2) * std::sin(dphi / 2)
        + std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<double> smooth_altitude(std::span<const double> altitude, std::size_t window)
{
    if (window == 0)
        throw Error(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
    const std::size_t n = altitude.size();
    const std::size_t half = window / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        double sum = 0.0;
        for (std::size_t k = i - h; k <= i + h; ++k)
            sum += altitude[k];
        out[i] = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

double total_ascent(std::span<const double> profile) noexcept
{
    double ascent = 0.0;
    for (std::size_t i = 1; i < profile.size(); ++i)
        ascent += std::max(0.0, profile[i] - profile[i - 1]);
    return ascent;
}

TripSummary summarize(const TripTrace& trace, std::size_t smoothing_window)
{
    if (smoothing_window == 0)
        throw Error(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
    check_trace(trace);

    std::vector<const TripSample*> samples;
    samples.reserve(trace.samples.size());
    for (const auto& s : trace.samples)
        if (samples.empty() || !(*samples.back() == s))
            samples.push_back(&s);

    TripSummary out;
    out.kind = trace.kind;
    out.assist_level = trace.assist_level;

    double meters = 0.0;
    std::vector<double> altitude;
    altitude.reserve(samples.size());
    double moving_speed_sum = 0.0;
    std::size_t moving = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = *samples[i];
        if (i > 0)
            meters += haversine({samples[i - 1]->latitude, samples[i - 1]->longitude}, {s.latitude, s.longitude});
        altitude.push_back(s.altitude);
        if (s.speed > 0.0) {
            moving_speed_sum += s.speed;
            ++moving;
        }
    }

    out.distance_km = meters / 1000.0;
    if (trace.kind == VehicleKind::ebike && trace.odometer_km)
        out.distance_km = *trace.odometer_km;
    out.duration_s = static_cast<double>((samples.back()->timestamp - samples.front()->timestamp).count());

    if (!(out.distance_km > 0.0))
        throw Error(ErrorCode::DegenerateTrip, "trip distance is zero");
    if (!(out.duration_s > 0.0))
        throw Error(ErrorCode::DegenerateTrip, "trip duration is zero");

    const auto smoothed = smooth_altitude(altitude, smoothing_window);
    out.total_ascent_m = total_ascent(smoothed);
    std::vector<double> reversed(smoothed.rbegin(), smoothed.rend());
    out.total_descent_m = total_ascent(reversed);
    out.altitude_diff_m = smoothed.back() - smoothed.front();

    out.avg_speed_kmh = moving > 0 ? moving_speed_sum / static_cast<double>(moving)
                                   : out.distance_km / (out.duration_s / 3600.0);

    const double rise = trace.kind == VehicleKind::ebike ? out.total_ascent_m : out.altitude_diff_m;
    out.avg_slope_pct = 100.0 * rise / (out.distance_km * 1000.0);
    return out;
}

nlohmann::json to_json(const TripSummary& summary)
{
    nlohmann::json j = {
        {"kind", to_string(summary.kind)},
        {"distance_km", summary.distance_km},
        {"avg_speed_kmh", summary.avg_speed_kmh},
        {"total_ascent_m", summary.total_ascent_m},
        {"total_descent_m", summary.total_descent_m},
        {"altitude_diff_m", summary.altitude_diff_m},
        {"avg_slope_pct", summary.avg_slope_pct},
        {"duration_s", summary.duration_s},
        {"assist_level", nullptr},
    };
    if (summary.assist_level)
        j["assist_level"] = *summary.assist_level;
    return j;
}

} // namespace emob
