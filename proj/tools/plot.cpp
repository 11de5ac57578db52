#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cli.hpp"
#include "emob/error.hpp"
#include "emob/io.hpp"

namespace emob::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 60.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;

constexpr const char* kSpeedColor = "#2ca02c";
constexpr const char* kSocColor = "#ff7f0e";

std::string fmt(double v, const char* spec = "%.1f")
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// Upper axis bound rounded up to a multiple of `step`.
double nice_max(double v, double step) { return std::max(step, std::ceil(v / step) * step); }

} // namespace

PlotFiles render_trip_plot(const TripTrace& trace)
{
    if (trace.samples.empty())
        throw Error(ErrorCode::InvalidTrace, "cannot plot an empty trace");
    const bool has_soc = std::all_of(trace.samples.begin(), trace.samples.end(),
                                     [](const TripSample& s) { return s.soc.has_value(); });
    if (!has_soc && trace.kind == VehicleKind::escooter)
        throw Error(ErrorCode::MissingSoc, "e-scooter trace has samples without soc");

    const auto t0 = trace.samples.front().timestamp;
    std::vector<double> t, speed, soc;
    for (const auto& s : trace.samples) {
        t.push_back(static_cast<double>((s.timestamp - t0).count()));
        speed.push_back(s.speed);
        soc.push_back(s.soc.value_or(0.0));
    }

    PlotFiles out;
    out.has_soc = has_soc;

    std::ostringstream csv;
    csv << "elapsed_s,speed_kmh" << (has_soc ? ",soc_pct" : "") << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        csv << format_double(t[i]) << ',' << format_double(speed[i]);
        if (has_soc)
            csv << ',' << format_double(soc[i]);
        csv << '\n';
    }
    out.csv = csv.str();

    const double t_max = std::max(1.0, t.back());
    const double v_max = nice_max(*std::max_element(speed.begin(), speed.end()), 5.0);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + plot_w * x / t_max; };
    auto py_speed = [&](double v) { return kTop + plot_h * (1.0 - v / v_max); };
    auto py_soc = [&](double s) { return kTop + plot_h * (1.0 - s / 100.0); };

    auto polyline = [&](const std::vector<double>& ys, auto&& map_y, const char* color) {
        std::ostringstream line;
        line << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i)
            line << (i ? " " : "") << fmt(px(t[i]), "%.2f") << ',' << fmt(map_y(ys[i]), "%.2f");
        line << "\"/>\n";
        return line.str();
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "  <g stroke=\"black\" stroke-width=\"1\">\n"
        << "    <line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h << "\"/>\n"
        << "    <line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
        << kTop + plot_h << "\"/>\n";
    if (has_soc)
        svg << "    <line x1=\"" << kLeft + plot_w << "\" y1=\"" << kTop << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
            << kTop + plot_h << "\"/>\n";
    svg << "  </g>\n";

    svg << "  <g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double frac = i / 5.0;
        const double y = kTop + plot_h * (1.0 - frac);
        svg << "    <text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\" fill=\"" << kSpeedColor
            << "\">" << fmt(v_max * frac, "%.0f") << "</text>\n";
        if (has_soc)
            svg << "    <text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << fmt(y + 4) << "\" fill=\"" << kSocColor << "\">"
                << fmt(100.0 * frac, "%.0f") << "</text>\n";
        svg << "    <text x=\"" << fmt(kLeft + plot_w * frac) << "\" y=\"" << kTop + plot_h + 16
            << "\" text-anchor=\"middle\">" << fmt(t_max * frac, "%.0f") << "</text>\n";
    }
    svg << "    <text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\">elapsed time (s)</text>\n";
    svg << "    <text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 16 " << kTop + plot_h / 2
        << ")\" text-anchor=\"middle\" fill=\"" << kSpeedColor << "\">speed (km/h)</text>\n";
    if (has_soc)
        svg << "    <text x=\"" << kWidth - 14 << "\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(90 "
            << kWidth - 14 << ' ' << kTop + plot_h / 2 << ")\" text-anchor=\"middle\" fill=\"" << kSocColor
            << "\">SoC (%)</text>\n";
    svg << "  </g>\n";

    svg << polyline(speed, py_speed, kSpeedColor);
    if (has_soc)
        svg << polyline(soc, py_soc, kSocColor);
    svg << "</svg>\n";
    out.svg = svg.str();
    return out;
}

} // namespace emob::cli
