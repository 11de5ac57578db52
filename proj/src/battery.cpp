#include "emob/battery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "emob/error.hpp"
#include "emob/io.hpp"

namespace emob {

namespace {

constexpr int kMonotoneGrid = 4096;

} // namespace

double ocv_cell_slope(const Eigen::Matrix<double, 5, 1>& k, double soc) noexcept
{
    return k(1) - k(2) / (soc * soc) + k(3) / soc - k(4) / (1.0 - soc);
}

double ocv_voltage(const OcvCurve& curve, double soc)
{
    if (!(soc >= curve.soc_lo && soc <= curve.soc_hi))
        throw Error(ErrorCode::DomainError, "soc " + format_double(soc) + " outside curve domain ["
                                                + format_double(curve.soc_lo) + ", "
                                                + format_double(curve.soc_hi) + "]");
    return curve.cells_in_series * ocv_cell_voltage(curve.k, soc);
}

bool is_strictly_increasing(const OcvCurve& curve)
{
    for (int i = 0; i <= kMonotoneGrid; ++i) {
        const double soc = curve.soc_lo + (curve.soc_hi - curve.soc_lo) * i / kMonotoneGrid;
        if (!(ocv_cell_slope(curve.k, soc) > 0.0))
            return false;
    }
    return true;
}

OcvCurve fit_ocv(std::span<const OcvPoint> points, int cells_in_series)
{
    if (cells_in_series < 1)
        throw Error(ErrorCode::InvalidArgument, "cells_in_series must be >= 1");
    if (points.size() < 5)
        throw Error(ErrorCode::RankDeficient, "need at least 5 points to determine 5 coefficients, got "
                                                  + std::to_string(points.size()));

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::Matrix<double, Eigen::Dynamic, 5> design(n, 5);
    Eigen::VectorXd voltage(n);
    double lo = 1.0, hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        if (!(p.soc > 0.0 && p.soc < 1.0) || !std::isfinite(p.voltage))
            throw Error(ErrorCode::DomainError, "fit points need soc in (0, 1) and finite voltage");
        design.row(i) = ocv_basis(p.soc);
        voltage(i) = p.voltage;
        lo = std::min(lo, p.soc);
        hi = std::max(hi, p.soc);
    }

    const Eigen::Matrix<double, 1, 5> scale = design.colwise().norm();
    const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(1e-12);
    if (qr.rank() < 5)
        throw Error(ErrorCode::RankDeficient, "OCV design matrix has rank " + std::to_string(qr.rank())
                                                  + " < 5; soc values must be distinct");

    OcvCurve curve;
    curve.k = (qr.solve(voltage).array() / scale.transpose().array()).matrix();
    curve.soc_lo = std::max(lo, kSocClipLo);
    curve.soc_hi = std::min(hi, kSocClipHi);
    curve.cells_in_series = cells_in_series;
    if (!(curve.soc_lo < curve.soc_hi))
        throw Error(ErrorCode::RankDeficient, "fit points do not span an interval inside the clip range");
    if (!is_strictly_increasing(curve))
        throw Error(ErrorCode::NonMonotoneFit, "fitted OCV curve is not strictly increasing on its domain");
    return curve;
}

double voltage_to_soc(const OcvCurve& curve, double voltage)
{
    double lo = curve.soc_lo;
    double hi = curve.soc_hi;
    const double v_lo = ocv_voltage(curve, lo);
    const double v_hi = ocv_voltage(curve, hi);
    if (!(voltage >= v_lo && voltage <= v_hi))
        throw Error(ErrorCode::OutOfRange, "voltage " + format_double(voltage) + " V outside ["
                                               + format_double(v_lo) + ", " + format_double(v_hi) + "]");
    if (voltage == v_lo)
        return lo;
    if (voltage == v_hi)
        return hi;

    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double residual = curve.cells_in_series * ocv_cell_voltage(curve.k, mid) - voltage;
        if (residual == 0.0 || (std::abs(residual) < 1e-12))
            break;
        if (residual < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi)
            break;
    }
    return mid;
}

double trip_energy(double v_start, double v_end, const OcvCurve& curve, const BatterySpec& spec)
{
    if (v_end > v_start)
        throw Error(ErrorCode::NegativeDrop, "end voltage " + format_double(v_end) + " V exceeds start voltage "
                                                 + format_double(v_start) + " V");
    return soc_drop_energy(voltage_to_soc(curve, v_start), voltage_to_soc(curve, v_end), spec);
}

double soc_drop_energy(double soc_start, double soc_end, const BatterySpec& spec)
{
    if (!(spec.capacity_wh > 0.0))
        throw Error(ErrorCode::InvalidArgument, "battery capacity must be positive");
    if (soc_end > soc_start)
        throw Error(ErrorCode::NegativeDrop, "state of charge rose during the trip");
    return (soc_start - soc_end) * spec.capacity_wh;
}

double energy_efficiency(double energy_wh, double distance_km)
{
    if (!(distance_km > 0.0))
        throw Error(ErrorCode::DegenerateTrip, "distance must be positive, got " + format_double(distance_km));
    return energy_wh / distance_km;
}

std::vector<OcvPoint> parse_ocv_points_text(std::string_view text)
{
    const auto rows = csv::lines(text);
    if (rows.empty())
        throw Error(ErrorCode::MissingColumn, "empty OCV file: expected header 'soc,voltage'");
    const auto header = csv::split_line(rows.front().text);
    if (header.size() != 2 || header[0] != "soc" || header[1] != "voltage")
        throw Error(ErrorCode::MissingColumn, "OCV point header must be 'soc,voltage'");
    std::vector<OcvPoint> points;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = csv::split_line(rows[r].text);
        const auto soc = f.size() == 2 ? parse_double(f[0]) : std::nullopt;
        const auto v = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
        if (!soc || !v)
            throw Error(ErrorCode::OutOfRangeValue, "line " + std::to_string(rows[r].number)
                                                        + ": expected two numbers 'soc,voltage'");
        points.push_back({*soc, *v});
    }
    return points;
}

std::vector<OcvPoint> parse_ocv_points(const std::filesystem::path& path)
{
    return parse_ocv_points_text(read_text_file(path));
}

nlohmann::json to_json(const OcvCurve& curve)
{
    return {
        {"k0", curve.k(0)}, {"k1", curve.k(1)}, {"k2", curve.k(2)}, {"k3", curve.k(3)}, {"k4", curve.k(4)},
        {"soc_lo", curve.soc_lo}, {"soc_hi", curve.soc_hi}, {"cells_in_series", curve.cells_in_series},
    };
}

OcvCurve ocv_curve_from_json(const nlohmann::json& j)
{
    try {
        OcvCurve c;
        for (int i = 0; i < 5; ++i)
            c.k(i) = j.at("k" + std::to_string(i)).get<double>();
        c.soc_lo = j.at("soc_lo").get<double>();
        c.soc_hi = j.at("soc_hi").get<double>();
        c.cells_in_series = j.at("cells_in_series").get<int>();
        if (!(c.soc_lo > 0.0 && c.soc_lo < c.soc_hi && c.soc_hi < 1.0) || c.cells_in_series < 1)
            throw Error(ErrorCode::DomainError, "OCV curve domain must lie inside (0, 1)");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MissingColumn, std::string("malformed OCV curve JSON: ") + e.what());
    }
}

} // namespace emob
