#ifndef EMOB_BATTERY_HPP
#define EMOB_BATTERY_HPP

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace emob {

// Open-circuit voltage of one cell as a function of state of charge:
//
//   V(soc) = k0 + k1*soc + k2/soc + k3*ln(soc) + k4*ln(1 - soc)
//
// scaled by the number of cells in series. soc is a fraction.
struct OcvCurve {
    Eigen::Matrix<double, 5, 1> k = Eigen::Matrix<double, 5, 1>::Zero();  // V
    double soc_lo = 0.02;
    double soc_hi = 0.98;
    int cells_in_series = 1;
};

struct BatterySpec {
    double capacity_wh = 0.0;
    int cells_in_series = 1;
};

inline constexpr BatterySpec kEbikeBattery{450.0, 1};
inline constexpr BatterySpec kEscooterBattery{446.0, 1};

inline constexpr double kSocClipLo = 0.02;
inline constexpr double kSocClipHi = 0.98;

// Basis row {1, soc, 1/soc, ln soc, ln(1-soc)}.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, 5> ocv_basis(Scalar soc)
{
    using std::log;
    Eigen::Matrix<Scalar, 1, 5> row;
    row << Scalar(1), soc, Scalar(1) / soc, log(soc), log(Scalar(1) - soc);
    return row;
}

// Single-cell evaluation without domain checks.
template <typename Scalar>
Scalar ocv_cell_voltage(const Eigen::Matrix<Scalar, 5, 1>& k, Scalar soc)
{
    return ocv_basis(soc) * k;
}

// dV/dsoc of one cell.
double ocv_cell_slope(const Eigen::Matrix<double, 5, 1>& k, double soc) noexcept;

// Pack voltage; throws DomainError outside [soc_lo, soc_hi].
double ocv_voltage(const OcvCurve& curve, double soc);

struct OcvPoint {
    double soc;      // fraction
    double voltage;  // V, single cell
};

// Linear least squares over the five basis functions via column-pivoted QR on
// the column-equilibrated design matrix. The domain is the input soc span
// clipped to [kSocClipLo, kSocClipHi].
//
// Throws RankDeficient when the design has rank < 5 (fewer than five distinct
// abscissae) and NonMonotoneFit when the fitted curve is not strictly
// increasing on the domain.
OcvCurve fit_ocv(std::span<const OcvPoint> points, int cells_in_series = 1);

// True when dV/dsoc > 0 on a dense grid over [soc_lo, soc_hi].
bool is_strictly_increasing(const OcvCurve& curve);

// Bisection on [soc_lo, soc_hi] until the pack-voltage residual is below
// 1e-9 V or the bracket collapses to machine precision.
double voltage_to_soc(const OcvCurve& curve, double voltage);

// (soc(v_start) - soc(v_end)) * capacity. Throws NegativeDrop when
// v_end > v_start and propagates OutOfRange from the inversion.
double trip_energy(double v_start, double v_end, const OcvCurve& curve, const BatterySpec& spec);

// Same contract when the state of charge is reported directly (fractions).
double soc_drop_energy(double soc_start, double soc_end, const BatterySpec& spec);

// Wh/km; throws DegenerateTrip when distance_km <= 0.
double energy_efficiency(double energy_wh, double distance_km);

std::vector<OcvPoint> parse_ocv_points_text(std::string_view text);
std::vector<OcvPoint> parse_ocv_points(const std::filesystem::path& path);

nlohmann::json to_json(const OcvCurve& curve);
OcvCurve ocv_curve_from_json(const nlohmann::json& j);

} // namespace emob

#endif // EMOB_BATTERY_HPP
