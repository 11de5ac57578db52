#ifndef EMOB_SYNTH_HPP
#define EMOB_SYNTH_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace emob {

// Gaussian copula over empirical marginals.
struct CopulaModel {
    std::vector<std::string> names;
    std::vector<std::vector<double>> marginals;  // sorted training values per column
    std::vector<bool> discrete;                  // snap samples to observed values
    Eigen::MatrixXd correlation;                 // latent normal-scores correlation, PSD, unit diagonal
};

inline constexpr double kPsdEigenFloor = 1e-10;

// Columns whose samples are snapped to the nearest observed value: any name
// in {weather_code, wind_we, wind_ns}, plus integer-valued columns with at
// most 32 distinct values.
std::vector<bool> detect_discrete_columns(const Eigen::MatrixXd& data, std::span<const std::string> names);

// Standard normal CDF and quantile.
double normal_cdf(double z);
double normal_quantile(double p);

// Rank-based normal scores: (average rank + 0.5) / n mapped through the
// normal quantile. Constant columns map to zero.
Eigen::MatrixXd normal_scores(const Eigen::MatrixXd& data);

// Pearson correlation; constant columns get zero off-diagonal entries.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& data);

// Symmetric eigen-decomposition, eigenvalues clipped at `floor`, then
// rescaled to unit diagonal.
Eigen::MatrixXd nearest_correlation_psd(const Eigen::MatrixXd& c, double floor = kPsdEigenFloor);

// Throws DegenerateInput for fewer than 5 rows, NonFiniteInput for NaN/inf.
CopulaModel fit_copula(const Eigen::MatrixXd& data, std::vector<std::string> names = {});
CopulaModel fit_copula(const Eigen::MatrixXd& data, std::vector<std::string> names, std::vector<bool> discrete);

// n rows drawn deterministically from `seed`. Each value is an interpolated
// quantile of its training column, so it stays inside [min, max].
Eigen::MatrixXd sample(const CopulaModel& model, Eigen::Index n, std::uint64_t seed);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct QualityBreakdown {
    double mean_ks = 0.0;
    double mean_correlation_gap = 0.0;  // over column pairs i < j
    double score = 0.0;                 // percent
};

// 100 * (1 - (mean KS + mean |corr_real - corr_synth|) / 2), clamped to
// [0, 100]. Throws SchemaMismatch when the column counts differ.
QualityBreakdown quality_breakdown(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic);
double quality_score(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic);

nlohmann::json to_json(const CopulaModel& model);
CopulaModel copula_from_json(const nlohmann::json& j);

} // namespace emob

#endif // EMOB_SYNTH_HPP
