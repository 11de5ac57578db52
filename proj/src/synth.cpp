#include "emob/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <boost/math/special_functions/erf.hpp>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/rng.hpp"

namespace emob {

namespace {

std::vector<double> column_values(const Eigen::MatrixXd& m, Eigen::Index c)
{
    return {m.col(c).data(), m.col(c).data() + m.rows()};
}

// Linear interpolation between order statistics, u in [0, 1].
double empirical_quantile(const std::vector<double>& sorted, double u)
{
    const double pos = std::clamp(u, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double snap(const std::vector<double>& sorted, double v)
{
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    if (it == sorted.begin())
        return *it;
    if (it == sorted.end())
        return sorted.back();
    return (v - *(it - 1) <= *it - v) ? *(it - 1) : *it;
}

} // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw Error(ErrorCode::DomainError, "normal quantile needs p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

std::vector<bool> detect_discrete_columns(const Eigen::MatrixXd& data, std::span<const std::string> names)
{
    static const std::set<std::string> categorical = {"weather_code", "wind_we", "wind_ns"};
    std::vector<bool> out(static_cast<std::size_t>(data.cols()), false);
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        const auto idx = static_cast<std::size_t>(c);
        if (idx < names.size() && categorical.contains(names[idx])) {
            out[idx] = true;
            continue;
        }
        std::set<double> distinct;
        bool integral = true;
        for (Eigen::Index r = 0; r < data.rows() && integral; ++r) {
            integral = data(r, c) == std::round(data(r, c));
            distinct.insert(data(r, c));
        }
        out[idx] = integral && distinct.size() <= 32;
    }
    return out;
}

Eigen::MatrixXd normal_scores(const Eigen::MatrixXd& data)
{
    const Eigen::Index n = data.rows();
    Eigen::MatrixXd z(n, data.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return data(a, c) < data(b, c); });
        if (data(order.front(), c) == data(order.back(), c)) {
            z.col(c).setZero();
            continue;
        }
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && data(order[j + 1], c) == data(order[i], c))
                ++j;
            const double avg_rank = 0.5 * static_cast<double>(i + j);  // 0-based
            const double score = normal_quantile((avg_rank + 0.5) / static_cast<double>(n));
            for (std::size_t k = i; k <= j; ++k)
                z(order[k], c) = score;
            i = j + 1;
        }
    }
    return z;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& data)
{
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    const Eigen::VectorXd sd = centered.colwise().norm().transpose();
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(data.cols(), data.cols());
    for (Eigen::Index i = 0; i < data.cols(); ++i)
        for (Eigen::Index j = i + 1; j < data.cols(); ++j) {
            const double denom = sd(i) * sd(j);
            const double r = denom > 0.0 ? centered.col(i).dot(centered.col(j)) / denom : 0.0;
            c(i, j) = c(j, i) = std::clamp(r, -1.0, 1.0);
        }
    return c;
}

Eigen::MatrixXd nearest_correlation_psd(const Eigen::MatrixXd& c, double floor)
{
    const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success)
        throw Error(ErrorCode::DegenerateInput, "correlation eigen-decomposition failed");
    if (eig.eigenvalues().minCoeff() >= floor)
        return sym;
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd repaired = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::VectorXd inv_sd = repaired.diagonal().cwiseSqrt().cwiseInverse();
    repaired = inv_sd.asDiagonal() * repaired * inv_sd.asDiagonal();
    repaired = 0.5 * (repaired + repaired.transpose());
    repaired.diagonal().setOnes();
    return repaired;
}

CopulaModel fit_copula(const Eigen::MatrixXd& data, std::vector<std::string> names)
{
    auto discrete = detect_discrete_columns(data, names);
    return fit_copula(data, std::move(names), std::move(discrete));
}

CopulaModel fit_copula(const Eigen::MatrixXd& data, std::vector<std::string> names, std::vector<bool> discrete)
{
    if (data.rows() < 5)
        throw Error(ErrorCode::DegenerateInput, "copula fit needs at least 5 rows, got " + std::to_string(data.rows()));
    if (data.cols() < 1)
        throw Error(ErrorCode::DegenerateInput, "copula fit needs at least one column");
    if (!data.allFinite())
        throw Error(ErrorCode::NonFiniteInput, "copula input contains NaN or infinity");
    if (names.empty())
        for (Eigen::Index c = 0; c < data.cols(); ++c)
            names.push_back("c" + std::to_string(c));
    if (static_cast<Eigen::Index>(names.size()) != data.cols()
        || static_cast<Eigen::Index>(discrete.size()) != data.cols())
        throw Error(ErrorCode::SchemaMismatch, "column names / discrete flags do not match the data width");

    CopulaModel model;
    model.names = std::move(names);
    model.discrete = std::move(discrete);
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
        auto values = column_values(data, c);
        std::sort(values.begin(), values.end());
        model.marginals.push_back(std::move(values));
    }
    model.correlation = nearest_correlation_psd(correlation_matrix(normal_scores(data)));
    return model;
}

Eigen::MatrixXd sample(const CopulaModel& model, Eigen::Index n, std::uint64_t seed)
{
    if (n < 1)
        throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
    const auto p = static_cast<Eigen::Index>(model.marginals.size());

    // Factor R = V diag(lambda) V^T; z = V sqrt(lambda) e works for
    // semidefinite R where Cholesky may not.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.correlation);
    const Eigen::MatrixXd factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    CounterRng rng = CounterRng(seed).derive("copula-sample");
    Eigen::MatrixXd e(p, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < p; ++c)
            e(c, r) = rng.normal();
    const Eigen::MatrixXd z = factor * e;

    Eigen::MatrixXd out(n, p);
    for (Eigen::Index c = 0; c < p; ++c) {
        const auto& sorted = model.marginals[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < n; ++r) {
            double v = empirical_quantile(sorted, normal_cdf(z(c, r)));
            if (model.discrete[static_cast<std::size_t>(c)])
                v = snap(sorted, v);
            out(r, c) = v;
        }
    }
    return out;
}

double ks_statistic(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty())
        throw Error(ErrorCode::EmptyInput, "KS statistic needs two non-empty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    const auto nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t)
            ++i;
        while (j < y.size() && y[j] <= t)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

QualityBreakdown quality_breakdown(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic)
{
    if (real.cols() != synthetic.cols())
        throw Error(ErrorCode::SchemaMismatch, "real and synthetic data have different column counts");
    if (real.rows() == 0 || synthetic.rows() == 0 || real.cols() == 0)
        throw Error(ErrorCode::EmptyInput, "quality score needs non-empty tables");

    QualityBreakdown q;
    for (Eigen::Index c = 0; c < real.cols(); ++c)
        q.mean_ks += ks_statistic(column_values(real, c), column_values(synthetic, c));
    q.mean_ks /= static_cast<double>(real.cols());

    const Eigen::MatrixXd cr = correlation_matrix(real);
    const Eigen::MatrixXd cs = correlation_matrix(synthetic);
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < real.cols(); ++i)
        for (Eigen::Index j = i + 1; j < real.cols(); ++j) {
            q.mean_correlation_gap += std::abs(cr(i, j) - cs(i, j));
            ++pairs;
        }
    if (pairs > 0)
        q.mean_correlation_gap /= static_cast<double>(pairs);

    q.score = std::clamp(100.0 * (1.0 - 0.5 * (q.mean_ks + q.mean_correlation_gap)), 0.0, 100.0);
    return q;
}

double quality_score(const Eigen::MatrixXd& real, const Eigen::MatrixXd& synthetic)
{
    return quality_breakdown(real, synthetic).score;
}

nlohmann::json to_json(const CopulaModel& model)
{
    const auto& c = model.correlation;
    return {
        {"format_version", 1},
        {"names", model.names},
        {"discrete", model.discrete},
        {"marginals", model.marginals},
        {"correlation", std::vector<double>(c.data(), c.data() + c.size())},
    };
}

CopulaModel copula_from_json(const nlohmann::json& j)
{
    try {
        CopulaModel m;
        m.names = j.at("names").get<std::vector<std::string>>();
        m.discrete = j.at("discrete").get<std::vector<bool>>();
        m.marginals = j.at("marginals").get<std::vector<std::vector<double>>>();
        const auto flat = j.at("correlation").get<std::vector<double>>();
        const auto p = static_cast<Eigen::Index>(m.names.size());
        if (m.discrete.size() != m.names.size() || m.marginals.size() != m.names.size()
            || static_cast<Eigen::Index>(flat.size()) != p * p)
            throw Error(ErrorCode::SchemaMismatch, "copula JSON arrays have inconsistent sizes");
        for (const auto& col : m.marginals)
            if (col.empty() || !std::is_sorted(col.begin(), col.end()))
                throw Error(ErrorCode::SchemaMismatch, "copula marginals must be non-empty and sorted");
        m.correlation = Eigen::Map<const Eigen::MatrixXd>(flat.data(), p, p);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("malformed copula JSON: ") + e.what());
    }
}

} // namespace emob
