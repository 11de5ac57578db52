#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/rng.hpp"
#include "emob/synth.hpp"

using namespace emob;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an emob::Error");
    return ErrorCode::Io;
}

std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index c) { return {m.col(c).data(), m.col(c).data() + m.rows()}; }

// Skewed, correlated, partly discrete columns.
Eigen::MatrixXd trip_like(Eigen::Index n, std::uint64_t seed)
{
    CounterRng rng(seed);
    Eigen::MatrixXd m(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double speed = rng.uniform(8, 25);
        const double slope = std::abs(rng.normal()) * 1.5;
        m(i, 0) = speed;
        m(i, 1) = slope;
        m(i, 2) = static_cast<double>(rng.uniform_index(3));
        m(i, 3) = 2.0 + 0.02 * speed * speed + 1.5 * slope + 0.5 * rng.normal();
    }
    return m;
}

} // namespace

TEST_CASE("normal helpers")
{
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    for (double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("ks statistic")
{
    const std::vector<double> a = {1, 2, 3, 4};
    CHECK(ks_statistic(a, a) == 0.0);
    const std::vector<double> b = {10, 11, 12};
    CHECK(ks_statistic(a, b) == 1.0);
    const std::vector<double> c = {1, 2, 30, 40};
    CHECK(ks_statistic(a, c) == doctest::Approx(0.5));
}

TEST_CASE("constant column is reproduced exactly")
{
    Eigen::MatrixXd m = trip_like(50, 1);
    m.col(2).setConstant(4.25);
    const auto model = fit_copula(m);
    const auto s = sample(model, 500, 3);
    CHECK((s.col(2).array() == 4.25).all());
}

TEST_CASE("latent correlation")
{
    CounterRng rng(5);
    Eigen::MatrixXd m(1000, 3);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, 0) = rng.uniform();
        m(i, 1) = 3.0 * m(i, 0) + 1.0;
        m(i, 2) = rng.uniform();
    }
    const auto model = fit_copula(m);
    CHECK(model.correlation(0, 1) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(model.correlation(0, 2)) < 0.1);
    CHECK(std::abs(model.correlation(1, 2)) < 0.1);

    const Eigen::MatrixXd& c = model.correlation;
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("PSD repair")
{
    Eigen::Matrix3d bad;
    bad << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> before{Eigen::MatrixXd(bad)};
    REQUIRE(before.eigenvalues().minCoeff() < 0.0);
    const Eigen::MatrixXd fixed = nearest_correlation_psd(bad);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> after(fixed);
    CHECK(after.eigenvalues().minCoeff() > -1e-12);
    CHECK((fixed.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((fixed - fixed.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sampling")
{
    const auto real = trip_like(400, 7);
    const auto model = fit_copula(real, {"avg_speed_kmh", "avg_slope_pct", "weather_code", "label_wh_per_km"});
    CHECK(model.discrete == std::vector<bool>{false, false, true, false});

    const auto s = sample(model, 10000, 11);
    REQUIRE(s.rows() == 10000);
    for (Eigen::Index c = 0; c < real.cols(); ++c) {
        CHECK(s.col(c).minCoeff() >= real.col(c).minCoeff());
        CHECK(s.col(c).maxCoeff() <= real.col(c).maxCoeff());
        CHECK(ks_statistic(col(real, c), col(s, c)) < 0.1);
    }
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        CHECK((s(i, 2) == 0.0 || s(i, 2) == 1.0 || s(i, 2) == 2.0));

    const Eigen::MatrixXd cr = correlation_matrix(real), cs = correlation_matrix(s);
    CHECK((cr - cs).cwiseAbs().maxCoeff() < 0.15);

    CHECK(sample(model, 1, 11).rows() == 1);
    CHECK(sample(model, 50, 4) == sample(model, 50, 4));
    CHECK(sample(model, 50, 4) != sample(model, 50, 5));
}

TEST_CASE("fit_copula input checks")
{
    CHECK(code_of([] { fit_copula(Eigen::MatrixXd::Ones(4, 2)); }) == ErrorCode::DegenerateInput);
    Eigen::MatrixXd m = trip_like(10, 2);
    m(3, 1) = std::nan("");
    CHECK(code_of([&] { fit_copula(m); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("quality score")
{
    const auto real = trip_like(300, 9);
    CHECK(quality_score(real, real) == doctest::Approx(100.0));

    SUBCASE("column-wise shuffle keeps marginals, loses correlation")
    {
        Eigen::MatrixXd shuffled = real;
        CounterRng rng(1);
        for (Eigen::Index c = 0; c < shuffled.cols(); ++c) {
            auto v = col(real, c);
            rng.derive("col", static_cast<std::uint64_t>(c)).shuffle(std::span(v));
            shuffled.col(c) = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        const auto q = quality_breakdown(real, shuffled);
        CHECK(q.mean_ks == doctest::Approx(0.0));
        CHECK(q.mean_correlation_gap > 0.05);
        CHECK(q.score < 100.0);
    }
    SUBCASE("disjoint ranges score low")
    {
        Eigen::MatrixXd far = real;
        for (Eigen::Index c = 0; c < far.cols(); ++c)
            far.col(c).array() = -far.col(c).array() - 1000.0;
        CHECK(quality_score(real, far) < 50.0);
    }
    SUBCASE("schema mismatch")
    {
        CHECK(code_of([&] { quality_score(real, real.leftCols(3)); }) == ErrorCode::SchemaMismatch);
    }
}

TEST_CASE("copula JSON round trip")
{
    const auto model = fit_copula(trip_like(60, 12), {"a", "b", "weather_code", "d"});
    const auto back = copula_from_json(nlohmann::json::parse(to_json(model).dump()));
    CHECK(back.names == model.names);
    CHECK(back.discrete == model.discrete);
    CHECK(back.marginals == model.marginals);
    CHECK(back.correlation == model.correlation);
    CHECK(sample(back, 100, 8) == sample(model, 100, 8));
}
