#include "emob/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/rng.hpp"

namespace emob {

Partition split(Eigen::Index n_rows, const SplitSpec& spec)
{
    if (n_rows < 10)
        throw Error(ErrorCode::TooFewRows, "split needs at least 10 rows, got " + std::to_string(n_rows));
    if (spec.train < 0.0 || spec.test < 0.0 || spec.val < 0.0
        || std::abs(spec.train + spec.test + spec.val - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "split ratios must be non-negative and sum to 1");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng(spec.seed).derive("split").shuffle(std::span(order));

    // Small epsilon so that e.g. 100 * 0.1 does not floor to 9.
    const auto n = static_cast<double>(n_rows);
    const auto n_test = static_cast<std::size_t>(std::floor(n * spec.test + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(n * spec.val + 1e-9));

    Partition p;
    p.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    p.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                 order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    p.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
    return p;
}

double mae(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& targets)
{
    if (predictions.size() != targets.size())
        throw Error(ErrorCode::LengthMismatch, "predictions and targets differ in length");
    if (predictions.size() == 0)
        throw Error(ErrorCode::EmptyInput, "MAE of an empty vector");
    return (predictions - targets).cwiseAbs().mean();
}

namespace {

std::vector<TripRecord> gather(std::span<const TripRecord> records, const std::vector<Eigen::Index>& idx)
{
    std::vector<TripRecord> out;
    out.reserve(idx.size());
    for (auto i : idx)
        out.push_back(records[static_cast<std::size_t>(i)]);
    return out;
}

const std::vector<std::string>& approach_order()
{
    static const std::vector<std::string> order = [] {
        std::vector<std::string> v{std::string(kPhysicsApproach)};
        for (auto k : kAllModelKinds)
            v.emplace_back(to_string(k));
        return v;
    }();
    return order;
}

std::string display_name(const std::string& approach)
{
    if (approach == kPhysicsApproach)
        return "Mathematical model";
    std::string upper = approach;
    for (auto& c : upper)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return upper;
}

} // namespace

std::vector<EvalCell> run_experiment(std::span<const TripRecord> records, const ExperimentOptions& options,
                                     const SplitSpec& spec, bool include_rider)
{
    if (records.empty())
        throw Error(ErrorCode::EmptyDataset, "no records to evaluate");
    const VehicleKind vehicle = records.front().kind;
    for (const auto& r : records)
        if (r.kind != vehicle)
            throw Error(ErrorCode::MixedKinds, "an experiment column covers one vehicle kind");

    const Partition part = split(static_cast<Eigen::Index>(records.size()), spec);
    if (part.test.empty())
        throw Error(ErrorCode::TooFewRows, "test split is empty");
    const auto train_records = gather(records, part.train);
    const auto test_records = gather(records, part.test);
    const auto val_records = gather(records, part.val);

    const Dataset train_set = build_dataset(train_records, include_rider);
    const auto& schema = train_set.schema;
    const Dataset test_set = encode_records(test_records, schema, UnknownTokenPolicy::reserved_code);
    const std::string fingerprint = schema.fingerprint();

    TrainContext context;
    context.schema_fingerprint = fingerprint;
    if (!val_records.empty()) {
        const Dataset val_set = encode_records(val_records, schema, UnknownTokenPolicy::reserved_code);
        context.validation_features = val_set.features;
        context.validation_labels = val_set.labels;
    }

    std::vector<EvalCell> cells;
    if (include_rider && options.include_physics) {
        Eigen::VectorXd pred(static_cast<Eigen::Index>(test_records.size()));
        for (std::size_t i = 0; i < test_records.size(); ++i)
            pred(static_cast<Eigen::Index>(i)) = physics_predict(test_records[i], options.physics, options.masses);
        cells.push_back({vehicle, std::string(kPhysicsApproach), true, mae(pred, test_set.labels)});
    }
    for (ModelKind kind : options.kinds) {
        const TrainedModel model = train(kind, train_set.features, train_set.labels, options.hyper,
                                         options.model_seed, context);
        const Eigen::VectorXd pred = predict_batch(model, test_set.features, fingerprint);
        cells.push_back({vehicle, std::string(to_string(kind)), include_rider, mae(pred, test_set.labels)});
    }
    return cells;
}

std::optional<double> EvalReport::find(VehicleKind vehicle, std::string_view approach, bool rider_features) const
{
    for (const auto& c : cells)
        if (c.vehicle == vehicle && c.approach == approach && c.rider_features == rider_features)
            return c.mae_wh_per_km;
    return std::nullopt;
}

std::optional<double> EvalReport::improvement_pct(VehicleKind vehicle) const
{
    const auto physics = find(vehicle, kPhysicsApproach, true);
    if (!physics || !(*physics > 0.0))
        return std::nullopt;
    std::optional<double> best;
    for (const auto& c : cells)
        if (c.vehicle == vehicle && c.rider_features && c.approach != kPhysicsApproach)
            best = best ? std::min(*best, c.mae_wh_per_km) : c.mae_wh_per_km;
    if (!best)
        return std::nullopt;
    return (*physics - *best) / *physics * 100.0;
}

EvalReport run_grid(std::span<const TripRecord> records, const ExperimentOptions& options, const SplitSpec& spec)
{
    EvalReport report;
    for (VehicleKind vehicle : {VehicleKind::ebike, VehicleKind::escooter}) {
        std::vector<TripRecord> subset;
        std::copy_if(records.begin(), records.end(), std::back_inserter(subset),
                     [&](const TripRecord& r) { return r.kind == vehicle; });
        if (subset.empty())
            continue;
        for (bool rider : {true, false}) {
            auto column = run_experiment(subset, options, spec, rider);
            report.cells.insert(report.cells.end(), column.begin(), column.end());
        }
    }
    return report;
}

nlohmann::json to_json(const EvalReport& report)
{
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"vehicle", to_string(c.vehicle)},
                         {"approach", c.approach},
                         {"rider_features", c.rider_features},
                         {"mae_wh_per_km", c.mae_wh_per_km}});
    nlohmann::json improvement = nlohmann::json::object();
    for (VehicleKind v : {VehicleKind::ebike, VehicleKind::escooter})
        if (const auto pct = report.improvement_pct(v))
            improvement[std::string(to_string(v))] = *pct;
    return {{"format_version", 1}, {"metric", "mae_wh_per_km"}, {"split", "test"}, {"cells", cells},
            {"improvement_over_mathematical_model_pct", improvement}};
}

std::string format_table(const EvalReport& report)
{
    std::vector<VehicleKind> vehicles;
    for (VehicleKind v : {VehicleKind::ebike, VehicleKind::escooter})
        if (std::any_of(report.cells.begin(), report.cells.end(), [&](const EvalCell& c) { return c.vehicle == v; }))
            vehicles.push_back(v);

    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-20s", "Approach");
    out << buf;
    for (auto v : vehicles) {
        const char* name = v == VehicleKind::ebike ? "E-Bike" : "E-Scooter";
        for (const char* col : {" with", " w/o"}) {
            std::snprintf(buf, sizeof(buf), " | %14s", (std::string(name) + col).c_str());
            out << buf;
        }
    }
    out << "\n" << std::string(20 + vehicles.size() * 34, '-') << "\n";

    for (const auto& approach : approach_order()) {
        bool any = false;
        for (auto v : vehicles)
            any = any || report.find(v, approach, true) || report.find(v, approach, false);
        if (!any)
            continue;
        std::snprintf(buf, sizeof(buf), "%-20s", display_name(approach).c_str());
        out << buf;
        for (auto v : vehicles)
            for (bool rider : {true, false}) {
                const auto m = report.find(v, approach, rider);
                if (m)
                    std::snprintf(buf, sizeof(buf), " | %14.2f", *m);
                else
                    std::snprintf(buf, sizeof(buf), " | %14s", "--");
                out << buf;
            }
        out << "\n";
    }
    for (auto v : vehicles)
        if (const auto pct = report.improvement_pct(v)) {
            std::snprintf(buf, sizeof(buf), "Best data-driven improvement over mathematical model (%s): %.2f%%\n",
                          std::string(to_string(v)).c_str(), *pct);
            out << buf;
        }
    return out.str();
}

} // namespace emob
