#ifndef EMOB_EVAL_HPP
#define EMOB_EVAL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "emob/features.hpp"
#include "emob/models.hpp"
#include "emob/physics.hpp"

namespace emob {

struct SplitSpec {
    double train = 0.8;
    double test = 0.1;
    double val = 0.1;
    std::uint64_t seed = 0;
};

struct Partition {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    std::vector<Eigen::Index> val;
};

// test and val sizes are floor(n * ratio); the remainder goes to train.
// Membership depends only on (n_rows, seed). Throws TooFewRows for n < 10.
Partition split(Eigen::Index n_rows, const SplitSpec& spec);

// Mean absolute error. Throws LengthMismatch, EmptyInput.
double mae(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& targets);

inline constexpr std::string_view kPhysicsApproach = "mathematical_model";

struct EvalCell {
    VehicleKind vehicle = VehicleKind::ebike;
    std::string approach;  // kPhysicsApproach or a model kind name
    bool rider_features = true;
    double mae_wh_per_km = 0.0;
};

struct ExperimentOptions {
    std::vector<ModelKind> kinds{kAllModelKinds.begin(), kAllModelKinds.end()};
    Hyperparams hyper;
    std::uint64_t model_seed = 0;
    PhysicsParams physics;
    DeviceMasses masses;
    bool include_physics = true;
};

// One report column: every requested model trained on the train split (the
// MLP also sees the validation split for best-epoch selection) and scored on
// the test split. With rider features, the physics baseline is scored on the
// same test rows. All records must share one vehicle kind.
std::vector<EvalCell> run_experiment(std::span<const TripRecord> records, const ExperimentOptions& options,
                                     const SplitSpec& spec, bool include_rider);

struct EvalReport {
    std::vector<EvalCell> cells;

    std::optional<double> find(VehicleKind vehicle, std::string_view approach, bool rider_features) const;
    // (physics - best data-driven) / physics * 100 on the with-rider column.
    std::optional<double> improvement_pct(VehicleKind vehicle) const;
};

// Both rider configurations for every vehicle kind present in `records`.
EvalReport run_grid(std::span<const TripRecord> records, const ExperimentOptions& options, const SplitSpec& spec);

nlohmann::json to_json(const EvalReport& report);
// Plain-text table: one row per approach, columns (with / without rider
// features) per vehicle.
std::string format_table(const EvalReport& report);

} // namespace emob

#endif // EMOB_EVAL_HPP
