#ifndef EMOB_MODELS_HPP
#define EMOB_MODELS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace emob {

enum class ModelKind { lr, svr, knn, dt, rf, gb, mlp };

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::lr, ModelKind::svr, ModelKind::dt, ModelKind::rf, ModelKind::gb, ModelKind::knn, ModelKind::mlp,
};

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

// ---------------------------------------------------------------------------
// hyperparameters
// ---------------------------------------------------------------------------

struct LinearHyper {
    double ridge = 0.0;  // lambda >= 0, intercept not penalized
};

struct SvrHyper {
    double epsilon = 0.1;  // insensitive tube half-width, Wh/km
    double c = 1.0;
    int epochs = 2000;     // full-batch subgradient steps
    double learning_rate = 0.5;
};

struct KnnHyper {
    int k = 5;
};

struct TreeHyper {
    std::optional<int> max_depth;  // nullopt = grow until pure or min_samples_leaf
    int min_samples_leaf = 1;
};

struct ForestHyper {
    int n_trees = 100;
    std::optional<int> max_depth;
    int min_samples_leaf = 1;
    double feature_subsample = 1.0 / 3.0;  // fraction of features tried per split
};

struct BoostHyper {
    int n_trees = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 1;
};

struct MlpHyper {
    std::vector<int> hidden = {64, 32};
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct Hyperparams {
    LinearHyper lr;
    SvrHyper svr;
    KnnHyper knn;
    TreeHyper dt;
    ForestHyper rf;
    BoostHyper gb;
    MlpHyper mlp;
};

// Throws InvalidArgument for counts < 1, non-positive rates, negative ridge.
void validate(const Hyperparams& hp);

// "key=value" override for one kind, e.g. ("gb", "n_trees", "50"). Hidden
// layer sizes are written "64x32". Throws InvalidArgument for unknown keys.
void set_hyperparam(Hyperparams& hp, ModelKind kind, std::string_view key, std::string_view value);

nlohmann::json to_json(const Hyperparams& hp, ModelKind kind);
void hyperparams_from_json(const nlohmann::json& j, ModelKind kind, Hyperparams& hp);

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

// Maps each column to [0, 1] using training min/max; constant columns map to 0.
struct MinMaxScaler {
    Eigen::VectorXd min;
    Eigen::VectorXd range;

    static MinMaxScaler fit(const Eigen::MatrixXd& x);
    static MinMaxScaler identity(Eigen::Index n_features);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
};

struct LinearParams {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    std::optional<MinMaxScaler> scaler;  // set for svr
};

struct KnnParams {
    int k = 5;
    MinMaxScaler scaler;
    Eigen::MatrixXd points;  // scaled training rows
    Eigen::VectorXd labels;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;     // x[feature] <= threshold
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    int depth() const;
};

struct ForestParams {
    std::vector<RegressionTree> trees;
};

struct BoostParams {
    double base = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    std::vector<double> training_loss;  // MSE before any tree, then after each round
};

// Fully connected ReLU network with a linear output unit. Inputs pass through
// the scaler, the output is mapped back by target_offset + target_scale * out.
struct MlpParams {
    MinMaxScaler scaler;
    double target_offset = 0.0;
    double target_scale = 1.0;
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
    std::vector<Eigen::VectorXd> biases;
};

using ModelParameters = std::variant<LinearParams, KnnParams, RegressionTree, ForestParams, BoostParams, MlpParams>;

struct TrainedModel {
    ModelKind kind = ModelKind::lr;
    std::string schema_fingerprint;
    Hyperparams hyper;
    std::uint64_t seed = 0;
    Eigen::Index n_features = 0;
    ModelParameters params;
};

// ---------------------------------------------------------------------------
// training and prediction
// ---------------------------------------------------------------------------

struct TrainContext {
    std::string schema_fingerprint;
    // Held-out rows for MLP best-epoch selection; ignored by other kinds.
    std::optional<Eigen::MatrixXd> validation_features;
    std::optional<Eigen::VectorXd> validation_labels;
};

// Deterministic in (x, y, hp, seed). Throws EmptyDataset, LengthMismatch,
// NonFiniteInput, InvalidArgument.
TrainedModel train(ModelKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Hyperparams& hp,
                   std::uint64_t seed, const TrainContext& context = {});

// Throws SchemaMismatch when the fingerprint or feature count differs from
// the training schema.
double predict(const TrainedModel& model, const Eigen::Ref<const Eigen::VectorXd>& features,
               std::string_view schema_fingerprint);
// One row per sample.
Eigen::VectorXd predict_batch(const TrainedModel& model, const Eigen::MatrixXd& features,
                              std::string_view schema_fingerprint);

// Per-member outputs of a random forest (mean of these is the prediction).
Eigen::VectorXd forest_member_predictions(const ForestParams& forest, const Eigen::Ref<const Eigen::VectorXd>& x);

// ---------------------------------------------------------------------------
// tree building, exposed for tests and the forest/boosting learners
// ---------------------------------------------------------------------------

class CounterRng;

struct TreeOptions {
    std::optional<int> max_depth;
    int min_samples_leaf = 1;
    double feature_fraction = 1.0;
};

// CART with squared-error (variance reduction) splits over `rows` (which may
// repeat, for bootstrap samples). Thresholds are midpoints between adjacent
// distinct values; ties go to the lowest feature index, then the lowest
// threshold. `rng` is needed only when feature_fraction < 1.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const Eigen::Index> rows,
                         const TreeOptions& options, CounterRng* rng = nullptr);

// ---------------------------------------------------------------------------
// MLP internals
// ---------------------------------------------------------------------------

// He-normal weights, zero biases.
MlpParams init_mlp(Eigen::Index n_inputs, const std::vector<int>& hidden, CounterRng& rng);

std::size_t mlp_parameter_count(const MlpParams& net) noexcept;
// Layer by layer: W (column-major) then b.
Eigen::VectorXd flatten_parameters(const MlpParams& net);
void assign_parameters(MlpParams& net, const Eigen::VectorXd& flat);

// Output in normalized target units for already-scaled inputs (one column
// per sample).
Eigen::RowVectorXd mlp_forward(const MlpParams& net, const Eigen::MatrixXd& scaled_inputs_t);

// Mean squared error in normalized target units on a raw batch.
double mlp_loss(const MlpParams& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Backpropagated gradient of mlp_loss with respect to flatten_parameters().
Eigen::VectorXd mlp_gradient(const MlpParams& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const TrainedModel& model);
// Throws CorruptModelFile or VersionMismatch.
TrainedModel model_from_json(const nlohmann::json& j);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace emob

#endif // EMOB_MODELS_HPP
