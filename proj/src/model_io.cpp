#include <nlohmann/json.hpp>

#include "emob/error.hpp"
#include "emob/io.hpp"
#include "emob/models.hpp"

namespace emob {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json matrix_json(const Eigen::MatrixXd& m)
{
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"data", std::vector<double>(m.data(), m.data() + m.size())}};  // column-major
}

Eigen::MatrixXd matrix_from(const json& j)
{
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error(ErrorCode::CorruptModelFile, "matrix payload size does not match its shape");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

json depth_json(const std::optional<int>& d) { return d ? json(*d) : json(nullptr); }

std::optional<int> depth_from(const json& j)
{
    if (j.is_null())
        return std::nullopt;
    return j.get<int>();
}

json scaler_json(const MinMaxScaler& s) { return {{"min", vector_json(s.min)}, {"range", vector_json(s.range)}}; }

MinMaxScaler scaler_from(const json& j) { return {vector_from(j.at("min")), vector_from(j.at("range"))}; }

json tree_json(const RegressionTree& tree)
{
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array();
    for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

RegressionTree tree_from(const json& j)
{
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
        throw Error(ErrorCode::CorruptModelFile, "tree node arrays have inconsistent lengths");
    RegressionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
        if (feature[i] >= 0) {
            const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
            if (!in_range(left[i]) || !in_range(right[i]))
                throw Error(ErrorCode::CorruptModelFile, "tree child index out of range");
        }
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
    }
    return tree;
}

json params_json(const ModelParameters& params)
{
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                json j = {{"weights", vector_json(p.weights)}, {"intercept", p.intercept}, {"scaler", nullptr}};
                if (p.scaler)
                    j["scaler"] = scaler_json(*p.scaler);
                return j;
            } else if constexpr (std::is_same_v<T, KnnParams>) {
                return {{"k", p.k}, {"scaler", scaler_json(p.scaler)}, {"points", matrix_json(p.points)},
                        {"labels", vector_json(p.labels)}};
            } else if constexpr (std::is_same_v<T, RegressionTree>) {
                return {{"tree", tree_json(p)}};
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                json trees = json::array();
                for (const auto& t : p.trees)
                    trees.push_back(tree_json(t));
                return {{"trees", trees}};
            } else if constexpr (std::is_same_v<T, BoostParams>) {
                json trees = json::array();
                for (const auto& t : p.trees)
                    trees.push_back(tree_json(t));
                return {{"base", p.base}, {"learning_rate", p.learning_rate}, {"trees", trees},
                        {"training_loss", p.training_loss}};
            } else {
                json weights = json::array(), biases = json::array();
                for (std::size_t l = 0; l < p.weights.size(); ++l) {
                    weights.push_back(matrix_json(p.weights[l]));
                    biases.push_back(vector_json(p.biases[l]));
                }
                return {{"scaler", scaler_json(p.scaler)}, {"target_offset", p.target_offset},
                        {"target_scale", p.target_scale}, {"weights", weights}, {"biases", biases}};
            }
        },
        params);
}

ModelParameters params_from(ModelKind kind, const json& j)
{
    switch (kind) {
    case ModelKind::lr:
    case ModelKind::svr: {
        LinearParams p{vector_from(j.at("weights")), j.at("intercept").get<double>(), std::nullopt};
        if (!j.at("scaler").is_null())
            p.scaler = scaler_from(j.at("scaler"));
        return p;
    }
    case ModelKind::knn:
        return KnnParams{j.at("k").get<int>(), scaler_from(j.at("scaler")), matrix_from(j.at("points")),
                         vector_from(j.at("labels"))};
    case ModelKind::dt: return tree_from(j.at("tree"));
    case ModelKind::rf: {
        ForestParams p;
        for (const auto& t : j.at("trees"))
            p.trees.push_back(tree_from(t));
        return p;
    }
    case ModelKind::gb: {
        BoostParams p;
        p.base = j.at("base").get<double>();
        p.learning_rate = j.at("learning_rate").get<double>();
        for (const auto& t : j.at("trees"))
            p.trees.push_back(tree_from(t));
        p.training_loss = j.at("training_loss").get<std::vector<double>>();
        return p;
    }
    case ModelKind::mlp: {
        MlpParams p;
        p.scaler = scaler_from(j.at("scaler"));
        p.target_offset = j.at("target_offset").get<double>();
        p.target_scale = j.at("target_scale").get<double>();
        for (const auto& w : j.at("weights"))
            p.weights.push_back(matrix_from(w));
        for (const auto& b : j.at("biases"))
            p.biases.push_back(vector_from(b));
        if (p.weights.size() != p.biases.size() || p.weights.empty())
            throw Error(ErrorCode::CorruptModelFile, "mlp layer arrays are inconsistent");
        return p;
    }
    }
    throw Error(ErrorCode::CorruptModelFile, "unknown model kind");
}

} // namespace

json to_json(const Hyperparams& hp, ModelKind kind)
{
    switch (kind) {
    case ModelKind::lr: return {{"ridge", hp.lr.ridge}};
    case ModelKind::svr:
        return {{"epsilon", hp.svr.epsilon}, {"c", hp.svr.c}, {"epochs", hp.svr.epochs},
                {"learning_rate", hp.svr.learning_rate}};
    case ModelKind::knn: return {{"k", hp.knn.k}};
    case ModelKind::dt: return {{"max_depth", depth_json(hp.dt.max_depth)}, {"min_samples_leaf", hp.dt.min_samples_leaf}};
    case ModelKind::rf:
        return {{"n_trees", hp.rf.n_trees}, {"max_depth", depth_json(hp.rf.max_depth)},
                {"min_samples_leaf", hp.rf.min_samples_leaf}, {"feature_subsample", hp.rf.feature_subsample}};
    case ModelKind::gb:
        return {{"n_trees", hp.gb.n_trees}, {"learning_rate", hp.gb.learning_rate}, {"max_depth", hp.gb.max_depth},
                {"min_samples_leaf", hp.gb.min_samples_leaf}};
    case ModelKind::mlp:
        return {{"hidden", hp.mlp.hidden}, {"epochs", hp.mlp.epochs}, {"batch_size", hp.mlp.batch_size},
                {"learning_rate", hp.mlp.learning_rate}, {"beta1", hp.mlp.beta1}, {"beta2", hp.mlp.beta2},
                {"epsilon", hp.mlp.epsilon}};
    }
    return json::object();
}

void hyperparams_from_json(const json& j, ModelKind kind, Hyperparams& hp)
{
    auto num = [&](const char* key, auto& field) {
        if (j.contains(key))
            field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    auto depth = [&](const char* key, std::optional<int>& field) {
        if (j.contains(key))
            field = depth_from(j.at(key));
    };
    switch (kind) {
    case ModelKind::lr: num("ridge", hp.lr.ridge); break;
    case ModelKind::svr:
        num("epsilon", hp.svr.epsilon);
        num("c", hp.svr.c);
        num("epochs", hp.svr.epochs);
        num("learning_rate", hp.svr.learning_rate);
        break;
    case ModelKind::knn: num("k", hp.knn.k); break;
    case ModelKind::dt:
        depth("max_depth", hp.dt.max_depth);
        num("min_samples_leaf", hp.dt.min_samples_leaf);
        break;
    case ModelKind::rf:
        num("n_trees", hp.rf.n_trees);
        depth("max_depth", hp.rf.max_depth);
        num("min_samples_leaf", hp.rf.min_samples_leaf);
        num("feature_subsample", hp.rf.feature_subsample);
        break;
    case ModelKind::gb:
        num("n_trees", hp.gb.n_trees);
        num("learning_rate", hp.gb.learning_rate);
        num("max_depth", hp.gb.max_depth);
        num("min_samples_leaf", hp.gb.min_samples_leaf);
        break;
    case ModelKind::mlp:
        num("hidden", hp.mlp.hidden);
        num("epochs", hp.mlp.epochs);
        num("batch_size", hp.mlp.batch_size);
        num("learning_rate", hp.mlp.learning_rate);
        num("beta1", hp.mlp.beta1);
        num("beta2", hp.mlp.beta2);
        num("epsilon", hp.mlp.epsilon);
        break;
    }
}

json to_json(const TrainedModel& model)
{
    return {
        {"format_version", kModelFormatVersion},
        {"kind", to_string(model.kind)},
        {"schema_fingerprint", model.schema_fingerprint},
        {"n_features", model.n_features},
        {"hyperparams", to_json(model.hyper, model.kind)},
        {"seed", model.seed},
        {"parameters", params_json(model.params)},
    };
}

TrainedModel model_from_json(const json& j)
{
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw Error(ErrorCode::VersionMismatch, "model format_version " + std::to_string(version)
                                                        + " is not supported (expected "
                                                        + std::to_string(kModelFormatVersion) + ")");
        TrainedModel model;
        model.kind = parse_model_kind(j.at("kind").get<std::string>());
        model.schema_fingerprint = j.at("schema_fingerprint").get<std::string>();
        model.n_features = j.at("n_features").get<Eigen::Index>();
        hyperparams_from_json(j.at("hyperparams"), model.kind, model.hyper);
        model.seed = j.at("seed").get<std::uint64_t>();
        model.params = params_from(model.kind, j.at("parameters"));
        return model;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptModelFile, std::string("malformed model file: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptModelFile)
            throw;
        throw Error(ErrorCode::CorruptModelFile, e.detail());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path)
{
    write_file_atomic(path, to_json(model).dump() + "\n");
}

TrainedModel load_model(const std::filesystem::path& path)
{
    const auto text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptModelFile, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

} // namespace emob
