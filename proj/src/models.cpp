#include "emob/models.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>

#include <Eigen/QR>

#include "emob/error.hpp"
#include "emob/io.hpp"
#include "emob/rng.hpp"

namespace emob {

std::string_view to_string(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::lr: return "lr";
    case ModelKind::svr: return "svr";
    case ModelKind::knn: return "knn";
    case ModelKind::dt: return "dt";
    case ModelKind::rf: return "rf";
    case ModelKind::gb: return "gb";
    case ModelKind::mlp: return "mlp";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text)
{
    for (auto kind : kAllModelKinds)
        if (text == to_string(kind))
            return kind;
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text)
                                                + "' (expected lr, svr, knn, dt, rf, gb or mlp)");
}

// ---------------------------------------------------------------------------
// hyperparameters
// ---------------------------------------------------------------------------

void validate(const Hyperparams& hp)
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw Error(ErrorCode::InvalidArgument, what);
    };
    require(hp.lr.ridge >= 0.0, "lr ridge must be >= 0");
    require(hp.svr.epsilon >= 0.0 && hp.svr.c > 0.0 && hp.svr.epochs >= 1 && hp.svr.learning_rate > 0.0,
            "svr needs epsilon >= 0, c > 0, epochs >= 1, learning_rate > 0");
    require(hp.knn.k >= 1, "knn k must be >= 1");
    require(hp.dt.min_samples_leaf >= 1 && (!hp.dt.max_depth || *hp.dt.max_depth >= 0),
            "dt needs min_samples_leaf >= 1 and max_depth >= 0");
    require(hp.rf.n_trees >= 1 && hp.rf.min_samples_leaf >= 1 && (!hp.rf.max_depth || *hp.rf.max_depth >= 0)
                && hp.rf.feature_subsample > 0.0 && hp.rf.feature_subsample <= 1.0,
            "rf needs n_trees >= 1, min_samples_leaf >= 1, feature_subsample in (0, 1]");
    require(hp.gb.n_trees >= 1 && hp.gb.learning_rate > 0.0 && hp.gb.max_depth >= 0 && hp.gb.min_samples_leaf >= 1,
            "gb needs n_trees >= 1, learning_rate > 0, max_depth >= 0");
    require(!hp.mlp.hidden.empty() && std::all_of(hp.mlp.hidden.begin(), hp.mlp.hidden.end(), [](int w) { return w >= 1; })
                && hp.mlp.epochs >= 1 && hp.mlp.batch_size >= 1 && hp.mlp.learning_rate > 0.0
                && hp.mlp.beta1 >= 0.0 && hp.mlp.beta1 < 1.0 && hp.mlp.beta2 >= 0.0 && hp.mlp.beta2 < 1.0
                && hp.mlp.epsilon > 0.0,
            "mlp needs hidden widths >= 1, epochs >= 1, batch_size >= 1, learning_rate > 0, betas in [0, 1)");
}

namespace {

double to_double(std::string_view key, std::string_view value)
{
    const auto v = parse_double(value);
    if (!v)
        throw Error(ErrorCode::InvalidArgument, "hyperparameter '" + std::string(key) + "' expects a number");
    return *v;
}

int to_int(std::string_view key, std::string_view value)
{
    int out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw Error(ErrorCode::InvalidArgument, "hyperparameter '" + std::string(key) + "' expects an integer");
    return out;
}

std::optional<int> to_depth(std::string_view key, std::string_view value)
{
    if (value == "none" || value == "inf" || value == "null")
        return std::nullopt;
    return to_int(key, value);
}

std::vector<int> to_layers(std::string_view key, std::string_view value)
{
    std::vector<int> layers;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        auto end = value.find_first_of("x,", pos);
        if (end == std::string_view::npos)
            end = value.size();
        layers.push_back(to_int(key, value.substr(pos, end - pos)));
        pos = end + 1;
    }
    return layers;
}

} // namespace

void set_hyperparam(Hyperparams& hp, ModelKind kind, std::string_view key, std::string_view value)
{
    auto unknown = [&] {
        throw Error(ErrorCode::InvalidArgument,
                    "unknown hyperparameter '" + std::string(key) + "' for " + std::string(to_string(kind)));
    };
    switch (kind) {
    case ModelKind::lr:
        if (key == "ridge") hp.lr.ridge = to_double(key, value);
        else unknown();
        break;
    case ModelKind::svr:
        if (key == "epsilon") hp.svr.epsilon = to_double(key, value);
        else if (key == "c") hp.svr.c = to_double(key, value);
        else if (key == "epochs") hp.svr.epochs = to_int(key, value);
        else if (key == "learning_rate") hp.svr.learning_rate = to_double(key, value);
        else unknown();
        break;
    case ModelKind::knn:
        if (key == "k") hp.knn.k = to_int(key, value);
        else unknown();
        break;
    case ModelKind::dt:
        if (key == "max_depth") hp.dt.max_depth = to_depth(key, value);
        else if (key == "min_samples_leaf") hp.dt.min_samples_leaf = to_int(key, value);
        else unknown();
        break;
    case ModelKind::rf:
        if (key == "n_trees") hp.rf.n_trees = to_int(key, value);
        else if (key == "max_depth") hp.rf.max_depth = to_depth(key, value);
        else if (key == "min_samples_leaf") hp.rf.min_samples_leaf = to_int(key, value);
        else if (key == "feature_subsample") hp.rf.feature_subsample = to_double(key, value);
        else unknown();
        break;
    case ModelKind::gb:
        if (key == "n_trees") hp.gb.n_trees = to_int(key, value);
        else if (key == "learning_rate") hp.gb.learning_rate = to_double(key, value);
        else if (key == "max_depth") hp.gb.max_depth = to_int(key, value);
        else if (key == "min_samples_leaf") hp.gb.min_samples_leaf = to_int(key, value);
        else unknown();
        break;
    case ModelKind::mlp:
        if (key == "hidden") hp.mlp.hidden = to_layers(key, value);
        else if (key == "epochs") hp.mlp.epochs = to_int(key, value);
        else if (key == "batch_size") hp.mlp.batch_size = to_int(key, value);
        else if (key == "learning_rate") hp.mlp.learning_rate = to_double(key, value);
        else if (key == "beta1") hp.mlp.beta1 = to_double(key, value);
        else if (key == "beta2") hp.mlp.beta2 = to_double(key, value);
        else if (key == "epsilon") hp.mlp.epsilon = to_double(key, value);
        else unknown();
        break;
    }
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& x)
{
    MinMaxScaler s;
    s.min = x.colwise().minCoeff().transpose();
    s.range = x.colwise().maxCoeff().transpose() - s.min;
    s.range = s.range.unaryExpr([](double r) { return r > 0.0 ? r : 1.0; });
    return s;
}

MinMaxScaler MinMaxScaler::identity(Eigen::Index n_features)
{
    return {Eigen::VectorXd::Zero(n_features), Eigen::VectorXd::Ones(n_features)};
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& x) const
{
    return ((x.rowwise() - min.transpose()).array().rowwise() / range.transpose().array()).matrix();
}

Eigen::VectorXd MinMaxScaler::transform(const Eigen::VectorXd& x) const
{
    return ((x - min).array() / range.array()).matrix();
}

// ---------------------------------------------------------------------------
// learners
// ---------------------------------------------------------------------------

namespace {

double mean_of(const Eigen::VectorXd& v) { return v.mean(); }

LinearParams train_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge)
{
    const Eigen::Index n = x.rows(), p = x.cols();
    const Eigen::Index extra = ridge > 0.0 ? p : 0;
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n + extra, p + 1);
    Eigen::VectorXd target = Eigen::VectorXd::Zero(n + extra);
    design.topLeftCorner(n, p) = x;
    design.col(p).head(n).setOnes();
    target.head(n) = y;
    if (extra > 0)
        design.bottomLeftCorner(p, p).diagonal().setConstant(std::sqrt(ridge));

    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    return {beta.head(p), beta(p), std::nullopt};
}

// Full-batch subgradient descent on
//   mean(max(0, |y - w.x - b| - eps)) + 0.5 / (C n) ||w||^2
// over min-max scaled inputs, with step lr * scale(y) / sqrt(t + 1) and the
// average of the second half of the iterates as the estimate.
LinearParams train_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrHyper& hp)
{
    const auto scaler = MinMaxScaler::fit(x);
    const Eigen::MatrixXd xs = scaler.transform(x);
    const auto n = static_cast<double>(x.rows());
    const double lambda = 1.0 / (hp.c * n);

    std::vector<double> sorted(y.data(), y.data() + y.size());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    double b = sorted[sorted.size() / 2];
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());

    const double spread = std::sqrt((y.array() - y.mean()).square().mean());
    const double step_scale = hp.learning_rate * (spread > 0.0 ? spread : 1.0);

    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(x.cols());
    double b_avg = 0.0;
    int averaged = 0;
    const int average_from = hp.epochs / 2;
    for (int t = 0; t < hp.epochs; ++t) {
        const Eigen::ArrayXd residual = (y - xs * w).array() - b;
        const Eigen::VectorXd sign = (residual > hp.epsilon).cast<double>() - (residual < -hp.epsilon).cast<double>();
        const Eigen::VectorXd grad_w = -(xs.transpose() * sign) / n + lambda * w;
        const double grad_b = -sign.sum() / n;
        const double eta = step_scale / std::sqrt(static_cast<double>(t) + 1.0);
        w -= eta * grad_w;
        b -= eta * grad_b;
        if (t >= average_from) {
            w_avg += w;
            b_avg += b;
            ++averaged;
        }
    }
    return {w_avg / averaged, b_avg / averaged, scaler};
}

KnnParams train_knn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int k)
{
    KnnParams p;
    p.k = k;
    p.scaler = MinMaxScaler::fit(x);
    p.points = p.scaler.transform(x);
    p.labels = y;
    return p;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n)
{
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    return rows;
}

ForestParams train_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestHyper& hp,
                          std::uint64_t seed)
{
    ForestParams forest;
    forest.trees.resize(static_cast<std::size_t>(hp.n_trees));
    const CounterRng root(seed);
    const TreeOptions options{hp.max_depth, hp.min_samples_leaf, hp.feature_subsample};
    const auto n = static_cast<std::uint64_t>(x.rows());

    // Each member draws from its own derived stream, so the result does not
    // depend on scheduling.
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < hp.n_trees; t = next++) {
            CounterRng rng = root.derive("rf-tree", static_cast<std::uint64_t>(t));
            std::vector<Eigen::Index> rows(n);
            for (auto& r : rows)
                r = static_cast<Eigen::Index>(rng.uniform_index(n));
            forest.trees[static_cast<std::size_t>(t)] = grow_tree(x, y, rows, options, &rng);
        }
    };
    const unsigned threads = std::clamp(std::thread::hardware_concurrency(), 1u, static_cast<unsigned>(hp.n_trees));
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < threads; ++i)
        pool.emplace_back(worker);
    worker();
    return forest;
}

BoostParams train_boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const BoostHyper& hp)
{
    BoostParams model;
    model.base = mean_of(y);
    model.learning_rate = hp.learning_rate;
    const auto rows = all_rows(x.rows());
    const TreeOptions options{hp.max_depth, hp.min_samples_leaf, 1.0};

    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), model.base);
    model.training_loss.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
    for (int round = 0; round < hp.n_trees; ++round) {
        const Eigen::VectorXd residual = y - fitted;
        RegressionTree tree = grow_tree(x, residual, rows, options);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            fitted(i) += hp.learning_rate * tree.predict(x.row(i).transpose());
        model.trees.push_back(std::move(tree));
        model.training_loss.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
    }
    return model;
}

MlpParams train_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpHyper& hp, std::uint64_t seed,
                    const TrainContext& context)
{
    const CounterRng root(seed);
    CounterRng init_rng = root.derive("mlp-init");
    MlpParams net = init_mlp(x.cols(), hp.hidden, init_rng);
    net.scaler = MinMaxScaler::fit(x);
    net.target_offset = y.mean();
    const double spread = std::sqrt((y.array() - net.target_offset).square().mean());
    net.target_scale = spread > 0.0 ? spread : 1.0;
    if (!(spread > 0.0)) {
        // constant target: a zero output layer reproduces it exactly
        net.weights.back().setZero();
        net.biases.back().setZero();
        return net;
    }

    const bool use_validation = context.validation_features && context.validation_labels
        && context.validation_features->rows() > 0;
    auto validation_mae = [&](const MlpParams& candidate) {
        const Eigen::MatrixXd xs = candidate.scaler.transform(*context.validation_features);
        const Eigen::RowVectorXd out = mlp_forward(candidate, xs.transpose());
        const Eigen::VectorXd pred = (out.transpose().array() * candidate.target_scale + candidate.target_offset).matrix();
        return (pred - *context.validation_labels).cwiseAbs().mean();
    };

    Eigen::VectorXd theta = flatten_parameters(net);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    double beta1_t = 1.0, beta2_t = 1.0;

    MlpParams best = net;
    double best_val = use_validation ? validation_mae(net) : HUGE_VAL;

    auto order = all_rows(x.rows());
    const auto batch = static_cast<std::size_t>(hp.batch_size);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        root.derive("mlp-shuffle", static_cast<std::uint64_t>(epoch)).shuffle(std::span(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Eigen::MatrixXd xb = x(idx, Eigen::all);
            const Eigen::VectorXd yb = y(idx);
            const Eigen::VectorXd g = mlp_gradient(net, xb, yb);

            beta1_t *= hp.beta1;
            beta2_t *= hp.beta2;
            m = hp.beta1 * m + (1.0 - hp.beta1) * g;
            v = hp.beta2 * v + (1.0 - hp.beta2) * g.cwiseProduct(g);
            const Eigen::ArrayXd m_hat = m.array() / (1.0 - beta1_t);
            const Eigen::ArrayXd v_hat = v.array() / (1.0 - beta2_t);
            theta.array() -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
            assign_parameters(net, theta);
        }
        if (use_validation) {
            const double val = validation_mae(net);
            if (val < best_val) {
                best_val = val;
                best = net;
            }
        }
    }
    return use_validation ? best : net;
}

double knn_predict(const KnnParams& p, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const Eigen::VectorXd q = p.scaler.transform(Eigen::VectorXd(x));
    const Eigen::VectorXd dist = (p.points.rowwise() - q.transpose()).rowwise().squaredNorm();
    auto idx = all_rows(dist.size());
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(p.k), idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return dist(a) < dist(b) || (dist(a) == dist(b) && a < b); });
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        sum += p.labels(idx[i]);
    return sum / static_cast<double>(k);
}

double mlp_predict(const MlpParams& net, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const Eigen::VectorXd xs = net.scaler.transform(Eigen::VectorXd(x));
    return net.target_offset + net.target_scale * mlp_forward(net, xs)(0);
}

} // namespace

TrainedModel train(ModelKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Hyperparams& hp,
                   std::uint64_t seed, const TrainContext& context)
{
    if (x.rows() == 0 || x.cols() == 0)
        throw Error(ErrorCode::EmptyDataset, "training matrix is empty");
    if (y.size() != x.rows())
        throw Error(ErrorCode::LengthMismatch, "labels (" + std::to_string(y.size()) + ") and rows ("
                                                   + std::to_string(x.rows()) + ") differ");
    if (!x.allFinite() || !y.allFinite())
        throw Error(ErrorCode::NonFiniteInput, "training data contains NaN or infinity");
    validate(hp);

    TrainedModel model;
    model.kind = kind;
    model.schema_fingerprint = context.schema_fingerprint;
    model.hyper = hp;
    model.seed = seed;
    model.n_features = x.cols();

    switch (kind) {
    case ModelKind::lr: model.params = train_linear(x, y, hp.lr.ridge); break;
    case ModelKind::svr: model.params = train_svr(x, y, hp.svr); break;
    case ModelKind::knn: model.params = train_knn(x, y, hp.knn.k); break;
    case ModelKind::dt: {
        const auto rows = all_rows(x.rows());
        model.params = grow_tree(x, y, rows, TreeOptions{hp.dt.max_depth, hp.dt.min_samples_leaf, 1.0});
        break;
    }
    case ModelKind::rf: model.params = train_forest(x, y, hp.rf, seed); break;
    case ModelKind::gb: model.params = train_boost(x, y, hp.gb); break;
    case ModelKind::mlp: model.params = train_mlp(x, y, hp.mlp, seed, context); break;
    }
    return model;
}

Eigen::VectorXd forest_member_predictions(const ForestParams& forest, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(forest.trees.size()));
    for (std::size_t t = 0; t < forest.trees.size(); ++t)
        out(static_cast<Eigen::Index>(t)) = forest.trees[t].predict(x);
    return out;
}

double predict(const TrainedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
               std::string_view schema_fingerprint)
{
    if (schema_fingerprint != model.schema_fingerprint)
        throw Error(ErrorCode::SchemaMismatch, "feature schema '" + std::string(schema_fingerprint)
                                                   + "' does not match the model's '" + model.schema_fingerprint
                                                   + "'");
    if (x.size() != model.n_features)
        throw Error(ErrorCode::SchemaMismatch, "expected " + std::to_string(model.n_features) + " features, got "
                                                   + std::to_string(x.size()));

    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                if (p.scaler)
                    return p.weights.dot(p.scaler->transform(Eigen::VectorXd(x))) + p.intercept;
                return p.weights.dot(x) + p.intercept;
            } else if constexpr (std::is_same_v<T, KnnParams>) {
                return knn_predict(p, x);
            } else if constexpr (std::is_same_v<T, RegressionTree>) {
                return p.predict(x);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                return forest_member_predictions(p, x).mean();
            } else if constexpr (std::is_same_v<T, BoostParams>) {
                double out = p.base;
                for (const auto& tree : p.trees)
                    out += p.learning_rate * tree.predict(x);
                return out;
            } else {
                return mlp_predict(p, x);
            }
        },
        model.params);
}

Eigen::VectorXd predict_batch(const TrainedModel& model, const Eigen::MatrixXd& x, std::string_view schema_fingerprint)
{
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = predict(model, Eigen::VectorXd(x.row(i).transpose()), schema_fingerprint);
    return out;
}

} // namespace emob
