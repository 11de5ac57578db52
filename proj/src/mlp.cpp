#include <cmath>

#include "emob/error.hpp"
#include "emob/models.hpp"
#include "emob/rng.hpp"

namespace emob {

namespace {

struct ForwardPass {
    std::vector<Eigen::MatrixXd> pre;  // z per layer
    std::vector<Eigen::MatrixXd> act;  // act[0] = inputs, act[l+1] = activation of layer l
};

ForwardPass forward(const MlpParams& net, const Eigen::MatrixXd& inputs_t)
{
    ForwardPass pass;
    pass.act.push_back(inputs_t);
    const std::size_t layers = net.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = net.weights[l] * pass.act.back();
        z.colwise() += net.biases[l];
        pass.pre.push_back(z);
        if (l + 1 < layers)
            pass.act.push_back(z.cwiseMax(0.0));
        else
            pass.act.push_back(z);
    }
    return pass;
}

Eigen::RowVectorXd normalized_targets(const MlpParams& net, const Eigen::VectorXd& y)
{
    return ((y.array() - net.target_offset) / net.target_scale).matrix().transpose();
}

} // namespace

MlpParams init_mlp(Eigen::Index n_inputs, const std::vector<int>& hidden, CounterRng& rng)
{
    MlpParams net;
    net.scaler = MinMaxScaler::identity(n_inputs);
    Eigen::Index fan_in = n_inputs;
    std::vector<int> sizes = hidden;
    sizes.push_back(1);
    for (int width : sizes) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(width, fan_in);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                w(r, c) = sd * rng.normal();
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(width));
        fan_in = width;
    }
    return net;
}

std::size_t mlp_parameter_count(const MlpParams& net) noexcept
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l)
        n += static_cast<std::size_t>(net.weights[l].size() + net.biases[l].size());
    return n;
}

Eigen::VectorXd flatten_parameters(const MlpParams& net)
{
    Eigen::VectorXd flat(static_cast<Eigen::Index>(mlp_parameter_count(net)));
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        flat.segment(at, w.size()) = w.reshaped();
        at += w.size();
        flat.segment(at, net.biases[l].size()) = net.biases[l];
        at += net.biases[l].size();
    }
    return flat;
}

void assign_parameters(MlpParams& net, const Eigen::VectorXd& flat)
{
    if (static_cast<std::size_t>(flat.size()) != mlp_parameter_count(net))
        throw Error(ErrorCode::LengthMismatch, "parameter vector length does not match the network");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l];
        w.reshaped() = flat.segment(at, w.size());
        at += w.size();
        net.biases[l] = flat.segment(at, net.biases[l].size());
        at += net.biases[l].size();
    }
}

Eigen::RowVectorXd mlp_forward(const MlpParams& net, const Eigen::MatrixXd& scaled_inputs_t)
{
    return forward(net, scaled_inputs_t).act.back();
}

double mlp_loss(const MlpParams& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
    if (x.rows() == 0 || x.rows() != y.size())
        throw Error(ErrorCode::EmptyInput, "loss needs a non-empty batch with one label per row");
    const Eigen::RowVectorXd out = mlp_forward(net, net.scaler.transform(x).transpose());
    return (out - normalized_targets(net, y)).squaredNorm() / static_cast<double>(x.rows());
}

Eigen::VectorXd mlp_gradient(const MlpParams& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
    if (x.rows() == 0 || x.rows() != y.size())
        throw Error(ErrorCode::EmptyInput, "gradient needs a non-empty batch with one label per row");
    const auto pass = forward(net, net.scaler.transform(x).transpose());
    const std::size_t layers = net.weights.size();

    std::vector<Eigen::MatrixXd> grad_w(layers);
    std::vector<Eigen::VectorXd> grad_b(layers);
    Eigen::MatrixXd delta = 2.0 / static_cast<double>(x.rows()) * (pass.act.back() - normalized_targets(net, y));
    for (std::size_t l = layers; l-- > 0;) {
        grad_w[l] = delta * pass.act[l].transpose();
        grad_b[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = net.weights[l].transpose() * delta;
            delta.array() *= (pass.pre[l - 1].array() > 0.0).cast<double>();
        }
    }

    Eigen::VectorXd flat(static_cast<Eigen::Index>(mlp_parameter_count(net)));
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        flat.segment(at, grad_w[l].size()) = grad_w[l].reshaped();
        at += grad_w[l].size();
        flat.segment(at, grad_b[l].size()) = grad_b[l];
        at += grad_b[l].size();
    }
    return flat;
}

} // namespace emob
