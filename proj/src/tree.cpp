#include <algorithm>
#include <cmath>
#include <numeric>

#include "emob/error.hpp"
#include "emob/models.hpp"
#include "emob/rng.hpp"

namespace emob {

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeOptions& options, CounterRng* rng)
        : x_(x), y_(y), options_(options), rng_(rng)
    {
    }

    RegressionTree build(std::vector<Eigen::Index> rows)
    {
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<Eigen::Index> rows, int depth)
    {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        double sum = 0.0;
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (auto r : rows) {
            sum += y_(r);
            lo = std::min(lo, y_(r));
            hi = std::max(hi, y_(r));
        }
        tree_.nodes[id].value = sum / static_cast<double>(rows.size());

        const auto n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(options_.min_samples_leaf);
        const bool depth_left = !options_.max_depth || depth < *options_.max_depth;
        if (!depth_left || n < 2 * min_leaf || lo == hi)
            return id;

        const Split split = best_split(rows, sum);
        if (split.feature < 0)
            return id;

        std::vector<Eigen::Index> left, right;
        for (auto r : rows)
            (x_(r, split.feature) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree_.nodes[id].feature = split.feature;
        tree_.nodes[id].threshold = split.threshold;
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = r;
        return id;
    }

    std::vector<int> candidate_features()
    {
        const int p = static_cast<int>(x_.cols());
        std::vector<int> features(static_cast<std::size_t>(p));
        std::iota(features.begin(), features.end(), 0);
        if (options_.feature_fraction >= 1.0 || rng_ == nullptr)
            return features;
        const int m = std::clamp(static_cast<int>(std::lround(options_.feature_fraction * p)), 1, p);
        for (int i = 0; i < m; ++i) {
            const auto j = i + static_cast<int>(rng_->uniform_index(static_cast<std::uint64_t>(p - i)));
            std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
        }
        features.resize(static_cast<std::size_t>(m));
        std::sort(features.begin(), features.end());
        return features;
    }

    Split best_split(const std::vector<Eigen::Index>& rows, double total)
    {
        const auto n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(options_.min_samples_leaf);
        const double parent = total * total / static_cast<double>(n);

        Split best;
        std::vector<Eigen::Index> order(rows);
        for (int f : candidate_features()) {
            std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                const double xa = x_(a, f), xb = x_(b, f);
                return xa < xb || (xa == xb && a < b);
            });
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += y_(order[i]);
                const std::size_t n_left = i + 1;
                const double a = x_(order[i], f);
                const double b = x_(order[i + 1], f);
                if (a == b || n_left < min_leaf || n - n_left < min_leaf)
                    continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(n_left)
                    + right_sum * right_sum / static_cast<double>(n - n_left) - parent;
                if (gain > best.gain) {
                    double threshold = 0.5 * (a + b);
                    if (!(threshold >= a && threshold < b))
                        threshold = a;
                    best = {f, threshold, gain};
                }
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    TreeOptions options_;
    CounterRng* rng_;
    RegressionTree tree_;
};

} // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& node = nodes[static_cast<std::size_t>(id)];
        id = x(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
}

int RegressionTree::depth() const
{
    if (nodes.empty())
        return 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        const auto& node = nodes[static_cast<std::size_t>(id)];
        if (node.feature >= 0) {
            stack.emplace_back(node.left, d + 1);
            stack.emplace_back(node.right, d + 1);
        }
    }
    return deepest;
}

RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const Eigen::Index> rows,
                         const TreeOptions& options, CounterRng* rng)
{
    if (rows.empty())
        throw Error(ErrorCode::EmptyDataset, "cannot grow a tree on zero rows");
    if (options.min_samples_leaf < 1 || (options.max_depth && *options.max_depth < 0))
        throw Error(ErrorCode::InvalidArgument, "tree needs min_samples_leaf >= 1 and max_depth >= 0");
    TreeBuilder builder(x, y, options, rng);
    return builder.build(std::vector<Eigen::Index>(rows.begin(), rows.end()));
}

} // namespace emob
