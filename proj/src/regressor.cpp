#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "cascadelab/metrics.hpp"

namespace cascadelab {

namespace {

struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            const double sd = std::sqrt((x.col(k).array() - s.mean(k)).square().mean());
            s.scale(k) = sd > 0.0 ? 1.0 / sd : 0.0;
        }
        return s;
    }
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean).array().rowwise() * scale.array();
    }
};

Eigen::MatrixXd to_matrix(const FeatureRows& rows) {
    if (rows.empty())
        throw ValidationError("regressor needs at least one training row");
    const std::size_t d = rows.front().size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != d)
            throw ValidationError("regressor rows have inconsistent widths");
        for (std::size_t k = 0; k < d; ++k)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    }
    return x;
}

} // namespace

struct MlpRegressor::Model {
    Standardizer inputs;
    double y_mean = 0.0;
    double y_scale = 1.0;
    Eigen::MatrixXd w1; // hidden x d
    Eigen::VectorXd b1;
    Eigen::RowVectorXd w2; // 1 x hidden
    double b2 = 0.0;
};

MlpRegressor::MlpRegressor(MlpOptions options) : options_(options) {}
MlpRegressor::~MlpRegressor() = default;
MlpRegressor::MlpRegressor(MlpRegressor&&) noexcept = default;
MlpRegressor& MlpRegressor::operator=(MlpRegressor&&) noexcept = default;

void MlpRegressor::fit(const FeatureRows& rows, std::span<const double> y) {
    const Eigen::MatrixXd raw = to_matrix(rows);
    if (static_cast<std::size_t>(raw.rows()) != y.size())
        throw ValidationError("regressor targets do not match rows");
    auto model = std::make_unique<Model>();
    model->inputs = Standardizer::fit(raw);
    const Eigen::MatrixXd x = model->inputs.apply(raw);
    Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    model->y_mean = target.mean();
    const double sd = std::sqrt((target.array() - model->y_mean).square().mean());
    model->y_scale = sd > 0.0 ? sd : 1.0;
    target = (target.array() - model->y_mean) / model->y_scale;

    const auto n = x.rows();
    const auto d = x.cols();
    const auto h = static_cast<Eigen::Index>(options_.hidden);
    Rng rng(options_.seed);
    std::normal_distribution<double> init(0.0, 1.0);
    const double he = std::sqrt(2.0 / static_cast<double>(std::max<Eigen::Index>(d, 1)));
    model->w1 = Eigen::MatrixXd::NullaryExpr(h, d, [&] { return init(rng) * he; });
    model->b1 = Eigen::VectorXd::Zero(h);
    model->w2 = Eigen::RowVectorXd::NullaryExpr(h, [&] { return init(rng) * std::sqrt(2.0 / h); });
    model->b2 = 0.0;

    // Adam state.
    Eigen::MatrixXd m_w1 = Eigen::MatrixXd::Zero(h, d), v_w1 = m_w1;
    Eigen::VectorXd m_b1 = Eigen::VectorXd::Zero(h), v_b1 = m_b1;
    Eigen::RowVectorXd m_w2 = Eigen::RowVectorXd::Zero(h), v_w2 = m_w2;
    double m_b2 = 0.0, v_b2 = 0.0;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = options_.learning_rate;
    long step = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto batch = static_cast<Eigen::Index>(std::max<std::size_t>(1, options_.batch));

    for (std::size_t epoch = 0; epoch < options_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index bsz = std::min(batch, n - start);
            Eigen::MatrixXd xb(bsz, d);
            Eigen::VectorXd yb(bsz);
            for (Eigen::Index r = 0; r < bsz; ++r) {
                xb.row(r) = x.row(order[static_cast<std::size_t>(start + r)]);
                yb(r) = target(order[static_cast<std::size_t>(start + r)]);
            }
            // Forward.
            Eigen::MatrixXd pre = (model->w1 * xb.transpose()).colwise() + model->b1; // h x b
            Eigen::MatrixXd act = pre.cwiseMax(0.0);
            Eigen::RowVectorXd out = (model->w2 * act).array() + model->b2;
            Eigen::RowVectorXd err = (out - yb.transpose()) / static_cast<double>(bsz);
            // Backward (mean squared error / 2).
            Eigen::RowVectorXd g_w2 = err * act.transpose() + options_.l2 * model->w2;
            const double g_b2 = err.sum();
            Eigen::MatrixXd delta = (model->w2.transpose() * err).array() * (pre.array() > 0.0).cast<double>();
            Eigen::MatrixXd g_w1 = delta * xb + options_.l2 * model->w1;
            Eigen::VectorXd g_b1 = delta.rowwise().sum();

            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
                m = beta1 * m + (1.0 - beta1) * g;
                v = beta2 * v.array() + (1.0 - beta2) * g.array().square();
                param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
            };
            adam(model->w1, m_w1, v_w1, g_w1);
            adam(model->b1, m_b1, v_b1, g_b1);
            adam(model->w2, m_w2, v_w2, g_w2);
            m_b2 = beta1 * m_b2 + (1.0 - beta1) * g_b2;
            v_b2 = beta2 * v_b2 + (1.0 - beta2) * g_b2 * g_b2;
            model->b2 -= lr * (m_b2 / c1) / (std::sqrt(v_b2 / c2) + eps);
        }
    }
    model_ = std::move(model);
}

double MlpRegressor::predict(std::span<const double> x) const {
    if (!model_)
        throw ValidationError("regressor has not been fitted");
    if (static_cast<Eigen::Index>(x.size()) != model_->inputs.mean.size())
        throw ValidationError("feature width does not match the fitted regressor");
    Eigen::RowVectorXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    row = (row - model_->inputs.mean).array() * model_->inputs.scale.array();
    const Eigen::VectorXd act = (model_->w1 * row.transpose() + model_->b1).cwiseMax(0.0);
    const double out = model_->w2.dot(act) + model_->b2;
    return out * model_->y_scale + model_->y_mean;
}

void RidgeRegressor::fit(const FeatureRows& rows, std::span<const double> y) {
    const Eigen::MatrixXd raw = to_matrix(rows);
    if (static_cast<std::size_t>(raw.rows()) != y.size())
        throw ValidationError("regressor targets do not match rows");
    const auto s = Standardizer::fit(raw);
    const Eigen::MatrixXd x = s.apply(raw);
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    const double y_mean = target.mean();
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda_ * static_cast<double>(x.rows()) + 1e-12;
    const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * (target.array() - y_mean).matrix());
    mean_.assign(s.mean.data(), s.mean.data() + s.mean.size());
    scale_.assign(s.scale.data(), s.scale.data() + s.scale.size());
    coef_.assign(beta.data(), beta.data() + beta.size());
    intercept_ = y_mean;
}

double RidgeRegressor::predict(std::span<const double> x) const {
    if (coef_.empty() && mean_.empty())
        throw ValidationError("regressor has not been fitted");
    if (x.size() != coef_.size())
        throw ValidationError("feature width does not match the fitted regressor");
    double out = intercept_;
    for (std::size_t k = 0; k < x.size(); ++k)
        out += coef_[k] * (x[k] - mean_[k]) * scale_[k];
    return out;
}

std::vector<double> growth_features(const Network& net, const IdentityMatrix& ids,
                                    const Cascade& cascade, std::size_t width) {
    const std::size_t dim = ids.dimension();
    std::vector<double> out(3 * width + dim, 0.0);
    std::vector<NodeId> early;
    std::vector<std::uint32_t> first_use;
    {
        std::vector<char> seen(net.node_count(), 0);
        for (const auto& e : cascade.events) {
            if (early.size() == width)
                break;
            if (!seen[e.agent]) {
                seen[e.agent] = 1;
                early.push_back(e.agent);
                first_use.push_back(e.t);
            }
        }
    }
    std::vector<char> member(net.node_count(), 0);
    for (NodeId a : early)
        member[a] = 1;
    for (std::size_t k = 0; k < early.size(); ++k) {
        const NodeId a = early[k];
        std::size_t inner = 0;
        for (NodeId b : net.out_neighbors(a))
            inner += member[b];
        out[3 * k] = first_use[k];
        out[3 * k + 1] = static_cast<double>(net.out_degree(a));
        out[3 * k + 2] = static_cast<double>(inner);
    }
    if (!early.empty()) {
        for (NodeId a : early)
            for (std::size_t d = 0; d < dim; ++d)
                out[3 * width + d] += ids.at(a, d);
        for (std::size_t d = 0; d < dim; ++d)
            out[3 * width + d] /= static_cast<double>(early.size());
    }
    return out;
}

} // namespace cascadelab
