#include <cmath>

#include <Eigen/Dense>

#include "cascadelab/metrics.hpp"

namespace cascadelab {

PropensityScores propensity_scores(const FeatureRows& empirical, const FeatureRows& simulated,
                                   double ridge) {
    if (empirical.size() < 2 || simulated.size() < 2)
        throw ValidationError("propensity fit needs at least 2 rows per cascade");
    const std::size_t d = empirical.front().size();
    const std::size_t n = empirical.size() + simulated.size();
    for (const auto* side : {&empirical, &simulated})
        for (const auto& row : *side)
            if (row.size() != d)
                throw ValidationError("propensity features have inconsistent widths");

    // Column 0 is the intercept; remaining columns are standardised features.
    Eigen::MatrixXd x(n, d + 1);
    Eigen::VectorXd y(n);
    std::size_t r = 0;
    for (const auto& row : empirical) {
        x(r, 0) = 1.0;
        for (std::size_t k = 0; k < d; ++k)
            x(r, k + 1) = row[k];
        y(r++) = 0.0;
    }
    for (const auto& row : simulated) {
        x(r, 0) = 1.0;
        for (std::size_t k = 0; k < d; ++k)
            x(r, k + 1) = row[k];
        y(r++) = 1.0;
    }
    for (Eigen::Index k = 1; k <= static_cast<Eigen::Index>(d); ++k) {
        const double mu = x.col(k).mean();
        const double sd = std::sqrt((x.col(k).array() - mu).square().mean());
        if (sd > 0.0)
            x.col(k) = (x.col(k).array() - mu) / sd;
        else
            x.col(k).setZero();
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
    const double frac = static_cast<double>(simulated.size()) / static_cast<double>(n);
    beta(0) = std::log(frac / (1.0 - frac));
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(beta.size(), ridge);
    penalty(0) = 0.0;

    auto probabilities = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd eta = x * b;
        return Eigen::VectorXd((1.0 + (-eta.array()).exp()).inverse());
    };
    auto objective = [&](const Eigen::VectorXd& b) {
        Eigen::ArrayXd eta = (x * b).array();
        // log(1 + exp(eta)) - y * eta, computed stably.
        Eigen::ArrayXd softplus = eta.max(0.0) + (1.0 + (-eta.abs()).exp()).log();
        return (softplus - y.array() * eta).sum() + 0.5 * (penalty.array() * b.array().square()).sum();
    };

    double current = objective(beta);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd p = probabilities(beta);
        const Eigen::VectorXd grad = x.transpose() * (p - y) + penalty.cwiseProduct(beta);
        const Eigen::VectorXd wdiag = (p.array() * (1.0 - p.array())).max(1e-12);
        Eigen::MatrixXd hess = x.transpose() * wdiag.asDiagonal() * x;
        hess.diagonal() += penalty;
        hess.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        double scale = 1.0;
        Eigen::VectorXd next = beta - step;
        double value = objective(next);
        while (value > current && scale > 1e-8) {
            scale *= 0.5;
            next = beta - scale * step;
            value = objective(next);
        }
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        current = value;
        if (change < 1e-10)
            break;
    }

    const Eigen::VectorXd p = probabilities(beta);
    PropensityScores out;
    out.empirical.assign(p.data(), p.data() + empirical.size());
    out.simulated.assign(p.data() + empirical.size(), p.data() + n);
    return out;
}

double histogram_kl(std::span<const double> p_scores, std::span<const double> q_scores,
                    std::size_t bins, double smoothing) {
    if (bins == 0)
        throw ValidationError("histogram needs at least one bin");
    if (p_scores.empty() || q_scores.empty())
        throw ValidationError("histogram KL needs scores on both sides");
    auto histogram = [&](std::span<const double> scores) {
        std::vector<double> h(bins, smoothing);
        for (double s : scores) {
            auto b = static_cast<std::size_t>(std::floor(s * static_cast<double>(bins)));
            h[std::min(b, bins - 1)] += 1.0;
        }
        const double total = static_cast<double>(scores.size()) + smoothing * static_cast<double>(bins);
        for (auto& v : h)
            v /= total;
        return h;
    };
    const auto p = histogram(p_scores);
    const auto q = histogram(q_scores);
    double kl = 0.0;
    for (std::size_t b = 0; b < bins; ++b)
        kl += p[b] * std::log(p[b] / q[b]);
    return std::max(kl, 0.0);
}

double propensity_kl(const FeatureRows& empirical, const FeatureRows& simulated, std::size_t bins) {
    const auto scores = propensity_scores(empirical, simulated);
    return histogram_kl(scores.empirical, scores.simulated, bins);
}

} // namespace cascadelab
