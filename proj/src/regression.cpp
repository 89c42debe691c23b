#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include <Eigen/Dense>

#include "cascadelab/experiment.hpp"
#include "cascadelab/textio.hpp"

namespace cascadelab {

std::optional<double> RegressionResult::coefficient(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name)
            return coef[k];
    return std::nullopt;
}

RegressionResult fit_interaction_regression(std::span<const RegressionRow> rows,
                                            const std::vector<std::string>& covariate_names) {
    const std::size_t p = covariate_names.size();
    std::set<Variant> models;
    for (const auto& r : rows) {
        if (r.covariates.size() != p)
            throw ValidationError("regression row has " + std::to_string(r.covariates.size()) +
                                  " covariates, expected " + std::to_string(p));
        models.insert(r.model);
    }
    if (models.size() < 3)
        throw ValidationError("interaction regression needs all three models in the data");

    std::vector<std::string> names{"intercept"};
    for (const auto& c : covariate_names)
        names.push_back(c);
    for (const auto& c : covariate_names)
        names.push_back(c + ":identity-only");
    for (const auto& c : covariate_names)
        names.push_back(c + ":network-only");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(names.size()));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        const double id = r.model == Variant::identity_only ? 1.0 : 0.0;
        const double net = r.model == Variant::network_only ? 1.0 : 0.0;
        x(i, 0) = 1.0;
        for (std::size_t c = 0; c < p; ++c) {
            const auto k = static_cast<Eigen::Index>(c);
            x(i, 1 + k) = r.covariates[c];
            x(i, 1 + static_cast<Eigen::Index>(p) + k) = r.covariates[c] * id;
            x(i, 1 + 2 * static_cast<Eigen::Index>(p) + k) = r.covariates[c] * net;
        }
        y(i) = r.cmi;
    }

    // Keep columns in order while they add a new direction to the span.
    RegressionResult out;
    std::vector<Eigen::Index> kept;
    Eigen::MatrixXd basis(n, 0);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double norm = x.col(c).norm();
        Eigen::VectorXd r = x.col(c);
        for (int pass = 0; pass < 2; ++pass)
            if (basis.cols() > 0)
                r -= basis * (basis.transpose() * r);
        if (norm > 0.0 && r.norm() > 1e-9 * norm) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = r / r.norm();
            kept.push_back(c);
        } else {
            out.dropped.push_back(names[static_cast<std::size_t>(c)]);
        }
    }

    Eigen::MatrixXd xk(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k)
        xk.col(static_cast<Eigen::Index>(k)) = x.col(kept[k]);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xk);
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - xk * beta;
    const auto k = static_cast<Eigen::Index>(kept.size());
    out.observations = rows.size();
    const double dof = static_cast<double>(n - k);
    Eigen::VectorXd se = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    if (dof > 0) {
        const double sigma2 = resid.squaredNorm() / dof;
        out.residual_sd = std::sqrt(sigma2);
        const Eigen::MatrixXd cov = (xk.transpose() * xk).inverse() * sigma2;
        se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    } else {
        out.residual_sd = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t j = 0; j < kept.size(); ++j) {
        out.names.push_back(names[static_cast<std::size_t>(kept[j])]);
        out.coef.push_back(beta(static_cast<Eigen::Index>(j)));
        out.se.push_back(se(static_cast<Eigen::Index>(j)));
    }
    return out;
}

void write_regression_csv(std::ostream& out, const RegressionResult& result) {
    out << "term,estimate,std_error,status\n";
    for (std::size_t k = 0; k < result.names.size(); ++k)
        out << result.names[k] << ',' << format_double(result.coef[k]) << ','
            << (std::isfinite(result.se[k]) ? format_double(result.se[k]) : std::string("NA"))
            << ",kept\n";
    for (const auto& d : result.dropped)
        out << d << ",NA,NA,dropped\n";
}

} // namespace cascadelab
