#pragma once

// Cumulative logit (proportional odds) model with dummy-coded ordinal predictors:
//
//   P(y_i <= r) = F(eta_ir),   eta_ir = theta_r - sum_j beta_{j, x_ij},
//
// F logistic. Larger coefficients push probability mass toward higher
// response categories.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/detail/logistic.hpp"
#include "ordpen/error.hpp"

namespace ordpen {

inline constexpr double kCurvatureMin = 1e-6;
inline constexpr double kCurvatureMax = 1e8;

struct ModelParams {
    Eigen::VectorXd thresholds;         // theta_1 < ... < theta_{c-1}
    std::vector<Eigen::VectorXd> groups; // beta_j, length k_j

    static ModelParams zeros(const OrdinalDataset& data)
    {
        ModelParams m;
        m.thresholds = Eigen::VectorXd::Zero(data.c - 1);
        for (int k : data.levels)
            m.groups.push_back(Eigen::VectorXd::Zero(k));
        return m;
    }

    bool thresholds_increasing() const
    {
        for (Eigen::Index r = 1; r < thresholds.size(); ++r)
            if (!(thresholds[r] > thresholds[r - 1]))
                return false;
        return std::all_of(thresholds.begin(), thresholds.end(), [](double v) { return std::isfinite(v); });
    }

    // Re-center every group to sum zero; thresholds absorb the shift so the
    // linear predictor is unchanged.
    void center()
    {
        for (auto& g : groups) {
            const double m = g.mean();
            g.array() -= m;
            thresholds.array() -= m;
        }
    }
};

// Throws DimensionError naming the first offending piece.
inline void check_dimensions(const OrdinalDataset& data, const ModelParams& params)
{
    if (params.thresholds.size() != data.c - 1)
        throw DimensionError("thresholds have length " + std::to_string(params.thresholds.size()) +
                             ", expected c-1 = " + std::to_string(data.c - 1));
    if (params.groups.size() != data.p)
        throw DimensionError("params carry " + std::to_string(params.groups.size()) + " groups, expected p = " +
                             std::to_string(data.p));
    for (std::size_t j = 0; j < data.p; ++j)
        if (params.groups[j].size() != data.levels[j])
            throw DimensionError("group " + std::to_string(j + 1) + " (" + data.name(j) + ") has length " +
                                 std::to_string(params.groups[j].size()) + ", expected k_j = " +
                                 std::to_string(data.levels[j]));
}

// sum_j beta_{j, x_ij} for every row.
inline Eigen::VectorXd predictor_shift(const OrdinalDataset& data, const ModelParams& params)
{
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.n));
    for (std::size_t i = 0; i < data.n; ++i)
        for (std::size_t j = 0; j < data.p; ++j)
            s[static_cast<Eigen::Index>(i)] += params.groups[j][data.at(i, j) - 1];
    return s;
}

// n x (c-1) matrix eta_ir = theta_r - sum_j beta_{j, x_ij}.
inline Eigen::MatrixXd linear_predictor(const OrdinalDataset& data, const ModelParams& params)
{
    check_dimensions(data, params);
    const Eigen::VectorXd s = predictor_shift(data, params);
    Eigen::MatrixXd eta(static_cast<Eigen::Index>(data.n), data.c - 1);
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
        eta.row(i) = params.thresholds.transpose().array() - s[i];
    return eta;
}

struct ProbabilityTable {
    Eigen::MatrixXd pi;         // n x c
    Eigen::MatrixXd cumulative; // n x (c-1), F(eta_ir)
};

inline ProbabilityTable category_probs(const Eigen::MatrixXd& eta)
{
    const Eigen::Index n = eta.rows();
    const Eigen::Index c = eta.cols() + 1;
    if (!eta.allFinite())
        throw ProbabilityError("linear predictor contains non-finite values");
    ProbabilityTable t{Eigen::MatrixXd(n, c), Eigen::MatrixXd(n, c - 1)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index r = 0; r < c; ++r) {
            const double upper = r == c - 1 ? detail::kInf : eta(i, r);
            const double lower = r == 0 ? -detail::kInf : eta(i, r - 1);
            const double pr = detail::interval_prob(lower, upper);
            if (pr < 0.0)
                throw ProbabilityError("row " + std::to_string(i + 1) + ", category " + std::to_string(r + 1) +
                                       ": negative probability (thresholds not increasing)");
            t.pi(i, r) = pr;
            if (r < c - 1)
                t.cumulative(i, r) = detail::logistic(eta(i, r));
        }
    }
    return t;
}

inline ProbabilityTable predict_probs(const OrdinalDataset& data, const ModelParams& params)
{
    return category_probs(linear_predictor(data, params));
}

inline void require_increasing(const ModelParams& params)
{
    if (!params.thresholds_increasing())
        throw ProbabilityError("thresholds must be finite and strictly increasing");
}

// sum_i log pi_{i, y_i}, probabilities floored at 1e-12.
inline double log_likelihood(const OrdinalDataset& data, const ModelParams& params)
{
    check_dimensions(data, params);
    require_increasing(params);
    const Eigen::VectorXd s = predictor_shift(data, params);
    const std::span<const double> theta(params.thresholds.data(), static_cast<std::size_t>(params.thresholds.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < data.n; ++i)
        total += detail::obs_terms(theta, data.y[i], s[static_cast<Eigen::Index>(i)]).log_prob;
    return total;
}

// Gradient of the log-likelihood. Block 0 holds the thresholds, block j+1
// the dummy coefficients of predictor j.
inline std::vector<Eigen::VectorXd> score(const OrdinalDataset& data, const ModelParams& params)
{
    check_dimensions(data, params);
    require_increasing(params);
    std::vector<Eigen::VectorXd> g;
    g.push_back(Eigen::VectorXd::Zero(data.c - 1));
    for (int k : data.levels)
        g.push_back(Eigen::VectorXd::Zero(k));

    const Eigen::VectorXd s = predictor_shift(data, params);
    const std::span<const double> theta(params.thresholds.data(), static_cast<std::size_t>(params.thresholds.size()));
    for (std::size_t i = 0; i < data.n; ++i) {
        const int y = data.y[i];
        const auto t = detail::obs_terms(theta, y, s[static_cast<Eigen::Index>(i)]);
        if (y < data.c)
            g[0][y - 1] += t.d_upper;
        if (y > 1)
            g[0][y - 2] += t.d_lower;
        for (std::size_t j = 0; j < data.p; ++j)
            g[j + 1][data.at(i, j) - 1] += t.d_shift;
    }
    return g;
}

// Diagonal of the Hessian of -l, blockwise like score().
inline std::vector<Eigen::VectorXd> neg_hessian_diag(const OrdinalDataset& data, const ModelParams& params)
{
    check_dimensions(data, params);
    require_increasing(params);
    std::vector<Eigen::VectorXd> h;
    h.push_back(Eigen::VectorXd::Zero(data.c - 1));
    for (int k : data.levels)
        h.push_back(Eigen::VectorXd::Zero(k));

    const Eigen::VectorXd s = predictor_shift(data, params);
    const std::span<const double> theta(params.thresholds.data(), static_cast<std::size_t>(params.thresholds.size()));
    for (std::size_t i = 0; i < data.n; ++i) {
        const int y = data.y[i];
        const auto t = detail::obs_terms(theta, y, s[static_cast<Eigen::Index>(i)]);
        if (y < data.c)
            h[0][y - 1] -= t.dd_upper;
        if (y > 1)
            h[0][y - 2] -= t.dd_lower;
        for (std::size_t j = 0; j < data.p; ++j)
            h[j + 1][data.at(i, j) - 1] -= t.dd_shift;
    }
    return h;
}

// Scalar curvature per block: largest |diagonal entry| clamped to [1e-6, 1e8].
inline double clamp_curvature(const Eigen::VectorXd& diag)
{
    const double raw = diag.size() == 0 ? 0.0 : diag.cwiseAbs().maxCoeff();
    return std::clamp(raw, kCurvatureMin, kCurvatureMax);
}

inline std::vector<double> curvature_diag(const OrdinalDataset& data, const ModelParams& params)
{
    std::vector<double> h;
    for (const auto& block : neg_hessian_diag(data, params))
        h.push_back(clamp_curvature(block));
    return h;
}

} // namespace ordpen
