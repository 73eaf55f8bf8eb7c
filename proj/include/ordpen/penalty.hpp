#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/error.hpp"

namespace ordpen {

enum class PenaltyKind {
    smooth_group, // sqrt(df_j) * ||D beta_j||_2, selects and smooths
    fused,        // ||D beta_j||_1, fuses adjacent levels
    numeric_lasso // levels treated as one numeric column, |slope_j|
};

inline std::string_view to_string(PenaltyKind kind)
{
    switch (kind) {
    case PenaltyKind::smooth_group: return "smooth";
    case PenaltyKind::fused: return "fused";
    case PenaltyKind::numeric_lasso: return "numeric";
    }
    return "?";
}

inline PenaltyKind parse_penalty_kind(std::string_view s)
{
    if (s == "smooth" || s == "smooth-group" || s == "group")
        return PenaltyKind::smooth_group;
    if (s == "fused")
        return PenaltyKind::fused;
    if (s == "numeric" || s == "numeric-lasso" || s == "lasso")
        return PenaltyKind::numeric_lasso;
    throw ConfigError("unknown penalty '" + std::string(s) + "' (expected smooth, fused or numeric)");
}

// (k-1) x k first-difference matrix: row r is -1 at column r, +1 at column r+1.
inline Eigen::MatrixXd difference_matrix(int k)
{
    if (k < 2)
        throw DataError("difference matrix needs k >= 2, got " + std::to_string(k));
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k - 1, k);
    for (int r = 0; r < k - 1; ++r) {
        d(r, r) = -1.0;
        d(r, r + 1) = 1.0;
    }
    return d;
}

// Adjacent differences beta_{l+1} - beta_l.
inline Eigen::VectorXd to_split_params(const Eigen::VectorXd& beta)
{
    if (beta.size() < 2)
        throw DimensionError("coefficient group needs at least 2 levels");
    return beta.tail(beta.size() - 1) - beta.head(beta.size() - 1);
}

// Inverse of to_split_params on the effect-coded subspace: cumulative sum
// anchored at zero, then centered so the levels sum to zero.
inline Eigen::VectorXd from_split_params(const Eigen::VectorXd& diffs)
{
    Eigen::VectorXd beta(diffs.size() + 1);
    beta[0] = 0.0;
    for (Eigen::Index l = 0; l < diffs.size(); ++l)
        beta[l + 1] = beta[l] + diffs[l];
    beta.array() -= beta.mean();
    return beta;
}

inline double smooth_group_penalty(const Eigen::VectorXd& beta, double df)
{
    return std::sqrt(df) * to_split_params(beta).norm();
}

inline double fused_penalty(const Eigen::VectorXd& beta)
{
    return to_split_params(beta).lpNorm<1>();
}

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::smooth_group;
    std::vector<double> lambda_grid; // decreasing; a trailing 0 means unpenalized
    std::vector<double> df;          // k_j - 1

    static PenaltySpec make(const OrdinalDataset& data, PenaltyKind kind, std::vector<double> grid = {})
    {
        PenaltySpec s;
        s.kind = kind;
        s.lambda_grid = std::move(grid);
        for (int k : data.levels)
            s.df.push_back(k - 1);
        s.validate();
        return s;
    }

    // Weight multiplying the group's penalty norm.
    double weight(std::size_t j) const { return kind == PenaltyKind::smooth_group ? std::sqrt(df[j]) : 1.0; }

    void validate() const
    {
        for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
            const double v = lambda_grid[g];
            const bool last = g + 1 == lambda_grid.size();
            if (!std::isfinite(v) || v < 0.0 || (v == 0.0 && !last))
                throw ConfigError("lambda grid entries must be positive (0 allowed only as the last entry)");
            if (g > 0 && !(v < lambda_grid[g - 1]))
                throw ConfigError("lambda grid must be strictly decreasing");
        }
    }
};

// `count` log-spaced values from lambda_max down to ratio * lambda_max.
inline std::vector<double> log_grid(double lambda_max, std::size_t count = 30, double ratio = 1e-3)
{
    if (!(lambda_max > 0.0) || count == 0 || !(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("log grid needs lambda_max > 0, count >= 1 and ratio in (0, 1)");
    std::vector<double> g(count);
    if (count == 1) {
        g[0] = lambda_max;
        return g;
    }
    const double step = std::log(ratio) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lambda_max * std::exp(step * static_cast<double>(i));
    g.back() = lambda_max * ratio;
    return g;
}

} // namespace ordpen
