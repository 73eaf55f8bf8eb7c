#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/detail/logistic.hpp"
#include "ordpen/model.hpp"
#include "ordpen/rng.hpp"

namespace testing {

// Draws predictors uniformly and the response from the cumulative logit
// model with the given thresholds and level effects (effects[j][level-1]).
inline ordpen::OrdinalDataset simulate(std::size_t n, const std::vector<double>& thresholds,
                                       const std::vector<std::vector<double>>& effects, std::uint64_t seed)
{
    ordpen::Rng rng(seed);
    const int c = static_cast<int>(thresholds.size()) + 1;
    std::vector<int> levels;
    for (const auto& e : effects)
        levels.push_back(static_cast<int>(e.size()));
    std::vector<int> x, y;
    std::vector<double> probs(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < n; ++i) {
        double shift = 0.0;
        for (std::size_t j = 0; j < effects.size(); ++j) {
            const int level = rng.between(1, levels[j]);
            x.push_back(level);
            shift += effects[j][static_cast<std::size_t>(level - 1)];
        }
        for (int r = 0; r < c; ++r) {
            const double lo = r == 0 ? -ordpen::detail::kInf : thresholds[static_cast<std::size_t>(r - 1)] - shift;
            const double hi = r == c - 1 ? ordpen::detail::kInf : thresholds[static_cast<std::size_t>(r)] - shift;
            probs[static_cast<std::size_t>(r)] = ordpen::detail::interval_prob(lo, hi);
        }
        y.push_back(static_cast<int>(rng.categorical(probs)) + 1);
    }
    return ordpen::OrdinalDataset::make(c, levels, std::move(x), std::move(y));
}

// Random instance with small random effects and evenly spaced thresholds.
inline ordpen::OrdinalDataset random_instance(std::uint64_t seed, std::size_t n, std::size_t p, int c, int max_levels,
                                              double scale = 0.6)
{
    ordpen::Rng rng(seed);
    std::vector<double> theta;
    for (int r = 0; r < c - 1; ++r)
        theta.push_back(-1.5 + 3.0 * (r + 1) / c);
    std::vector<std::vector<double>> effects(p);
    for (auto& e : effects) {
        const int k = rng.between(2, max_levels);
        for (int l = 0; l < k; ++l)
            e.push_back(scale * (2.0 * rng.uniform() - 1.0));
    }
    return simulate(n, theta, effects, rng.next());
}

inline ordpen::ModelParams random_params(const ordpen::OrdinalDataset& data, std::uint64_t seed)
{
    ordpen::Rng rng(seed);
    auto m = ordpen::ModelParams::zeros(data);
    double t = -1.5;
    for (Eigen::Index r = 0; r < m.thresholds.size(); ++r) {
        t += 0.3 + rng.uniform();
        m.thresholds[r] = t;
    }
    for (auto& g : m.groups)
        for (Eigen::Index l = 0; l < g.size(); ++l)
            g[l] = 2.0 * rng.uniform() - 1.0;
    return m;
}

// Flattened [thresholds | beta_1 | ... | beta_p] view, used by finite-difference oracles.
inline Eigen::VectorXd flatten(const ordpen::ModelParams& m)
{
    Eigen::Index size = m.thresholds.size();
    for (const auto& g : m.groups)
        size += g.size();
    Eigen::VectorXd v(size);
    v.head(m.thresholds.size()) = m.thresholds;
    Eigen::Index off = m.thresholds.size();
    for (const auto& g : m.groups) {
        v.segment(off, g.size()) = g;
        off += g.size();
    }
    return v;
}

inline ordpen::ModelParams unflatten(const ordpen::ModelParams& like, const Eigen::VectorXd& v)
{
    ordpen::ModelParams m = like;
    m.thresholds = v.head(like.thresholds.size());
    Eigen::Index off = like.thresholds.size();
    for (auto& g : m.groups) {
        g = v.segment(off, g.size());
        off += g.size();
    }
    return m;
}

inline double sup_distance(const ordpen::ModelParams& a, const ordpen::ModelParams& b)
{
    return (flatten(a) - flatten(b)).lpNorm<Eigen::Infinity>();
}

} // namespace testing
