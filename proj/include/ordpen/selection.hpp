#pragma once

// Choosing lambda: K-fold cross-validation under the Brier or ranked
// probability score, and stability selection over random subsamples.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/error.hpp"
#include "ordpen/model.hpp"
#include "ordpen/parallel.hpp"
#include "ordpen/penalty.hpp"
#include "ordpen/rng.hpp"
#include "ordpen/solver.hpp"

namespace ordpen {

enum class ScoreKind { brier, ranked_probability };

inline std::string_view to_string(ScoreKind kind)
{
    return kind == ScoreKind::brier ? "brier" : "rps";
}

inline ScoreKind parse_score_kind(std::string_view s)
{
    if (s == "brier")
        return ScoreKind::brier;
    if (s == "rps" || s == "ranked-probability")
        return ScoreKind::ranked_probability;
    throw ConfigError("unknown score '" + std::string(s) + "' (expected brier or rps)");
}

namespace detail {

inline void check_score_inputs(const Eigen::MatrixXd& pi, std::span<const int> y)
{
    if (static_cast<std::size_t>(pi.rows()) != y.size())
        throw DimensionError("probability table has " + std::to_string(pi.rows()) + " rows but " +
                             std::to_string(y.size()) + " responses were given");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] < 1 || y[i] > pi.cols())
            throw DataError("response " + std::to_string(y[i]) + " at row " + std::to_string(i + 1) +
                            " outside 1.." + std::to_string(pi.cols()));
}

} // namespace detail

// sum_i sum_r (v_ir - pi_ir)^2 with v the one-hot response indicator.
inline double brier_score(const Eigen::MatrixXd& pi, std::span<const int> y)
{
    detail::check_score_inputs(pi, y);
    double total = 0.0;
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
        const int yi = y[static_cast<std::size_t>(i)];
        for (Eigen::Index r = 0; r < pi.cols(); ++r) {
            const double gap = (r + 1 == yi ? 1.0 : 0.0) - pi(i, r);
            total += gap * gap;
        }
    }
    return total;
}

// sum_i sum_{r<c} (P(y_i <= r) - 1{y_i <= r})^2.
inline double ranked_probability_score(const Eigen::MatrixXd& pi, std::span<const int> y)
{
    detail::check_score_inputs(pi, y);
    double total = 0.0;
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
        const int yi = y[static_cast<std::size_t>(i)];
        double cum = 0.0;
        for (Eigen::Index r = 0; r + 1 < pi.cols(); ++r) {
            cum += pi(i, r);
            const double gap = cum - (yi <= r + 1 ? 1.0 : 0.0);
            total += gap * gap;
        }
    }
    return total;
}

inline double prediction_score(ScoreKind kind, const Eigen::MatrixXd& pi, std::span<const int> y)
{
    return kind == ScoreKind::brier ? brier_score(pi, y) : ranked_probability_score(pi, y);
}

// Fold index (0..K-1) per observation. Stratified by response category when
// every category has at least K observations, a plain random partition otherwise.
inline std::vector<int> make_folds(const OrdinalDataset& data, int folds, std::uint64_t seed)
{
    if (folds < 2)
        throw ConfigError("cross-validation needs at least 2 folds, got " + std::to_string(folds));
    if (data.n < static_cast<std::size_t>(folds))
        throw ConfigError("cannot split " + std::to_string(data.n) + " observations into " + std::to_string(folds) +
                          " folds");
    Rng rng(derive_seed(seed, 0));
    const auto counts = data.response_counts();
    const bool stratify =
        std::all_of(counts.begin(), counts.end(), [&](std::size_t v) { return v >= static_cast<std::size_t>(folds); });

    std::vector<std::size_t> order;
    if (stratify) {
        for (int r = 1; r <= data.c; ++r) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < data.n; ++i)
                if (data.y[i] == r)
                    members.push_back(i);
            rng.shuffle(members);
            order.insert(order.end(), members.begin(), members.end());
        }
    } else {
        order = rng.permutation(data.n);
    }
    std::vector<int> fold_of(data.n);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return fold_of;
}

struct CvResult {
    std::vector<double> lambda_grid;
    ScoreKind score = ScoreKind::brier;
    int folds = 0;
    std::vector<int> fold_of;          // fold index per observation
    Eigen::MatrixXd fold_scores;       // folds x grid, validation score sums; NaN where the fit failed
    Eigen::MatrixXd fold_train_scores; // folds x grid, training score sums
    std::vector<double> mean_score;    // per lambda, averaged over folds; NaN if any fold is missing
    std::vector<double> mean_train_score;
    std::size_t optimal_index = 0;
    double optimal_lambda = 0.0;
    std::vector<std::string> failures; // "fold f, lambda g: message"
};

// Cross-validation with a given fold assignment (values 0..K-1, every fold non-empty).
inline CvResult cross_validate(const OrdinalDataset& data, const PenaltySpec& spec, const std::vector<int>& fold_of,
                               const SolverConfig& cfg = {}, ScoreKind score = ScoreKind::brier)
{
    data.validate();
    spec.validate();
    if (fold_of.size() != data.n)
        throw DimensionError("fold assignment has " + std::to_string(fold_of.size()) + " entries, expected n = " +
                             std::to_string(data.n));
    const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
    if (folds < 2 || *std::min_element(fold_of.begin(), fold_of.end()) < 0)
        throw ConfigError("fold assignment needs values 0..K-1 with K >= 2");

    CvResult cv;
    cv.score = score;
    cv.folds = folds;
    cv.fold_of = fold_of;
    cv.lambda_grid = spec.lambda_grid.empty() ? default_lambda_grid(data, spec.kind) : spec.lambda_grid;
    const auto grid_size = static_cast<Eigen::Index>(cv.lambda_grid.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    cv.fold_scores = Eigen::MatrixXd::Constant(folds, grid_size, nan);
    cv.fold_train_scores = Eigen::MatrixXd::Constant(folds, grid_size, nan);

    PenaltySpec fold_spec = spec;
    fold_spec.lambda_grid = cv.lambda_grid;
    std::vector<std::vector<std::string>> fold_failures(static_cast<std::size_t>(folds));

    parallel_for(static_cast<std::size_t>(folds), [&](std::size_t f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < data.n; ++i)
            (fold_of[i] == static_cast<int>(f) ? test : train).push_back(i);
        if (test.empty() || train.empty())
            throw ConfigError("fold " + std::to_string(f + 1) + " is empty or covers all observations");
        const OrdinalDataset train_data = data.subset(train);
        const OrdinalDataset test_data = data.subset(test);
        PathResult path;
        try {
            path = fit_path(train_data, fold_spec, cfg);
        } catch (const Error& e) {
            fold_failures[f].push_back("fold " + std::to_string(f + 1) + ": " + e.what());
            return;
        }
        for (Eigen::Index g = 0; g < grid_size; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            if (path.failed(gi)) {
                fold_failures[f].push_back("fold " + std::to_string(f + 1) + ", lambda " +
                                           std::to_string(gi + 1) + ": " + path.failures[gi]);
                continue;
            }
            const auto& params = path.fits[gi].params;
            const auto fi = static_cast<Eigen::Index>(f);
            cv.fold_scores(fi, g) = prediction_score(score, predict_probs(test_data, params).pi, test_data.y);
            cv.fold_train_scores(fi, g) =
                prediction_score(score, predict_probs(train_data, params).pi, train_data.y);
        }
    });
    for (auto& f : fold_failures)
        cv.failures.insert(cv.failures.end(), f.begin(), f.end());

    // Grid order is decreasing in lambda, so keeping the first minimum breaks
    // ties toward the larger lambda.
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (Eigen::Index g = 0; g < grid_size; ++g) {
        const bool complete = cv.fold_scores.col(g).allFinite();
        cv.mean_score.push_back(complete ? cv.fold_scores.col(g).mean() : nan);
        cv.mean_train_score.push_back(cv.fold_train_scores.col(g).allFinite() ? cv.fold_train_scores.col(g).mean()
                                                                               : nan);
        if (complete && cv.mean_score.back() < best) {
            best = cv.mean_score.back();
            cv.optimal_index = static_cast<std::size_t>(g);
            found = true;
        }
    }
    if (!found)
        throw SolverError("cross-validation failed: no lambda was fitted successfully on every fold");
    cv.optimal_lambda = cv.lambda_grid[cv.optimal_index];
    return cv;
}

inline CvResult cross_validate(const OrdinalDataset& data, const PenaltySpec& spec, int folds,
                               const SolverConfig& cfg, std::uint64_t seed, ScoreKind score = ScoreKind::brier)
{
    return cross_validate(data, spec, make_folds(data, folds, seed), cfg, score);
}

struct StabilityResult {
    std::vector<double> lambda_grid;
    Eigen::MatrixXi counts;  // p x grid, number of subsamples selecting the group
    Eigen::MatrixXd pi_hat;  // counts / B
    int subsamples = 0;      // B
    std::size_t subsample_size = 0;
    double pi_thr = 0.6;
    std::vector<std::string> failures; // subsample fits that failed (counted as not selected)

    // {j : pi_hat(j, g) >= pi_thr}.
    std::vector<std::size_t> stable_set(std::size_t g) const
    {
        std::vector<std::size_t> out;
        for (Eigen::Index j = 0; j < pi_hat.rows(); ++j)
            if (pi_hat(j, static_cast<Eigen::Index>(g)) >= pi_thr)
                out.push_back(static_cast<std::size_t>(j));
        return out;
    }
};

inline StabilityResult stability_selection(const OrdinalDataset& data, const PenaltySpec& spec, int subsamples,
                                           double fraction, const SolverConfig& cfg, std::uint64_t seed,
                                           double pi_thr = 0.6)
{
    data.validate();
    spec.validate();
    if (subsamples < 1)
        throw ConfigError("stability selection needs at least 1 subsample");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("subsample fraction must lie in (0, 1)");
    if (!(pi_thr >= 0.0 && pi_thr <= 1.0))
        throw ConfigError("pi_thr must lie in [0, 1]");
    const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.n)));
    if (m < 1)
        throw ConfigError("subsample fraction leaves no observations");

    StabilityResult st;
    st.lambda_grid = spec.lambda_grid.empty() ? default_lambda_grid(data, spec.kind) : spec.lambda_grid;
    st.subsamples = subsamples;
    st.subsample_size = m;
    st.pi_thr = pi_thr;
    PenaltySpec sub_spec = spec;
    sub_spec.lambda_grid = st.lambda_grid;
    const auto grid_size = static_cast<Eigen::Index>(st.lambda_grid.size());

    const auto count = static_cast<std::size_t>(subsamples);
    std::vector<Eigen::MatrixXi> selected(count, Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(data.p), grid_size));
    std::vector<std::vector<std::string>> failures(count);
    parallel_for(count, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b + 1));
        std::vector<std::size_t> rows = rng.permutation(data.n);
        rows.resize(m);
        std::sort(rows.begin(), rows.end());
        PathResult path;
        try {
            path = fit_path(data.subset(rows), sub_spec, cfg);
        } catch (const Error& e) {
            failures[b].push_back("subsample " + std::to_string(b + 1) + ": " + e.what());
            return;
        }
        for (Eigen::Index g = 0; g < grid_size; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            if (path.failed(gi)) {
                failures[b].push_back("subsample " + std::to_string(b + 1) + ", lambda " + std::to_string(gi + 1) +
                                      ": " + path.failures[gi]);
                continue;
            }
            for (std::size_t j : path.fits[gi].active_groups)
                selected[b](static_cast<Eigen::Index>(j), g) = 1;
        }
    });
    st.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(data.p), grid_size);
    for (std::size_t b = 0; b < count; ++b) {
        st.counts += selected[b];
        st.failures.insert(st.failures.end(), failures[b].begin(), failures[b].end());
    }
    st.pi_hat = st.counts.cast<double>() / static_cast<double>(subsamples);
    return st;
}

} // namespace ordpen
