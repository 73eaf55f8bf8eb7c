#pragma once

// Simulation harness: synthetic ordinal-on-ordinal data with 12 informative
// and a configurable number of noise predictors, ROC/AUC evaluation of
// variable selection and level fusion, and a replication driver comparing
// the smooth-group (ORS), fused (ORF), numeric-lasso and unpenalized
// forward-stepwise rankings.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/detail/logistic.hpp"
#include "ordpen/error.hpp"
#include "ordpen/parallel.hpp"
#include "ordpen/penalty.hpp"
#include "ordpen/rng.hpp"
#include "ordpen/solver.hpp"

namespace ordpen {

inline constexpr std::size_t kInformativeCount = 12;

// Curve amplitude used when a scenario does not override it; chosen so the
// smooth-group ranking reaches a mean AUC of about 0.97 at n = 500 with five
// levels (see tools/calibrate_amplitude.cpp).
inline constexpr double kDefaultAmplitude = 0.55;

struct SimulationScenario {
    std::string name = "a";
    std::size_t n = 500;
    int levels = 5; // per predictor
    std::size_t noise_count = 38;
    std::vector<double> thresholds{5.5, 6.5, 7.5, 8.5};
    bool fused_variant = false;
    double amplitude = kDefaultAmplitude;
    // Sum of the mean informative effects; the curves carry this baseline so
    // that the default thresholds give a balanced five-category response.
    double baseline = 7.0;
    // Optional explicit informative curves (each of length `levels`), used
    // instead of the built-in 12 shapes; any number of curves is allowed.
    std::vector<std::vector<double>> curves;
    std::uint64_t seed = 1;

    std::size_t informative_count() const { return curves.empty() ? kInformativeCount : curves.size(); }
    std::size_t p() const { return informative_count() + noise_count; }

    // The four named settings: (a) 5 levels, (b) 9 levels, (c) 5 levels with
    // fused effects, (d) 9 levels with fused effects.
    static SimulationScenario preset(const std::string& name, std::size_t n = 500)
    {
        SimulationScenario s;
        s.name = name;
        s.n = n;
        if (name == "a") {
            s.levels = 5;
        } else if (name == "b") {
            s.levels = 9;
        } else if (name == "c") {
            s.levels = 5;
            s.fused_variant = true;
        } else if (name == "d") {
            s.levels = 9;
            s.fused_variant = true;
        } else {
            throw ConfigError("unknown scenario '" + name + "' (expected a, b, c or d)");
        }
        return s;
    }

    void validate() const
    {
        if (n < 1)
            throw ConfigError("scenario needs n >= 1");
        if (levels < 2)
            throw ConfigError("scenario needs at least 2 levels per predictor");
        if (thresholds.empty())
            throw ConfigError("scenario needs at least one threshold");
        for (std::size_t r = 0; r < thresholds.size(); ++r)
            if (!std::isfinite(thresholds[r]) || (r > 0 && !(thresholds[r] > thresholds[r - 1])))
                throw ConfigError("scenario thresholds must be finite and strictly increasing");
        if (!std::isfinite(amplitude) || !std::isfinite(baseline))
            throw ConfigError("scenario amplitude and baseline must be finite");
        if (p() < 1)
            throw ConfigError("scenario needs at least one predictor");
        if (!curves.empty()) {
            for (const auto& c : curves)
                if (c.size() != static_cast<std::size_t>(levels))
                    throw ConfigError("every informative curve needs " + std::to_string(levels) + " values");
        }
    }

    // Effects of the 12 informative predictors, indexed [predictor][level-1].
    std::vector<std::vector<double>> informative_curves() const
    {
        if (!curves.empty())
            return curves;
        std::vector<std::vector<double>> out;
        const int k = levels;
        // Plateau position of each level in the fused variant.
        auto position = [&](int l) {
            const double t = static_cast<double>(l) / static_cast<double>(k - 1);
            if (!fused_variant)
                return t;
            const int plateaus = k <= 5 ? 3 : 4;
            const int group = std::min(plateaus - 1, static_cast<int>(std::floor(t * plateaus)));
            return (group + 0.5) / plateaus;
        };
        auto add = [&](auto shape) {
            std::vector<double> v(static_cast<std::size_t>(k));
            for (int l = 0; l < k; ++l)
                v[static_cast<std::size_t>(l)] = amplitude * shape(position(l));
            out.push_back(std::move(v));
        };
        // Non-monotone: a single interior peak at varying positions and widths.
        for (const auto& [center, width] :
             {std::pair{0.5, 0.25}, std::pair{0.35, 0.2}, std::pair{0.65, 0.2}, std::pair{0.5, 0.35}})
            add([=](double t) { return 2.0 * std::exp(-0.5 * std::pow((t - center) / width, 2.0)); });
        // Monotone, concave increasing.
        for (const double rate : {1.5, 2.5, 3.5, 5.0})
            add([=](double t) { return 2.0 * (1.0 - std::exp(-rate * t)) / (1.0 - std::exp(-rate)); });
        // Linear.
        for (int m = 0; m < 4; ++m)
            add([](double t) { return 2.0 * t; });

        // Spread the baseline so the informative effects average to `baseline` in total.
        double total = 0.0;
        for (const auto& v : out)
            total += std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(k);
        const double offset = (baseline - total) / static_cast<double>(kInformativeCount);
        for (auto& v : out)
            for (auto& x : v)
                x += offset;
        return out;
    }
};

struct GroundTruth {
    std::vector<std::size_t> relevant;               // informative predictor indices (0-based)
    std::vector<std::vector<bool>> true_differences; // per predictor, per adjacent pair: effect differs
    std::vector<std::vector<double>> effects;        // per predictor, per level

    std::vector<bool> relevant_mask() const
    {
        std::vector<bool> m(effects.size(), false);
        for (std::size_t j : relevant)
            m[j] = true;
        return m;
    }
};

struct SimulatedData {
    OrdinalDataset data;
    GroundTruth truth;
};

inline GroundTruth ground_truth(const SimulationScenario& scenario)
{
    scenario.validate();
    GroundTruth t;
    t.effects = scenario.informative_curves();
    t.effects.resize(scenario.p(), std::vector<double>(static_cast<std::size_t>(scenario.levels), 0.0));
    for (std::size_t j = 0; j < scenario.informative_count(); ++j)
        t.relevant.push_back(j);
    for (const auto& e : t.effects) {
        std::vector<bool> d;
        for (std::size_t l = 1; l < e.size(); ++l)
            d.push_back(std::abs(e[l] - e[l - 1]) > 1e-12);
        t.true_differences.push_back(std::move(d));
    }
    return t;
}

// Predictors uniform over their levels; response drawn from the cumulative
// logit model with the scenario's curves as level effects.
inline SimulatedData generate(const SimulationScenario& scenario)
{
    GroundTruth truth = ground_truth(scenario);
    const std::size_t p = scenario.p();
    const int c = static_cast<int>(scenario.thresholds.size()) + 1;
    Rng rng(scenario.seed);
    std::vector<int> x(scenario.n * p), y(scenario.n);
    std::vector<double> probs(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < scenario.n; ++i) {
        double shift = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const int level = rng.between(1, scenario.levels);
            x[i * p + j] = level;
            shift += truth.effects[j][static_cast<std::size_t>(level - 1)];
        }
        for (int r = 0; r < c; ++r) {
            const double lo = r == 0 ? -detail::kInf : scenario.thresholds[static_cast<std::size_t>(r - 1)] - shift;
            const double hi = r == c - 1 ? detail::kInf : scenario.thresholds[static_cast<std::size_t>(r)] - shift;
            probs[static_cast<std::size_t>(r)] = detail::interval_prob(lo, hi);
        }
        y[i] = static_cast<int>(rng.categorical(probs)) + 1;
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j)
        names.push_back((j < scenario.informative_count() ? "inf" : "noise") + std::to_string(j + 1));
    return {OrdinalDataset::make(c, std::vector<int>(p, scenario.levels), std::move(x), std::move(y),
                                 std::move(names)),
            std::move(truth)};
}

struct RocCurve {
    std::vector<double> fpr; // starts at 0, ends at 1
    std::vector<double> tpr;
    double auc = 0.0;
};

// ROC of a scoring rule where larger scores are declared positive first.
// Tied scores move along a diagonal segment, so the trapezoid AUC equals the
// fraction of concordant (positive, negative) pairs with ties counting 1/2.
inline RocCurve roc_from_scores(const std::vector<double>& score, const std::vector<bool>& positive)
{
    if (score.size() != positive.size())
        throw DimensionError("ROC needs one label per score");
    const auto pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
    const double neg = static_cast<double>(positive.size()) - pos;
    if (pos == 0.0 || neg == 0.0)
        throw ConfigError("ROC needs at least one positive and one negative instance");
    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    RocCurve roc;
    roc.fpr.push_back(0.0);
    roc.tpr.push_back(0.0);
    double tp = 0.0, fp = 0.0;
    for (std::size_t k = 0; k < order.size();) {
        std::size_t end = k;
        while (end < order.size() && score[order[end]] == score[order[k]])
            ++end;
        for (std::size_t q = k; q < end; ++q)
            (positive[order[q]] ? tp : fp) += 1.0;
        const double x = fp / neg, y = tp / pos;
        roc.auc += (x - roc.fpr.back()) * (y + roc.tpr.back()) * 0.5;
        roc.fpr.push_back(x);
        roc.tpr.push_back(y);
        k = end;
    }
    return roc;
}

// Scores from entry lambdas (larger enters first). Instances that never
// enter (NaN) are placed after all others in a seeded random order.
inline std::vector<double> scores_with_random_tail(const std::vector<double>& entry, std::uint64_t seed)
{
    std::vector<std::size_t> never;
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < entry.size(); ++j) {
        if (std::isnan(entry[j]))
            never.push_back(j);
        else
            floor = std::min(floor, entry[j]);
    }
    std::vector<double> out = entry;
    Rng rng(seed);
    rng.shuffle(never);
    const double base = std::isfinite(floor) ? floor : 0.0;
    for (std::size_t q = 0; q < never.size(); ++q)
        out[never[q]] = base - 1.0 - static_cast<double>(q); // all strictly below any entered score
    return out;
}

// Variable-selection ROC from an explicit ranking (best first); variables
// missing from `ranking` go to a seeded random tail.
inline RocCurve roc_selection(const std::vector<std::size_t>& ranking, const GroundTruth& truth, std::uint64_t seed)
{
    const std::size_t p = truth.effects.size();
    std::vector<double> entry(p, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (ranking[r] >= p)
            throw DimensionError("ranking refers to variable " + std::to_string(ranking[r] + 1) + " of " +
                                 std::to_string(p));
        entry[ranking[r]] = static_cast<double>(p - r);
    }
    return roc_from_scores(scores_with_random_tail(entry, seed), truth.relevant_mask());
}

// Variable-selection ROC from per-variable entry lambdas along a path.
inline RocCurve roc_selection(const PathResult& path, const GroundTruth& truth, std::uint64_t seed)
{
    if (path.entry_lambda.size() != truth.effects.size())
        throw DimensionError("path and ground truth disagree on the number of variables");
    return roc_from_scores(scores_with_random_tail(path.entry_lambda, seed), truth.relevant_mask());
}

// Largest lambda at which each adjacent difference is nonzero (NaN if never).
inline std::vector<std::vector<double>> difference_entry_lambda(const PathResult& path)
{
    std::vector<std::vector<double>> entry;
    for (std::size_t g = 0; g < path.fits.size(); ++g) {
        if (path.failed(g))
            continue;
        const auto& nz = path.fits[g].nonzero;
        if (entry.empty())
            for (const auto& v : nz)
                entry.emplace_back(v.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t j = 0; j < nz.size(); ++j)
            for (std::size_t m = 0; m < nz[j].size(); ++m)
                if (nz[j][m] && std::isnan(entry[j][m]))
                    entry[j][m] = path.lambda_grid[g];
    }
    return entry;
}

// Each adjacent-level contrast is one binary instance, ranked by path entry.
inline RocCurve roc_fusion(const std::vector<std::vector<double>>& entry, const GroundTruth& truth,
                           std::uint64_t seed)
{
    std::vector<double> flat;
    std::vector<bool> labels;
    if (entry.size() != truth.true_differences.size())
        throw DimensionError("difference sets and ground truth disagree on the number of variables");
    for (std::size_t j = 0; j < entry.size(); ++j) {
        if (entry[j].size() != truth.true_differences[j].size())
            throw DimensionError("variable " + std::to_string(j + 1) + " has mismatched difference counts");
        flat.insert(flat.end(), entry[j].begin(), entry[j].end());
        labels.insert(labels.end(), truth.true_differences[j].begin(), truth.true_differences[j].end());
    }
    return roc_from_scores(scores_with_random_tail(flat, seed), labels);
}

struct FusionRates {
    double fpr = 0.0; // true-zero differences declared nonzero
    double fnr = 0.0; // true nonzero differences declared zero
};

inline FusionRates fusion_rates(const std::vector<std::vector<bool>>& estimated, const GroundTruth& truth)
{
    if (estimated.size() != truth.true_differences.size())
        throw DimensionError("difference sets and ground truth disagree on the number of variables");
    double fp = 0.0, negatives = 0.0, fn = 0.0, positives = 0.0;
    for (std::size_t j = 0; j < estimated.size(); ++j) {
        if (estimated[j].size() != truth.true_differences[j].size())
            throw DimensionError("variable " + std::to_string(j + 1) + " has mismatched difference counts");
        for (std::size_t m = 0; m < estimated[j].size(); ++m) {
            if (truth.true_differences[j][m]) {
                positives += 1.0;
                fn += estimated[j][m] ? 0.0 : 1.0;
            } else {
                negatives += 1.0;
                fp += estimated[j][m] ? 1.0 : 0.0;
            }
        }
    }
    return {negatives > 0.0 ? fp / negatives : 0.0, positives > 0.0 ? fn / positives : 0.0};
}

inline FusionRates fusion_rates(const FitResult& fit, const GroundTruth& truth)
{
    return fusion_rates(fit.nonzero, truth);
}

struct StepwiseResult {
    std::vector<std::size_t> order; // variables in order of entry
    std::vector<double> aic;        // AIC after each entry (index 0: null model)
};

// Unpenalized baseline: fit the full dummy-coded model (which must exist),
// then add variables greedily from the null model while AIC improves.
// Candidate models whose fit fails are skipped. Throws SeparationError when
// the full model or the null model cannot be fitted.
inline StepwiseResult forward_stepwise_aic(const OrdinalDataset& data, const SolverConfig& cfg = {})
{
    fit_mle_newton(data, cfg);
    auto aic = [&](const FitResult& f, const std::vector<std::size_t>& vars) {
        double k = data.c - 1;
        for (std::size_t j : vars)
            k += data.levels[j] - 1;
        return 2.0 * static_cast<double>(data.n) * f.objective + 2.0 * k;
    };
    StepwiseResult out;
    std::vector<std::size_t> current;
    double best = aic(fit_mle_newton(data, cfg, current), current);
    out.aic.push_back(best);
    std::vector<bool> used(data.p, false);
    while (current.size() < data.p) {
        double candidate_best = best;
        std::size_t pick = data.p;
        for (std::size_t j = 0; j < data.p; ++j) {
            if (used[j])
                continue;
            auto vars = current;
            vars.push_back(j);
            try {
                const double value = aic(fit_mle_newton(data, cfg, vars), vars);
                if (value < candidate_best) {
                    candidate_best = value;
                    pick = j;
                }
            } catch (const SeparationError&) {
            }
        }
        if (pick == data.p)
            break;
        used[pick] = true;
        current.push_back(pick);
        out.order.push_back(pick);
        out.aic.push_back(candidate_best);
        best = candidate_best;
    }
    return out;
}

enum class Method { ors, orf, numeric_lasso, mle_stepwise };

inline std::string_view to_string(Method m)
{
    switch (m) {
    case Method::ors: return "ORS";
    case Method::orf: return "ORF";
    case Method::numeric_lasso: return "numeric-lasso";
    case Method::mle_stepwise: return "MLE-stepwise";
    }
    return "?";
}

inline Method parse_method(std::string_view s)
{
    if (s == "ORS" || s == "ors")
        return Method::ors;
    if (s == "ORF" || s == "orf")
        return Method::orf;
    if (s == "numeric-lasso" || s == "numeric")
        return Method::numeric_lasso;
    if (s == "MLE-stepwise" || s == "mle" || s == "stepwise")
        return Method::mle_stepwise;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected ORS, ORF, numeric-lasso or MLE-stepwise)");
}

inline const std::vector<Method>& all_methods()
{
    static const std::vector<Method> m{Method::ors, Method::orf, Method::numeric_lasso, Method::mle_stepwise};
    return m;
}

struct MethodOutcome {
    double auc = std::numeric_limits<double>::quiet_NaN();
    double fusion_auc = std::numeric_limits<double>::quiet_NaN(); // ORF on scenarios with fused effects
    bool failed = false;
    bool converged = true; // every path fit converged
    std::string message;
};

struct ReplicationResult {
    SimulationScenario scenario;
    std::vector<Method> methods;
    std::vector<std::vector<MethodOutcome>> outcomes; // [replicate][method]

    std::size_t replicates() const { return outcomes.size(); }

    std::size_t failures(std::size_t m) const
    {
        std::size_t f = 0;
        for (const auto& rep : outcomes)
            f += rep[m].failed ? 1 : 0;
        return f;
    }

    // Mean AUC over successful replicates (NaN if none succeeded).
    double mean_auc(std::size_t m) const
    {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& rep : outcomes)
            if (!rep[m].failed) {
                sum += rep[m].auc;
                ++count;
            }
        return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    }

    std::size_t index_of(Method method) const
    {
        const auto it = std::find(methods.begin(), methods.end(), method);
        if (it == methods.end())
            throw ConfigError("method " + std::string(to_string(method)) + " was not run");
        return static_cast<std::size_t>(it - methods.begin());
    }
};

inline MethodOutcome run_method(Method method, const SimulatedData& sim, const SolverConfig& cfg, std::uint64_t seed)
{
    MethodOutcome out;
    try {
        if (method == Method::mle_stepwise) {
            const auto step = forward_stepwise_aic(sim.data, cfg);
            out.auc = roc_selection(step.order, sim.truth, seed).auc;
            return out;
        }
        const PenaltyKind kind = method == Method::ors   ? PenaltyKind::smooth_group
                                 : method == Method::orf ? PenaltyKind::fused
                                                         : PenaltyKind::numeric_lasso;
        const auto path = fit_path(sim.data, PenaltySpec::make(sim.data, kind), cfg);
        for (std::size_t g = 0; g < path.fits.size(); ++g) {
            if (path.failed(g))
                throw SolverError("path fit failed at lambda " + std::to_string(g + 1) + ": " + path.failures[g]);
            out.converged = out.converged && path.fits[g].converged;
        }
        out.auc = roc_selection(path, sim.truth, seed).auc;
        if (method == Method::orf) {
            const auto labels = sim.truth.true_differences;
            bool any_zero = false, any_nonzero = false;
            for (const auto& v : labels)
                for (bool b : v)
                    (b ? any_nonzero : any_zero) = true;
            if (any_zero && any_nonzero)
                out.fusion_auc = roc_fusion(difference_entry_lambda(path), sim.truth, derive_seed(seed, 1)).auc;
        }
    } catch (const Error& e) {
        out.failed = true;
        out.message = e.what();
    }
    return out;
}

// R independent replicates; replicate r uses data seed derive_seed(seed, r)
// and its own tail-randomization seeds, so results do not depend on the
// execution order or the number of threads.
inline ReplicationResult run_replications(const SimulationScenario& scenario, const std::vector<Method>& methods,
                                          std::size_t replicates, const SolverConfig& cfg, std::uint64_t seed)
{
    scenario.validate();
    if (replicates < 1)
        throw ConfigError("need at least one replicate");
    if (methods.empty())
        throw ConfigError("need at least one method");
    ReplicationResult res;
    res.scenario = scenario;
    res.methods = methods;
    res.outcomes.assign(replicates, std::vector<MethodOutcome>(methods.size()));
    parallel_for(replicates, [&](std::size_t r) {
        SimulationScenario s = scenario;
        s.seed = derive_seed(seed, r);
        const SimulatedData sim = generate(s);
        for (std::size_t m = 0; m < methods.size(); ++m)
            res.outcomes[r][m] = run_method(methods[m], sim, cfg, derive_seed(s.seed, m + 1));
    });
    return res;
}

} // namespace ordpen
