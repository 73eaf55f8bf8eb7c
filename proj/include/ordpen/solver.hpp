#pragma once

// Penalized fitting of the cumulative logit model
//
//   minimize  -(1/n) l(theta, beta) + lambda * sum_j J_j(beta_j)
//
// All solvers run in working coordinates (adjacent differences for the
// ordinal penalties, a slope for the numeric lasso), where J_j becomes a
// plain group-lasso or lasso norm, and report effect-coded parameters.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/detail/working.hpp"
#include "ordpen/error.hpp"
#include "ordpen/model.hpp"
#include "ordpen/penalty.hpp"

namespace ordpen {

// |linear predictor| beyond which fitted cumulative probabilities are within
// about 1e-13 of 0 or 1.
inline constexpr double kSaturatedLogit = 30.0;

struct SolverConfig {
    double alpha0 = 1.0;   // initial Armijo step
    double delta = 0.5;    // backtracking factor
    double sigma = 0.1;    // sufficient-decrease constant
    int max_outer_iters = 1000;
    double tol = 1e-8;     // objective change over one outer iteration
    double kkt_tol = 1e-6; // optimality residual required alongside tol
    int max_armijo_steps = 60;
    int max_newton_iters = 100;
    double newton_bound = 1e3; // |parameter| beyond this means the MLE does not exist

    void validate() const
    {
        if (!(sigma > 0.0 && sigma < 1.0))
            throw ConfigError("sigma must lie in (0, 1)");
        if (!(delta > 0.0 && delta < 1.0))
            throw ConfigError("delta must lie in (0, 1)");
        if (!(alpha0 > 0.0))
            throw ConfigError("alpha0 must be positive");
        if (!(tol > 0.0) || !(kkt_tol > 0.0))
            throw ConfigError("tolerances must be positive");
        if (max_outer_iters < 1 || max_armijo_steps < 1 || max_newton_iters < 1)
            throw ConfigError("iteration limits must be at least 1");
    }
};

struct FitResult {
    ModelParams params;
    Eigen::VectorXd working; // thresholds followed by per-group working coefficients
    PenaltyKind kind = PenaltyKind::smooth_group;
    double lambda = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    std::vector<std::size_t> active_groups;
    // Per group, per adjacent pair (or the single slope): coefficient is exactly nonzero.
    std::vector<std::vector<bool>> nonzero;
    std::vector<double> per_iter_objective;

    std::size_t nonzero_count() const
    {
        std::size_t total = 0;
        for (const auto& g : nonzero)
            total += static_cast<std::size_t>(std::count(g.begin(), g.end(), true));
        return total;
    }
};

namespace detail {

inline double group_penalty(PenaltyKind kind, const Eigen::Ref<const Eigen::VectorXd>& uj)
{
    return kind == PenaltyKind::smooth_group ? uj.norm() : uj.lpNorm<1>();
}

inline double penalty_value(const WorkingModel& wm, const PenaltySpec& spec, double lambda, const Eigen::VectorXd& u)
{
    if (lambda == 0.0)
        return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < wm.groups(); ++j)
        total += spec.weight(j) * group_penalty(spec.kind, wm.block(u, j));
    return lambda * total;
}

// Largest violation of the optimality conditions at u.
inline double kkt_residual(const WorkingModel& wm, const PenaltySpec& spec, double lambda, const Eigen::VectorXd& u,
                           const ObsDerivs& d)
{
    double worst = wm.threshold_gradient(d).lpNorm<Eigen::Infinity>();
    for (std::size_t j = 0; j < wm.groups(); ++j) {
        const Eigen::VectorXd g = wm.block_gradient(j, d);
        const auto uj = wm.block(u, j);
        const double t = lambda * spec.weight(j);
        if (spec.kind == PenaltyKind::smooth_group) {
            const double norm = uj.norm();
            const double r = norm == 0.0 ? std::max(0.0, g.norm() - t) : (g + t * uj / norm).norm();
            worst = std::max(worst, r);
        } else {
            for (Eigen::Index m = 0; m < uj.size(); ++m) {
                const double r = uj[m] == 0.0 ? std::max(0.0, std::abs(g[m]) - t)
                                              : std::abs(g[m] + t * (uj[m] > 0.0 ? 1.0 : -1.0));
                worst = std::max(worst, r);
            }
        }
    }
    return worst;
}

inline FitResult finish(const WorkingModel& wm, const PenaltySpec& spec, double lambda, Eigen::VectorXd u,
                        double objective, int iterations, bool converged, double kkt, std::vector<double> trace)
{
    FitResult f;
    f.kind = spec.kind;
    f.lambda = lambda;
    f.params = wm.to_params(u);
    f.objective = objective;
    f.iterations = iterations;
    f.converged = converged;
    f.kkt_residual = kkt;
    f.per_iter_objective = std::move(trace);
    for (std::size_t j = 0; j < wm.groups(); ++j) {
        const auto uj = wm.block(u, j);
        std::vector<bool> nz(static_cast<std::size_t>(uj.size()));
        bool any = false;
        for (Eigen::Index m = 0; m < uj.size(); ++m) {
            nz[static_cast<std::size_t>(m)] = uj[m] != 0.0;
            any = any || uj[m] != 0.0;
        }
        if (any)
            f.active_groups.push_back(j);
        f.nonzero.push_back(std::move(nz));
    }
    f.working = std::move(u);
    return f;
}

// Zero coefficients with the intercept-only MLE thresholds (smoothed when a
// response category is empty and the MLE does not exist).
inline Eigen::VectorXd cold_start(const WorkingModel& wm)
{
    const auto counts = wm.data().response_counts();
    const bool all_seen = std::none_of(counts.begin(), counts.end(), [](std::size_t v) { return v == 0; });
    Eigen::VectorXd u = Eigen::VectorXd::Zero(wm.size());
    u.head(wm.n_thresholds()) = intercept_only_thresholds(wm.data(), !all_seen);
    return u;
}

inline Eigen::VectorXd start_point(const WorkingModel& wm, const std::optional<ModelParams>& init)
{
    if (!init)
        return cold_start(wm);
    if (!init->thresholds_increasing())
        throw ConfigError("initial thresholds must be finite and strictly increasing");
    return wm.from_params(*init);
}

// Block coordinate gradient descent for the smoothing group penalty. Each
// block minimizes a quadratic model with curvature h_j * I plus its group
// norm in closed form; an Armijo search along the block direction accepts
// the step. Block 0 (thresholds) is unpenalized.
inline FitResult fit_bcd(const WorkingModel& wm, const PenaltySpec& spec, double lambda, const SolverConfig& cfg,
                         Eigen::VectorXd u)
{
    Eigen::VectorXd s = wm.shift(u);
    double smooth = wm.loss(u, s);
    double penalty = penalty_value(wm, spec, lambda, u);
    double objective = smooth + penalty;
    if (!std::isfinite(objective))
        throw ConfigError("starting point has an infinite objective");
    std::vector<double> trace{objective};

    ObsDerivs d = wm.derivs(u, s);
    bool stale = false;
    bool converged = false;
    int iter = 0;

    for (iter = 1; iter <= cfg.max_outer_iters; ++iter) {
        const double sweep_start = objective;
        for (std::size_t b = 0; b <= wm.groups(); ++b) {
            if (stale) {
                d = wm.derivs(u, s);
                stale = false;
            }
            const Eigen::Index off = b == 0 ? 0 : wm.begin(b - 1);
            const Eigen::Index len = b == 0 ? wm.n_thresholds() : wm.length(b - 1);
            const Eigen::VectorXd current = u.segment(off, len);

            Eigen::VectorXd step;
            double weight = 0.0;
            double predicted = 0.0; // linearized change of the objective (Delta)
            if (b == 0) {
                const Eigen::VectorXd g = wm.threshold_gradient(d);
                step = -g / clamp_curvature(wm.threshold_curvature(d));
                predicted = g.dot(step);
            } else {
                const std::size_t j = b - 1;
                const Eigen::VectorXd g = wm.block_gradient(j, d);
                const double h = clamp_curvature(wm.block_curvature(j, d));
                weight = lambda * spec.weight(j);
                const Eigen::VectorXd v = g - h * current;
                const double vnorm = v.norm();
                if (vnorm <= weight)
                    step = -current;
                else
                    step = -(g - weight * v / vnorm) / h;
                predicted = g.dot(step) + weight * ((current + step).norm() - current.norm());
            }
            if (!(predicted < 0.0))
                continue;

            const double block_pen_old = b == 0 ? 0.0 : weight * current.norm();
            double alpha = cfg.alpha0;
            for (int l = 0; l < cfg.max_armijo_steps; ++l, alpha *= cfg.delta) {
                Eigen::VectorXd trial_u = u;
                trial_u.segment(off, len) = current + alpha * step;
                Eigen::VectorXd trial_s = s;
                if (b > 0)
                    wm.add_shift(b - 1, alpha * step, trial_s);
                const double trial_smooth = wm.loss(trial_u, trial_s);
                if (!std::isfinite(trial_smooth))
                    continue;
                const double trial_pen =
                    b == 0 ? penalty : penalty - block_pen_old + weight * trial_u.segment(off, len).norm();
                const double trial_obj = trial_smooth + trial_pen;
                if (trial_obj - objective <= alpha * cfg.sigma * predicted) {
                    u = std::move(trial_u);
                    s = std::move(trial_s);
                    smooth = trial_smooth;
                    penalty = trial_pen;
                    objective = trial_obj;
                    stale = true;
                    break;
                }
            }
        }
        trace.push_back(objective);
        if (sweep_start - objective < cfg.tol) {
            if (stale) {
                d = wm.derivs(u, s);
                stale = false;
            }
            if (kkt_residual(wm, spec, lambda, u, d) <= cfg.kkt_tol) {
                converged = true;
                break;
            }
            if (sweep_start == objective)
                break; // no block can move any more
        }
    }
    if (stale)
        d = wm.derivs(u, s);
    const double kkt = kkt_residual(wm, spec, lambda, u, d);
    // Recompute the penalty from scratch so the reported objective carries no drift.
    objective = smooth + penalty_value(wm, spec, lambda, u);
    return finish(wm, spec, lambda, std::move(u), objective, std::min(iter, cfg.max_outer_iters), converged, kkt,
                  std::move(trace));
}

inline void soft_threshold(const WorkingModel& wm, const PenaltySpec& spec, double lambda_step, Eigen::VectorXd& v)
{
    for (std::size_t j = 0; j < wm.groups(); ++j) {
        const double t = lambda_step * spec.weight(j);
        auto vj = wm.block(v, j);
        for (Eigen::Index m = 0; m < vj.size(); ++m) {
            const double a = std::abs(vj[m]) - t;
            vj[m] = a > 0.0 ? std::copysign(a, vj[m]) : 0.0;
        }
    }
}

// Proximal gradient with Nesterov momentum for lasso-type penalties on the
// working coefficients. Backtracking adapts 1/L to the local Lipschitz
// constant; a candidate that would raise the objective is discarded and the
// momentum restarted, so the recorded objective never increases.
inline FitResult fit_proximal(const WorkingModel& wm, const PenaltySpec& spec, double lambda, const SolverConfig& cfg,
                              Eigen::VectorXd u)
{
    Eigen::VectorXd s = wm.shift(u);
    double smooth = wm.loss(u, s);
    double objective = smooth + penalty_value(wm, spec, lambda, u);
    if (!std::isfinite(objective))
        throw ConfigError("starting point has an infinite objective");
    std::vector<double> trace{objective};

    ObsDerivs d = wm.derivs(u, s);
    double lip = clamp_curvature(wm.threshold_curvature(d));
    for (std::size_t j = 0; j < wm.groups(); ++j)
        lip = std::max(lip, clamp_curvature(wm.block_curvature(j, d)));

    Eigen::VectorXd y = u, sy = s;
    double momentum = 1.0;
    bool converged = false;
    int iter = 0;
    for (iter = 1; iter <= cfg.max_outer_iters; ++iter) {
        const ObsDerivs dy = wm.derivs(y, sy);
        const double fy = wm.loss(y, sy);
        const Eigen::VectorXd gy = wm.full_gradient(dy);

        Eigen::VectorXd z, sz;
        double fz = kInf;
        for (int l = 0; l < 200; ++l) {
            z = y - gy / lip;
            soft_threshold(wm, spec, lambda / lip, z);
            sz = wm.shift(z);
            fz = wm.loss(z, sz);
            const Eigen::VectorXd diff = z - y;
            if (std::isfinite(fz) && fz <= fy + gy.dot(diff) + 0.5 * lip * diff.squaredNorm() + 1e-15 * std::abs(fy))
                break;
            lip *= 2.0;
        }
        const double fz_total = fz + penalty_value(wm, spec, lambda, z);
        const double previous = objective;
        const Eigen::VectorXd u_old = u;
        const bool improved = std::isfinite(fz_total) && fz_total <= objective;
        if (improved) {
            u = z;
            s = sz;
            smooth = fz;
            objective = fz_total;
        }
        if (!improved || (y - z).dot(z - u_old) > 0.0) {
            momentum = 1.0;
            y = u;
            sy = s;
        } else {
            const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            y = u + ((momentum - 1.0) / next) * (u - u_old);
            sy = wm.shift(y);
            momentum = next;
        }
        trace.push_back(objective);
        lip = std::max(lip / 1.25, kCurvatureMin);

        if (previous - objective < cfg.tol) {
            d = wm.derivs(u, s);
            if (kkt_residual(wm, spec, lambda, u, d) <= cfg.kkt_tol) {
                converged = true;
                break;
            }
        }
    }
    d = wm.derivs(u, s);
    const double kkt = kkt_residual(wm, spec, lambda, u, d);
    return finish(wm, spec, lambda, std::move(u), objective, std::min(iter, cfg.max_outer_iters), converged, kkt,
                  std::move(trace));
}

inline FitResult fit_working(const WorkingModel& wm, const PenaltySpec& spec, double lambda, const SolverConfig& cfg,
                             Eigen::VectorXd u)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda must be finite and nonnegative");
    if (spec.df.size() != wm.groups())
        throw DimensionError("penalty spec has " + std::to_string(spec.df.size()) + " group weights, expected " +
                             std::to_string(wm.groups()));
    cfg.validate();
    return spec.kind == PenaltyKind::smooth_group ? fit_bcd(wm, spec, lambda, cfg, std::move(u))
                                                  : fit_proximal(wm, spec, lambda, cfg, std::move(u));
}

} // namespace detail

// Smallest lambda at which every penalized group is zero: the dual norm of
// the working gradient at zero coefficients and intercept-only thresholds.
inline double lambda_max(const OrdinalDataset& data, PenaltyKind kind)
{
    const detail::WorkingModel wm(data, detail::coding_for(kind));
    const auto spec = PenaltySpec::make(data, kind);
    const Eigen::VectorXd u = detail::cold_start(wm);
    const Eigen::VectorXd s = wm.shift(u);
    const auto d = wm.derivs(u, s);
    double best = 0.0;
    for (std::size_t j = 0; j < data.p; ++j) {
        const Eigen::VectorXd g = wm.block_gradient(j, d);
        const double dual = kind == PenaltyKind::smooth_group ? g.norm() : g.lpNorm<Eigen::Infinity>();
        best = std::max(best, dual / spec.weight(j));
    }
    return best;
}

inline std::vector<double> default_lambda_grid(const OrdinalDataset& data, PenaltyKind kind, std::size_t count = 30,
                                               double ratio = 1e-3)
{
    return log_grid(lambda_max(data, kind), count, ratio);
}

inline FitResult fit_smooth_group(const OrdinalDataset& data, const PenaltySpec& spec, double lambda,
                                  const SolverConfig& cfg = {}, const std::optional<ModelParams>& init = std::nullopt)
{
    if (spec.kind != PenaltyKind::smooth_group)
        throw ConfigError("fit_smooth_group needs a smooth-group penalty spec");
    const detail::WorkingModel wm(data, detail::Coding::split);
    return detail::fit_working(wm, spec, lambda, cfg, detail::start_point(wm, init));
}

// Fused penalty (split coding) or numeric lasso (slope coding), depending on spec.kind.
inline FitResult fit_fused(const OrdinalDataset& data, const PenaltySpec& spec, double lambda,
                           const SolverConfig& cfg = {}, const std::optional<ModelParams>& init = std::nullopt)
{
    if (spec.kind == PenaltyKind::smooth_group)
        throw ConfigError("fit_fused needs a fused or numeric-lasso penalty spec");
    const detail::WorkingModel wm(data, detail::coding_for(spec.kind));
    return detail::fit_working(wm, spec, lambda, cfg, detail::start_point(wm, init));
}

inline FitResult fit(const OrdinalDataset& data, const PenaltySpec& spec, double lambda, const SolverConfig& cfg = {},
                     const std::optional<ModelParams>& init = std::nullopt)
{
    return spec.kind == PenaltyKind::smooth_group ? fit_smooth_group(data, spec, lambda, cfg, init)
                                                  : fit_fused(data, spec, lambda, cfg, init);
}

// Unpenalized maximum likelihood by Fisher scoring with step halving, in
// split coordinates. `groups` restricts the model to a subset of predictors
// (the others are fixed at zero); an empty subset fits thresholds only.
// Throws SeparationError when the iteration diverges or fails to settle.
inline FitResult fit_mle_newton(const OrdinalDataset& data, const SolverConfig& cfg = {},
                                const std::optional<std::vector<std::size_t>>& groups = std::nullopt)
{
    cfg.validate();
    const detail::WorkingModel wm(data, detail::Coding::split);
    std::vector<std::size_t> included;
    if (groups) {
        included = *groups;
    } else {
        included.resize(data.p);
        std::iota(included.begin(), included.end(), std::size_t{0});
    }
    std::vector<Eigen::Index> cols;
    for (Eigen::Index r = 0; r < wm.n_thresholds(); ++r)
        cols.push_back(r);
    for (std::size_t j : included) {
        if (j >= data.p)
            throw DimensionError("group index " + std::to_string(j) + " out of range");
        for (Eigen::Index m = 0; m < wm.length(j); ++m)
            cols.push_back(wm.begin(j) + m);
    }
    const auto dim = static_cast<Eigen::Index>(cols.size());
    const double n = static_cast<double>(data.n);

    Eigen::VectorXd u = detail::cold_start(wm);
    Eigen::VectorXd s = wm.shift(u);
    double loss = wm.loss(u, s);
    std::vector<double> trace{loss};
    bool converged = false;
    int iter = 0;

    for (iter = 1; iter <= cfg.max_newton_iters; ++iter) {
        const auto d = wm.derivs(u, s);
        const Eigen::VectorXd grad = wm.full_gradient(d);
        Eigen::VectorXd score(dim);
        for (Eigen::Index a = 0; a < dim; ++a)
            score[a] = -n * grad[cols[static_cast<std::size_t>(a)]];
        const Eigen::MatrixXd info = wm.fisher(u, s, cols);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw SeparationError("MLE does not exist / separation: information matrix is not positive definite");
        const Eigen::VectorXd step = ldlt.solve(score);
        if (!step.allFinite() || (info * step - score).norm() > 1e-6 * (1.0 + score.norm()))
            throw SeparationError("MLE does not exist / separation: singular information matrix");

        double alpha = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h, alpha *= 0.5) {
            Eigen::VectorXd trial = u;
            for (Eigen::Index a = 0; a < dim; ++a)
                trial[cols[static_cast<std::size_t>(a)]] += alpha * step[a];
            const Eigen::VectorXd trial_s = wm.shift(trial);
            const double trial_loss = wm.loss(trial, trial_s);
            if (std::isfinite(trial_loss) && trial_loss <= loss) {
                u = std::move(trial);
                s = trial_s;
                loss = trial_loss;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Rounding noise at the optimum; a full-size step that cannot improve means divergence.
            if (step.lpNorm<Eigen::Infinity>() < 1e-6) {
                converged = true;
                break;
            }
            throw SeparationError("MLE does not exist / separation: step halving failed to improve the likelihood");
        }
        trace.push_back(loss);
        if (!u.allFinite() || u.lpNorm<Eigen::Infinity>() > cfg.newton_bound)
            throw SeparationError("MLE does not exist / separation: parameters exceed magnitude " +
                                  std::to_string(cfg.newton_bound));
        if ((alpha * step).lpNorm<Eigen::Infinity>() < 1e-10) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SeparationError("MLE does not exist / separation: the algorithm did not converge in " +
                              std::to_string(cfg.max_newton_iters) + " iterations");
    // Under (quasi-)separation the iteration stalls only once the logistic
    // saturates in double precision; the linear predictor then sits far out
    // in the tails where fitted probabilities are numerically 0 or 1.
    const double tail = (u.head(wm.n_thresholds()).cwiseAbs().maxCoeff()) + s.cwiseAbs().maxCoeff();
    if (tail > kSaturatedLogit) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            for (Eigen::Index r = 0; r < wm.n_thresholds(); ++r)
                worst = std::max(worst, std::abs(u[r] - s[i]));
        if (worst > kSaturatedLogit)
            throw SeparationError("MLE does not exist / separation: fitted probabilities numerically 0 or 1");
    }
    const auto spec = PenaltySpec::make(data, PenaltyKind::smooth_group);
    const Eigen::VectorXd grad = wm.full_gradient(wm.derivs(u, s));
    double residual = 0.0;
    for (Eigen::Index col : cols)
        residual = std::max(residual, std::abs(grad[col]));
    return detail::finish(wm, spec, 0.0, std::move(u), loss, std::min(iter, cfg.max_newton_iters), true, residual,
                          std::move(trace));
}

struct PathResult {
    std::vector<double> lambda_grid;
    std::vector<FitResult> fits;      // aligned with lambda_grid
    std::vector<std::string> failures; // empty string where the fit succeeded
    // Largest lambda at which each group is active; NaN if it never enters.
    std::vector<double> entry_lambda;

    bool failed(std::size_t g) const { return !failures[g].empty(); }

    int total_iterations() const
    {
        int total = 0;
        for (const auto& f : fits)
            total += f.iterations;
        return total;
    }
};

// Fits every lambda of the (decreasing) grid. With warm_start each fit is
// initialized at the previous solution; otherwise every fit starts cold.
// An empty grid in `spec` is replaced by default_lambda_grid().
inline PathResult fit_path(const OrdinalDataset& data, const PenaltySpec& spec, const SolverConfig& cfg = {},
                           bool warm_start = true)
{
    spec.validate();
    PathResult path;
    path.lambda_grid = spec.lambda_grid.empty() ? default_lambda_grid(data, spec.kind) : spec.lambda_grid;
    const detail::WorkingModel wm(data, detail::coding_for(spec.kind));
    path.entry_lambda.assign(data.p, std::numeric_limits<double>::quiet_NaN());

    Eigen::VectorXd start = detail::cold_start(wm);
    for (double lambda : path.lambda_grid) {
        try {
            FitResult f = detail::fit_working(wm, spec, lambda, cfg, warm_start ? start : detail::cold_start(wm));
            for (std::size_t j : f.active_groups)
                if (std::isnan(path.entry_lambda[j]))
                    path.entry_lambda[j] = lambda;
            start = f.working;
            path.fits.push_back(std::move(f));
            path.failures.emplace_back();
        } catch (const Error& e) {
            FitResult f;
            f.kind = spec.kind;
            f.lambda = lambda;
            path.fits.push_back(std::move(f));
            path.failures.emplace_back(e.what());
        }
    }
    return path;
}

} // namespace ordpen
