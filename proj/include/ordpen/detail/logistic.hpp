#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace ordpen::detail {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double logistic(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_logistic(double x)
{
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// Logistic density F(x)(1 - F(x)); zero at +-inf.
inline double logistic_density(double x)
{
    if (std::isinf(x))
        return 0.0;
    return logistic(x) * logistic(-x);
}

// Derivative of the density, f(x)(1 - 2F(x)).
inline double logistic_density_slope(double x)
{
    if (std::isinf(x))
        return 0.0;
    return logistic_density(x) * (logistic(-x) - logistic(x));
}

// Probability mass between lower and upper cut on the logit scale,
// F(upper) - F(lower), computed without cancellation. Negative when lower > upper.
inline double interval_prob(double lower, double upper)
{
    if (lower == -kInf)
        return logistic(upper);
    if (upper == kInf)
        return logistic(-lower);
    if (upper <= lower)
        return upper == lower ? 0.0 : logistic(upper) - logistic(lower);
    return logistic(upper) * logistic(-lower) * -std::expm1(lower - upper);
}

// Per-observation quantities of log pi_{i,y_i} where the cumulative model has
// eta_r = theta_r - shift. "upper"/"lower" refer to eta_y and eta_{y-1}.
struct ObsTerms {
    double log_prob = 0.0;   // log pi, floored at log(kProbFloor)
    double prob = 0.0;       // unfloored pi
    double d_upper = 0.0;    // d log pi / d eta_upper
    double d_lower = 0.0;    // d log pi / d eta_lower
    double dd_upper = 0.0;   // d^2 log pi / d eta_upper^2
    double dd_lower = 0.0;   // d^2 log pi / d eta_lower^2
    double d_shift = 0.0;    // d log pi / d shift
    double dd_shift = 0.0;   // d^2 log pi / d shift^2
};

// F(x) and 1 - F(x) from a single exponential.
struct LogisticPair {
    double cdf = 0.0;  // F(x)
    double ccdf = 0.0; // 1 - F(x)
};

inline LogisticPair logistic_pair(double x)
{
    if (x == kInf)
        return {1.0, 0.0};
    if (x == -kInf)
        return {0.0, 1.0};
    const double e = std::exp(-std::abs(x));
    const double big = 1.0 / (1.0 + e), small = e / (1.0 + e);
    return x >= 0.0 ? LogisticPair{big, small} : LogisticPair{small, big};
}

// Mass of the response category between the cutpoints: F(upper) - F(lower),
// written as F(upper) (1 - F(lower)) (1 - exp(lower - upper)) for interior
// categories to avoid cancellation.
inline double category_mass(double lower, double upper, const LogisticPair& fu, const LogisticPair& fl)
{
    if (lower == -kInf)
        return fu.cdf;
    if (upper == kInf)
        return fl.ccdf;
    return fu.cdf * fl.ccdf * -std::expm1(lower - upper);
}

// log pi_{i,y_i}, floored, for thresholds with c-1 strictly increasing entries and y in 1..c.
inline double obs_log_prob(std::span<const double> thresholds, int y, double shift)
{
    const int c = static_cast<int>(thresholds.size()) + 1;
    const double upper = y == c ? kInf : thresholds[static_cast<std::size_t>(y - 1)] - shift;
    const double lower = y == 1 ? -kInf : thresholds[static_cast<std::size_t>(y - 2)] - shift;
    const double prob = category_mass(lower, upper, logistic_pair(upper), logistic_pair(lower));
    return prob > kProbFloor ? std::log(prob) : std::log(kProbFloor);
}

inline ObsTerms obs_terms(std::span<const double> thresholds, int y, double shift)
{
    const int c = static_cast<int>(thresholds.size()) + 1;
    const double upper = y == c ? kInf : thresholds[static_cast<std::size_t>(y - 1)] - shift;
    const double lower = y == 1 ? -kInf : thresholds[static_cast<std::size_t>(y - 2)] - shift;
    const LogisticPair fu = logistic_pair(upper), fl = logistic_pair(lower);

    ObsTerms t;
    t.prob = category_mass(lower, upper, fu, fl);
    t.log_prob = t.prob > kProbFloor ? std::log(t.prob) : std::log(kProbFloor);

    // Ratios f/pi; closed forms at the open ends, where the general form loses accuracy.
    double ru = 0.0, rl = 0.0;
    if (lower == -kInf) {
        ru = fu.ccdf;
    } else if (upper == kInf) {
        rl = fl.cdf;
    } else {
        const double denom = std::max(t.prob, std::numeric_limits<double>::min());
        ru = fu.cdf * fu.ccdf / denom;
        rl = fl.cdf * fl.ccdf / denom;
    }
    // f'/pi = (f/pi)(1 - 2F).
    const double su = upper == kInf ? 0.0 : ru * (fu.ccdf - fu.cdf);
    const double sl = lower == -kInf ? 0.0 : rl * (fl.ccdf - fl.cdf);

    t.d_upper = ru;
    t.d_lower = -rl;
    t.dd_upper = su - ru * ru;
    t.dd_lower = -sl - rl * rl;
    t.d_shift = -(ru - rl);
    t.dd_shift = (su - sl) - (ru - rl) * (ru - rl);
    return t;
}

} // namespace ordpen::detail
