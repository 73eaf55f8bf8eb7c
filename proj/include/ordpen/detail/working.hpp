#pragma once

// The cumulative logit loss in solver ("working") coordinates.
//
// Working vector layout: [theta (c-1) | u_1 | ... | u_p]. With split coding
// u_j holds the adjacent differences of beta_j, so a row at level l adds
// u_j1 + ... + u_j,(l-1) to the shift. With numeric coding u_j is a single
// slope and a row at level l adds (l-1) * u_j. Either way the penalties of
// interest become plain (group) lasso norms of u_j.
//
// The basis columns are centered at their sample means (the thresholds
// absorb the constant). This leaves the objective unchanged but removes the
// strong coupling between the all-positive split columns and the thresholds,
// which otherwise slows coordinate-wise methods considerably.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/detail/logistic.hpp"
#include "ordpen/model.hpp"
#include "ordpen/penalty.hpp"

namespace ordpen::detail {

enum class Coding { split, numeric };

inline Coding coding_for(PenaltyKind kind)
{
    return kind == PenaltyKind::numeric_lasso ? Coding::numeric : Coding::split;
}

struct ObsDerivs {
    Eigen::VectorXd d_shift;   // d l_i / d s_i
    Eigen::VectorXd dd_shift;  // d^2 l_i / d s_i^2
    Eigen::VectorXd g_theta;   // d l / d theta
    Eigen::VectorXd hd_theta;  // diag d^2 l / d theta^2
};

class WorkingModel {
public:
    WorkingModel(const OrdinalDataset& data, Coding coding) : data_(&data), coding_(coding)
    {
        data.validate();
        Eigen::Index off = data.c - 1;
        for (int k : data.levels) {
            const Eigen::Index len = coding == Coding::split ? k - 1 : 1;
            begin_.push_back(off);
            len_.push_back(len);
            off += len;
        }
        const double n = static_cast<double>(data.n);
        for (std::size_t j = 0; j < data.p; ++j) {
            Eigen::VectorXd f = Eigen::VectorXd::Zero(data.levels[j]);
            for (std::size_t i = 0; i < data.n; ++i)
                f[data.at(i, j) - 1] += 1.0 / n;
            freq_.push_back(f);
            Eigen::VectorXd zbar(len_[j]);
            for (Eigen::Index m = 0; m < len_[j]; ++m)
                zbar[m] = 0.0;
            for (int l = 0; l < data.levels[j]; ++l)
                for (Eigen::Index m = 0; m < len_[j]; ++m)
                    zbar[m] += f[l] * basis(l, m);
            zbar_.push_back(zbar);
        }
        size_ = off;
        inv_n_ = 1.0 / static_cast<double>(data.n);
    }

    const OrdinalDataset& data() const { return *data_; }
    Coding coding() const { return coding_; }
    Eigen::Index size() const { return size_; }
    Eigen::Index n_thresholds() const { return data_->c - 1; }
    std::size_t groups() const { return data_->p; }
    Eigen::Index begin(std::size_t j) const { return begin_[j]; }
    Eigen::Index length(std::size_t j) const { return len_[j]; }

    template <class V>
    auto block(V& u, std::size_t j) const
    {
        return u.segment(begin_[j], len_[j]);
    }

    // Uncentered basis entry for 0-based level l and working coordinate m.
    double basis(int l, Eigen::Index m) const
    {
        return coding_ == Coding::split ? (l > m ? 1.0 : 0.0) : static_cast<double>(l);
    }

    // Uncentered shift contribution of group j at each level (index level-1).
    Eigen::VectorXd level_values(std::size_t j, const Eigen::Ref<const Eigen::VectorXd>& uj) const
    {
        const int k = data_->levels[j];
        Eigen::VectorXd v(k);
        v[0] = 0.0;
        for (int l = 1; l < k; ++l)
            v[l] = coding_ == Coding::split ? v[l - 1] + uj[l - 1] : static_cast<double>(l) * uj[0];
        return v;
    }

    Eigen::VectorXd shift(const Eigen::VectorXd& u) const
    {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data_->n));
        for (std::size_t j = 0; j < data_->p; ++j)
            add_shift(j, block(u, j), s);
        return s;
    }

    // Centered shift contribution: level value minus its sample mean.
    Eigen::VectorXd centered_values(std::size_t j, const Eigen::Ref<const Eigen::VectorXd>& uj) const
    {
        Eigen::VectorXd v = level_values(j, uj);
        v.array() -= v.dot(freq_[j]);
        return v;
    }

    void add_shift(std::size_t j, const Eigen::Ref<const Eigen::VectorXd>& delta, Eigen::VectorXd& s) const
    {
        const Eigen::VectorXd v = centered_values(j, delta);
        for (std::size_t i = 0; i < data_->n; ++i)
            s[static_cast<Eigen::Index>(i)] += v[data_->at(i, j) - 1];
    }

    static bool increasing(std::span<const double> theta)
    {
        for (double t : theta)
            if (!std::isfinite(t))
                return false;
        for (std::size_t r = 1; r < theta.size(); ++r)
            if (!(theta[r] > theta[r - 1]))
                return false;
        return true;
    }

    std::span<const double> thresholds(const Eigen::VectorXd& u) const
    {
        return {u.data(), static_cast<std::size_t>(n_thresholds())};
    }

    // -(1/n) l, or +inf when the thresholds are not strictly increasing.
    double loss(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const
    {
        const auto theta = thresholds(u);
        if (!increasing(theta))
            return kInf;
        double total = 0.0;
        for (std::size_t i = 0; i < data_->n; ++i)
            total += obs_log_prob(theta, data_->y[i], s[static_cast<Eigen::Index>(i)]);
        return -total * inv_n_;
    }

    ObsDerivs derivs(const Eigen::VectorXd& u, const Eigen::VectorXd& s) const
    {
        const auto theta = thresholds(u);
        const auto n = static_cast<Eigen::Index>(data_->n);
        ObsDerivs d{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd::Zero(n_thresholds()),
                    Eigen::VectorXd::Zero(n_thresholds())};
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = data_->y[static_cast<std::size_t>(i)];
            const auto t = obs_terms(theta, y, s[i]);
            d.d_shift[i] = t.d_shift;
            d.dd_shift[i] = t.dd_shift;
            if (y < data_->c) {
                d.g_theta[y - 1] += t.d_upper;
                d.hd_theta[y - 1] += t.dd_upper;
            }
            if (y > 1) {
                d.g_theta[y - 2] += t.d_lower;
                d.hd_theta[y - 2] += t.dd_lower;
            }
        }
        return d;
    }

    // Sums of a per-observation quantity by level of predictor j.
    Eigen::VectorXd level_sums(std::size_t j, const Eigen::VectorXd& per_obs) const
    {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(data_->levels[j]);
        for (std::size_t i = 0; i < data_->n; ++i)
            t[data_->at(i, j) - 1] += per_obs[static_cast<Eigen::Index>(i)];
        return t;
    }

    // Gradient of -(1/n) l w.r.t. u_j: s_i is linear in u_j with centered basis row z_i.
    Eigen::VectorXd block_gradient(std::size_t j, const ObsDerivs& d) const
    {
        const Eigen::VectorXd sums = level_sums(j, d.d_shift);
        Eigen::VectorXd g(len_[j]);
        for (Eigen::Index m = 0; m < len_[j]; ++m) {
            double acc = 0.0;
            for (Eigen::Index l = 0; l < sums.size(); ++l)
                acc += sums[l] * (basis(static_cast<int>(l), m) - zbar_[j][m]);
            g[m] = -acc * inv_n_;
        }
        return g;
    }

    Eigen::VectorXd threshold_gradient(const ObsDerivs& d) const { return -d.g_theta * inv_n_; }

    // Diagonal of the Hessian of -(1/n) l w.r.t. u_j.
    Eigen::VectorXd block_curvature(std::size_t j, const ObsDerivs& d) const
    {
        const Eigen::VectorXd sums = level_sums(j, d.dd_shift);
        Eigen::VectorXd h(len_[j]);
        for (Eigen::Index m = 0; m < len_[j]; ++m) {
            double acc = 0.0;
            for (Eigen::Index l = 0; l < sums.size(); ++l) {
                const double z = basis(static_cast<int>(l), m) - zbar_[j][m];
                acc += sums[l] * z * z;
            }
            h[m] = -acc * inv_n_;
        }
        return h;
    }

    Eigen::VectorXd threshold_curvature(const ObsDerivs& d) const { return -d.hd_theta * inv_n_; }

    Eigen::VectorXd full_gradient(const ObsDerivs& d) const
    {
        Eigen::VectorXd g(size_);
        g.head(n_thresholds()) = threshold_gradient(d);
        for (std::size_t j = 0; j < data_->p; ++j)
            g.segment(begin_[j], len_[j]) = block_gradient(j, d);
        return g;
    }

    // Expected information of l (unscaled) over the coordinates selected by
    // `cols` (indices into the working vector; thresholds must come first).
    Eigen::MatrixXd fisher(const Eigen::VectorXd& u, const Eigen::VectorXd& s, std::span<const Eigen::Index> cols) const
    {
        const auto theta = thresholds(u);
        const Eigen::Index nt = n_thresholds();
        const auto dim = static_cast<Eigen::Index>(cols.size());
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);

        // Map working index -> position among the selected coefficient columns.
        std::vector<Eigen::Index> pos(static_cast<std::size_t>(size_), -1);
        for (Eigen::Index a = nt; a < dim; ++a)
            pos[static_cast<std::size_t>(cols[static_cast<std::size_t>(a)])] = a - nt;
        const Eigen::Index ncoef = dim - nt;

        Eigen::VectorXd z(ncoef);
        Eigen::MatrixXd w(nt, nt);
        Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(nt, ncoef);
        Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(ncoef, ncoef);
        Eigen::VectorXd dens(nt), prob(nt + 1);
        for (std::size_t i = 0; i < data_->n; ++i) {
            const double si = s[static_cast<Eigen::Index>(i)];
            for (Eigen::Index r = 0; r < nt; ++r)
                dens[r] = logistic_density(theta[static_cast<std::size_t>(r)] - si);
            for (Eigen::Index r = 0; r <= nt; ++r) {
                const double lo = r == 0 ? -kInf : theta[static_cast<std::size_t>(r - 1)] - si;
                const double hi = r == nt ? kInf : theta[static_cast<std::size_t>(r)] - si;
                prob[r] = std::max(interval_prob(lo, hi), std::numeric_limits<double>::min());
            }
            w.setZero();
            for (Eigen::Index a = 0; a < nt; ++a) {
                w(a, a) = dens[a] * dens[a] * (1.0 / prob[a] + 1.0 / prob[a + 1]);
                if (a + 1 < nt) {
                    w(a, a + 1) = -dens[a] * dens[a + 1] / prob[a + 1];
                    w(a + 1, a) = w(a, a + 1);
                }
            }
            info.topLeftCorner(nt, nt) += w;
            if (ncoef == 0)
                continue;

            for (std::size_t j = 0; j < data_->p; ++j) {
                const int level = data_->at(i, j);
                for (Eigen::Index m = 0; m < len_[j]; ++m) {
                    const Eigen::Index q = pos[static_cast<std::size_t>(begin_[j] + m)];
                    if (q >= 0)
                        z[q] = basis(level - 1, m) - zbar_[j][m];
                }
            }
            const Eigen::VectorXd w1 = w.rowwise().sum();
            cross.noalias() -= w1 * z.transpose();
            coef.selfadjointView<Eigen::Lower>().rankUpdate(z, w1.sum());
        }
        if (ncoef > 0) {
            info.topRightCorner(nt, ncoef) = cross;
            info.bottomLeftCorner(ncoef, nt) = cross.transpose();
            info.bottomRightCorner(ncoef, ncoef) = coef.selfadjointView<Eigen::Lower>();
        }
        return info;
    }

    // Effect-coded parameters equivalent to u (identical linear predictor).
    ModelParams to_params(const Eigen::VectorXd& u) const
    {
        ModelParams m;
        m.thresholds = u.head(n_thresholds());
        for (std::size_t j = 0; j < data_->p; ++j) {
            Eigen::VectorXd v = centered_values(j, u.segment(begin_[j], len_[j]));
            const double mean = v.mean();
            v.array() -= mean;
            m.thresholds.array() -= mean;
            m.groups.push_back(std::move(v));
        }
        return m;
    }

    // Working coordinates for given parameters. Exact for split coding; for
    // numeric coding each group is replaced by its least-squares linear trend.
    Eigen::VectorXd from_params(const ModelParams& params) const
    {
        check_dimensions(*data_, params);
        Eigen::VectorXd u(size_);
        u.head(n_thresholds()) = params.thresholds;
        for (std::size_t j = 0; j < data_->p; ++j) {
            const Eigen::VectorXd& beta = params.groups[j];
            Eigen::VectorXd uj;
            if (coding_ == Coding::split) {
                uj = to_split_params(beta);
            } else {
                const int k = data_->levels[j];
                const double center = 0.5 * (k - 1);
                double num = 0.0, den = 0.0;
                for (int l = 0; l < k; ++l) {
                    num += (l - center) * (beta[l] - beta.mean());
                    den += (l - center) * (l - center);
                }
                uj = Eigen::VectorXd::Constant(1, num / den);
            }
            const Eigen::VectorXd v = centered_values(j, uj);
            u.segment(begin_[j], len_[j]) = uj;
            u.head(n_thresholds()).array() -= beta.mean() - v.mean();
        }
        return u;
    }

private:
    const OrdinalDataset* data_;
    Coding coding_;
    std::vector<Eigen::Index> begin_;
    std::vector<Eigen::Index> len_;
    std::vector<Eigen::VectorXd> freq_; // level frequencies per group
    std::vector<Eigen::VectorXd> zbar_; // basis column means per group
    Eigen::Index size_ = 0;
    double inv_n_ = 1.0;
};

// Intercept-only maximum likelihood thresholds: logits of the empirical
// cumulative response frequencies. With `smooth`, half a count is added to
// every category so empty categories still give finite, increasing values.
inline Eigen::VectorXd intercept_only_thresholds(const OrdinalDataset& data, bool smooth)
{
    const auto counts = data.response_counts();
    const double add = smooth ? 0.5 : 0.0;
    const double total = static_cast<double>(data.n) + add * data.c;
    Eigen::VectorXd theta(data.c - 1);
    double cum = 0.0;
    for (int r = 0; r < data.c - 1; ++r) {
        cum += static_cast<double>(counts[static_cast<std::size_t>(r)]) + add;
        const double f = cum / total;
        theta[r] = std::log(f) - std::log1p(-f);
    }
    return theta;
}

} // namespace ordpen::detail
