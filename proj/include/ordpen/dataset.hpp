#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ordpen/error.hpp"

namespace ordpen {

// n observations of p ordinal predictors and one ordinal response.
// Levels are 1-based: x(i, j) in {1..levels[j]}, y[i] in {1..c}.
struct OrdinalDataset {
    std::size_t n = 0;
    std::size_t p = 0;
    int c = 0;
    std::vector<int> levels;
    std::vector<int> x; // row-major, n * p
    std::vector<int> y;
    std::vector<std::string> names;

    int at(std::size_t i, std::size_t j) const { return x[i * p + j]; }

    std::string name(std::size_t j) const
    {
        return j < names.size() ? names[j] : "x" + std::to_string(j + 1);
    }

    void validate() const
    {
        if (n < 1)
            throw DataError("dataset needs at least one observation");
        if (p < 1)
            throw DataError("dataset needs at least one predictor");
        if (c < 2)
            throw DataError("response needs at least 2 categories, got " + std::to_string(c));
        if (levels.size() != p)
            throw DataError("levels has " + std::to_string(levels.size()) + " entries, expected p = " +
                            std::to_string(p));
        if (x.size() != n * p)
            throw DataError("predictor matrix has " + std::to_string(x.size()) + " cells, expected n*p = " +
                            std::to_string(n * p));
        if (y.size() != n)
            throw DataError("response has " + std::to_string(y.size()) + " entries, expected n = " +
                            std::to_string(n));
        if (!names.empty() && names.size() != p)
            throw DataError("names has " + std::to_string(names.size()) + " entries, expected p");
        for (std::size_t j = 0; j < p; ++j)
            if (levels[j] < 2)
                throw DataError("predictor " + name(j) + " has " + std::to_string(levels[j]) +
                                " levels, needs at least 2");
        for (std::size_t i = 0; i < n; ++i) {
            if (y[i] < 1 || y[i] > c)
                throw DataError("row " + std::to_string(i + 1) + ": response " + std::to_string(y[i]) +
                                " outside 1.." + std::to_string(c));
            for (std::size_t j = 0; j < p; ++j) {
                const int v = at(i, j);
                if (v < 1 || v > levels[j])
                    throw DataError("row " + std::to_string(i + 1) + ", predictor " + name(j) + ": level " +
                                    std::to_string(v) + " outside 1.." + std::to_string(levels[j]));
            }
        }
    }

    static OrdinalDataset make(int c, std::vector<int> levels, std::vector<int> x, std::vector<int> y,
                               std::vector<std::string> names = {})
    {
        OrdinalDataset d;
        d.n = y.size();
        d.p = levels.size();
        d.c = c;
        d.levels = std::move(levels);
        d.x = std::move(x);
        d.y = std::move(y);
        d.names = std::move(names);
        d.validate();
        return d;
    }

    // Same levels and categories, rows restricted to `rows` (in that order).
    OrdinalDataset subset(std::span<const std::size_t> rows) const
    {
        OrdinalDataset d;
        d.n = rows.size();
        d.p = p;
        d.c = c;
        d.levels = levels;
        d.names = names;
        d.x.reserve(rows.size() * p);
        d.y.reserve(rows.size());
        for (std::size_t i : rows) {
            d.x.insert(d.x.end(), x.begin() + static_cast<std::ptrdiff_t>(i * p),
                       x.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
            d.y.push_back(y[i]);
        }
        return d;
    }

    // Observed count per response category (index r-1).
    std::vector<std::size_t> response_counts() const
    {
        std::vector<std::size_t> counts(static_cast<std::size_t>(c), 0);
        for (int v : y)
            ++counts[static_cast<std::size_t>(v - 1)];
        return counts;
    }
};

// Split-coded row for `level` out of `k`: first level-1 entries are one.
inline Eigen::VectorXd split_code(int level, int k)
{
    if (k < 2)
        throw DataError("split coding needs k >= 2, got " + std::to_string(k));
    if (level < 1 || level > k)
        throw DataError("level " + std::to_string(level) + " outside 1.." + std::to_string(k));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k - 1);
    z.head(level - 1).setOnes();
    return z;
}

// Dense indicator (dummy) and split-coded design matrices. Only used for
// cross-checks and small problems; solvers work from the level table directly.
struct DesignMatrices {
    Eigen::MatrixXd dummy;
    Eigen::MatrixXd split;
    std::vector<std::pair<std::size_t, std::size_t>> dummy_offsets; // [begin, end) per predictor
    std::vector<std::pair<std::size_t, std::size_t>> split_offsets;

    static DesignMatrices build(const OrdinalDataset& data)
    {
        DesignMatrices m;
        std::size_t dcols = 0, scols = 0;
        for (int k : data.levels) {
            m.dummy_offsets.emplace_back(dcols, dcols + static_cast<std::size_t>(k));
            m.split_offsets.emplace_back(scols, scols + static_cast<std::size_t>(k - 1));
            dcols += static_cast<std::size_t>(k);
            scols += static_cast<std::size_t>(k - 1);
        }
        m.dummy = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.n), static_cast<Eigen::Index>(dcols));
        m.split = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.n), static_cast<Eigen::Index>(scols));
        for (std::size_t i = 0; i < data.n; ++i) {
            for (std::size_t j = 0; j < data.p; ++j) {
                const int level = data.at(i, j);
                const auto row = static_cast<Eigen::Index>(i);
                m.dummy(row, static_cast<Eigen::Index>(m.dummy_offsets[j].first) + level - 1) = 1.0;
                m.split.row(row).segment(static_cast<Eigen::Index>(m.split_offsets[j].first), data.levels[j] - 1) =
                    split_code(level, data.levels[j]).transpose();
            }
        }
        return m;
    }
};

} // namespace ordpen
