#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ordpen/dataset.hpp"
#include "ordpen/error.hpp"

namespace ordpen {

// How the raw values of one CSV column were turned into levels 1..k.
struct ColumnCoding {
    std::string name;
    int levels = 0;
    std::string coding;               // "integer", "likert" (-2..2 shifted to 1..5) or "map"
    std::vector<std::string> labels;  // raw value of each level, in order
    std::vector<int> empty_levels;    // levels with no observations
};

struct CsvOptions {
    std::string response;
    std::vector<std::string> drop;                              // columns ignored entirely
    std::map<std::string, std::vector<std::string>> level_maps; // column -> ordered raw labels
};

struct LoadedDataset {
    OrdinalDataset data;
    ColumnCoding response;
    std::vector<ColumnCoding> predictors;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

inline bool parse_int(const std::string& s, int& out)
{
    const char* first = s.data();
    if (!s.empty() && s[0] == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && first != s.data() + s.size();
}

inline std::string cell_ref(std::size_t row, std::size_t col, const std::string& name)
{
    return "row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) + " (" + name + ")";
}

// Maps one column of raw cells to levels 1..k.
inline ColumnCoding code_column(const std::vector<std::vector<std::string>>& rows, std::size_t col,
                                const std::string& name, const CsvOptions& opts, std::vector<int>& out)
{
    ColumnCoding cc;
    cc.name = name;
    out.assign(rows.size(), 0);
    if (const auto it = opts.level_maps.find(name); it != opts.level_maps.end()) {
        cc.coding = "map";
        cc.labels = it->second;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto pos = std::find(cc.labels.begin(), cc.labels.end(), rows[i][col]);
            if (pos == cc.labels.end())
                throw DataError(cell_ref(i, col, name) + ": value '" + rows[i][col] + "' is not in the level map");
            out[i] = static_cast<int>(pos - cc.labels.begin()) + 1;
        }
    } else {
        int lo = 0, hi = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!parse_int(rows[i][col], out[i]))
                throw DataError(cell_ref(i, col, name) + ": '" + rows[i][col] +
                                "' is not an integer level (give a level map for labelled columns)");
            lo = i == 0 ? out[i] : std::min(lo, out[i]);
            hi = i == 0 ? out[i] : std::max(hi, out[i]);
        }
        if (lo >= 1) {
            cc.coding = "integer";
            for (int v = 1; v <= hi; ++v)
                cc.labels.push_back(std::to_string(v));
        } else if (lo >= -2 && hi <= 2) {
            cc.coding = "likert";
            for (int v = -2; v <= 2; ++v)
                cc.labels.push_back(std::to_string(v));
            for (int& v : out)
                v += 3;
        } else {
            const auto bad = static_cast<std::size_t>(std::find(out.begin(), out.end(), lo) - out.begin());
            throw DataError(cell_ref(bad, col, name) + ": level " + std::to_string(lo) +
                            " is below 1 (integer columns use 1..k or Likert codes -2..2)");
        }
    }
    cc.levels = static_cast<int>(cc.labels.size());
    if (cc.levels < 2)
        throw DataError("column " + std::to_string(col + 1) + " (" + name + ") has fewer than 2 levels");
    std::vector<bool> seen(static_cast<std::size_t>(cc.levels), false);
    for (int v : out)
        seen[static_cast<std::size_t>(v - 1)] = true;
    for (int l = 1; l <= cc.levels; ++l)
        if (!seen[static_cast<std::size_t>(l - 1)])
            cc.empty_levels.push_back(l);
    return cc;
}

} // namespace detail

// Reads a comma-separated table with a header row. Every column except the
// response and the dropped ones becomes an ordinal predictor.
inline LoadedDataset read_dataset(std::istream& in, const CsvOptions& opts)
{
    std::string line;
    if (!std::getline(in, line))
        throw DataError("input is empty (a header row is required)");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0)
        line.erase(0, 3);
    const auto header = detail::split_csv_line(line);
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k].empty())
            throw DataError("header: column " + std::to_string(k + 1) + " has no name");
        if (std::find(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(k), header[k]) !=
            header.begin() + static_cast<std::ptrdiff_t>(k))
            throw DataError("header: duplicate column name '" + header[k] + "'");
    }
    const auto response_it = std::find(header.begin(), header.end(), opts.response);
    if (response_it == header.end())
        throw DataError("response column '" + opts.response + "' not found in the header");
    for (const auto& d : opts.drop)
        if (std::find(header.begin(), header.end(), d) == header.end())
            throw DataError("dropped column '" + d + "' not found in the header");
    for (const auto& [name, labels] : opts.level_maps) {
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw DataError("level map refers to unknown column '" + name + "'");
        if (labels.size() < 2)
            throw DataError("level map for '" + name + "' needs at least 2 labels");
    }

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty())
            continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(rows.size() + 1) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header.size()));
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (cells[k] == "NA")
                throw DataError(detail::cell_ref(rows.size(), k, header[k]) +
                                ": missing value NA (complete cases are required)");
            if (cells[k].empty())
                throw DataError(detail::cell_ref(rows.size(), k, header[k]) + ": empty cell");
        }
        rows.push_back(std::move(cells));
    }
    if (rows.empty())
        throw DataError("input has a header but no data rows");

    LoadedDataset out;
    const auto rcol = static_cast<std::size_t>(response_it - header.begin());
    std::vector<int> codes;
    out.response = detail::code_column(rows, rcol, header[rcol], opts, codes);
    std::vector<int> y = codes;

    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (k != rcol && std::find(opts.drop.begin(), opts.drop.end(), header[k]) == opts.drop.end())
            cols.push_back(k);
    if (cols.empty())
        throw DataError("no predictor columns left after removing the response and dropped columns");

    std::vector<int> x(rows.size() * cols.size());
    std::vector<int> levels;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.predictors.push_back(detail::code_column(rows, cols[j], header[cols[j]], opts, codes));
        for (std::size_t i = 0; i < rows.size(); ++i)
            x[i * cols.size() + j] = codes[i];
        levels.push_back(out.predictors.back().levels);
        names.push_back(header[cols[j]]);
    }
    auto describe_empty = [&](const ColumnCoding& cc, const std::string& role) {
        for (int l : cc.empty_levels)
            out.warnings.push_back(role + " " + cc.name + ": level " + std::to_string(l) + " ('" +
                                   cc.labels[static_cast<std::size_t>(l - 1)] + "') of " +
                                   std::to_string(cc.levels) + " is never observed");
    };
    describe_empty(out.response, "response");
    for (const auto& cc : out.predictors)
        describe_empty(cc, "predictor");
    // Unobserved predictor levels stay in the design; the penalty shrinks or fuses them.
    out.data = OrdinalDataset::make(out.response.levels, std::move(levels), std::move(x), std::move(y),
                                    std::move(names));
    return out;
}

inline LoadedDataset load_dataset(const std::string& path, const CsvOptions& opts)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open input file '" + path + "'");
    return read_dataset(in, opts);
}

// Writes levels 1..k with the predictor names as header and the response last.
inline void write_dataset(std::ostream& out, const OrdinalDataset& data, const std::string& response = "y")
{
    for (std::size_t j = 0; j < data.p; ++j)
        out << data.name(j) << ',';
    out << response << '\n';
    for (std::size_t i = 0; i < data.n; ++i) {
        for (std::size_t j = 0; j < data.p; ++j)
            out << data.at(i, j) << ',';
        out << data.y[i] << '\n';
    }
}

// 17 significant digits, so every double survives a text round trip.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "NA";
    if (std::isinf(v))
        return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Minimal tidy-table writer: header once, then rows of preformatted cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvTable& row(std::vector<std::string> cells)
    {
        if (cells.size() != header_.size())
            throw DimensionError("table row has " + std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(header_.size()));
        rows_.push_back(std::move(cells));
        return *this;
    }

    void write(std::ostream& out) const
    {
        auto emit = [&](const std::vector<std::string>& cells) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (k)
                    out << ',';
                out << quote(cells[k]);
            }
            out << '\n';
        };
        emit(header_);
        for (const auto& r : rows_)
            emit(r);
    }

    std::size_t size() const { return rows_.size(); }

private:
    static std::string quote(const std::string& s)
    {
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char ch : s)
            q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + '"';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace ordpen
