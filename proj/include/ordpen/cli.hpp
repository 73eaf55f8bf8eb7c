#pragma once

// Command-line front end shared by the ordfit executable and its tests.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ordpen/error.hpp"
#include "ordpen/io.hpp"
#include "ordpen/penalty.hpp"
#include "ordpen/selection.hpp"
#include "ordpen/simlab.hpp"
#include "ordpen/solver.hpp"

namespace ordpen::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

struct RunConfig {
    std::string command;
    std::string input;
    std::string response;
    std::string penalty;
    std::string lambda_grid = "auto";
    std::size_t grid_size = 30;
    double grid_ratio = 1e-3;
    std::string grid_scale = "raw"; // values in a grid file are raw lambda or lambda*n
    std::optional<double> lambda;
    std::optional<double> lambda_n;
    int folds = 5;
    int subsamples = 100;
    double fraction = 0.5;
    double pi_thr = 0.6;
    std::string score = "brier";
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> format{"json", "csv"};
    std::vector<std::string> drop;
    std::vector<std::string> level_map; // NAME=label1|label2|...
    double tol = 1e-8;
    double kkt_tol = 1e-6;
    int max_iter = 1000;
    // Simulation settings (simulate, and roc without --input).
    std::string scenario = "a";
    std::size_t n = 500;
    std::size_t replicates = 20;
    std::vector<std::string> methods{"ORS", "ORF", "numeric-lasso", "MLE-stepwise"};
    std::optional<double> amplitude;
    std::optional<double> baseline;
    std::optional<int> levels;
    std::optional<std::size_t> noise_count;
    std::vector<double> thresholds;
    std::vector<std::string> curves; // "v,v,...;v,v,..." one curve per informative predictor
    bool write_data = false;
    std::vector<std::string> relevant; // roc on a given dataset: truly relevant predictors

    bool wants(const std::string& fmt) const
    {
        return std::find(format.begin(), format.end(), fmt) != format.end();
    }

    bool uses_input() const
    {
        return command == "fit" || command == "path" || command == "cv" || command == "stabsel" ||
               (command == "roc" && !input.empty());
    }
};

namespace detail {

using ordpen::detail::trim;

inline std::vector<double> parse_numbers(const std::string& text, char sep, const std::string& what)
{
    std::vector<double> out;
    std::string normalized = text;
    for (char& ch : normalized)
        if (ch == sep || ch == '\n' || ch == '\r' || ch == '\t')
            ch = ' ';
    std::istringstream in(normalized);
    for (std::string tok; in >> tok;) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || !std::isfinite(v))
            throw ConfigError(what + ": '" + tok + "' is not a finite number");
        out.push_back(v);
    }
    return out;
}

inline std::map<std::string, std::vector<std::string>> parse_level_maps(const std::vector<std::string>& specs)
{
    std::map<std::string, std::vector<std::string>> maps;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("level-map '" + s + "' must look like NAME=label1|label2|...");
        std::vector<std::string> labels;
        std::stringstream ss(s.substr(eq + 1));
        for (std::string item; std::getline(ss, item, '|');)
            labels.push_back(trim(item));
        if (labels.size() < 2)
            throw ConfigError("level-map for '" + s.substr(0, eq) + "' needs at least 2 labels");
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (labels[k].empty() ||
                std::find(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k), labels[k]) !=
                    labels.begin() + static_cast<std::ptrdiff_t>(k))
                throw ConfigError("level-map for '" + s.substr(0, eq) + "' has an empty or repeated label");
        if (!maps.emplace(trim(s.substr(0, eq)), std::move(labels)).second)
            throw ConfigError("level-map given twice for '" + s.substr(0, eq) + "'");
    }
    return maps;
}

inline std::string one_line(std::string s)
{
    for (char& ch : s)
        if (ch == '\n' || ch == '\r')
            ch = ' ';
    return s;
}

inline Json number(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline Json numbers(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v)
        a.push_back(number(x));
    return a;
}

inline Json numbers(const Eigen::VectorXd& v)
{
    return numbers(std::vector<double>(v.data(), v.data() + v.size()));
}

} // namespace detail

// Parses argv (argv[0] is the program name). Returns nullopt after printing
// help or the version; throws ConfigError on any invalid argument.
inline std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out = std::cout)
{
    RunConfig rc;
    CLI::App app{"Penalized cumulative logit models with ordinal predictors", "ordfit"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "flat 'key = value' file using the long option names; flags override it");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.add_option("command", rc.command, "fit | path | cv | stabsel | simulate | roc")
        ->required()
        ->check(CLI::IsMember({"fit", "path", "cv", "stabsel", "simulate", "roc"}));
    app.add_option("--input", rc.input, "CSV file with a header row");
    app.add_option("--response", rc.response, "name of the ordinal response column");
    app.add_option("--penalty", rc.penalty, "smooth | fused | numeric")
        ->check(CLI::IsMember({"smooth", "fused", "numeric"}));
    app.add_option("--lambda-grid", rc.lambda_grid, "'auto' or a file of decreasing lambda values");
    app.add_option("--grid-size", rc.grid_size, "points in the automatic grid")->check(CLI::Range(1, 10000));
    app.add_option("--grid-ratio", rc.grid_ratio, "smallest / largest lambda of the automatic grid")
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    app.add_option("--grid-scale", rc.grid_scale, "units of a grid file: raw | n (lambda*n)")
        ->check(CLI::IsMember({"raw", "n"}));
    app.add_option("--lambda", rc.lambda, "penalty level for 'fit' (raw)");
    app.add_option("--lambda-n", rc.lambda_n, "penalty level for 'fit' given as lambda*n");
    app.add_option("--folds", rc.folds, "cross-validation folds K")->check(CLI::Range(2, 1000000));
    app.add_option("--subsamples", rc.subsamples, "stability-selection subsamples B")->check(CLI::Range(1, 1000000));
    app.add_option("--fraction", rc.fraction, "subsample size as a fraction of n")
        ->check(CLI::Range(1e-9, 1.0 - 1e-9));
    app.add_option("--pi-thr", rc.pi_thr, "selection-frequency threshold")->check(CLI::Range(0.0, 1.0));
    app.add_option("--score", rc.score, "cross-validation score: brier | rps")->check(CLI::IsMember({"brier", "rps"}));
    app.add_option("--seed", rc.seed, "random seed (non-negative integer)");
    app.add_option("--out", rc.out, "output directory");
    app.add_option("--format", rc.format, "comma list of json, csv")->delimiter(',');
    app.add_option("--drop", rc.drop, "columns to ignore")->delimiter(',');
    app.add_option("--level-map", rc.level_map, "NAME=label1|label2|... level order of a labelled column");
    app.add_option("--tol", rc.tol, "objective-change tolerance")->check(CLI::PositiveNumber);
    app.add_option("--kkt-tol", rc.kkt_tol, "KKT-residual tolerance")->check(CLI::PositiveNumber);
    app.add_option("--max-iter", rc.max_iter, "outer iteration limit per fit")->check(CLI::Range(1, 100000000));
    app.add_option("--scenario", rc.scenario, "simulation setting: a | b | c | d")
        ->check(CLI::IsMember({"a", "b", "c", "d"}));
    app.add_option("--n", rc.n, "simulated observations")->check(CLI::Range(1, 100000000));
    app.add_option("--replicates", rc.replicates, "simulation replicates R")->check(CLI::Range(1, 1000000));
    app.add_option("--methods", rc.methods, "comma list of ORS, ORF, numeric-lasso, MLE-stepwise")->delimiter(',');
    app.add_option("--amplitude", rc.amplitude, "scale of the informative curves");
    app.add_option("--baseline", rc.baseline, "sum of the mean informative effects");
    app.add_option("--levels", rc.levels, "levels per simulated predictor")->check(CLI::Range(2, 1000));
    app.add_option("--noise-count", rc.noise_count, "simulated noise predictors");
    app.add_option("--thresholds", rc.thresholds, "comma list of simulated thresholds")->delimiter(',');
    app.add_option("--curves", rc.curves, "informative curves 'v,v,..;v,v,..'");
    app.add_flag("--write-data", rc.write_data, "also write every simulated dataset as CSV");
    app.add_option("--relevant", rc.relevant, "roc on --input: names of the truly relevant predictors")
        ->delimiter(',');
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success&) {
        out << (argc > 1 && std::string(argv[1]) == "--version" ? std::string(kVersion) + "\n" : app.help());
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

inline SolverConfig solver_config(const RunConfig& rc)
{
    SolverConfig cfg;
    cfg.tol = rc.tol;
    cfg.kkt_tol = rc.kkt_tol;
    cfg.max_outer_iters = rc.max_iter;
    return cfg;
}

inline std::vector<Method> parse_methods(const std::vector<std::string>& list)
{
    std::vector<Method> out;
    for (const auto& item : list) {
        const Method m = parse_method(detail::trim(item));
        if (std::find(out.begin(), out.end(), m) != out.end())
            throw ConfigError("method '" + detail::trim(item) + "' listed twice");
        out.push_back(m);
    }
    if (out.empty())
        throw ConfigError("methods list is empty");
    return out;
}

inline SimulationScenario build_scenario(const RunConfig& rc)
{
    auto s = SimulationScenario::preset(rc.scenario, rc.n);
    if (rc.levels)
        s.levels = *rc.levels;
    if (rc.noise_count)
        s.noise_count = *rc.noise_count;
    if (rc.amplitude)
        s.amplitude = *rc.amplitude;
    if (rc.baseline)
        s.baseline = *rc.baseline;
    if (!rc.thresholds.empty())
        s.thresholds = rc.thresholds;
    if (!rc.curves.empty()) {
        // A config file splits the list at commas; rejoin before splitting into curves.
        std::string joined;
        for (const auto& part : rc.curves)
            joined += (joined.empty() ? "" : ",") + part;
        std::stringstream ss(joined);
        for (std::string item; std::getline(ss, item, ';');)
            if (!detail::trim(item).empty())
                s.curves.push_back(detail::parse_numbers(item, ',', "curves"));
    }
    s.validate();
    return s;
}

// Checks everything that can be checked without touching the data.
inline void validate(const RunConfig& rc)
{
    if (rc.out.empty())
        throw ConfigError("--out is required");
    if (!rc.seed)
        throw ConfigError("--seed is required");
    if (rc.format.empty())
        throw ConfigError("--format is empty");
    for (const auto& f : rc.format)
        if (f != "json" && f != "csv")
            throw ConfigError("--format entries must be json or csv, got '" + f + "'");
    if (rc.uses_input()) {
        if (rc.input.empty())
            throw ConfigError("command '" + rc.command + "' needs --input");
        if (rc.response.empty())
            throw ConfigError("command '" + rc.command + "' needs --response");
    }
    if (rc.command != "simulate" && rc.penalty.empty())
        throw ConfigError("command '" + rc.command + "' needs --penalty");
    if (rc.command == "fit") {
        if (rc.lambda.has_value() == rc.lambda_n.has_value())
            throw ConfigError("fit needs exactly one of --lambda or --lambda-n");
        const double v = rc.lambda ? *rc.lambda : *rc.lambda_n;
        if (!std::isfinite(v) || v < 0.0)
            throw ConfigError("penalty level must be finite and non-negative");
    } else if (rc.lambda || rc.lambda_n) {
        throw ConfigError("--lambda/--lambda-n only apply to 'fit'; use --lambda-grid for other commands");
    }
    if (rc.lambda_grid != "auto") {
        if (!std::filesystem::is_regular_file(rc.lambda_grid))
            throw ConfigError("lambda grid file '" + rc.lambda_grid + "' not found");
        std::ifstream in(rc.lambda_grid);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto grid = detail::parse_numbers(buf.str(), ',', "lambda grid file");
        if (grid.empty())
            throw ConfigError("lambda grid file '" + rc.lambda_grid + "' is empty");
        PenaltySpec probe;
        probe.lambda_grid = grid;
        probe.validate();
    }
    detail::parse_level_maps(rc.level_map);
    if (rc.command == "simulate") {
        parse_methods(rc.methods);
        build_scenario(rc);
    }
    if (rc.command == "roc") {
        if (rc.input.empty())
            build_scenario(rc);
        else if (rc.relevant.empty())
            throw ConfigError("roc on --input needs --relevant (the truly relevant predictors)");
    }
}

namespace detail {

struct Outputs {
    std::filesystem::path dir;
    const RunConfig* rc = nullptr;

    void csv(const std::string& name, const CsvTable& table) const
    {
        if (!rc->wants("csv"))
            return;
        std::ofstream out(dir / (rc->command + "_" + name + ".csv"), std::ios::binary);
        table.write(out);
        if (!out)
            throw ConfigError("cannot write " + (dir / (rc->command + "_" + name + ".csv")).string());
    }

    void json(const Json& doc) const
    {
        if (!rc->wants("json"))
            return;
        std::ofstream out(dir / (rc->command + ".json"), std::ios::binary);
        out << doc.dump(2) << '\n';
        if (!out)
            throw ConfigError("cannot write " + (dir / (rc->command + ".json")).string());
    }
};

inline Json config_json(const RunConfig& rc)
{
    Json c;
    c["command"] = rc.command;
    if (rc.uses_input()) {
        c["input"] = rc.input;
        c["response"] = rc.response;
        c["drop"] = rc.drop;
        c["level_map"] = rc.level_map;
    }
    if (!rc.penalty.empty())
        c["penalty"] = rc.penalty;
    c["lambda_grid"] = rc.lambda_grid;
    c["grid_size"] = rc.grid_size;
    c["grid_ratio"] = rc.grid_ratio;
    c["grid_scale"] = rc.grid_scale;
    if (rc.lambda)
        c["lambda"] = *rc.lambda;
    if (rc.lambda_n)
        c["lambda_n"] = *rc.lambda_n;
    if (rc.command == "cv") {
        c["folds"] = rc.folds;
        c["score"] = rc.score;
    }
    if (rc.command == "stabsel") {
        c["subsamples"] = rc.subsamples;
        c["fraction"] = rc.fraction;
        c["pi_thr"] = rc.pi_thr;
    }
    c["seed"] = *rc.seed;
    c["format"] = rc.format;
    c["tol"] = rc.tol;
    c["kkt_tol"] = rc.kkt_tol;
    c["max_iter"] = rc.max_iter;
    if (rc.command == "simulate" || (rc.command == "roc" && rc.input.empty())) {
        c["scenario"] = rc.scenario;
        c["n"] = rc.n;
        if (rc.command == "simulate") {
            c["replicates"] = rc.replicates;
            c["methods"] = rc.methods;
            c["write_data"] = rc.write_data;
        }
    }
    if (rc.command == "roc" && !rc.input.empty())
        c["relevant"] = rc.relevant;
    return c;
}

inline Json coding_json(const ColumnCoding& cc)
{
    return Json{{"name", cc.name},
                {"levels", cc.levels},
                {"coding", cc.coding},
                {"labels", cc.labels},
                {"empty_levels", cc.empty_levels}};
}

inline Json data_json(const LoadedDataset& ld)
{
    Json d;
    d["n"] = ld.data.n;
    d["p"] = ld.data.p;
    d["categories"] = ld.data.c;
    d["response"] = coding_json(ld.response);
    Json preds = Json::array();
    for (const auto& cc : ld.predictors)
        preds.push_back(coding_json(cc));
    d["predictors"] = preds;
    return d;
}

inline Json fit_json(const FitResult& f, const OrdinalDataset& data)
{
    Json r;
    r["lambda"] = f.lambda;
    r["lambda_n"] = f.lambda * static_cast<double>(data.n);
    r["objective"] = number(f.objective);
    r["log_likelihood"] = number(log_likelihood(data, f.params));
    r["iterations"] = f.iterations;
    r["converged"] = f.converged;
    r["kkt_residual"] = number(f.kkt_residual);
    r["thresholds"] = numbers(f.params.thresholds);
    Json vars = Json::array();
    Json selected = Json::array();
    for (std::size_t j = 0; j < data.p; ++j) {
        const bool active = std::find(f.active_groups.begin(), f.active_groups.end(), j) != f.active_groups.end();
        if (active)
            selected.push_back(data.name(j));
        vars.push_back(Json{{"name", data.name(j)},
                            {"selected", active},
                            {"coefficients", numbers(f.params.groups[j])},
                            {"nonzero", f.nonzero[j]}});
    }
    r["selected"] = selected;
    r["selected_count"] = selected.size();
    r["nonzero_count"] = f.nonzero_count();
    r["variables"] = vars;
    return r;
}

inline void coefficient_rows(CsvTable& t, const FitResult& f, const OrdinalDataset& data, bool with_lambda)
{
    const double ln = f.lambda * static_cast<double>(data.n);
    auto emit = [&](const std::string& var, int level, double v) {
        std::vector<std::string> cells;
        if (with_lambda) {
            cells.push_back(format_number(f.lambda));
            cells.push_back(format_number(ln));
        }
        cells.push_back(var);
        cells.push_back(std::to_string(level));
        cells.push_back(format_number(v));
        t.row(std::move(cells));
    };
    for (Eigen::Index r = 0; r < f.params.thresholds.size(); ++r)
        emit("(threshold)", static_cast<int>(r) + 1, f.params.thresholds[r]);
    for (std::size_t j = 0; j < data.p; ++j)
        for (Eigen::Index l = 0; l < f.params.groups[j].size(); ++l)
            emit(data.name(j), static_cast<int>(l) + 1, f.params.groups[j][l]);
}

inline std::vector<std::string> coefficient_header(bool with_lambda)
{
    std::vector<std::string> h;
    if (with_lambda)
        h = {"lambda", "lambda_n"};
    h.insert(h.end(), {"variable", "level", "value"});
    return h;
}

inline std::vector<double> resolve_grid(const RunConfig& rc, const OrdinalDataset& data, PenaltyKind kind)
{
    if (rc.lambda_grid == "auto")
        return default_lambda_grid(data, kind, rc.grid_size, rc.grid_ratio);
    std::ifstream in(rc.lambda_grid);
    std::stringstream buf;
    buf << in.rdbuf();
    auto grid = parse_numbers(buf.str(), ',', "lambda grid file");
    if (rc.grid_scale == "n")
        for (double& v : grid)
            v /= static_cast<double>(data.n);
    return grid;
}

inline void add_path_warnings(const PathResult& path, std::size_t n, Json& warnings)
{
    for (std::size_t g = 0; g < path.fits.size(); ++g) {
        const std::string at = "lambda*n = " + format_number(path.lambda_grid[g] * static_cast<double>(n));
        if (path.failed(g))
            warnings.push_back("fit failed at " + at + ": " + path.failures[g]);
        else if (!path.fits[g].converged)
            warnings.push_back("fit did not converge at " + at + " (kkt residual " +
                               format_number(path.fits[g].kkt_residual) + ")");
    }
}

inline Json base_document(const RunConfig& rc)
{
    Json doc;
    doc["program"] = "ordfit";
    doc["version"] = kVersion;
    doc["command"] = rc.command;
    doc["seed"] = *rc.seed;
    doc["config"] = config_json(rc);
    return doc;
}

inline void cmd_fit(const RunConfig& rc, const LoadedDataset& ld, PenaltySpec spec, Json& doc, const Outputs& out)
{
    const auto& data = ld.data;
    const double lambda = rc.lambda ? *rc.lambda : *rc.lambda_n / static_cast<double>(data.n);
    const FitResult f = fit(data, spec, lambda, solver_config(rc));
    doc["result"] = fit_json(f, data);
    if (!f.converged)
        doc["warnings"].push_back("fit did not converge (kkt residual " + format_number(f.kkt_residual) + ")");
    CsvTable t(coefficient_header(false));
    coefficient_rows(t, f, data, false);
    out.csv("coefficients", t);
}

inline void cmd_path(const RunConfig& rc, const LoadedDataset& ld, PenaltySpec spec, Json& doc, const Outputs& out)
{
    const auto& data = ld.data;
    const auto nd = static_cast<double>(data.n);
    const PathResult path = fit_path(data, spec, solver_config(rc));
    CsvTable coef(coefficient_header(true));
    CsvTable summary({"lambda", "lambda_n", "objective", "iterations", "converged", "kkt_residual", "selected",
                      "nonzero", "failed"});
    Json fits = Json::array();
    for (std::size_t g = 0; g < path.fits.size(); ++g) {
        const double l = path.lambda_grid[g];
        if (path.failed(g)) {
            summary.row({format_number(l), format_number(l * nd), "NA", "NA", "false", "NA", "NA", "NA", "true"});
            fits.push_back(Json{{"lambda", l}, {"lambda_n", l * nd}, {"failed", true}, {"message", path.failures[g]}});
            continue;
        }
        const auto& f = path.fits[g];
        coefficient_rows(coef, f, data, true);
        summary.row({format_number(l), format_number(l * nd), format_number(f.objective), std::to_string(f.iterations),
                     f.converged ? "true" : "false", format_number(f.kkt_residual),
                     std::to_string(f.active_groups.size()), std::to_string(f.nonzero_count()), "false"});
        fits.push_back(fit_json(f, data));
    }
    Json entry = Json::array();
    for (std::size_t j = 0; j < data.p; ++j)
        entry.push_back(Json{{"name", data.name(j)},
                             {"entry_lambda", number(path.entry_lambda[j])},
                             {"entry_lambda_n", number(path.entry_lambda[j] * nd)}});
    doc["result"] = Json{{"lambda_grid", numbers(path.lambda_grid)},
                         {"total_iterations", path.total_iterations()},
                         {"entry", entry},
                         {"fits", fits}};
    add_path_warnings(path, data.n, doc["warnings"]);
    out.csv("coefficients", coef);
    out.csv("summary", summary);
}

inline void cmd_cv(const RunConfig& rc, const LoadedDataset& ld, PenaltySpec spec, Json& doc, const Outputs& out)
{
    const auto& data = ld.data;
    const auto nd = static_cast<double>(data.n);
    const auto cfg = solver_config(rc);
    const ScoreKind kind = parse_score_kind(rc.score);
    const CvResult cv = cross_validate(data, spec, rc.folds, cfg, *rc.seed, kind);

    CsvTable folds({"lambda", "lambda_n", "fold", "validation", "training"});
    CsvTable summary({"lambda", "lambda_n", "validation", "training"});
    for (std::size_t g = 0; g < cv.lambda_grid.size(); ++g) {
        const double l = cv.lambda_grid[g];
        const auto gi = static_cast<Eigen::Index>(g);
        for (int f = 0; f < cv.folds; ++f)
            folds.row({format_number(l), format_number(l * nd), std::to_string(f + 1),
                       format_number(cv.fold_scores(f, gi)), format_number(cv.fold_train_scores(f, gi))});
        summary.row({format_number(l), format_number(l * nd), format_number(cv.mean_score[g]),
                     format_number(cv.mean_train_score[g])});
    }
    std::vector<std::size_t> fold_sizes(static_cast<std::size_t>(cv.folds), 0);
    for (int f : cv.fold_of)
        ++fold_sizes[static_cast<std::size_t>(f)];

    // Refit on all observations along the grid down to the chosen lambda.
    PenaltySpec refit_spec = spec;
    refit_spec.lambda_grid.assign(cv.lambda_grid.begin(),
                                  cv.lambda_grid.begin() + static_cast<std::ptrdiff_t>(cv.optimal_index) + 1);
    const PathResult path = fit_path(data, refit_spec, cfg);
    Json result{{"score", to_string(kind)},
                {"folds", cv.folds},
                {"fold_sizes", fold_sizes},
                {"lambda_grid", numbers(cv.lambda_grid)},
                {"validation", numbers(cv.mean_score)},
                {"training", numbers(cv.mean_train_score)},
                {"optimal_index", cv.optimal_index},
                {"optimal_lambda", cv.optimal_lambda},
                {"optimal_lambda_n", cv.optimal_lambda * nd}};
    if (path.failed(cv.optimal_index)) {
        doc["warnings"].push_back("refit at the chosen lambda failed: " + path.failures[cv.optimal_index]);
    } else {
        const auto& f = path.fits[cv.optimal_index];
        result["model"] = fit_json(f, data);
        if (!f.converged)
            doc["warnings"].push_back("refit at the chosen lambda did not converge");
        CsvTable coef(coefficient_header(false));
        coefficient_rows(coef, f, data, false);
        out.csv("coefficients", coef);
    }
    doc["result"] = result;
    for (const auto& msg : cv.failures)
        doc["warnings"].push_back("cross-validation fit failed: " + msg);
    out.csv("folds", folds);
    out.csv("scores", summary);
}

inline void cmd_stabsel(const RunConfig& rc, const LoadedDataset& ld, PenaltySpec spec, Json& doc,
                        const Outputs& out)
{
    const auto& data = ld.data;
    const auto nd = static_cast<double>(data.n);
    const StabilityResult st =
        stability_selection(data, spec, rc.subsamples, rc.fraction, solver_config(rc), *rc.seed, rc.pi_thr);
    CsvTable table({"variable", "lambda", "lambda_n", "count", "pi_hat"});
    Json vars = Json::array();
    Json stable = Json::array();
    for (std::size_t j = 0; j < data.p; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        std::vector<double> pi;
        for (std::size_t g = 0; g < st.lambda_grid.size(); ++g) {
            const auto gi = static_cast<Eigen::Index>(g);
            table.row({data.name(j), format_number(st.lambda_grid[g]), format_number(st.lambda_grid[g] * nd),
                       std::to_string(st.counts(ji, gi)), format_number(st.pi_hat(ji, gi))});
            pi.push_back(st.pi_hat(ji, gi));
        }
        const double max_pi = st.pi_hat.row(ji).maxCoeff();
        if (max_pi >= st.pi_thr)
            stable.push_back(data.name(j));
        vars.push_back(Json{{"name", data.name(j)}, {"max_pi_hat", max_pi}, {"pi_hat", numbers(pi)}});
    }
    doc["result"] = Json{{"subsamples", st.subsamples},
                         {"subsample_size", st.subsample_size},
                         {"pi_thr", st.pi_thr},
                         {"lambda_grid", numbers(st.lambda_grid)},
                         {"stable_variables", stable},
                         {"variables", vars}};
    for (const auto& msg : st.failures)
        doc["warnings"].push_back("subsample fit failed: " + msg);
    out.csv("paths", table);
}

inline Json scenario_json(const SimulationScenario& s)
{
    Json curves = Json::array();
    for (const auto& c : s.informative_curves())
        curves.push_back(numbers(c));
    return Json{{"name", s.name},
                {"n", s.n},
                {"levels", s.levels},
                {"informative", s.informative_count()},
                {"noise_count", s.noise_count},
                {"thresholds", numbers(s.thresholds)},
                {"fused_variant", s.fused_variant},
                {"amplitude", s.amplitude},
                {"baseline", s.baseline},
                {"curves", curves}};
}

inline void cmd_simulate(const RunConfig& rc, Json& doc, const Outputs& out)
{
    const SimulationScenario scenario = build_scenario(rc);
    const auto methods = parse_methods(rc.methods);
    const auto res = run_replications(scenario, methods, rc.replicates, solver_config(rc), *rc.seed);

    CsvTable aucs({"replicate", "method", "auc", "fusion_auc", "failed", "converged"});
    CsvTable summary({"method", "replicates", "failures", "mean_auc"});
    Json per_method = Json::array();
    for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> samples;
        for (std::size_t r = 0; r < res.replicates(); ++r) {
            const auto& o = res.outcomes[r][m];
            aucs.row({std::to_string(r + 1), std::string(to_string(methods[m])), format_number(o.auc), format_number(o.fusion_auc),
                      o.failed ? "true" : "false", o.converged ? "true" : "false"});
            samples.push_back(o.failed ? std::numeric_limits<double>::quiet_NaN() : o.auc);
            if (o.failed)
                doc["warnings"].push_back(std::string(to_string(methods[m])) + " failed on replicate " +
                                          std::to_string(r + 1) + ": " + o.message);
            else if (!o.converged)
                doc["warnings"].push_back(std::string(to_string(methods[m])) + " had non-converged fits on replicate " +
                                          std::to_string(r + 1));
        }
        summary.row({std::string(to_string(methods[m])), std::to_string(res.replicates()), std::to_string(res.failures(m)),
                     format_number(res.mean_auc(m))});
        per_method.push_back(Json{{"method", to_string(methods[m])},
                                  {"failures", res.failures(m)},
                                  {"failure_rate", static_cast<double>(res.failures(m)) /
                                                       static_cast<double>(res.replicates())},
                                  {"mean_auc", number(res.mean_auc(m))},
                                  {"auc", numbers(samples)}});
    }
    doc["result"] = Json{{"scenario", scenario_json(scenario)}, {"replicates", res.replicates()}, {"methods", per_method}};
    out.csv("auc", aucs);
    out.csv("summary", summary);

    if (rc.write_data) {
        std::filesystem::create_directories(out.dir / "data");
        for (std::size_t r = 0; r < res.replicates(); ++r) {
            SimulationScenario s = scenario;
            s.seed = derive_seed(*rc.seed, r);
            char name[32];
            std::snprintf(name, sizeof name, "replicate_%04zu.csv", r + 1);
            std::ofstream f(out.dir / "data" / name, std::ios::binary);
            write_dataset(f, generate(s).data);
        }
    }
}

inline void roc_rows(CsvTable& t, const std::string& curve, const RocCurve& roc)
{
    for (std::size_t k = 0; k < roc.fpr.size(); ++k)
        t.row({curve, std::to_string(k), format_number(roc.fpr[k]), format_number(roc.tpr[k])});
}

inline void cmd_roc(const RunConfig& rc, const LoadedDataset* ld, PenaltyKind kind, Json& doc, const Outputs& out)
{
    SimulatedData sim;
    if (ld) {
        sim.data = ld->data;
        sim.truth.effects.assign(sim.data.p, {});
        for (const auto& name : rc.relevant) {
            const auto it = std::find(sim.data.names.begin(), sim.data.names.end(), name);
            if (it == sim.data.names.end())
                throw DataError("relevant predictor '" + name + "' is not a column of the input");
            sim.truth.relevant.push_back(static_cast<std::size_t>(it - sim.data.names.begin()));
        }
        std::sort(sim.truth.relevant.begin(), sim.truth.relevant.end());
    } else {
        SimulationScenario s = build_scenario(rc);
        s.seed = derive_seed(*rc.seed, 0);
        sim = generate(s);
        doc["result"]["scenario"] = scenario_json(s);
    }
    const auto& data = sim.data;
    const auto nd = static_cast<double>(data.n);
    PenaltySpec spec = PenaltySpec::make(data, kind, resolve_grid(rc, data, kind));
    const PathResult path = fit_path(data, spec, solver_config(rc));
    add_path_warnings(path, data.n, doc["warnings"]);

    CsvTable curve({"curve", "point", "fpr", "tpr"});
    const RocCurve selection = roc_selection(path, sim.truth, derive_seed(*rc.seed, 1));
    roc_rows(curve, "selection", selection);
    doc["result"]["selection_auc"] = selection.auc;
    Json entry = Json::array();
    for (std::size_t j = 0; j < data.p; ++j)
        entry.push_back(Json{{"name", data.name(j)},
                             {"relevant", std::binary_search(sim.truth.relevant.begin(), sim.truth.relevant.end(), j)},
                             {"entry_lambda_n", number(path.entry_lambda[j] * nd)}});
    doc["result"]["entry"] = entry;

    bool fusion = false;
    if (!ld && kind == PenaltyKind::fused) {
        bool any_zero = false, any_nonzero = false;
        for (const auto& v : sim.truth.true_differences)
            for (bool b : v)
                (b ? any_nonzero : any_zero) = true;
        fusion = any_zero && any_nonzero;
    }
    if (fusion) {
        const RocCurve fr = roc_fusion(difference_entry_lambda(path), sim.truth, derive_seed(*rc.seed, 2));
        roc_rows(curve, "fusion", fr);
        doc["result"]["fusion_auc"] = fr.auc;
        CsvTable rates({"lambda", "lambda_n", "fpr", "fnr"});
        Json rate_json = Json::array();
        for (std::size_t g = 0; g < path.fits.size(); ++g) {
            if (path.failed(g))
                continue;
            const FusionRates r = fusion_rates(path.fits[g], sim.truth);
            rates.row({format_number(path.lambda_grid[g]), format_number(path.lambda_grid[g] * nd),
                       format_number(r.fpr), format_number(r.fnr)});
            rate_json.push_back(Json{{"lambda_n", path.lambda_grid[g] * nd}, {"fpr", r.fpr}, {"fnr", r.fnr}});
        }
        doc["result"]["fusion_rates"] = rate_json;
        out.csv("fusion_rates", rates);
    }
    out.csv("curves", curve);
}

} // namespace detail

// Runs a validated configuration and writes its outputs.
inline void run(const RunConfig& rc)
{
    validate(rc);
    detail::Outputs out;
    out.rc = &rc;
    out.dir = rc.out;
    std::error_code ec;
    std::filesystem::create_directories(out.dir, ec);
    if (ec || !std::filesystem::is_directory(out.dir))
        throw ConfigError("cannot create output directory '" + rc.out + "'");

    Json doc = detail::base_document(rc);
    doc["warnings"] = Json::array();
    if (rc.command == "simulate") {
        detail::cmd_simulate(rc, doc, out);
    } else {
        const PenaltyKind kind = parse_penalty_kind(rc.penalty);
        std::optional<LoadedDataset> ld;
        if (rc.uses_input()) {
            CsvOptions opts;
            opts.response = rc.response;
            opts.drop = rc.drop;
            opts.level_maps = detail::parse_level_maps(rc.level_map);
            ld = load_dataset(rc.input, opts);
            doc["data"] = detail::data_json(*ld);
            for (const auto& w : ld->warnings)
                doc["warnings"].push_back(w);
        }
        if (rc.command == "roc") {
            doc["result"] = Json::object();
            detail::cmd_roc(rc, ld ? &*ld : nullptr, kind, doc, out);
        } else {
            const PenaltySpec spec = PenaltySpec::make(ld->data, kind, detail::resolve_grid(rc, ld->data, kind));
            if (rc.command == "fit")
                detail::cmd_fit(rc, *ld, spec, doc, out);
            else if (rc.command == "path")
                detail::cmd_path(rc, *ld, spec, doc, out);
            else if (rc.command == "cv")
                detail::cmd_cv(rc, *ld, spec, doc, out);
            else
                detail::cmd_stabsel(rc, *ld, spec, doc, out);
        }
    }
    out.json(doc);
}

// Maps an exception to an exit code and a one-line JSON error record.
inline int report_error(std::ostream& err, const std::string& kind, int code, const std::string& message)
{
    err << Json{{"error", kind}, {"exit_code", code}, {"message", detail::one_line(message)}}.dump() << '\n';
    return code;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const auto rc = parse_args(argc, argv, out);
        if (!rc)
            return kExitOk;
        run(*rc);
        return kExitOk;
    } catch (const ConfigError& e) {
        return report_error(err, "config", kExitConfig, e.what());
    } catch (const DataError& e) {
        return report_error(err, "data", kExitData, e.what());
    } catch (const std::exception& e) {
        return report_error(err, "internal", kExitInternal, e.what());
    } catch (...) {
        return report_error(err, "internal", kExitInternal, "unknown failure");
    }
}

} // namespace ordpen::cli
