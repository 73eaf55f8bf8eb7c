#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ordpen/cli.hpp"
#include "ordpen/io.hpp"
#include "ordpen/simlab.hpp"

using namespace ordpen;
namespace fs = std::filesystem;

namespace {

LoadedDataset parse(const std::string& text, CsvOptions opts)
{
    std::istringstream in(text);
    return read_dataset(in, opts);
}

CsvOptions response(const std::string& name)
{
    CsvOptions o;
    o.response = name;
    return o;
}

std::string message_of(const std::string& text, const CsvOptions& opts)
{
    try {
        parse(text, opts);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ordfit_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + " " + ORDFIT_EXE + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every file below `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

const std::string kExample = std::string(ORDPEN_DATA_DIR) + "/example20.csv";

} // namespace

TEST_CASE("ingest: integer levels, Likert remap and empty levels")
{
    const auto ld = parse("a,b,y\n1,-2,1\n3,0,2\n1,2,3\n3,-1,2\n", response("y"));
    CHECK(ld.data.n == 4);
    CHECK(ld.data.p == 2);
    CHECK(ld.data.c == 3);
    CHECK(ld.data.names == std::vector<std::string>{"a", "b"});
    CHECK(ld.predictors[0].coding == "integer");
    CHECK(ld.predictors[0].levels == 3);
    CHECK(ld.predictors[0].empty_levels == std::vector<int>{2});
    CHECK(ld.predictors[1].coding == "likert");
    CHECK(ld.predictors[1].levels == 5);
    CHECK(ld.predictors[1].labels.front() == "-2");
    CHECK(ld.data.at(0, 1) == 1);
    CHECK(ld.data.at(1, 1) == 3);
    CHECK(ld.data.at(2, 1) == 5);
    CHECK(ld.predictors[1].empty_levels == std::vector<int>{4});
    CHECK(ld.warnings.size() == 2);
}

TEST_CASE("ingest: level maps, dropped columns, quoting and CRLF")
{
    CsvOptions o = response("y");
    o.drop = {"id"};
    o.level_maps["taste"] = {"bad", "ok", "good"};
    const auto ld = parse("id,\"taste\",y\r\n17,good,1\r\n18,bad,2\r\n19,ok,2\r\n", o);
    CHECK(ld.data.p == 1);
    CHECK(ld.data.name(0) == "taste");
    CHECK(ld.data.x == std::vector<int>{3, 1, 2});
    CHECK(ld.predictors[0].coding == "map");
}

TEST_CASE("ingest errors name the offending cell")
{
    CHECK(message_of("a,y\n1,1\nNA,2\n", response("y")).find("row 2, column 1 (a)") != std::string::npos);
    CHECK(message_of("a,y\n1,1\nNA,2\n", response("y")).find("NA") != std::string::npos);
    CHECK(message_of("a,y\n1,1\n2,x\n", response("y")).find("row 2, column 2 (y)") != std::string::npos);
    CHECK(message_of("a,y\n1,1\n2\n", response("y")).find("row 2 has 1 cells") != std::string::npos);
    CHECK(message_of("a,y\n0,1\n7,2\n", response("y")).find("row 1, column 1") != std::string::npos);
    CHECK(message_of("a,y\n1,1\n1,2\n", response("y")).find("fewer than 2 levels") != std::string::npos);
    CHECK(message_of("a,y\n1,1\n", response("z")).find("'z' not found") != std::string::npos);
    CHECK(message_of("", response("y")).find("header") != std::string::npos);
    CHECK(message_of("a,y\n", response("y")).find("no data rows") != std::string::npos);
    CHECK(message_of("a,a,y\n1,1,1\n", response("y")).find("duplicate") != std::string::npos);
    CsvOptions o = response("y");
    o.level_maps["a"] = {"lo", "hi"};
    CHECK(message_of("a,y\nlo,1\nmid,2\n", o).find("row 2, column 1 (a)") != std::string::npos);
}

TEST_CASE("simulated data survives a write/read round trip")
{
    auto s = SimulationScenario::preset("b", 300);
    s.seed = 8;
    const auto data = generate(s).data;
    std::stringstream buf;
    write_dataset(buf, data);
    CsvOptions o = response("y");
    for (std::size_t j = 0; j < data.p; ++j) {
        std::vector<std::string> labels;
        for (int l = 1; l <= data.levels[j]; ++l)
            labels.push_back(std::to_string(l));
        o.level_maps[data.name(j)] = labels;
    }
    const auto back = read_dataset(buf, o).data;
    CHECK(back.x == data.x);
    CHECK(back.y == data.y);
    CHECK(back.levels == data.levels);
    CHECK(back.names == data.names);
    CHECK(back.c == data.c);
}

TEST_CASE("numbers are written with 17 significant digits")
{
    Rng rng(1);
    for (int rep = 0; rep < 1000; ++rep) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.between(-12, 12));
        CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);
    }
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(std::nan("")) == "NA");
}

TEST_CASE("argument parsing: config file with flag overrides")
{
    const auto dir = scratch("config");
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "# comment\ninput = " << kExample << "\nresponse = rating\npenalty = smooth\nfolds = 4\nseed = 9\n"
            << "format = json,csv\nout = " << (dir / "out").string() << "\n";
    }
    const std::string cfg_path = (dir / "run.cfg").string();
    const char* argv[] = {"ordfit", "cv", "--config", cfg_path.c_str(), "--folds", "3", "--format", "json"};
    const auto rc = cli::parse_args(8, argv);
    REQUIRE(rc);
    CHECK(rc->command == "cv");
    CHECK(rc->penalty == "smooth");
    CHECK(rc->folds == 3);
    CHECK(rc->seed == 9u);
    CHECK(rc->format == std::vector<std::string>{"json"});
    CHECK_NOTHROW(cli::validate(*rc));

    const char* bad[] = {"ordfit", "cv", "--folds", "1"};
    CHECK_THROWS_AS(cli::parse_args(4, bad), ConfigError);
    const char* unknown[] = {"ordfit", "launch"};
    CHECK_THROWS_AS(cli::parse_args(2, unknown), ConfigError);
}

TEST_CASE("exit codes")
{
    const auto out = scratch("exit").string();
    const std::string base = "--input " + kExample + " --response rating --seed 1 --out " + out;
    CHECK(run("fit " + base + " --penalty fused --lambda-n 2") == cli::kExitOk);
    CHECK(fs::exists(fs::path(out) / "fit.json"));
    CHECK(fs::exists(fs::path(out) / "fit_coefficients.csv"));
    CHECK(run("fit " + base + " --penalty lasso --lambda-n 2") == cli::kExitConfig);
    CHECK(run("fit " + base + " --penalty fused") == cli::kExitConfig);
    CHECK(run("fit --input " + kExample + " --response rating --penalty fused --lambda 1 --out " + out) ==
          cli::kExitConfig);
    CHECK(run("fit " + base + " --penalty fused --lambda 1 --folds 0") == cli::kExitConfig);
    CHECK(run("path " + base + " --penalty fused --lambda-grid /nonexistent/grid.txt") == cli::kExitConfig);
    CHECK(run("frobnicate " + base) == cli::kExitConfig);

    const auto dir = scratch("exit_data");
    std::ofstream(dir / "na.csv") << "a,y\n1,1\nNA,2\n";
    CHECK(run("fit --input " + (dir / "na.csv").string() + " --response y --penalty fused --lambda 1 --seed 1 --out " +
              out) == cli::kExitData);
    CHECK(run("fit --input " + (dir / "none.csv").string() + " --response y --penalty fused --lambda 1 --seed 1 --out " +
              out) == cli::kExitData);
    CHECK(run("fit --input " + kExample + " --response nosuch --penalty fused --lambda 1 --seed 1 --out " + out) ==
          cli::kExitData);

}

TEST_CASE("lambda grid files and outputs in both scales")
{
    const auto dir = scratch("grid");
    std::ofstream(dir / "grid.txt") << "8\n4\n2\n1\n";
    const std::string args = "path --input " + kExample + " --response rating --penalty smooth --seed 1 --grid-scale n" +
                             " --lambda-grid " + (dir / "grid.txt").string() + " --out " + (dir / "out").string();
    REQUIRE(run(args) == cli::kExitOk);
    const auto doc = cli::Json::parse(slurp(dir / "out" / "path.json"));
    const auto& fits = doc["result"]["fits"];
    REQUIRE(fits.size() == 4);
    CHECK(fits[0]["lambda_n"].get<double>() == 8.0);
    CHECK(fits[0]["lambda"].get<double>() == 8.0 / 20.0);
    const std::string summary = slurp(dir / "out" / "path_summary.csv");
    CHECK(summary.rfind("lambda,lambda_n,", 0) == 0);

    std::ofstream(dir / "bad.txt") << "1\n2\n";
    CHECK(run("path --input " + kExample + " --response rating --penalty smooth --seed 1 --lambda-grid " +
              (dir / "bad.txt").string() + " --out " + (dir / "out").string()) == cli::kExitConfig);
}

TEST_CASE("Likert remap and empty levels are recorded in the output")
{
    const auto dir = scratch("meta");
    REQUIRE(run("fit --input " + kExample + " --response rating --penalty numeric --lambda-n 1 --seed 1 --out " +
                dir.string()) == cli::kExitOk);
    const auto doc = cli::Json::parse(slurp(dir / "fit.json"));
    CHECK(doc["data"]["predictors"][0]["coding"] == "likert");
    CHECK(doc["data"]["predictors"][0]["labels"][0] == "-2");
    CHECK(doc["result"]["lambda_n"].get<double>() == 1.0);
    CHECK(doc["config"]["seed"] == 1);
}

TEST_CASE("every command is byte-identical on rerun, whatever the thread count")
{
    const std::string data = " --input " + kExample + " --response rating --seed 11";
    const std::vector<std::string> commands{
        "fit" + data + " --penalty fused --lambda-n 1.5",
        "path" + data + " --penalty smooth --grid-size 8",
        "cv" + data + " --penalty fused --folds 4 --grid-size 8 --score rps",
        "stabsel" + data + " --penalty smooth --subsamples 12 --grid-size 8",
        "simulate --scenario c --n 120 --noise-count 6 --replicates 3 --methods ORS,ORF --seed 11 --write-data",
        "roc --scenario c --n 150 --noise-count 6 --penalty fused --grid-size 10 --seed 11",
    };
    for (std::size_t k = 0; k < commands.size(); ++k) {
        INFO(commands[k]);
        const auto a = scratch("det_a" + std::to_string(k)), b = scratch("det_b" + std::to_string(k));
        REQUIRE(run(commands[k] + " --out " + a.string()) == cli::kExitOk);
        REQUIRE(run(commands[k] + " --out " + b.string(), "ORDFIT_THREADS=3") == cli::kExitOk);
        const auto sa = snapshot(a), sb = snapshot(b);
        CHECK(sa.size() >= 2);
        CHECK(sa == sb);
    }
}

TEST_CASE("simulate emits one AUC row per replicate and method")
{
    const auto dir = scratch("simulate");
    REQUIRE(run("simulate --config " + std::string(ORDPEN_DATA_DIR) +
                "/scenario_a.cfg --replicates 2 --n 120 --noise-count 4 --methods ORS,MLE-stepwise --out " +
                dir.string()) == cli::kExitOk);
    const std::string table = slurp(dir / "simulate_auc.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 2 * 2);
    const auto doc = cli::Json::parse(slurp(dir / "simulate.json"));
    CHECK(doc["result"]["methods"].size() == 2);
    CHECK(doc["result"]["methods"][0]["auc"].size() == 2);
}
