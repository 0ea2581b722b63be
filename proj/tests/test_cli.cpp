#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "dircast/backtest.hpp"
#include "dircast/timeseries.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using testsupport::TempDir;

namespace {

std::string cli_binary() {
    const char* path = std::getenv("DIRCAST_CLI");
    REQUIRE_MESSAGE(path != nullptr,
                    "DIRCAST_CLI must point at the built command-line tool");
    return path;
}

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

CliResult run_cli(const std::string& args, const TempDir& dir) {
    static int counter = 0;
    const fs::path capture =
        dir.path() / ("cli-output-" + std::to_string(++counter) + ".txt");
    const std::string command = "'" + cli_binary() + "' " + args + " >'" +
                                capture.string() + "' 2>&1";
    const int status = std::system(command.c_str());
    CliResult result;
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    result.output = TempDir::read(capture);
    return result;
}

std::string micro_config_json(const std::string& panel_name) {
    return std::string(R"({
  "format": "dircast.experiment",
  "version": 1,
  "panel": ")") +
           panel_name + R"(",
  "target": "IDX",
  "factors": {"index": "IDX", "sp500": "SPX", "exr": "FX"},
  "lags": {"index": 1, "factor": 1, "constituent": 1}
})";
}

std::string planted_config_json() {
    return R"({
  "format": "dircast.experiment",
  "version": 1,
  "panel": "panel.csv",
  "target": "INDEX",
  "factors": {"index": "INDEX", "sp500": "SP500", "exr": "EXR"},
  "models": ["rw"],
  "windows": {"iterations": 2}
})";
}

int entries_in(const fs::path& dir) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        (void)entry;
        ++count;
    }
    return count;
}

}  // namespace

TEST_CASE("cli separates usage errors from runtime failures") {
    TempDir dir;
    CHECK(run_cli("--help", dir).exit_code == 0);
    CHECK(run_cli("", dir).exit_code == 2);           // subcommand required
    CHECK(run_cli("frobnicate", dir).exit_code == 2); // unknown subcommand
    CHECK(run_cli("ingest --bogus", dir).exit_code == 2);
    const auto help = run_cli("--help", dir);
    CHECK(help.output.find("ingest") != std::string::npos);
    CHECK(help.output.find("backtest") != std::string::npos);
}

TEST_CASE("ingest canonicalizes an unsorted price file") {
    TempDir dir;
    const std::string raw = "date,close\n2005-01-04,101.5\n2005-01-03,100\n";
    dir.write("raw.csv", raw);
    const fs::path out = dir.path() / "clean.csv";

    const auto result = run_cli("ingest --in '" + (dir.path() / "raw.csv").string() +
                                    "' --out '" + out.string() + "' --id px",
                                dir);
    CHECK(result.exit_code == 0);

    const std::string expected = dircast::timeseries::price_series_to_csv(
        dircast::timeseries::parse_price_csv(raw, "px"));
    CHECK(TempDir::read(out) == expected);
}

TEST_CASE("ingest honors a day-first date format") {
    TempDir dir;
    dir.write("raw.csv", "date,close\n04/01/2005,101.5\n03/01/2005,100\n");
    const fs::path out = dir.path() / "clean.csv";
    const auto result =
        run_cli("ingest --in '" + (dir.path() / "raw.csv").string() +
                    "' --out '" + out.string() +
                    "' --id px --date-format %d/%m/%Y",
                dir);
    CHECK(result.exit_code == 0);
    const std::string content = TempDir::read(out);
    CHECK(content.find("2005-01-03") != std::string::npos);
    CHECK(content.find("2005-01-04") != std::string::npos);
}

TEST_CASE("a rejected input leaves no output behind") {
    TempDir dir;
    dir.write("raw.csv", "date,close\n2005-01-03,-4\n");
    const fs::path out = dir.path() / "clean.csv";
    const int before = entries_in(dir.path());
    const auto result = run_cli("ingest --in '" +
                                    (dir.path() / "raw.csv").string() +
                                    "' --out '" + out.string() + "'",
                                dir);
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("error") != std::string::npos);
    CHECK_FALSE(fs::exists(out));
    CHECK(entries_in(dir.path()) == before + 1);  // only the capture file
}

TEST_CASE("align fills gaps against the reference calendar") {
    TempDir dir;
    dir.write("ref.csv",
              "date,close\n2005-01-03,100\n2005-01-04,101\n2005-01-05,102\n");
    dir.write("gappy.csv", "date,close\n2005-01-03,50\n2005-01-05,52\n");
    const fs::path out = dir.path() / "panel.csv";

    const auto result =
        run_cli("align '" + (dir.path() / "ref.csv").string() + "' '" +
                    (dir.path() / "gappy.csv").string() + "' --out '" +
                    out.string() + "' --reference ref",
                dir);
    CHECK(result.exit_code == 0);

    const auto panel =
        dircast::timeseries::AlignedPanel::read_csv(TempDir::read(out));
    CHECK(panel.rows() == 3);
    CHECK(panel.cols() == 2);
    const Eigen::Index gappy = panel.column_of("gappy");
    CHECK(panel.values()(1, gappy) == 50.0);  // forward filled

    const auto missing_ref =
        run_cli("align '" + (dir.path() / "ref.csv").string() + "' --out '" +
                    out.string() + "' --reference nope",
                dir);
    CHECK(missing_ref.exit_code == 1);
}

TEST_CASE("pca-report writes the scree table for the configured panel") {
    TempDir dir;
    dir.write("panel.csv", testsupport::make_micro_panel().to_csv());
    const fs::path config = dir.write("config.json", micro_config_json("panel.csv"));
    const fs::path out = dir.path() / "scree.csv";

    const auto result = run_cli(
        "pca-report --config '" + config.string() + "' --out '" + out.string() + "'",
        dir);
    CHECK(result.exit_code == 0);
    const std::string scree = TempDir::read(out);
    CHECK(scree.rfind("component,eigenvalue,rate,cumulative\n", 0) == 0);
    CHECK(std::count(scree.begin(), scree.end(), '\n') == 4);  // header + 3 rows
    CHECK(result.output.find("selected") != std::string::npos);
}

TEST_CASE("biplot writes one loading row per constituent") {
    TempDir dir;
    dir.write("panel.csv", testsupport::make_micro_panel().to_csv());
    const fs::path config = dir.write("config.json", micro_config_json("panel.csv"));
    const fs::path out = dir.path() / "biplot.csv";

    const auto result = run_cli("biplot --config '" + config.string() +
                                    "' --out '" + out.string() + "' --scale",
                                dir);
    CHECK(result.exit_code == 0);
    const std::string biplot = TempDir::read(out);
    CHECK(biplot.rfind("instrument,pc1,pc2\n", 0) == 0);
    CHECK(biplot.find("\nA,") != std::string::npos);
    CHECK(biplot.find("\nB,") != std::string::npos);
    CHECK(biplot.find("\nC,") != std::string::npos);
}

TEST_CASE("backtest and render run end to end from config to tables") {
    TempDir dir;
    const auto& story = testsupport::make_planted_panel(20020101);
    dir.write("panel.csv", story.panel.to_csv());
    const fs::path config = dir.write("config.json", planted_config_json());
    const fs::path report_path = dir.path() / "report.json";

    const auto run = run_cli("backtest --config '" + config.string() +
                                 "' --out '" + report_path.string() + "'",
                             dir);
    CHECK(run.exit_code == 0);

    const auto report =
        dircast::backtest::report_from_json(TempDir::read(report_path));
    CHECK(report.target == "INDEX");
    REQUIRE(report.results.size() == 1);
    CHECK(report.results[0].kind == dircast::backtest::ModelKind::rw);
    CHECK(report.results[0].hit_ratios.size() == 2);

    // An override must land in the effective config the report identifies.
    const fs::path report2_path = dir.path() / "report2.json";
    const auto overridden = run_cli(
        "backtest --config '" + config.string() + "' --out '" +
            report2_path.string() + "' --override windows.iterations=1",
        dir);
    CHECK(overridden.exit_code == 0);
    const auto report2 =
        dircast::backtest::report_from_json(TempDir::read(report2_path));
    CHECK(report2.results[0].hit_ratios.size() == 1);
    CHECK(report2.config_digest != report.config_digest);

    const fs::path csv_out = dir.path() / "summary.csv";
    const fs::path table_out = dir.path() / "summary.txt";
    const auto rendered = run_cli("render --report '" + report_path.string() +
                                      "' --csv '" + csv_out.string() +
                                      "' --table '" + table_out.string() + "'",
                                  dir);
    CHECK(rendered.exit_code == 0);
    const std::string csv = TempDir::read(csv_out);
    CHECK(csv.rfind("iteration,rw\n", 0) == 0);
    CHECK(csv.find("Average,") != std::string::npos);
    const std::string table = TempDir::read(table_out);
    CHECK(table.find("Hit ratio (%) of forecasting INDEX") !=
          std::string::npos);
}

TEST_CASE("backtest rejects a config with a stray key and writes nothing") {
    TempDir dir;
    const auto& story = testsupport::make_planted_panel(20020101);
    dir.write("panel.csv", story.panel.to_csv());
    const std::string bad = R"({
  "format": "dircast.experiment",
  "version": 1,
  "panel": "panel.csv",
  "target": "INDEX",
  "factors": {"index": "INDEX", "sp500": "SP500", "exr": "EXR"},
  "surprise": true
})";
    const fs::path config = dir.write("config.json", bad);
    const fs::path out = dir.path() / "report.json";
    const auto result = run_cli(
        "backtest --config '" + config.string() + "' --out '" + out.string() + "'",
        dir);
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("surprise") != std::string::npos);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("an explicit panel flag overrides the config path") {
    TempDir dir;
    dir.write("elsewhere.csv", testsupport::make_micro_panel().to_csv());
    const fs::path config =
        dir.write("config.json", micro_config_json("missing.csv"));
    const fs::path out = dir.path() / "scree.csv";

    const auto bad = run_cli(
        "pca-report --config '" + config.string() + "' --out '" + out.string() + "'",
        dir);
    CHECK(bad.exit_code == 1);

    const auto good = run_cli("pca-report --config '" + config.string() +
                                  "' --out '" + out.string() + "' --panel '" +
                                  (dir.path() / "elsewhere.csv").string() + "'",
                              dir);
    CHECK(good.exit_code == 0);
    CHECK(fs::exists(out));
}
