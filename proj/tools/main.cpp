#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dircast/backtest.hpp"
#include "dircast/errors.hpp"
#include "dircast/pca.hpp"
#include "dircast/timeseries.hpp"

namespace fs = std::filesystem;
using namespace dircast;

namespace {

struct Logger {
    int verbosity = 0;

    static std::string quote(const std::string& value) {
        if (value.find_first_of(" \t\"=") == std::string::npos && !value.empty())
            return value;
        std::string out = "\"";
        for (char c : value) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        out += '"';
        return out;
    }

    void event(int level,
               std::initializer_list<std::pair<std::string, std::string>>
                   fields) const {
        if (level > verbosity) return;
        std::ostringstream line;
        bool first = true;
        for (const auto& [key, value] : fields) {
            if (!first) line << ' ';
            first = false;
            line << key << '=' << quote(value);
        }
        std::cerr << line.str() << '\n';
    }
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw ValidationError("error reading file: " + path.string());
    return buffer.str();
}

// Write-temp-then-rename so a failure never leaves a partial output.
void atomic_write_file(const fs::path& path, std::string_view content,
                       const Logger& log) {
    const fs::path temp =
        path.parent_path() /
        (path.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write file: " + temp.string());
        out.write(content.data(),
                  static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(temp, ec);
            throw ValidationError("error writing file: " + temp.string());
        }
    }
    std::error_code ec;
    fs::rename(temp, path, ec);
    if (ec) {
        fs::remove(temp, ec);
        throw ValidationError("cannot move output into place: " + path.string());
    }
    log.event(0, {{"event", "wrote"},
                  {"path", path.string()},
                  {"bytes", std::to_string(content.size())}});
}

// Dotted-path overrides applied to the parsed config document. Values that
// parse as JSON are taken as JSON; everything else stays a string.
void apply_override(nlohmann::json& doc, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("override must look like dotted.path=value: " +
                              spec);
    const std::string path = spec.substr(0, eq);
    const std::string text = spec.substr(eq + 1);

    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }

    nlohmann::json* node = &doc;
    std::size_t begin = 0;
    while (true) {
        const auto dot = path.find('.', begin);
        const std::string key = path.substr(
            begin, dot == std::string::npos ? std::string::npos : dot - begin);
        if (key.empty())
            throw ValidationError("override path has an empty segment: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

backtest::ExperimentConfig load_config(
    const fs::path& config_path, const std::vector<std::string>& overrides,
    const Logger& log) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError("invalid config document " + config_path.string() +
                         ": " + err.what());
    }
    for (const std::string& spec : overrides) {
        apply_override(doc, spec);
        log.event(1, {{"event", "override"}, {"spec", spec}});
    }
    return backtest::config_from_json(doc.dump());
}

timeseries::AlignedPanel load_panel(const backtest::ExperimentConfig& config,
                                    const fs::path& config_path,
                                    const std::string& panel_flag,
                                    const Logger& log) {
    fs::path panel_path;
    if (!panel_flag.empty()) {
        panel_path = panel_flag;
    } else {
        if (config.panel_path.empty())
            throw ValidationError(
                "config names no panel; set \"panel\" or pass --panel");
        panel_path = config.panel_path;
        if (panel_path.is_relative())
            panel_path = config_path.parent_path() / panel_path;
    }
    timeseries::AlignedPanel panel =
        timeseries::AlignedPanel::read_csv(read_file(panel_path));
    log.event(1, {{"event", "panel"},
                  {"path", panel_path.string()},
                  {"rows", std::to_string(panel.rows())},
                  {"instruments", std::to_string(panel.cols())}});
    return panel;
}

// Constituent one-day returns across the whole panel, for the standalone
// component analysis commands.
Eigen::MatrixXd whole_period_returns(const timeseries::AlignedPanel& panel,
                                     const backtest::ExperimentConfig& config,
                                     std::vector<std::string>* ids_out) {
    config.validate_against(panel);
    const std::vector<std::string> ids = config.constituents(panel);
    const int lag = config.lags.constituent;
    if (panel.rows() <= lag)
        throw DomainError("panel shorter than the constituent lag");
    Eigen::MatrixXd returns(panel.rows() - lag,
                            static_cast<Eigen::Index>(ids.size()));
    for (std::size_t c = 0; c < ids.size(); ++c) {
        const timeseries::ReturnSeries series =
            timeseries::rdp(panel, ids[c], lag);
        returns.col(static_cast<Eigen::Index>(c)) = series.values;
    }
    if (ids_out) *ids_out = ids;
    return returns;
}

int run_ingest(const std::string& in, const std::string& out,
               const std::string& id, const std::string& date_format,
               const Logger& log) {
    const fs::path in_path(in);
    const std::string instrument =
        id.empty() ? in_path.stem().string() : id;
    const timeseries::PriceSeries series = timeseries::parse_price_csv(
        read_file(in_path), instrument, date_format);
    log.event(1, {{"event", "ingested"},
                  {"instrument", series.instrument_id()},
                  {"observations", std::to_string(series.size())}});
    atomic_write_file(out, timeseries::price_series_to_csv(series), log);
    return 0;
}

int run_align(const std::vector<std::string>& inputs, const std::string& out,
              const std::string& reference, const std::string& start,
              const std::string& end, const Logger& log) {
    std::vector<timeseries::PriceSeries> series;
    series.reserve(inputs.size());
    for (const std::string& input : inputs) {
        const fs::path path(input);
        series.push_back(timeseries::parse_price_csv(read_file(path),
                                                     path.stem().string()));
    }
    const timeseries::PriceSeries* ref = nullptr;
    for (const timeseries::PriceSeries& s : series)
        if (s.instrument_id() == reference) ref = &s;
    if (!ref)
        throw ValidationError("reference instrument " + reference +
                              " is not among the inputs");
    if (ref->size() == 0)
        throw ValidationError("reference series is empty");

    DateInterval range;
    range.start = start.empty() ? ref->observations().front().date
                                : Date::parse(start);
    range.end = end.empty() ? ref->observations().back().date.next()
                            : Date::parse(end);

    const timeseries::AlignedPanel panel =
        timeseries::align_panel(series, reference, range);
    log.event(1, {{"event", "aligned"},
                  {"rows", std::to_string(panel.rows())},
                  {"instruments", std::to_string(panel.cols())}});
    atomic_write_file(out, panel.to_csv(), log);
    return 0;
}

int run_pca_report(const fs::path& config_path,
                   const std::vector<std::string>& overrides,
                   const std::string& panel_flag, const std::string& out,
                   bool correlation, const Logger& log) {
    const backtest::ExperimentConfig config =
        load_config(config_path, overrides, log);
    const timeseries::AlignedPanel panel =
        load_panel(config, config_path, panel_flag, log);
    const Eigen::MatrixXd returns =
        whole_period_returns(panel, config, nullptr);
    const pca::PCAModel model =
        pca::fit_pca(returns, correlation ? pca::Standardize::correlation
                                          : pca::Standardize::center_only);
    const pca::ContributionReport report = pca::contribution(model);
    const int m = pca::select_components(report, config.pca_threshold);
    log.event(0, {{"event", "components"},
                  {"selected", std::to_string(m)},
                  {"threshold", std::to_string(config.pca_threshold)}});
    atomic_write_file(out, pca::scree_csv(model), log);
    return 0;
}

int run_biplot(const fs::path& config_path,
               const std::vector<std::string>& overrides,
               const std::string& panel_flag, const std::string& out,
               bool correlation, bool scale, const Logger& log) {
    const backtest::ExperimentConfig config =
        load_config(config_path, overrides, log);
    const timeseries::AlignedPanel panel =
        load_panel(config, config_path, panel_flag, log);
    std::vector<std::string> ids;
    const Eigen::MatrixXd returns = whole_period_returns(panel, config, &ids);
    const pca::PCAModel model =
        pca::fit_pca(returns, correlation ? pca::Standardize::correlation
                                          : pca::Standardize::center_only);
    atomic_write_file(out, pca::biplot_csv(model, ids, scale), log);
    return 0;
}

int run_backtest_cmd(const fs::path& config_path,
                     const std::vector<std::string>& overrides,
                     const std::string& panel_flag, const std::string& out,
                     int jobs, const Logger& log) {
    const backtest::ExperimentConfig config =
        load_config(config_path, overrides, log);
    const timeseries::AlignedPanel panel =
        load_panel(config, config_path, panel_flag, log);
    backtest::RunOptions options;
    options.jobs = jobs;
    const backtest::BacktestReport report =
        backtest::run_backtest(config, panel, options);
    for (const backtest::ModelResult& result : report.results)
        log.event(1, {{"event", "result"},
                      {"model", std::string(backtest::to_string(result.kind))},
                      {"mean", std::to_string(result.mean)},
                      {"std", std::to_string(result.stddev)}});
    atomic_write_file(out, backtest::report_to_json(report), log);
    return 0;
}

int run_render(const std::string& report_path, const std::string& csv_out,
               const std::string& table_out, const Logger& log) {
    const backtest::BacktestReport report =
        backtest::report_from_json(read_file(report_path));
    const backtest::Summary summary = backtest::summarize(report);
    if (!csv_out.empty()) atomic_write_file(csv_out, summary.csv, log);
    if (!table_out.empty()) atomic_write_file(table_out, summary.text, log);
    if (csv_out.empty() && table_out.empty()) std::cout << summary.text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Direction forecasting toolkit: price ingestion, calendar alignment, "
        "principal-component analysis, and rolling-window backtests"};
    app.require_subcommand(1);

    Logger log;
    app.add_flag_function(
        "-v,--verbose",
        [&log](std::int64_t count) { log.verbosity = static_cast<int>(count); },
        "Increase log verbosity (repeatable)");

    std::string in, out, id, date_format = "%Y-%m-%d";
    std::string reference, start, end, panel_flag, report_path;
    std::string csv_out, table_out;
    std::vector<std::string> inputs, overrides;
    std::string config_path;
    bool correlation = false, scale = false;
    int jobs = 1;

    CLI::App* ingest = app.add_subcommand("ingest",
                                          "Validate and canonicalize one "
                                          "date,close price CSV");
    ingest->add_option("--in", in, "Input price CSV")->required();
    ingest->add_option("--out", out, "Canonical CSV destination")->required();
    ingest->add_option("--id", id,
                       "Instrument id (default: input file stem)");
    ingest->add_option("--date-format", date_format,
                       "strptime-style date format of the input");

    CLI::App* align = app.add_subcommand(
        "align", "Align several canonical series onto a reference calendar");
    align->add_option("inputs", inputs, "Canonical series CSVs")
        ->required()
        ->expected(-1);
    align->add_option("--out", out, "Panel CSV destination")->required();
    align->add_option("--reference", reference,
                      "Instrument id whose trading days form the calendar")
        ->required();
    align->add_option("--start", start, "Calendar start date (inclusive)");
    align->add_option("--end", end, "Calendar end date (exclusive)");

    CLI::App* pca_report = app.add_subcommand(
        "pca-report",
        "Whole-period component contributions of the constituent returns");
    pca_report->add_option("--config", config_path, "Experiment config JSON")
        ->required();
    pca_report->add_option("--out", out, "Scree CSV destination")->required();
    pca_report->add_option("--panel", panel_flag,
                           "Panel CSV (overrides the config's path)");
    pca_report->add_option("--override", overrides,
                           "Config override dotted.path=value (repeatable)");
    pca_report->add_flag("--correlation", correlation,
                         "Use the correlation matrix instead of covariance");

    CLI::App* biplot = app.add_subcommand(
        "biplot", "PC1/PC2 loadings of the constituent returns");
    biplot->add_option("--config", config_path, "Experiment config JSON")
        ->required();
    biplot->add_option("--out", out, "Biplot CSV destination")->required();
    biplot->add_option("--panel", panel_flag,
                       "Panel CSV (overrides the config's path)");
    biplot->add_option("--override", overrides,
                       "Config override dotted.path=value (repeatable)");
    biplot->add_flag("--correlation", correlation,
                     "Use the correlation matrix instead of covariance");
    biplot->add_flag("--scale", scale, "Scale loadings by sqrt(eigenvalue)");

    CLI::App* backtest_cmd = app.add_subcommand(
        "backtest", "Rolling-window train/test run over every configured model");
    backtest_cmd->add_option("--config", config_path, "Experiment config JSON")
        ->required();
    backtest_cmd->add_option("--out", out, "Report JSON destination")
        ->required();
    backtest_cmd->add_option("--panel", panel_flag,
                             "Panel CSV (overrides the config's path)");
    backtest_cmd->add_option("--override", overrides,
                             "Config override dotted.path=value (repeatable)");
    backtest_cmd->add_option("--jobs", jobs, "Worker cap for window training")
        ->check(CLI::PositiveNumber);

    CLI::App* render = app.add_subcommand(
        "render", "Render a report JSON as CSV and an aligned text table");
    render->add_option("--report", report_path, "Report JSON")->required();
    render->add_option("--csv", csv_out, "CSV table destination");
    render->add_option("--table", table_out, "Aligned text table destination");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*ingest) return run_ingest(in, out, id, date_format, log);
        if (*align)
            return run_align(inputs, out, reference, start, end, log);
        if (*pca_report)
            return run_pca_report(config_path, overrides, panel_flag, out,
                                  correlation, log);
        if (*biplot)
            return run_biplot(config_path, overrides, panel_flag, out,
                              correlation, scale, log);
        if (*backtest_cmd)
            return run_backtest_cmd(config_path, overrides, panel_flag, out,
                                    jobs, log);
        if (*render) return run_render(report_path, csv_out, table_out, log);
        return 2;
    } catch (const Error& e) {
        log.event(0, {{"event", "error"}, {"msg", e.what()}});
        return 1;
    } catch (const std::exception& e) {
        log.event(0, {{"event", "error"},
                      {"kind", "unexpected"},
                      {"msg", e.what()}});
        return 1;
    }
}
