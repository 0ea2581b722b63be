#include "dircast/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "dircast/digest.hpp"
#include "dircast/errors.hpp"

namespace dircast::backtest {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string utc_now_iso() {
    const std::time_t now = std::time(nullptr);
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buffer;
}

std::string fixed2(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.2f", value);
    return buffer;
}

// Re-raise the current window failure with its iteration number prepended,
// keeping the original error type where it carries meaning.
template <typename Fn>
auto with_iteration(int iteration, Fn&& fn) -> decltype(fn()) {
    const std::string prefix = "iteration " + std::to_string(iteration) + ": ";
    try {
        return fn();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(prefix + e.what(), e.iterations, e.residual);
    } catch (const DegenerateError& e) {
        throw DegenerateError(prefix + e.what());
    } catch (const AssemblyError& e) {
        throw AssemblyError(prefix + e.what());
    } catch (const DomainError& e) {
        throw DomainError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

void require_known_keys(const json& object, std::string_view where,
                        std::initializer_list<std::string_view> known) {
    for (const auto& [key, value] : object.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("unknown config key: " + std::string(where) +
                                  "." + key);
    }
}

ordered_json interval_to_json(const DateInterval& interval) {
    return {{"start", interval.start.to_iso()}, {"end", interval.end.to_iso()}};
}

DateInterval interval_from_json(const json& node) {
    return {Date::parse(node.at("start").get<std::string>()),
            Date::parse(node.at("end").get<std::string>())};
}

}  // namespace

std::vector<WindowSpec> build_windows(int first_year,
                                      const WindowScheme& scheme) {
    if (scheme.iterations < 1)
        throw ValidationError("window scheme needs at least one iteration");
    if (scheme.train_years < 1 || scheme.test_years < 1)
        throw ValidationError("window scheme years must be >= 1");

    std::vector<WindowSpec> windows;
    windows.reserve(static_cast<std::size_t>(scheme.iterations));
    for (int i = 1; i <= scheme.iterations; ++i) {
        const int train_start = first_year + i - 1;
        const int train_end = train_start + scheme.train_years;
        const int test_end = train_end + scheme.test_years;
        WindowSpec w;
        w.iteration = i;
        w.train = {Date::from_ymd(train_start, 1, 1),
                   Date::from_ymd(train_end, 1, 1)};
        w.test = {Date::from_ymd(train_end, 1, 1),
                  Date::from_ymd(test_end, 1, 1)};
        windows.push_back(w);
    }
    return windows;
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::pca_svm: return "pca-svm";
        case ModelKind::svm_raw: return "svm";
        case ModelKind::pca_ann: return "pca-ann";
        case ModelKind::ann_raw: return "ann";
        case ModelKind::rw: return "rw";
    }
    throw InternalError("unhandled model kind");
}

ModelKind model_kind_from_string(std::string_view name) {
    if (name == "pca-svm") return ModelKind::pca_svm;
    if (name == "svm") return ModelKind::svm_raw;
    if (name == "pca-ann") return ModelKind::pca_ann;
    if (name == "ann") return ModelKind::ann_raw;
    if (name == "rw") return ModelKind::rw;
    throw ValidationError("unknown model kind: " + std::string(name));
}

int LagSpec::max_lag() const { return std::max({index, factor, constituent}); }

void LagSpec::validate() const {
    if (index < 1 || factor < 1 || constituent < 1)
        throw ValidationError("lags must be positive");
}

void ExperimentConfig::validate() const {
    if (target.empty()) throw ValidationError("config target must be set");
    if (factors.index.empty() || factors.sp500.empty() || factors.exr.empty())
        throw ValidationError("all three factor series must be named");
    lags.validate();
    if (!std::isfinite(pca_threshold) || pca_threshold <= 0.0 ||
        pca_threshold > 1.0)
        throw ValidationError("pca threshold must lie in (0, 1]");
    if (scheme.iterations < 1 || scheme.train_years < 1 || scheme.test_years < 1)
        throw ValidationError("window scheme fields must be >= 1");
    if (first_year < 1 ||
        first_year + scheme.iterations + scheme.train_years + scheme.test_years >
            9999)
        throw ValidationError("window years leave the supported date range");
    if (models.empty()) throw ValidationError("config model list is empty");
    std::set<ModelKind> seen;
    for (ModelKind m : models)
        if (!seen.insert(m).second)
            throw ValidationError("config model list repeats " +
                                  std::string(to_string(m)));
    svm.kernel.validate();
    if (!std::isfinite(svm.C) || svm.C <= 0.0)
        throw ValidationError("svm C must be a positive real");
    baselines::MlpConfig probe;
    probe.hidden_units = ann.hidden_units;
    probe.learning_rate = ann.learning_rate;
    probe.epochs = ann.epochs;
    probe.validate();
}

void ExperimentConfig::validate_against(
    const timeseries::AlignedPanel& panel) const {
    validate();
    for (const std::string& id :
         {target, factors.index, factors.sp500, factors.exr})
        if (!panel.find_column(id))
            throw ValidationError("panel does not contain instrument " + id);
    if (constituents(panel).empty())
        throw ValidationError("panel has no constituent columns");
}

std::vector<std::string> ExperimentConfig::constituents(
    const timeseries::AlignedPanel& panel) const {
    std::vector<std::string> out;
    for (const std::string& id : panel.instruments()) {
        if (id == target || id == factors.index || id == factors.sp500 ||
            id == factors.exr)
            continue;
        out.push_back(id);
    }
    return out;
}

ExperimentConfig config_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ParseError(std::string("invalid config document: ") + err.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "dircast.experiment")
            throw ValidationError("not a dircast.experiment document");
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported dircast.experiment version");
        require_known_keys(doc, "$",
                           {"format", "version", "panel", "target", "factors",
                            "lags", "pca", "windows", "models", "svm", "ann",
                            "seed"});

        ExperimentConfig config;
        config.panel_path = doc.value("panel", std::string());
        config.target = doc.at("target").get<std::string>();

        const auto& factors = doc.at("factors");
        require_known_keys(factors, "factors", {"index", "sp500", "exr"});
        config.factors.index = factors.at("index").get<std::string>();
        config.factors.sp500 = factors.at("sp500").get<std::string>();
        config.factors.exr = factors.at("exr").get<std::string>();

        if (doc.contains("lags")) {
            const auto& lags = doc.at("lags");
            require_known_keys(lags, "lags", {"index", "factor", "constituent"});
            config.lags.index = lags.value("index", config.lags.index);
            config.lags.factor = lags.value("factor", config.lags.factor);
            config.lags.constituent =
                lags.value("constituent", config.lags.constituent);
        }
        if (doc.contains("pca")) {
            const auto& pca = doc.at("pca");
            require_known_keys(pca, "pca", {"threshold"});
            config.pca_threshold = pca.value("threshold", config.pca_threshold);
        }
        if (doc.contains("windows")) {
            const auto& windows = doc.at("windows");
            require_known_keys(
                windows, "windows",
                {"first_year", "train_years", "test_years", "iterations"});
            config.first_year = windows.value("first_year", config.first_year);
            config.scheme.train_years =
                windows.value("train_years", config.scheme.train_years);
            config.scheme.test_years =
                windows.value("test_years", config.scheme.test_years);
            config.scheme.iterations =
                windows.value("iterations", config.scheme.iterations);
        }
        if (doc.contains("models")) {
            config.models.clear();
            for (const auto& name : doc.at("models"))
                config.models.push_back(
                    model_kind_from_string(name.get<std::string>()));
        }
        if (doc.contains("svm")) {
            const auto& svm_node = doc.at("svm");
            require_known_keys(svm_node, "svm", {"kernel", "C"});
            if (svm_node.contains("kernel")) {
                const auto& kernel = svm_node.at("kernel");
                require_known_keys(kernel, "svm.kernel",
                                   {"kind", "degree", "gamma", "coef0"});
                if (kernel.contains("kind"))
                    config.svm.kernel.kind = svm::kernel_kind_from_string(
                        kernel.at("kind").get<std::string>());
                if (kernel.contains("degree"))
                    config.svm.kernel.degree = kernel.at("degree").get<int>();
                if (kernel.contains("gamma") && !kernel.at("gamma").is_null())
                    config.svm.kernel.gamma = kernel.at("gamma").get<double>();
                if (kernel.contains("coef0"))
                    config.svm.kernel.coef0 = kernel.at("coef0").get<double>();
            }
            config.svm.C = svm_node.value("C", config.svm.C);
        }
        if (doc.contains("ann")) {
            const auto& ann = doc.at("ann");
            require_known_keys(ann, "ann",
                               {"hidden_units", "learning_rate", "epochs"});
            config.ann.hidden_units =
                ann.value("hidden_units", config.ann.hidden_units);
            config.ann.learning_rate =
                ann.value("learning_rate", config.ann.learning_rate);
            config.ann.epochs = ann.value("epochs", config.ann.epochs);
        }
        config.seed = doc.value("seed", config.seed);
        config.validate();
        return config;
    } catch (const json::exception& err) {
        throw ValidationError(std::string("malformed config document: ") +
                              err.what());
    }
}

std::string config_to_json(const ExperimentConfig& config) {
    ordered_json kernel;
    kernel["kind"] = std::string(svm::to_string(config.svm.kernel.kind));
    kernel["degree"] = config.svm.kernel.degree;
    if (config.svm.kernel.gamma)
        kernel["gamma"] = *config.svm.kernel.gamma;
    else
        kernel["gamma"] = nullptr;
    kernel["coef0"] = config.svm.kernel.coef0;

    auto models = ordered_json::array();
    for (ModelKind m : config.models)
        models.push_back(std::string(to_string(m)));

    ordered_json doc;
    doc["format"] = "dircast.experiment";
    doc["version"] = 1;
    doc["panel"] = config.panel_path;
    doc["target"] = config.target;
    doc["factors"] = {{"index", config.factors.index},
                      {"sp500", config.factors.sp500},
                      {"exr", config.factors.exr}};
    doc["lags"] = {{"index", config.lags.index},
                   {"factor", config.lags.factor},
                   {"constituent", config.lags.constituent}};
    doc["pca"] = {{"threshold", config.pca_threshold}};
    doc["windows"] = {{"first_year", config.first_year},
                      {"train_years", config.scheme.train_years},
                      {"test_years", config.scheme.test_years},
                      {"iterations", config.scheme.iterations}};
    doc["models"] = std::move(models);
    doc["svm"] = {{"kernel", std::move(kernel)}, {"C", config.svm.C}};
    doc["ann"] = {{"hidden_units", config.ann.hidden_units},
                  {"learning_rate", config.ann.learning_rate},
                  {"epochs", config.ann.epochs}};
    doc["seed"] = config.seed;
    return doc.dump(2);
}

AssembledWindow assemble_window(const timeseries::AlignedPanel& panel,
                                const ExperimentConfig& config,
                                const WindowSpec& window) {
    config.validate_against(panel);

    const auto& calendar = panel.calendar();
    const auto& values = panel.values();
    const Eigen::Index rows = panel.rows();
    const int max_lag = config.lags.max_lag();

    auto row_range = [&](const DateInterval& interval) {
        const auto lo = std::lower_bound(calendar.begin(), calendar.end(),
                                         interval.start) -
                        calendar.begin();
        const auto hi = std::lower_bound(calendar.begin(), calendar.end(),
                                         interval.end) -
                        calendar.begin();
        return std::pair<Eigen::Index, Eigen::Index>(lo, hi);
    };

    // Feature rows need max_lag days of history; label rows need the next
    // close. Head rows without history are dropped, as is a final row with
    // no following day.
    auto usable_range = [&](const DateInterval& interval,
                            std::string_view name) {
        auto [lo, hi] = row_range(interval);
        lo = std::max<Eigen::Index>(lo, max_lag);
        hi = std::min<Eigen::Index>(hi, rows - 1);
        if (lo >= hi) {
            std::ostringstream msg;
            msg << name << " interval [" << interval.start.to_iso() << ", "
                << interval.end.to_iso() << ") has no usable rows";
            if (max_lag < rows)
                msg << "; first date with full lag history is "
                    << calendar[static_cast<std::size_t>(max_lag)].to_iso();
            else
                msg << "; the panel is shorter than the maximum lag";
            throw AssemblyError(msg.str());
        }
        return std::pair<Eigen::Index, Eigen::Index>(lo, hi);
    };

    const auto [train_lo, train_hi] = usable_range(window.train, "train");
    const auto [test_lo, test_hi] = usable_range(window.test, "test");

    const Eigen::Index target_col = panel.column_of(config.target);
    const Eigen::Index index_col = panel.column_of(config.factors.index);
    const Eigen::Index sp500_col = panel.column_of(config.factors.sp500);
    const Eigen::Index exr_col = panel.column_of(config.factors.exr);

    const std::vector<std::string> constituent_ids =
        config.constituents(panel);
    std::vector<Eigen::Index> constituent_cols;
    constituent_cols.reserve(constituent_ids.size());
    for (const std::string& id : constituent_ids)
        constituent_cols.push_back(panel.column_of(id));
    const auto n_constituents =
        static_cast<Eigen::Index>(constituent_cols.size());

    auto rdp_at = [&](Eigen::Index col, Eigen::Index row, int lag) {
        const double base = values(row - lag, col);
        return (values(row, col) - base) / base * 100.0;
    };

    auto fill_parts = [&](Eigen::Index lo, Eigen::Index hi,
                          Eigen::MatrixXd& factor_block,
                          Eigen::MatrixXd& constituent_block,
                          std::vector<Direction>& labels,
                          std::vector<Date>& dates) {
        const Eigen::Index n = hi - lo;
        factor_block.resize(n, 3);
        constituent_block.resize(n, n_constituents);
        labels.reserve(static_cast<std::size_t>(n));
        dates.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index row = lo; row < hi; ++row) {
            const Eigen::Index r = row - lo;
            factor_block(r, 0) = rdp_at(index_col, row, config.lags.index);
            factor_block(r, 1) = rdp_at(sp500_col, row, config.lags.factor);
            factor_block(r, 2) = rdp_at(exr_col, row, config.lags.factor);
            for (Eigen::Index c = 0; c < n_constituents; ++c)
                constituent_block(r, c) =
                    rdp_at(constituent_cols[static_cast<std::size_t>(c)], row,
                           config.lags.constituent);
            labels.push_back(direction_of_move(values(row, target_col),
                                               values(row + 1, target_col)));
            dates.push_back(calendar[static_cast<std::size_t>(row)]);
        }
    };

    AssembledWindow out;
    out.window = window;

    Eigen::MatrixXd train_factors, train_constituents;
    Eigen::MatrixXd test_factors, test_constituents;
    std::vector<Direction> train_labels, test_labels;
    fill_parts(train_lo, train_hi, train_factors, train_constituents,
               train_labels, out.train_dates);
    fill_parts(test_lo, test_hi, test_factors, test_constituents, test_labels,
               out.test_dates);

    // Component model comes from the training rows alone; test rows are
    // projected through it unchanged.
    out.component_model = pca::fit_pca(train_constituents);
    const pca::ContributionReport report = pca::contribution(out.component_model);
    out.selected_components =
        pca::select_components(report, config.pca_threshold);

    const Eigen::MatrixXd train_scores = pca::project(
        out.component_model, train_constituents, out.selected_components);
    const Eigen::MatrixXd test_scores = pca::project(
        out.component_model, test_constituents, out.selected_components);

    auto join = [](const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
        Eigen::MatrixXd both(left.rows(), left.cols() + right.cols());
        both << left, right;
        return both;
    };

    out.component_train.features = join(train_factors, train_scores);
    out.component_train.labels = train_labels;
    out.component_test.features = join(test_factors, test_scores);
    out.component_test.labels = test_labels;
    out.raw_train.features = join(train_factors, train_constituents);
    out.raw_train.labels = std::move(train_labels);
    out.raw_test.features = join(test_factors, test_constituents);
    out.raw_test.labels = std::move(test_labels);

    out.rw_predictions.reserve(static_cast<std::size_t>(test_hi - test_lo));
    for (Eigen::Index row = test_lo; row < test_hi; ++row)
        out.rw_predictions.push_back(direction_of_move(
            values(row - 1, target_col), values(row, target_col)));
    return out;
}

std::pair<svm::TrainingSet, svm::TrainingSet> assemble_features(
    const timeseries::AlignedPanel& panel, const ExperimentConfig& config,
    const WindowSpec& window) {
    AssembledWindow assembled = assemble_window(panel, config, window);
    return {std::move(assembled.component_train),
            std::move(assembled.component_test)};
}

double hit_ratio(std::span<const Direction> predictions,
                 std::span<const Direction> labels) {
    if (predictions.empty())
        throw DomainError("hit ratio of an empty prediction list");
    if (predictions.size() != labels.size())
        throw DomainError("hit ratio needs equally many predictions and labels");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++matches;
    return 100.0 * static_cast<double>(matches) /
           static_cast<double>(predictions.size());
}

double mean_of(std::span<const double> values) {
    if (values.empty()) throw DomainError("mean of an empty list");
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.empty()) throw DomainError("std of an empty list");
    if (values.size() == 1) return 0.0;
    const double mean = mean_of(values);
    double sum_sq = 0.0;
    for (double v : values) sum_sq += (v - mean) * (v - mean);
    return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

namespace {

struct WindowRun {
    WindowOutcome outcome;
    std::vector<double> hit_ratios;  // config model order
};

std::vector<Direction> predict_all(const svm::SVMModel& model,
                                   const Eigen::MatrixXd& points) {
    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out.push_back(svm::predict(model, points.row(i).transpose()));
    return out;
}

std::vector<Direction> predict_all(const baselines::MLPModel& model,
                                   const Eigen::MatrixXd& points) {
    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out.push_back(baselines::mlp_predict(model, points.row(i).transpose()));
    return out;
}

WindowRun run_window(const timeseries::AlignedPanel& panel,
                     const ExperimentConfig& config, const WindowSpec& window) {
    const AssembledWindow assembled = assemble_window(panel, config, window);

    WindowRun run;
    run.outcome.window = window;
    run.outcome.train_rows = assembled.component_train.size();
    run.outcome.test_rows = assembled.component_test.size();
    run.outcome.selected_components = assembled.selected_components;

    baselines::MlpConfig ann;
    ann.hidden_units = config.ann.hidden_units;
    ann.learning_rate = config.ann.learning_rate;
    ann.epochs = config.ann.epochs;
    // Distinct deterministic seed per window.
    ann.seed = config.seed + static_cast<std::uint64_t>(window.iteration);

    for (ModelKind kind : config.models) {
        std::vector<Direction> predictions;
        switch (kind) {
            case ModelKind::pca_svm: {
                const svm::SVMModel model = svm::train(
                    assembled.component_train, config.svm.kernel, config.svm.C);
                predictions = predict_all(model, assembled.component_test.features);
                break;
            }
            case ModelKind::svm_raw: {
                const svm::SVMModel model = svm::train(
                    assembled.raw_train, config.svm.kernel, config.svm.C);
                predictions = predict_all(model, assembled.raw_test.features);
                break;
            }
            case ModelKind::pca_ann: {
                const baselines::MLPModel model =
                    baselines::train_mlp(assembled.component_train, ann);
                predictions = predict_all(model, assembled.component_test.features);
                break;
            }
            case ModelKind::ann_raw: {
                const baselines::MLPModel model =
                    baselines::train_mlp(assembled.raw_train, ann);
                predictions = predict_all(model, assembled.raw_test.features);
                break;
            }
            case ModelKind::rw:
                predictions = assembled.rw_predictions;
                break;
        }
        run.hit_ratios.push_back(
            hit_ratio(predictions, assembled.component_test.labels));
    }
    return run;
}

}  // namespace

BacktestReport run_backtest(const ExperimentConfig& config,
                            const timeseries::AlignedPanel& panel,
                            const RunOptions& options) {
    config.validate_against(panel);
    if (options.jobs < 1) throw ValidationError("jobs must be >= 1");

    const std::vector<WindowSpec> windows =
        build_windows(config.first_year, config.scheme);

    std::vector<WindowRun> runs;
    runs.reserve(windows.size());
    if (options.jobs == 1 || windows.size() == 1) {
        for (const WindowSpec& window : windows)
            runs.push_back(with_iteration(window.iteration, [&] {
                return run_window(panel, config, window);
            }));
    } else {
        // Batches of at most `jobs` windows; results are collected in
        // iteration order so failures surface lowest-iteration first.
        const auto batch = static_cast<std::size_t>(options.jobs);
        for (std::size_t base = 0; base < windows.size(); base += batch) {
            const std::size_t stop = std::min(windows.size(), base + batch);
            std::vector<std::future<WindowRun>> futures;
            futures.reserve(stop - base);
            for (std::size_t k = base; k < stop; ++k)
                futures.push_back(std::async(std::launch::async, [&, k] {
                    return run_window(panel, config, windows[k]);
                }));
            for (std::size_t k = base; k < stop; ++k)
                runs.push_back(with_iteration(windows[k].iteration, [&] {
                    return futures[k - base].get();
                }));
        }
    }

    BacktestReport report;
    report.target = config.target;
    report.config_digest = config_digest(config);
    report.panel_digest = panel_digest(panel);
    report.created = utc_now_iso();
    for (const WindowRun& run : runs) report.windows.push_back(run.outcome);
    for (std::size_t m = 0; m < config.models.size(); ++m) {
        ModelResult result;
        result.kind = config.models[m];
        for (const WindowRun& run : runs)
            result.hit_ratios.push_back(run.hit_ratios[m]);
        result.mean = mean_of(result.hit_ratios);
        result.stddev = sample_std(result.hit_ratios);
        report.results.push_back(std::move(result));
    }
    return report;
}

namespace {

ordered_json report_document(const BacktestReport& report) {
    ordered_json doc;
    doc["format"] = "dircast.backtest-report";
    doc["version"] = 1;
    doc["created"] = report.created;
    doc["metadata"] = {{"target", report.target},
                       {"config_digest", report.config_digest},
                       {"panel_digest", report.panel_digest},
                       {"std_divisor", report.std_divisor}};
    auto windows = ordered_json::array();
    for (const WindowOutcome& outcome : report.windows) {
        ordered_json w;
        w["iteration"] = outcome.window.iteration;
        w["train"] = interval_to_json(outcome.window.train);
        w["test"] = interval_to_json(outcome.window.test);
        w["train_rows"] = outcome.train_rows;
        w["test_rows"] = outcome.test_rows;
        w["selected_components"] = outcome.selected_components;
        windows.push_back(std::move(w));
    }
    doc["windows"] = std::move(windows);
    auto results = ordered_json::array();
    for (const ModelResult& result : report.results) {
        ordered_json r;
        r["model"] = std::string(to_string(result.kind));
        auto ratios = ordered_json::array();
        for (double v : result.hit_ratios) ratios.push_back(v);
        r["hit_ratios"] = std::move(ratios);
        r["mean"] = result.mean;
        r["std"] = result.stddev;
        results.push_back(std::move(r));
    }
    doc["results"] = std::move(results);
    return doc;
}

}  // namespace

std::string report_to_json(const BacktestReport& report) {
    return report_document(report).dump(2);
}

std::string report_body_json(const BacktestReport& report) {
    ordered_json doc = report_document(report);
    doc.erase("created");
    return doc.dump(2);
}

BacktestReport report_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ParseError(std::string("invalid report document: ") + err.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "dircast.backtest-report")
            throw ValidationError("not a dircast.backtest-report document");
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported dircast.backtest-report version");

        BacktestReport report;
        report.created = doc.value("created", std::string());
        const auto& metadata = doc.at("metadata");
        report.target = metadata.at("target").get<std::string>();
        report.config_digest = metadata.at("config_digest").get<std::string>();
        report.panel_digest = metadata.at("panel_digest").get<std::string>();
        report.std_divisor = metadata.value("std_divisor", std::string("n-1"));
        for (const auto& w : doc.at("windows")) {
            WindowOutcome outcome;
            outcome.window.iteration = w.at("iteration").get<int>();
            outcome.window.train = interval_from_json(w.at("train"));
            outcome.window.test = interval_from_json(w.at("test"));
            outcome.train_rows = w.at("train_rows").get<std::int64_t>();
            outcome.test_rows = w.at("test_rows").get<std::int64_t>();
            outcome.selected_components = w.at("selected_components").get<int>();
            report.windows.push_back(outcome);
        }
        for (const auto& r : doc.at("results")) {
            ModelResult result;
            result.kind = model_kind_from_string(r.at("model").get<std::string>());
            for (const auto& v : r.at("hit_ratios"))
                result.hit_ratios.push_back(v.get<double>());
            result.mean = r.at("mean").get<double>();
            result.stddev = r.at("std").get<double>();
            report.results.push_back(std::move(result));
        }
        if (report.results.empty())
            throw ValidationError("report contains no model results");
        return report;
    } catch (const json::exception& err) {
        throw ValidationError(std::string("malformed report document: ") +
                              err.what());
    }
}

Summary summarize(const BacktestReport& report) {
    if (report.results.empty())
        throw DomainError("cannot summarize an empty report");
    const std::size_t iterations = report.results.front().hit_ratios.size();
    for (const ModelResult& result : report.results)
        if (result.hit_ratios.size() != iterations)
            throw ValidationError("model result lengths disagree");
    if (iterations == 0)
        throw DomainError("cannot summarize a report with no iterations");

    std::ostringstream csv;
    csv << "iteration";
    for (const ModelResult& result : report.results)
        csv << "," << to_string(result.kind);
    csv << "\n";
    for (std::size_t i = 0; i < iterations; ++i) {
        csv << (i + 1);
        for (const ModelResult& result : report.results)
            csv << "," << fixed2(result.hit_ratios[i]);
        csv << "\n";
    }
    csv << "Average";
    for (const ModelResult& result : report.results)
        csv << "," << fixed2(result.mean);
    csv << "\nStd";
    for (const ModelResult& result : report.results)
        csv << "," << fixed2(result.stddev);
    csv << "\n";

    std::vector<std::size_t> widths;
    widths.push_back(9);  // "iteration"
    for (const ModelResult& result : report.results)
        widths.push_back(std::max<std::size_t>(
            std::string(to_string(result.kind)).size(), 7) + 2);

    std::ostringstream text;
    text << "Hit ratio (%) of forecasting " << report.target << "\n";
    text << std::setw(static_cast<int>(widths[0])) << "iteration";
    for (std::size_t m = 0; m < report.results.size(); ++m)
        text << std::setw(static_cast<int>(widths[m + 1]))
             << std::string(to_string(report.results[m].kind));
    text << "\n";
    auto row = [&](const std::string& name, auto value_of) {
        text << std::setw(static_cast<int>(widths[0])) << name;
        for (std::size_t m = 0; m < report.results.size(); ++m)
            text << std::setw(static_cast<int>(widths[m + 1]))
                 << value_of(report.results[m]);
        text << "\n";
    };
    for (std::size_t i = 0; i < iterations; ++i)
        row(std::to_string(i + 1), [&](const ModelResult& result) {
            return fixed2(result.hit_ratios[i]);
        });
    row("Average",
        [](const ModelResult& result) { return fixed2(result.mean); });
    row("Std", [](const ModelResult& result) { return fixed2(result.stddev); });
    if (iterations == 1)
        text << "note: std over a single iteration is 0 by convention\n";

    return {csv.str(), text.str()};
}

std::string panel_digest(const timeseries::AlignedPanel& panel) {
    return fnv1a64_hex(panel.to_csv());
}

std::string config_digest(const ExperimentConfig& config) {
    return fnv1a64_hex(config_to_json(config));
}

}  // namespace dircast::backtest
