#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dircast/baselines.hpp"
#include "dircast/date.hpp"
#include "dircast/direction.hpp"
#include "dircast/pca.hpp"
#include "dircast/svm.hpp"
#include "dircast/timeseries.hpp"

namespace dircast::backtest {

struct WindowScheme {
    int train_years = 3;
    int test_years = 1;
    int iterations = 7;
};

// One rolling iteration: train then test on contiguous half-open
// calendar-year intervals.
struct WindowSpec {
    int iteration = 1;
    DateInterval train;
    DateInterval test;
};

std::vector<WindowSpec> build_windows(int first_year,
                                      const WindowScheme& scheme = {});

enum class ModelKind {
    pca_svm,  // factors + component scores into the SVM
    svm_raw,  // factors + raw constituent returns into the SVM
    pca_ann,  // factors + component scores into the MLP
    ann_raw,  // factors + raw constituent returns into the MLP
    rw        // persistence of the last observed direction
};

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

struct FactorIds {
    std::string index;
    std::string sp500;
    std::string exr;
};

struct LagSpec {
    int index = 3;        // market index return lag
    int factor = 3;       // S&P 500 and exchange-rate return lag
    int constituent = 1;  // constituent return lag

    int max_lag() const;
    void validate() const;
};

struct SvmSettings {
    svm::KernelSpec kernel;  // rbf with gamma resolved at training by default
    double C = 100.0;
};

struct AnnSettings {
    int hidden_units = 10;
    double learning_rate = 0.01;
    int epochs = 2000;
};

struct ExperimentConfig {
    std::string panel_path;  // aligned panel CSV
    std::string target;
    FactorIds factors;
    LagSpec lags;
    double pca_threshold = 0.70;
    int first_year = 2002;
    WindowScheme scheme;
    std::vector<ModelKind> models = {ModelKind::pca_svm, ModelKind::svm_raw,
                                     ModelKind::pca_ann, ModelKind::ann_raw,
                                     ModelKind::rw};
    SvmSettings svm;
    AnnSettings ann;
    std::uint64_t seed = 0;

    void validate() const;
    void validate_against(const timeseries::AlignedPanel& panel) const;
    // Panel columns that feed the component model: everything except the
    // factor series and the target.
    std::vector<std::string> constituents(
        const timeseries::AlignedPanel& panel) const;
};

ExperimentConfig config_from_json(std::string_view text);
// Canonical form with every default made explicit; its digest identifies
// the experiment.
std::string config_to_json(const ExperimentConfig& config);

// Everything one window needs: feature sets for the component-score and
// raw-return variants, labels inside the training sets, and the persistence
// predictions for the test rows.
struct AssembledWindow {
    WindowSpec window;
    std::vector<Date> train_dates;
    std::vector<Date> test_dates;
    svm::TrainingSet component_train;
    svm::TrainingSet component_test;
    svm::TrainingSet raw_train;
    svm::TrainingSet raw_test;
    std::vector<Direction> rw_predictions;
    pca::PCAModel component_model;
    int selected_components = 0;
};

AssembledWindow assemble_window(const timeseries::AlignedPanel& panel,
                                const ExperimentConfig& config,
                                const WindowSpec& window);

// The component-score variant only, as (train, test).
std::pair<svm::TrainingSet, svm::TrainingSet> assemble_features(
    const timeseries::AlignedPanel& panel, const ExperimentConfig& config,
    const WindowSpec& window);

// 100 x matches / length.
double hit_ratio(std::span<const Direction> predictions,
                 std::span<const Direction> labels);

double mean_of(std::span<const double> values);
// Sample standard deviation (n - 1 divisor); 0 for a single value.
double sample_std(std::span<const double> values);

struct WindowOutcome {
    WindowSpec window;
    std::int64_t train_rows = 0;
    std::int64_t test_rows = 0;
    int selected_components = 0;
};

struct ModelResult {
    ModelKind kind = ModelKind::rw;
    std::vector<double> hit_ratios;  // one per iteration
    double mean = 0.0;
    double stddev = 0.0;
};

struct BacktestReport {
    std::string target;
    std::vector<WindowOutcome> windows;
    std::vector<ModelResult> results;  // config model order
    std::string config_digest;
    std::string panel_digest;
    std::string std_divisor = "n-1";
    std::string created;  // ISO-8601 UTC; excluded from body comparisons
};

struct RunOptions {
    int jobs = 1;  // worker cap for per-window assembly and training
};

BacktestReport run_backtest(const ExperimentConfig& config,
                            const timeseries::AlignedPanel& panel,
                            const RunOptions& options = {});

std::string report_to_json(const BacktestReport& report);
BacktestReport report_from_json(std::string_view text);
// The report without its timestamp; byte-identical across reruns of the
// same config and data.
std::string report_body_json(const BacktestReport& report);

struct Summary {
    std::string csv;
    std::string text;
};

// Per-iteration table with Average and Std rows, percentages rounded to
// two decimals at presentation.
Summary summarize(const BacktestReport& report);

std::string panel_digest(const timeseries::AlignedPanel& panel);
std::string config_digest(const ExperimentConfig& config);

}  // namespace dircast::backtest
