#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dircast/backtest.hpp"
#include "dircast/baselines.hpp"
#include "dircast/errors.hpp"
#include "dircast/pca.hpp"
#include "dircast/svm.hpp"
#include "dircast/timeseries.hpp"

namespace py = pybind11;
using namespace dircast;

namespace {

// Directions cross the boundary as booleans: true = up, false = down.
std::vector<Direction> to_directions(const std::vector<bool>& up) {
    std::vector<Direction> out;
    out.reserve(up.size());
    for (bool u : up) out.push_back(u ? Direction::up : Direction::down);
    return out;
}

std::vector<bool> to_flags(const std::vector<Direction>& directions) {
    std::vector<bool> out;
    out.reserve(directions.size());
    for (Direction d : directions) out.push_back(d == Direction::up);
    return out;
}

svm::KernelSpec make_kernel(const std::string& kind,
                            std::optional<double> gamma, int degree,
                            double coef0) {
    svm::KernelSpec spec;
    spec.kind = svm::kernel_kind_from_string(kind);
    spec.gamma = gamma;
    spec.degree = degree;
    spec.coef0 = coef0;
    spec.validate();
    return spec;
}

svm::TrainingSet make_training_set(const Eigen::MatrixXd& features,
                                   const std::vector<bool>& labels_up) {
    svm::TrainingSet data;
    data.features = features;
    data.labels = to_directions(labels_up);
    data.validate();
    return data;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Direction forecasting core: lagged returns, principal components, "
        "kernel SVM, baselines, and rolling-window backtests";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base);

    m.def(
        "rdp",
        [](const Eigen::VectorXd& prices, int lag) {
            return timeseries::rdp_values(prices, lag);
        },
        py::arg("prices"), py::arg("lag"),
        "Lagged percent changes: element j is the change from prices[j] to "
        "prices[j + lag], times 100");

    m.def(
        "direction_labels",
        [](const Eigen::VectorXd& closes) {
            std::vector<bool> out;
            for (Eigen::Index j = 0; j + 1 < closes.size(); ++j)
                out.push_back(direction_of_move(closes[j], closes[j + 1]) ==
                              Direction::up);
            return out;
        },
        py::arg("closes"),
        "Next-day move flags (True = up, ties count as up), one per close "
        "except the last");

    m.def(
        "random_walk_predict",
        [](const std::vector<bool>& history_up) {
            return baselines::random_walk_predict(to_directions(history_up)) ==
                   Direction::up;
        },
        py::arg("history"), "Persistence forecast of the last observed move");

    m.def(
        "hit_ratio",
        [](const std::vector<bool>& predictions, const std::vector<bool>& labels) {
            return backtest::hit_ratio(to_directions(predictions),
                                       to_directions(labels));
        },
        py::arg("predictions"), py::arg("labels"),
        "Percentage of matching directions");

    m.def(
        "jacobi_eigh",
        [](const Eigen::MatrixXd& symmetric) {
            const pca::EighResult result = pca::jacobi_eigh(symmetric);
            return py::make_tuple(result.values, result.vectors);
        },
        py::arg("matrix"),
        "Eigenvalues (descending) and matching eigenvector columns of a "
        "symmetric matrix");

    py::class_<pca::PCAModel>(m, "PcaModel")
        .def_readonly("mean", &pca::PCAModel::mean)
        .def_readonly("scale", &pca::PCAModel::scale)
        .def_readonly("eigenvalues", &pca::PCAModel::eigenvalues)
        .def_readonly("eigenvectors", &pca::PCAModel::eigenvectors)
        .def(
            "contribution",
            [](const pca::PCAModel& model) {
                const pca::ContributionReport report = pca::contribution(model);
                return py::make_tuple(report.rates, report.cumulative);
            },
            "Per-component contribution rates and their running sums")
        .def(
            "select_components",
            [](const pca::PCAModel& model, double threshold) {
                return pca::select_components(pca::contribution(model),
                                              threshold);
            },
            py::arg("threshold") = 0.70,
            "Smallest component count whose cumulative contribution reaches "
            "the threshold")
        .def(
            "project",
            [](const pca::PCAModel& model, const Eigen::MatrixXd& data, int m_) {
                return pca::project(model, data, m_);
            },
            py::arg("data"), py::arg("m"),
            "Scores of data rows on the first m components")
        .def("scree_csv",
             [](const pca::PCAModel& model) { return pca::scree_csv(model); })
        .def(
            "biplot_csv",
            [](const pca::PCAModel& model, const std::vector<std::string>& labels,
               bool scale) { return pca::biplot_csv(model, labels, scale); },
            py::arg("labels"), py::arg("scale_by_eigenvalue") = false);

    m.def(
        "fit_pca",
        [](const Eigen::MatrixXd& data, bool correlation) {
            return pca::fit_pca(data, correlation
                                          ? pca::Standardize::correlation
                                          : pca::Standardize::center_only);
        },
        py::arg("data"), py::arg("correlation") = false,
        "Principal components of the rows of data");

    py::class_<svm::SVMModel>(m, "SvmModel")
        .def_readonly("support_vectors", &svm::SVMModel::support_vectors)
        .def_readonly("dual_coefs", &svm::SVMModel::dual_coefs)
        .def_readonly("bias", &svm::SVMModel::bias)
        .def_property_readonly(
            "pair_steps",
            [](const svm::SVMModel& model) {
                return model.diagnostics.pair_steps;
            })
        .def_property_readonly(
            "max_kkt_violation",
            [](const svm::SVMModel& model) {
                return model.diagnostics.max_kkt_violation;
            })
        .def(
            "decision_values",
            [](const svm::SVMModel& model, const Eigen::MatrixXd& points) {
                return svm::decision_values(model, points);
            },
            py::arg("points"))
        .def(
            "predict",
            [](const svm::SVMModel& model, const Eigen::MatrixXd& points) {
                std::vector<bool> out;
                for (Eigen::Index i = 0; i < points.rows(); ++i)
                    out.push_back(svm::predict(model, points.row(i).transpose()) ==
                                  Direction::up);
                return out;
            },
            py::arg("points"), "Up flags for each row of points")
        .def("to_json", [](const svm::SVMModel& model) {
            return svm::to_json(model);
        })
        .def_static("from_json", [](const std::string& text) {
            return svm::svm_model_from_json(text);
        });

    m.def(
        "train_svm",
        [](const Eigen::MatrixXd& features, const std::vector<bool>& labels_up,
           const std::string& kernel, double C, std::optional<double> gamma,
           int degree, double coef0, double tolerance) {
            svm::TrainOptions options;
            options.tolerance = tolerance;
            return svm::train(make_training_set(features, labels_up),
                              make_kernel(kernel, gamma, degree, coef0), C,
                              options);
        },
        py::arg("features"), py::arg("labels"), py::arg("kernel") = "rbf",
        py::arg("C") = 100.0, py::arg("gamma") = py::none(),
        py::arg("degree") = 3, py::arg("coef0") = 0.0,
        py::arg("tolerance") = 1e-3,
        "Soft-margin kernel SVM trained by sequential minimal optimization");

    py::class_<baselines::MLPModel>(m, "MlpModel")
        .def(
            "output",
            [](const baselines::MLPModel& model, const Eigen::VectorXd& x) {
                return baselines::mlp_output(model, x);
            },
            py::arg("x"))
        .def(
            "predict",
            [](const baselines::MLPModel& model, const Eigen::MatrixXd& points) {
                std::vector<bool> out;
                for (Eigen::Index i = 0; i < points.rows(); ++i)
                    out.push_back(
                        baselines::mlp_predict(model, points.row(i).transpose()) ==
                        Direction::up);
                return out;
            },
            py::arg("points"), "Up flags for each row of points")
        .def("to_json", [](const baselines::MLPModel& model) {
            return baselines::to_json(model);
        })
        .def_static("from_json", [](const std::string& text) {
            return baselines::mlp_model_from_json(text);
        });

    m.def(
        "train_mlp",
        [](const Eigen::MatrixXd& features, const std::vector<bool>& labels_up,
           int hidden_units, double learning_rate, int epochs,
           std::uint64_t seed) {
            baselines::MlpConfig config;
            config.hidden_units = hidden_units;
            config.learning_rate = learning_rate;
            config.epochs = epochs;
            config.seed = seed;
            return baselines::train_mlp(make_training_set(features, labels_up),
                                        config);
        },
        py::arg("features"), py::arg("labels"), py::arg("hidden_units") = 10,
        py::arg("learning_rate") = 0.01, py::arg("epochs") = 2000,
        py::arg("seed") = 0,
        "One-hidden-layer network trained by full-batch gradient descent");

    m.def(
        "build_windows",
        [](int first_year, int train_years, int test_years, int iterations) {
            backtest::WindowScheme scheme;
            scheme.train_years = train_years;
            scheme.test_years = test_years;
            scheme.iterations = iterations;
            py::list out;
            for (const backtest::WindowSpec& w :
                 backtest::build_windows(first_year, scheme)) {
                py::dict entry;
                entry["iteration"] = w.iteration;
                entry["train_start"] = w.train.start.to_iso();
                entry["train_end"] = w.train.end.to_iso();
                entry["test_start"] = w.test.start.to_iso();
                entry["test_end"] = w.test.end.to_iso();
                out.append(entry);
            }
            return out;
        },
        py::arg("first_year"), py::arg("train_years") = 3,
        py::arg("test_years") = 1, py::arg("iterations") = 7,
        "Rolling train/test windows on half-open calendar-year boundaries");

    m.def(
        "run_backtest",
        [](const std::string& config_json, const std::string& panel_csv,
           int jobs) {
            const backtest::ExperimentConfig config =
                backtest::config_from_json(config_json);
            const timeseries::AlignedPanel panel =
                timeseries::AlignedPanel::read_csv(panel_csv);
            backtest::RunOptions options;
            options.jobs = jobs;
            return backtest::report_to_json(
                backtest::run_backtest(config, panel, options));
        },
        py::arg("config_json"), py::arg("panel_csv"), py::arg("jobs") = 1,
        "Full rolling-window run; returns the report as JSON text");

    m.def(
        "summarize_report",
        [](const std::string& report_json) {
            const backtest::Summary summary =
                backtest::summarize(backtest::report_from_json(report_json));
            return py::make_tuple(summary.csv, summary.text);
        },
        py::arg("report_json"),
        "CSV and aligned-text tables for a report document");

    m.def(
        "align_panel_csv",
        [](const std::vector<std::pair<std::string, std::string>>& series_csv,
           const std::string& reference, const std::string& start,
           const std::string& end) {
            std::vector<timeseries::PriceSeries> series;
            series.reserve(series_csv.size());
            for (const auto& [instrument, text] : series_csv)
                series.push_back(timeseries::parse_price_csv(text, instrument));
            const DateInterval range{Date::parse(start), Date::parse(end)};
            return timeseries::align_panel(series, reference, range).to_csv();
        },
        py::arg("series"), py::arg("reference"), py::arg("start"),
        py::arg("end"),
        "Aligns (instrument, csv_text) series to the reference calendar and "
        "returns the panel as CSV text");

    m.attr("__version__") = "1.0.0";
}
