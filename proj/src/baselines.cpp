#include "dircast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "dircast/errors.hpp"

namespace dircast::baselines {

namespace {

// Keep outputs strictly inside (0, 1) even when the sigmoid saturates.
constexpr double kOutputEpsilon = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

Eigen::Index parameter_count(const MLPModel& model) {
    return model.hidden_weights.size() + model.hidden_bias.size() +
           model.output_weights.size() + 1;
}

void check_shapes(const MLPModel& model) {
    const Eigen::Index h = model.hidden_weights.rows();
    if (h < 1 || model.hidden_weights.cols() < 1)
        throw ValidationError("MLP needs at least one hidden unit and input");
    if (model.hidden_bias.size() != h || model.output_weights.size() != h)
        throw ValidationError("MLP layer sizes disagree");
}

}  // namespace

Direction random_walk_predict(std::span<const Direction> history) {
    if (history.empty())
        throw DomainError("random walk prediction needs at least one label");
    return history.back();
}

void MlpConfig::validate() const {
    if (hidden_units < 1)
        throw ValidationError("hidden_units must be >= 1");
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
        throw ValidationError("learning_rate must be a positive real");
    if (epochs < 1)
        throw ValidationError("epochs must be >= 1");
}

double mlp_output(const MLPModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.dimension())
        throw DomainError("point dimension does not match the model");
    const Eigen::VectorXd hidden =
        (model.hidden_weights * x + model.hidden_bias).array().tanh();
    const double z = model.output_weights.dot(hidden) + model.output_bias;
    const double s = sigmoid(z);
    return std::clamp(s, kOutputEpsilon, 1.0 - kOutputEpsilon);
}

Direction mlp_predict(const MLPModel& model, const Eigen::VectorXd& x) {
    return mlp_output(model, x) >= 0.5 ? Direction::up : Direction::down;
}

Eigen::VectorXd mlp_pack_parameters(const MLPModel& model) {
    Eigen::VectorXd flat(parameter_count(model));
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < model.hidden_weights.rows(); ++i)
        for (Eigen::Index j = 0; j < model.hidden_weights.cols(); ++j)
            flat[at++] = model.hidden_weights(i, j);
    for (Eigen::Index i = 0; i < model.hidden_bias.size(); ++i)
        flat[at++] = model.hidden_bias[i];
    for (Eigen::Index i = 0; i < model.output_weights.size(); ++i)
        flat[at++] = model.output_weights[i];
    flat[at] = model.output_bias;
    return flat;
}

void mlp_unpack_parameters(const Eigen::VectorXd& flat, MLPModel& model) {
    if (flat.size() != parameter_count(model))
        throw DomainError("flattened parameter length does not match the model");
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < model.hidden_weights.rows(); ++i)
        for (Eigen::Index j = 0; j < model.hidden_weights.cols(); ++j)
            model.hidden_weights(i, j) = flat[at++];
    for (Eigen::Index i = 0; i < model.hidden_bias.size(); ++i)
        model.hidden_bias[i] = flat[at++];
    for (Eigen::Index i = 0; i < model.output_weights.size(); ++i)
        model.output_weights[i] = flat[at++];
    model.output_bias = flat[at];
}

double mlp_loss_gradient(const MLPModel& model, const svm::TrainingSet& data,
                         Eigen::VectorXd* gradient) {
    check_shapes(model);
    data.validate();
    if (data.dimension() != model.dimension())
        throw DomainError("training dimension does not match the model");

    const Eigen::Index p = data.size();
    const double scale = 1.0 / static_cast<double>(p);

    // Whole batch at once; rows are samples.
    Eigen::MatrixXd activation =
        (data.features * model.hidden_weights.transpose()).rowwise() +
        model.hidden_bias.transpose();
    activation = activation.array().tanh();
    const Eigen::VectorXd z =
        (activation * model.output_weights).array() + model.output_bias;

    double loss = 0.0;
    Eigen::VectorXd dz(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double target =
            data.labels[static_cast<std::size_t>(i)] == Direction::up ? 1.0
                                                                      : 0.0;
        // Cross-entropy of a sigmoid output written without forming the
        // sigmoid, which stays finite for any z.
        loss += softplus(z[i]) - target * z[i];
        dz[i] = (sigmoid(z[i]) - target) * scale;
    }
    loss *= scale;

    if (gradient != nullptr) {
        MLPModel slopes = model;
        slopes.output_weights = activation.transpose() * dz;
        slopes.output_bias = dz.sum();
        const Eigen::MatrixXd back =
            (dz * model.output_weights.transpose()).array() *
            (1.0 - activation.array().square());
        slopes.hidden_weights = back.transpose() * data.features;
        slopes.hidden_bias = back.colwise().sum().transpose();
        *gradient = mlp_pack_parameters(slopes);
    }
    return loss;
}

MLPModel train_mlp(const svm::TrainingSet& data, const MlpConfig& config) {
    data.validate();
    config.validate();

    const Eigen::Index d = data.dimension();
    const Eigen::Index h = config.hidden_units;

    MLPModel model;
    model.config = config;
    model.hidden_weights.resize(h, d);
    model.hidden_bias.resize(h);
    model.output_weights.resize(h);

    std::mt19937_64 rng(config.seed);
    const double hidden_span = 1.0 / std::sqrt(static_cast<double>(d));
    const double output_span = 1.0 / std::sqrt(static_cast<double>(h));
    std::uniform_real_distribution<double> hidden_init(-hidden_span, hidden_span);
    std::uniform_real_distribution<double> output_init(-output_span, output_span);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            model.hidden_weights(i, j) = hidden_init(rng);
    for (Eigen::Index i = 0; i < h; ++i) model.hidden_bias[i] = hidden_init(rng);
    for (Eigen::Index i = 0; i < h; ++i)
        model.output_weights[i] = output_init(rng);
    model.output_bias = 0.0;

    Eigen::VectorXd theta = mlp_pack_parameters(model);
    Eigen::VectorXd gradient;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        mlp_unpack_parameters(theta, model);
        const double loss = mlp_loss_gradient(model, data, &gradient);
        if (!std::isfinite(loss) || !gradient.allFinite()) {
            std::ostringstream msg;
            msg << "MLP training diverged at epoch " << epoch
                << "; try a smaller learning rate";
            throw ConvergenceError(msg.str(), epoch, loss);
        }
        theta -= config.learning_rate * gradient;
    }
    mlp_unpack_parameters(theta, model);
    if (!theta.allFinite())
        throw ConvergenceError("MLP training diverged; try a smaller learning rate",
                               config.epochs, std::numeric_limits<double>::quiet_NaN());
    return model;
}

std::string to_json(const MLPModel& model) {
    check_shapes(model);
    nlohmann::ordered_json doc;
    doc["format"] = "dircast.mlp-model";
    doc["version"] = 1;
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.hidden_weights.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < model.hidden_weights.cols(); ++j)
            row.push_back(model.hidden_weights(i, j));
        rows.push_back(std::move(row));
    }
    doc["hidden_weights"] = std::move(rows);
    auto bias = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.hidden_bias.size(); ++i)
        bias.push_back(model.hidden_bias[i]);
    doc["hidden_bias"] = std::move(bias);
    auto weights = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.output_weights.size(); ++i)
        weights.push_back(model.output_weights[i]);
    doc["output_weights"] = std::move(weights);
    doc["output_bias"] = model.output_bias;
    doc["config"] = {{"hidden_units", model.config.hidden_units},
                     {"learning_rate", model.config.learning_rate},
                     {"epochs", model.config.epochs},
                     {"seed", model.config.seed}};
    return doc.dump(2);
}

MLPModel mlp_model_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(std::string("invalid model document: ") + err.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "dircast.mlp-model")
            throw ValidationError("not a dircast.mlp-model document");
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported dircast.mlp-model version");

        MLPModel model;
        const auto& rows = doc.at("hidden_weights");
        if (!rows.is_array() || rows.empty())
            throw ValidationError("hidden_weights must be a non-empty array");
        const auto h = static_cast<Eigen::Index>(rows.size());
        Eigen::Index d = -1;
        for (const auto& row : rows) {
            if (!row.is_array() || row.empty())
                throw ValidationError("hidden_weights rows must be non-empty arrays");
            if (d < 0)
                d = static_cast<Eigen::Index>(row.size());
            else if (static_cast<Eigen::Index>(row.size()) != d)
                throw ValidationError("hidden_weights rows must be equal length");
        }
        model.hidden_weights.resize(h, d);
        for (Eigen::Index i = 0; i < h; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                model.hidden_weights(i, j) =
                    rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                        .get<double>();

        const auto& bias = doc.at("hidden_bias");
        const auto& weights = doc.at("output_weights");
        if (static_cast<Eigen::Index>(bias.size()) != h ||
            static_cast<Eigen::Index>(weights.size()) != h)
            throw ValidationError("MLP layer sizes disagree");
        model.hidden_bias.resize(h);
        model.output_weights.resize(h);
        for (Eigen::Index i = 0; i < h; ++i) {
            model.hidden_bias[i] = bias[static_cast<std::size_t>(i)].get<double>();
            model.output_weights[i] =
                weights[static_cast<std::size_t>(i)].get<double>();
        }
        model.output_bias = doc.at("output_bias").get<double>();

        const auto& config = doc.at("config");
        model.config.hidden_units = config.at("hidden_units").get<int>();
        model.config.learning_rate = config.at("learning_rate").get<double>();
        model.config.epochs = config.at("epochs").get<int>();
        model.config.seed = config.at("seed").get<std::uint64_t>();
        model.config.validate();
        if (model.config.hidden_units != h)
            throw ValidationError("config hidden_units does not match the weights");

        if (!model.hidden_weights.allFinite() || !model.hidden_bias.allFinite() ||
            !model.output_weights.allFinite() || !std::isfinite(model.output_bias))
            throw ValidationError("model parameters must be finite");
        return model;
    } catch (const nlohmann::json::exception& err) {
        throw ValidationError(std::string("malformed model document: ") +
                              err.what());
    }
}

}  // namespace dircast::baselines
