#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "dircast/direction.hpp"
#include "dircast/svm.hpp"

namespace dircast::baselines {

// Naive persistence: repeat the most recent observed direction.
Direction random_walk_predict(std::span<const Direction> history);

struct MlpConfig {
    int hidden_units = 10;
    double learning_rate = 0.01;
    int epochs = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

// One hidden layer, tanh activations, sigmoid output.
struct MLPModel {
    Eigen::MatrixXd hidden_weights;  // h x d
    Eigen::VectorXd hidden_bias;     // h
    Eigen::VectorXd output_weights;  // h
    double output_bias = 0.0;
    MlpConfig config;

    Eigen::Index dimension() const { return hidden_weights.cols(); }
};

// Full-batch gradient descent on mean cross-entropy, deterministic for a
// given seed. Throws ConvergenceError when the loss leaves the finite range.
MLPModel train_mlp(const svm::TrainingSet& data, const MlpConfig& config = {});

// Sigmoid output in (0, 1).
double mlp_output(const MLPModel& model, const Eigen::VectorXd& x);

// up iff the output is >= 0.5.
Direction mlp_predict(const MLPModel& model, const Eigen::VectorXd& x);

// Mean cross-entropy over the set plus its gradient in the flattened
// parameter order [hidden_weights row-major, hidden_bias, output_weights,
// output_bias]. Exposed so the gradient can be checked numerically.
double mlp_loss_gradient(const MLPModel& model, const svm::TrainingSet& data,
                         Eigen::VectorXd* gradient);

Eigen::VectorXd mlp_pack_parameters(const MLPModel& model);
void mlp_unpack_parameters(const Eigen::VectorXd& flat, MLPModel& model);

std::string to_json(const MLPModel& model);
MLPModel mlp_model_from_json(std::string_view text);

}  // namespace dircast::baselines
