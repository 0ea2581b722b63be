#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dircast/direction.hpp"

namespace dircast::svm {

enum class KernelKind { linear, polynomial, rbf };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    int degree = 3;                 // polynomial
    std::optional<double> gamma;    // rbf; 1/dimension when unset at training
    double coef0 = 0.0;             // polynomial

    void validate() const;
    // Returns a copy with gamma filled in for the given feature dimension.
    KernelSpec resolved(Eigen::Index dimension) const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Labeled feature rows for binary direction classification.
struct TrainingSet {
    Eigen::MatrixXd features;        // p x d
    std::vector<Direction> labels;   // size p

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dimension() const { return features.cols(); }
    void validate() const;  // shape agreement and finite entries
};

struct TrainingDiagnostics {
    std::int64_t pair_steps = 0;      // successful two-multiplier updates
    double max_kkt_violation = 0.0;   // at termination, exact errors
};

// Soft-margin kernel SVM in support-vector form. dual_coefs[i] is the
// signed multiplier y_i * alpha_i, so |dual_coefs[i]| <= C and the signed
// coefficients sum to zero.
struct SVMModel {
    Eigen::MatrixXd support_vectors;  // s x d
    Eigen::VectorXd dual_coefs;       // s
    double bias = 0.0;
    KernelSpec kernel;                // resolved
    double C = 100.0;
    TrainingDiagnostics diagnostics;

    Eigen::Index dimension() const { return support_vectors.cols(); }
};

struct TrainOptions {
    double tolerance = 1e-3;              // KKT stopping tolerance
    std::int64_t max_step_factor = 100;   // pair-step cap = factor * p
};

// Sequential minimal optimization. The first multiplier of each working
// pair is the worst KKT violator, the second maximizes |E1 - E2|; passes
// over the non-bound set alternate with full passes.
SVMModel train(const TrainingSet& data, const KernelSpec& kernel, double C,
               const TrainOptions& options = {});

double decision_value(const SVMModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd decision_values(const SVMModel& model,
                                const Eigen::MatrixXd& points);

// up iff the decision value is >= 0 (a zero decision maps to up).
Direction predict(const SVMModel& model, const Eigen::VectorXd& x);

// Versioned JSON; round-trips preserve decision values bit-for-bit.
std::string to_json(const SVMModel& model);
SVMModel svm_model_from_json(std::string_view text);

}  // namespace dircast::svm
