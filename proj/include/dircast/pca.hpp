#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace dircast::pca {

enum class Standardize {
    center_only,  // covariance of centered data (the default)
    correlation   // additionally divide columns by their sample std
};

// Eigenstructure of the sample covariance (or correlation) of the training
// data. `scale` is all ones in center_only mode. Eigenvalues are descending
// with tiny negatives clamped to zero; eigenvector columns are orthonormal
// with the largest-magnitude entry of each made positive.
struct PCAModel {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
    Eigen::Index n_inputs = 0;
};

struct ContributionReport {
    Eigen::VectorXd rates;       // eigenvalue / trace
    Eigen::VectorXd cumulative;  // running partial sums, ends at 1
    int selected_m = 0;          // 0 until select_components fills it in
};

struct EighResult {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // matching columns
    int sweeps = 0;
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic:
// fixed sweep order, descending sort with index tie-break, sign fixed by
// making each vector's dominant entry positive.
EighResult jacobi_eigh(const Eigen::MatrixXd& symmetric);

PCAModel fit_pca(const Eigen::MatrixXd& data,
                 Standardize mode = Standardize::center_only);

ContributionReport contribution(const PCAModel& model);

// Smallest m whose cumulative contribution reaches the threshold.
int select_components(const ContributionReport& report, double threshold);

// Scores of `data` on the first m components.
Eigen::MatrixXd project(const PCAModel& model, const Eigen::MatrixXd& data,
                        int m);

// Per-variable loadings on PC1/PC2, optionally scaled by sqrt(eigenvalue).
Eigen::MatrixXd biplot_loadings(const PCAModel& model, bool scale_by_eigenvalue);

// CSV exports consumed by external plotting tools.
std::string scree_csv(const PCAModel& model);
std::string biplot_csv(const PCAModel& model,
                       const std::vector<std::string>& labels,
                       bool scale_by_eigenvalue);

}  // namespace dircast::pca
