#include "dircast/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dircast/csv.hpp"
#include "dircast/errors.hpp"

namespace dircast::pca {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagTolerance = 1e-12;  // relative to max |diagonal|

// Index of the largest-magnitude entry; first wins on exact ties.
Eigen::Index dominant_index(const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    double best_mag = std::abs(v[0]);
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > best_mag) {
            best_mag = std::abs(v[i]);
            best = i;
        }
    }
    return best;
}

}  // namespace

EighResult jacobi_eigh(const Eigen::MatrixXd& symmetric) {
    const Eigen::Index n = symmetric.rows();
    if (n == 0 || symmetric.cols() != n) {
        throw DomainError("jacobi_eigh requires a square non-empty matrix");
    }
    Eigen::MatrixXd a = symmetric;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    int sweeps = 0;
    for (; sweeps < kMaxSweeps; ++sweeps) {
        double max_diag = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            max_diag = std::max(max_diag, std::abs(a(i, i)));
        }
        double max_off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                max_off = std::max(max_off, std::abs(a(p, q)));
            }
        }
        if (max_off <= kOffDiagTolerance * max_diag) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 1.0 / (2.0 * theta);  // avoids theta^2 overflow
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (Eigen::Index i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    if (sweeps >= kMaxSweeps) {
        throw ConvergenceError("jacobi_eigh did not converge in " +
                                   std::to_string(kMaxSweeps) + " sweeps",
                               sweeps, 0.0);
    }

    // Sort descending; equal eigenvalues fall back to the original column
    // index of each vector's dominant entry, which keeps the order stable.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<Eigen::Index> dominant(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        dominant[static_cast<std::size_t>(k)] = dominant_index(v.col(k));
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index lhs, Eigen::Index rhs) {
                         const double dl = a(lhs, lhs);
                         const double dr = a(rhs, rhs);
                         if (dl != dr) return dl > dr;
                         return dominant[static_cast<std::size_t>(lhs)] <
                                dominant[static_cast<std::size_t>(rhs)];
                     });

    EighResult result;
    result.sweeps = sweeps;
    result.values.resize(n);
    result.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        result.values[k] = a(src, src);
        Eigen::VectorXd col = v.col(src);
        if (col[dominant_index(col)] < 0.0) col = -col;
        result.vectors.col(k) = col;
    }
    return result;
}

PCAModel fit_pca(const Eigen::MatrixXd& data, Standardize mode) {
    const Eigen::Index rows = data.rows();
    const Eigen::Index cols = data.cols();
    if (rows < 2) {
        throw DomainError("fit_pca needs at least 2 rows, got " +
                          std::to_string(rows));
    }
    if (cols < 1) {
        throw DomainError("fit_pca needs at least 1 column");
    }
    if (!data.allFinite()) {
        throw ValidationError("fit_pca input contains non-finite entries");
    }

    PCAModel model;
    model.n_inputs = cols;
    model.mean = data.colwise().mean();

    Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
    model.scale = Eigen::VectorXd::Ones(cols);
    if (mode == Standardize::correlation) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double var =
                centered.col(c).squaredNorm() / static_cast<double>(rows - 1);
            const double sd = std::sqrt(var);
            // A constant column has nothing to standardize; leave it as the
            // centered zeros rather than dividing by zero.
            model.scale[c] = sd > 0.0 ? sd : 1.0;
        }
        centered.array().rowwise() /= model.scale.transpose().array();
    }

    const Eigen::MatrixXd cov =
        (centered.adjoint() * centered) / static_cast<double>(rows - 1);
    EighResult eig = jacobi_eigh(cov);

    const double lambda_max = std::max(eig.values.size() > 0 ? eig.values[0] : 0.0, 0.0);
    const double clamp_floor = -1e-10 * lambda_max;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
        if (eig.values[k] < 0.0) {
            if (eig.values[k] >= clamp_floor) {
                eig.values[k] = 0.0;
            } else {
                throw InternalError(
                    "covariance produced a significantly negative eigenvalue " +
                    csv::format_double(eig.values[k]));
            }
        }
    }

    model.eigenvalues = std::move(eig.values);
    model.eigenvectors = std::move(eig.vectors);
    return model;
}

ContributionReport contribution(const PCAModel& model) {
    const Eigen::Index n = model.eigenvalues.size();
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) total += model.eigenvalues[k];
    if (!(total > 0.0)) {
        throw DegenerateError(
            "all eigenvalues are zero; contribution rates undefined");
    }
    ContributionReport report;
    report.rates.resize(n);
    report.cumulative.resize(n);
    double partial = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        report.rates[k] = model.eigenvalues[k] / total;
        partial += model.eigenvalues[k];
        report.cumulative[k] = partial / total;
    }
    return report;
}

int select_components(const ContributionReport& report, double threshold) {
    if (!(threshold > 0.0) || threshold > 1.0) {
        throw DomainError("selection threshold must lie in (0, 1]");
    }
    const Eigen::Index n = report.cumulative.size();
    if (n == 0) throw DomainError("empty contribution report");
    for (Eigen::Index k = 0; k < n; ++k) {
        if (report.cumulative[k] >= threshold) {
            return static_cast<int>(k) + 1;
        }
    }
    return static_cast<int>(n);  // cumulative ends at 1; only roundoff lands here
}

Eigen::MatrixXd project(const PCAModel& model, const Eigen::MatrixXd& data,
                        int m) {
    if (data.cols() != model.n_inputs) {
        throw DomainError("project: data has " + std::to_string(data.cols()) +
                          " columns, model expects " +
                          std::to_string(model.n_inputs));
    }
    if (m < 1 || m > model.n_inputs) {
        throw DomainError("project: m out of range");
    }
    Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
    centered.array().rowwise() /= model.scale.transpose().array();
    return centered * model.eigenvectors.leftCols(m);
}

Eigen::MatrixXd biplot_loadings(const PCAModel& model,
                                bool scale_by_eigenvalue) {
    if (model.n_inputs < 2) {
        throw DomainError("biplot needs at least 2 components");
    }
    Eigen::MatrixXd loadings = model.eigenvectors.leftCols(2);
    if (scale_by_eigenvalue) {
        loadings.col(0) *= std::sqrt(model.eigenvalues[0]);
        loadings.col(1) *= std::sqrt(model.eigenvalues[1]);
    }
    return loadings;
}

std::string scree_csv(const PCAModel& model) {
    const ContributionReport report = contribution(model);
    std::ostringstream os;
    os << "component,eigenvalue,rate,cumulative\n";
    for (Eigen::Index k = 0; k < model.eigenvalues.size(); ++k) {
        os << (k + 1) << ',' << csv::format_double(model.eigenvalues[k]) << ','
           << csv::format_double(report.rates[k]) << ','
           << csv::format_double(report.cumulative[k]) << '\n';
    }
    return os.str();
}

std::string biplot_csv(const PCAModel& model,
                       const std::vector<std::string>& labels,
                       bool scale_by_eigenvalue) {
    if (static_cast<Eigen::Index>(labels.size()) != model.n_inputs) {
        throw DomainError("biplot_csv: one label per model input required");
    }
    const Eigen::MatrixXd loadings =
        biplot_loadings(model, scale_by_eigenvalue);
    std::ostringstream os;
    os << "instrument,pc1,pc2\n";
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
        os << csv::escape(labels[static_cast<std::size_t>(i)]) << ','
           << csv::format_double(loadings(i, 0)) << ','
           << csv::format_double(loadings(i, 1)) << '\n';
    }
    return os.str();
}

}  // namespace dircast::pca
