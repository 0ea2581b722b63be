#include "dircast/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "dircast/errors.hpp"

namespace dircast::svm {

namespace {

// Above this many rows the Gram matrix is not materialized and kernel rows
// are recomputed on demand.
constexpr Eigen::Index kDenseGramLimit = 5000;

// Minimum relative multiplier change for a pair step to count as progress.
constexpr double kStepEpsilon = 1e-12;

// Multipliers this close to the box edge, relative to C, are parked exactly
// on it; rounding in the pair update otherwise strands them an ulp inside,
// where they read as movable yet have no usable room.
constexpr double kBoundSnap = 64.0 * std::numeric_limits<double>::epsilon();

double snapped_to_box(double a, double c) {
    if (a <= c * kBoundSnap) return 0.0;
    if (c - a <= c * kBoundSnap) return c;
    return a;
}

double ipow(double base, int exponent) {
    double out = 1.0;
    for (int k = 0; k < exponent; ++k) out *= base;
    return out;
}

double kernel_value(const KernelSpec& spec, double dot, double squared_distance) {
    switch (spec.kind) {
        case KernelKind::linear:
            return dot;
        case KernelKind::polynomial:
            return ipow(dot + spec.coef0, spec.degree);
        case KernelKind::rbf:
            return std::exp(-spec.gamma.value() * squared_distance);
    }
    throw InternalError("unhandled kernel kind");
}

// One Gram row against the whole training matrix.
Eigen::VectorXd kernel_row(const KernelSpec& spec, const Eigen::MatrixXd& x,
                           Eigen::Index i) {
    const Eigen::VectorXd dots = x * x.row(i).transpose();
    Eigen::VectorXd out(x.rows());
    if (spec.kind == KernelKind::rbf) {
        const Eigen::VectorXd norms = x.rowwise().squaredNorm();
        for (Eigen::Index j = 0; j < x.rows(); ++j) {
            const double d2 = std::max(0.0, norms[j] + norms[i] - 2.0 * dots[j]);
            out[j] = kernel_value(spec, dots[j], d2);
        }
    } else {
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            out[j] = kernel_value(spec, dots[j], 0.0);
    }
    return out;
}

// Kernel access that owns either a dense Gram matrix or just the data.
class GramSource {
  public:
    GramSource(const KernelSpec& spec, const Eigen::MatrixXd& x)
        : spec_(spec), x_(x), dense_(x.rows() <= kDenseGramLimit) {
        if (dense_) {
            gram_.resize(x.rows(), x.rows());
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                gram_.col(i) = kernel_row(spec_, x_, i);
        }
    }

    double at(Eigen::Index i, Eigen::Index j) const {
        if (dense_) return gram_(i, j);
        return kernel_eval(spec_, x_.row(i).transpose(), x_.row(j).transpose());
    }

    Eigen::VectorXd row(Eigen::Index i) const {
        if (dense_) return gram_.col(i);
        return kernel_row(spec_, x_, i);
    }

  private:
    const KernelSpec& spec_;
    const Eigen::MatrixXd& x_;
    bool dense_;
    Eigen::MatrixXd gram_;
};

struct SmoState {
    Eigen::VectorXd alpha;   // box multipliers in [0, C]
    Eigen::VectorXd y;       // +1 / -1
    Eigen::VectorXd errors;  // E_i = f(x_i) - y_i
    double b = 0.0;
    double C = 0.0;
};

// Magnitude of the KKT violation at point i given its cached error.
// y_i f_i = y_i E_i + 1, so a sub-margin point violates by -y_i E_i when
// alpha may grow and an over-margin one by +y_i E_i when alpha may shrink.
double kkt_violation(const SmoState& s, Eigen::Index i) {
    const double g = s.y[i] * s.errors[i];
    double v = 0.0;
    if (s.alpha[i] < s.C) v = std::max(v, -g);
    if (s.alpha[i] > 0.0) v = std::max(v, g);
    return v;
}

// Refresh the whole error cache from the multipliers.
void recompute_errors(SmoState& s, const GramSource& gram) {
    const Eigen::Index p = s.alpha.size();
    Eigen::VectorXd f = Eigen::VectorXd::Constant(p, s.b);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (s.alpha[j] == 0.0) continue;
        f += (s.alpha[j] * s.y[j]) * gram.row(j);
    }
    s.errors = f - s.y;
}

// The box constraints only bound the bias to an interval; slide it to the
// interval's center so measured violations reflect the multipliers and not
// a stale offset. Interior support vectors collapse the interval onto
// themselves. Without this, an optimal all-bound solution can read as a
// large irreducible violation that no pair step is able to shrink.
void recenter_bias(SmoState& s) {
    double rising_min = std::numeric_limits<double>::infinity();
    double falling_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) {
        const bool positive = s.y[i] > 0.0;
        // Points whose multiplier may still grow need E_i >= 0 to satisfy
        // their condition; points that may shrink need E_i <= 0.
        if (positive ? s.alpha[i] < s.C : s.alpha[i] > 0.0)
            rising_min = std::min(rising_min, s.errors[i]);
        if (positive ? s.alpha[i] > 0.0 : s.alpha[i] < s.C)
            falling_max = std::max(falling_max, s.errors[i]);
    }
    if (!std::isfinite(rising_min) || !std::isfinite(falling_max)) return;
    const double shift = -0.5 * (rising_min + falling_max);
    if (shift == 0.0) return;
    s.b += shift;
    s.errors.array() += shift;
}

// Analytic optimization of the pair (i1, i2). Returns false when the step
// cannot make progress.
bool take_step(SmoState& s, const GramSource& gram, Eigen::Index i1,
               Eigen::Index i2) {
    if (i1 == i2) return false;
    const double a1_old = s.alpha[i1];
    const double a2_old = s.alpha[i2];
    const double y1 = s.y[i1];
    const double y2 = s.y[i2];
    const double e1 = s.errors[i1];
    const double e2 = s.errors[i2];
    const double sign = y1 * y2;

    double low, high;
    if (sign < 0.0) {
        low = std::max(0.0, a2_old - a1_old);
        high = std::min(s.C, s.C + a2_old - a1_old);
    } else {
        low = std::max(0.0, a1_old + a2_old - s.C);
        high = std::min(s.C, a1_old + a2_old);
    }
    if (low >= high) return false;

    const double k11 = gram.at(i1, i1);
    const double k22 = gram.at(i2, i2);
    const double k12 = gram.at(i1, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    double a2_new;
    if (eta > 0.0) {
        a2_new = a2_old + y2 * (e1 - e2) / eta;
        a2_new = std::clamp(a2_new, low, high);
    } else {
        // Flat or concave direction: the optimum sits at a box end.
        // e - b is the kernel expansion minus the label.
        const double f1 = y1 * (e1 - s.b) - a1_old * k11 - sign * a2_old * k12;
        const double f2 = y2 * (e2 - s.b) - sign * a1_old * k12 - a2_old * k22;
        const double l1 = a1_old + sign * (a2_old - low);
        const double h1 = a1_old + sign * (a2_old - high);
        const double obj_low = l1 * f1 + low * f2 + 0.5 * l1 * l1 * k11 +
                               0.5 * low * low * k22 + sign * low * l1 * k12;
        const double obj_high = h1 * f1 + high * f2 + 0.5 * h1 * h1 * k11 +
                                0.5 * high * high * k22 + sign * high * h1 * k12;
        if (obj_low < obj_high - kStepEpsilon)
            a2_new = low;
        else if (obj_high < obj_low - kStepEpsilon)
            a2_new = high;
        else
            return false;
    }

    a2_new = snapped_to_box(a2_new, s.C);
    double a1_new = a1_old + sign * (a2_old - a2_new);
    a1_new = snapped_to_box(std::clamp(a1_new, 0.0, s.C), s.C);

    // A microscopic move is still worth taking when it retires a multiplier
    // exactly onto the box edge, which releases its optimality condition;
    // any other microscopic move is noise.
    const auto interior = [&](double a) { return a > 0.0 && a < s.C; };
    const bool retires = (interior(a1_old) && !interior(a1_new)) ||
                         (interior(a2_old) && !interior(a2_new));
    if (!retires && std::abs(a2_new - a2_old) <
                        kStepEpsilon * (a2_new + a2_old + kStepEpsilon))
        return false;

    const double d1 = y1 * (a1_new - a1_old);
    const double d2 = y2 * (a2_new - a2_old);
    const double b1 = s.b - e1 - d1 * k11 - d2 * k12;
    const double b2 = s.b - e2 - d1 * k12 - d2 * k22;
    double b_new;
    if (a1_new > 0.0 && a1_new < s.C)
        b_new = b1;
    else if (a2_new > 0.0 && a2_new < s.C)
        b_new = b2;
    else
        b_new = 0.5 * (b1 + b2);

    const Eigen::VectorXd row1 = gram.row(i1);
    const Eigen::VectorXd row2 = gram.row(i2);
    s.errors += d1 * row1 + d2 * row2;
    s.errors.array() += b_new - s.b;
    s.alpha[i1] = a1_new;
    s.alpha[i2] = a2_new;
    s.b = b_new;
    return true;
}

// Second-multiplier choice: widest |E1 - E2| gap first, then the remaining
// points in decreasing-gap order until one of them moves.
bool optimize_around(SmoState& s, const GramSource& gram, Eigen::Index i1) {
    const Eigen::Index p = s.alpha.size();
    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j)
        if (j != i1) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         return std::abs(s.errors[i1] - s.errors[a]) >
                                std::abs(s.errors[i1] - s.errors[b]);
                     });
    for (Eigen::Index j : order)
        if (take_step(s, gram, i1, j)) return true;
    return false;
}

[[noreturn]] void throw_cap(SmoState& s, const GramSource& gram,
                            std::int64_t steps, std::int64_t cap) {
    recompute_errors(s, gram);
    recenter_bias(s);
    double residual = 0.0;
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i)
        residual = std::max(residual, kkt_violation(s, i));
    std::ostringstream msg;
    msg << "SMO exceeded " << cap << " pair steps on " << s.alpha.size()
        << " points (KKT residual " << residual << ")";
    throw ConvergenceError(msg.str(), steps, residual);
}

}  // namespace

std::string_view to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::polynomial: return "polynomial";
        case KernelKind::rbf: return "rbf";
    }
    throw InternalError("unhandled kernel kind");
}

KernelKind kernel_kind_from_string(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "polynomial") return KernelKind::polynomial;
    if (name == "rbf") return KernelKind::rbf;
    throw ValidationError("unknown kernel kind: " + std::string(name));
}

void KernelSpec::validate() const {
    if (kind == KernelKind::polynomial && degree < 1)
        throw ValidationError("polynomial kernel degree must be >= 1");
    if (!std::isfinite(coef0))
        throw ValidationError("kernel coef0 must be finite");
    if (gamma && (!std::isfinite(*gamma) || *gamma <= 0.0))
        throw ValidationError("kernel gamma must be a positive real");
}

KernelSpec KernelSpec::resolved(Eigen::Index dimension) const {
    validate();
    if (dimension <= 0)
        throw ValidationError("kernel dimension must be positive");
    KernelSpec out = *this;
    if (out.kind == KernelKind::rbf && !out.gamma)
        out.gamma = 1.0 / static_cast<double>(dimension);
    return out;
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
    if (x.size() != y.size())
        throw DomainError("kernel arguments must have equal length");
    if (spec.kind == KernelKind::rbf && !spec.gamma)
        throw ValidationError("rbf kernel gamma is unresolved");
    const double dot = x.dot(y);
    const double d2 =
        spec.kind == KernelKind::rbf ? (x - y).squaredNorm() : 0.0;
    return kernel_value(spec, dot, d2);
}

void TrainingSet::validate() const {
    if (features.rows() < 2)
        throw ValidationError("training set needs at least two rows");
    if (features.cols() < 1)
        throw ValidationError("training set needs at least one feature");
    if (static_cast<Eigen::Index>(labels.size()) != features.rows())
        throw ValidationError("label count does not match feature rows");
    if (!features.allFinite())
        throw ValidationError("training features must be finite");
}

SVMModel train(const TrainingSet& data, const KernelSpec& kernel, double C,
               const TrainOptions& options) {
    data.validate();
    bool has_up = false;
    bool has_down = false;
    for (Direction d : data.labels)
        (d == Direction::up ? has_up : has_down) = true;
    if (!has_up || !has_down)
        throw DegenerateError("SVM training needs both directions present");
    if (!std::isfinite(C) || C <= 0.0)
        throw ValidationError("C must be a positive real");
    if (!std::isfinite(options.tolerance) || options.tolerance <= 0.0)
        throw ValidationError("tolerance must be a positive real");
    if (options.max_step_factor < 1)
        throw ValidationError("max_step_factor must be >= 1");

    const Eigen::Index p = data.size();
    const KernelSpec spec = kernel.resolved(data.dimension());
    const GramSource gram(spec, data.features);

    SmoState s;
    s.alpha = Eigen::VectorXd::Zero(p);
    s.y.resize(p);
    for (Eigen::Index i = 0; i < p; ++i)
        s.y[i] = data.labels[static_cast<std::size_t>(i)] == Direction::up
                     ? 1.0
                     : -1.0;
    s.errors = -s.y;  // f == 0 everywhere at the start
    s.C = C;

    const std::int64_t cap = options.max_step_factor * static_cast<std::int64_t>(p);
    const double tol = options.tolerance;
    std::int64_t steps = 0;
    int stalled_full_passes = 0;
    bool full_pass = true;
    bool converged = false;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    while (!converged) {
        recenter_bias(s);
        // Rank candidate first multipliers by violation, worst first.
        order.clear();
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!full_pass && (s.alpha[i] <= 0.0 || s.alpha[i] >= s.C)) continue;
            if (kkt_violation(s, i) > tol) order.push_back(i);
        }
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) {
                             return kkt_violation(s, a) > kkt_violation(s, b);
                         });

        if (order.empty()) {
            if (!full_pass) {
                full_pass = true;
                continue;
            }
            // Cached errors look converged; believe only exact ones.
            recompute_errors(s, gram);
            recenter_bias(s);
            double vmax = 0.0;
            for (Eigen::Index i = 0; i < p; ++i)
                vmax = std::max(vmax, kkt_violation(s, i));
            if (vmax <= tol) {
                converged = true;
            } else if (++stalled_full_passes > 2) {
                std::ostringstream msg;
                msg << "SMO stalled with KKT residual " << vmax
                    << " above tolerance " << tol;
                throw ConvergenceError(msg.str(), steps, vmax);
            }
            continue;
        }

        bool progressed = false;
        for (Eigen::Index i1 : order) {
            if (optimize_around(s, gram, i1)) {
                progressed = true;
                break;
            }
        }
        if (progressed) {
            if (++steps > cap) throw_cap(s, gram, steps, cap);
            stalled_full_passes = 0;
            full_pass = false;
        } else if (!full_pass) {
            full_pass = true;
        } else {
            recompute_errors(s, gram);
            recenter_bias(s);
            double vmax = 0.0;
            for (Eigen::Index i = 0; i < p; ++i)
                vmax = std::max(vmax, kkt_violation(s, i));
            if (vmax <= tol) {
                converged = true;
            } else if (++stalled_full_passes > 2) {
                std::ostringstream msg;
                msg << "SMO stalled with KKT residual " << vmax
                    << " above tolerance " << tol;
                throw ConvergenceError(msg.str(), steps, vmax);
            }
        }
    }

    double vmax = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
        vmax = std::max(vmax, kkt_violation(s, i));

    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < p; ++i)
        if (s.alpha[i] > 0.0) kept.push_back(i);

    SVMModel model;
    model.support_vectors.resize(static_cast<Eigen::Index>(kept.size()),
                                 data.dimension());
    model.dual_coefs.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        model.support_vectors.row(static_cast<Eigen::Index>(k)) =
            data.features.row(kept[k]);
        model.dual_coefs[static_cast<Eigen::Index>(k)] =
            s.y[kept[k]] * s.alpha[kept[k]];
    }
    model.bias = s.b;
    model.kernel = spec;
    model.C = C;
    model.diagnostics.pair_steps = steps;
    model.diagnostics.max_kkt_violation = vmax;
    return model;
}

double decision_value(const SVMModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.dimension())
        throw DomainError("point dimension does not match the model");
    double acc = model.bias;
    for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
        acc += model.dual_coefs[i] *
               kernel_eval(model.kernel, model.support_vectors.row(i).transpose(), x);
    return acc;
}

Eigen::VectorXd decision_values(const SVMModel& model,
                                const Eigen::MatrixXd& points) {
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out[i] = decision_value(model, points.row(i).transpose());
    return out;
}

Direction predict(const SVMModel& model, const Eigen::VectorXd& x) {
    return decision_value(model, x) >= 0.0 ? Direction::up : Direction::down;
}

std::string to_json(const SVMModel& model) {
    nlohmann::ordered_json kernel;
    kernel["kind"] = std::string(to_string(model.kernel.kind));
    if (model.kernel.kind == KernelKind::polynomial) {
        kernel["degree"] = model.kernel.degree;
        kernel["coef0"] = model.kernel.coef0;
    }
    if (model.kernel.kind == KernelKind::rbf) {
        if (!model.kernel.gamma)
            throw ValidationError("cannot serialize an unresolved rbf kernel");
        kernel["gamma"] = *model.kernel.gamma;
    }

    nlohmann::ordered_json doc;
    doc["format"] = "dircast.svm-model";
    doc["version"] = 1;
    doc["kernel"] = std::move(kernel);
    doc["C"] = model.C;
    doc["bias"] = model.bias;
    auto vectors = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < model.support_vectors.cols(); ++j)
            row.push_back(model.support_vectors(i, j));
        vectors.push_back(std::move(row));
    }
    doc["support_vectors"] = std::move(vectors);
    auto coefs = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.dual_coefs.size(); ++i)
        coefs.push_back(model.dual_coefs[i]);
    doc["dual_coefs"] = std::move(coefs);
    doc["diagnostics"] = {{"pair_steps", model.diagnostics.pair_steps},
                          {"max_kkt_violation", model.diagnostics.max_kkt_violation}};
    return doc.dump(2);
}

SVMModel svm_model_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(std::string("invalid model document: ") + err.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "dircast.svm-model")
            throw ValidationError("not a dircast.svm-model document");
        if (doc.at("version").get<int>() != 1)
            throw ValidationError("unsupported dircast.svm-model version");

        SVMModel model;
        const auto& kernel = doc.at("kernel");
        model.kernel.kind =
            kernel_kind_from_string(kernel.at("kind").get<std::string>());
        if (model.kernel.kind == KernelKind::polynomial) {
            model.kernel.degree = kernel.at("degree").get<int>();
            model.kernel.coef0 = kernel.at("coef0").get<double>();
        }
        if (model.kernel.kind == KernelKind::rbf)
            model.kernel.gamma = kernel.at("gamma").get<double>();
        model.kernel.validate();

        model.C = doc.at("C").get<double>();
        model.bias = doc.at("bias").get<double>();
        if (!std::isfinite(model.C) || model.C <= 0.0)
            throw ValidationError("model C must be a positive real");
        if (!std::isfinite(model.bias))
            throw ValidationError("model bias must be finite");

        const auto& vectors = doc.at("support_vectors");
        const auto& coefs = doc.at("dual_coefs");
        if (!vectors.is_array() || !coefs.is_array())
            throw ValidationError("support_vectors and dual_coefs must be arrays");
        if (vectors.size() != coefs.size())
            throw ValidationError("dual_coefs length must match support_vectors");
        const auto rows = static_cast<Eigen::Index>(vectors.size());
        Eigen::Index cols = -1;
        for (const auto& row : vectors) {
            if (!row.is_array())
                throw ValidationError("support_vectors rows must be arrays");
            if (cols < 0)
                cols = static_cast<Eigen::Index>(row.size());
            else if (static_cast<Eigen::Index>(row.size()) != cols)
                throw ValidationError("support_vectors rows must be equal length");
        }
        if (rows > 0 && cols < 1)
            throw ValidationError("support_vectors rows must be non-empty");
        model.support_vectors.resize(rows, std::max<Eigen::Index>(cols, 0));
        model.dual_coefs.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& row = vectors[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < cols; ++j)
                model.support_vectors(i, j) =
                    row[static_cast<std::size_t>(j)].get<double>();
            model.dual_coefs[i] = coefs[static_cast<std::size_t>(i)].get<double>();
        }
        if (!model.support_vectors.allFinite() || !model.dual_coefs.allFinite())
            throw ValidationError("model coefficients must be finite");
        for (Eigen::Index i = 0; i < rows; ++i)
            if (std::abs(model.dual_coefs[i]) > model.C * (1.0 + 1e-9))
                throw ValidationError("dual coefficient exceeds the box bound");

        if (doc.contains("diagnostics")) {
            const auto& diag = doc.at("diagnostics");
            model.diagnostics.pair_steps = diag.value("pair_steps", std::int64_t{0});
            model.diagnostics.max_kkt_violation =
                diag.value("max_kkt_violation", 0.0);
        }
        return model;
    } catch (const nlohmann::json::exception& err) {
        throw ValidationError(std::string("malformed model document: ") +
                              err.what());
    }
}

}  // namespace dircast::svm
