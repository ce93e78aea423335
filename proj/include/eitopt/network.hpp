// eitopt - electrode placement optimization for 2D EIT
//
// Two-hidden-layer perceptron mapping objective vectors [kappa, beta] to
// stacked electrode coordinates, trained by Fletcher-Reeves conjugate
// gradients on an L2-regularized squared loss.

#ifndef EITOPT_NETWORK_HPP
#define EITOPT_NETWORK_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eitopt/core.hpp"
#include "eitopt/dataset.hpp"
#include "eitopt/geometry.hpp"

namespace eitopt {

inline std::pair<std::size_t, std::size_t> huang_layer_sizes(std::size_t k, std::size_t n_layouts) {
    if (k < 1 || n_layouts < 1) throw ConfigError("huang_layer_sizes: k and N_E must be at least 1");
    const double m = static_cast<double>(k);
    const double n = static_cast<double>(n_layouts);
    const double l1 = std::sqrt((m + 2.0) * n) + 2.0 * std::sqrt(n / (m + 2.0));
    const double l2 = m * std::sqrt(n / (m + 2.0));
    return {std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(l1))),
            std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(l2)))};
}

// Per-row affine map onto [-1, 1]; rows with no spread are only centred.
struct AffineNormalizer {
    Eigen::VectorXd center;
    Eigen::VectorXd half_range;

    static AffineNormalizer fit(const Eigen::MatrixXd& X) {
        AffineNormalizer n;
        const Eigen::VectorXd lo = X.rowwise().minCoeff();
        const Eigen::VectorXd hi = X.rowwise().maxCoeff();
        n.center = 0.5 * (lo + hi);
        n.half_range = 0.5 * (hi - lo);
        for (Eigen::Index i = 0; i < n.half_range.size(); ++i)
            if (!(n.half_range[i] > 0.0)) n.half_range[i] = 1.0;
        return n;
    }

    Eigen::MatrixXd normalize(const Eigen::MatrixXd& X) const {
        return (X.colwise() - center).array().colwise() / half_range.array();
    }

    Eigen::MatrixXd denormalize(const Eigen::MatrixXd& Y) const {
        return (Y.array().colwise() * half_range.array()).matrix().colwise() + center;
    }
};

// Network input features: log10(kappa) and beta.
inline Eigen::MatrixXd objective_features(const Eigen::MatrixXd& theta) {
    Eigen::MatrixXd f(2, theta.cols());
    f.row(0) = theta.row(0).array().log10();
    f.row(1) = theta.row(1);
    return f;
}

struct NetworkArchitecture {
    std::size_t input = 2;
    std::size_t hidden1 = 1;
    std::size_t hidden2 = 1;
    std::size_t output = 1;
};

class Mlp {
public:
    Mlp() = default;

    explicit Mlp(const NetworkArchitecture& arch) : arch_(arch) {
        if (arch.input < 1 || arch.hidden1 < 1 || arch.hidden2 < 1 || arch.output < 1) {
            throw ConfigError("network: every layer needs at least one neuron");
        }
        W1_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arch.hidden1), static_cast<Eigen::Index>(arch.input));
        W2_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arch.hidden2), static_cast<Eigen::Index>(arch.hidden1));
        W3_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arch.output), static_cast<Eigen::Index>(arch.hidden2));
        b1_ = Eigen::MatrixXd::Zero(W1_.rows(), 1);
        b2_ = Eigen::MatrixXd::Zero(W2_.rows(), 1);
        b3_ = Eigen::MatrixXd::Zero(W3_.rows(), 1);
    }

    const NetworkArchitecture& architecture() const { return arch_; }

    // Uniform in +-1/sqrt(fan_in) for weights and biases alike.
    void initialize(std::uint64_t seed) {
        Rng rng = make_rng(seed, 0x696e6974ULL);
        auto fill = [&](auto& m, double fan_in) {
            const double r = 1.0 / std::sqrt(fan_in);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_in(rng, -r, r);
        };
        fill(W1_, static_cast<double>(arch_.input));
        fill(b1_, static_cast<double>(arch_.input));
        fill(W2_, static_cast<double>(arch_.hidden1));
        fill(b2_, static_cast<double>(arch_.hidden1));
        fill(W3_, static_cast<double>(arch_.hidden2));
        fill(b3_, static_cast<double>(arch_.hidden2));
    }

    Eigen::Index parameter_count() const {
        return W1_.size() + b1_.size() + W2_.size() + b2_.size() + W3_.size() + b3_.size();
    }

    // Parameter vector order: W1, b1, W2, b2, W3, b3 (matrices column-major).
    Eigen::VectorXd parameters() const {
        Eigen::VectorXd p(parameter_count());
        Eigen::Index o = 0;
        for (const Eigen::MatrixXd* m : blocks()) {
            p.segment(o, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
            o += m->size();
        }
        return p;
    }

    void set_parameters(const Eigen::VectorXd& p) {
        if (p.size() != parameter_count()) throw EitError("parameter vector has the wrong length");
        Eigen::Index o = 0;
        for (Eigen::MatrixXd* m : blocks()) {
            Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = p.segment(o, m->size());
            o += m->size();
        }
    }

    // Mask selecting weights (not biases) in the parameter vector.
    Eigen::VectorXd weight_mask() const {
        Eigen::VectorXd mask = Eigen::VectorXd::Zero(parameter_count());
        Eigen::Index o = 0;
        int i = 0;
        for (const Eigen::MatrixXd* m : blocks()) {
            if (i++ % 2 == 0) mask.segment(o, m->size()).setOnes();
            o += m->size();
        }
        return mask;
    }

    double weight_norm2() const { return W1_.squaredNorm() + W2_.squaredNorm() + W3_.squaredNorm(); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const {
        const Eigen::MatrixXd A1 = ((W1_ * X).colwise() + b1_.col(0)).array().tanh();
        const Eigen::MatrixXd A2 = ((W2_ * A1).colwise() + b2_.col(0)).array().tanh();
        return (W3_ * A2).colwise() + b3_.col(0);
    }

    // Loss (1/N) sum |y - f|^2 + alpha |w|^2 and its gradient.
    double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha,
                             Eigen::VectorXd* gradient) const {
        const double N = static_cast<double>(X.cols());
        const Eigen::MatrixXd A1 = ((W1_ * X).colwise() + b1_.col(0)).array().tanh();
        const Eigen::MatrixXd A2 = ((W2_ * A1).colwise() + b2_.col(0)).array().tanh();
        const Eigen::MatrixXd E = ((W3_ * A2).colwise() + b3_.col(0)) - Y;
        const double loss = E.squaredNorm() / N + alpha * weight_norm2();
        if (gradient) {
            const Eigen::MatrixXd dF = (2.0 / N) * E;
            const Eigen::MatrixXd dZ2 = (W3_.transpose() * dF).array() * (1.0 - A2.array().square());
            const Eigen::MatrixXd dZ1 = (W2_.transpose() * dZ2).array() * (1.0 - A1.array().square());
            Mlp g(arch_);
            g.W3_ = dF * A2.transpose() + 2.0 * alpha * W3_;
            g.b3_ = dF.rowwise().sum();
            g.W2_ = dZ2 * A1.transpose() + 2.0 * alpha * W2_;
            g.b2_ = dZ2.rowwise().sum();
            g.W1_ = dZ1 * X.transpose() + 2.0 * alpha * W1_;
            g.b1_ = dZ1.rowwise().sum();
            *gradient = g.parameters();
        }
        return loss;
    }

private:
    std::array<const Eigen::MatrixXd*, 6> blocks() const { return {&W1_, &b1_, &W2_, &b2_, &W3_, &b3_}; }
    std::array<Eigen::MatrixXd*, 6> blocks() { return {&W1_, &b1_, &W2_, &b2_, &W3_, &b3_}; }

    NetworkArchitecture arch_;
    Eigen::MatrixXd W1_, W2_, W3_;
    // Biases are single-column matrices so all blocks share a type.
    Eigen::MatrixXd b1_, b2_, b3_;
};

struct TrainConfig {
    double alpha = 0.01;
    double tol = 1e-7;
    std::size_t max_epochs = 1000;
    std::size_t patience = 6;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(alpha >= 0.0)) throw ConfigError("train.alpha must be non-negative");
        if (!(tol > 0.0)) throw ConfigError("train.tol must be positive");
        if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
    }
};

struct TrainingRecord {
    std::vector<double> loss;        // regularized training loss after each epoch
    std::vector<double> gradient;    // gradient norm after each epoch
    std::vector<double> validation;  // validation data loss after each epoch
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    double test_loss = 0.0;
    std::string stop_reason;
};

struct TrainedNetwork {
    Mlp mlp;
    AffineNormalizer input;
    AffineNormalizer output;
    TrainingRecord record;
    std::vector<std::size_t> train_columns, validation_columns, test_columns;

    // theta rows: kappa, beta. Returns raw coordinates, one column per input.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& theta) const {
        return output.denormalize(mlp.forward(input.normalize(objective_features(theta))));
    }

    Eigen::VectorXd predict(const ObjectiveVector& theta) const {
        return predict(Eigen::Vector2d(theta.kappa, theta.beta)).col(0);
    }
};

namespace detail {

// Random thirds: train, validation, test.
inline std::array<std::vector<std::size_t>, 3> split_thirds(std::vector<std::size_t> cols, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x73706c6974ULL);
    for (std::size_t i = cols.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(cols[i - 1], cols[j]);
    }
    const std::size_t n = cols.size();
    const std::size_t a = (n + 2) / 3;
    const std::size_t b = a + (n + 1) / 3;
    std::array<std::vector<std::size_t>, 3> out;
    out[0].assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(a));
    out[1].assign(cols.begin() + static_cast<std::ptrdiff_t>(a), cols.begin() + static_cast<std::ptrdiff_t>(b));
    out[2].assign(cols.begin() + static_cast<std::ptrdiff_t>(b), cols.end());
    return out;
}

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& M, const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(M.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = M.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

// Minimizes phi(t) = f(w + t d) for t > 0: expands or shrinks from t0 until
// a decrease is bracketed, then refines by golden-section search. Returns the
// best step found and its value; the step is zero when nothing beat phi(0).
template <typename F>
std::pair<double, double> line_search(F&& phi, double f0, double t0) {
    double a = 0.0, fa = f0;
    double b = t0, fb = phi(b);
    int guard = 0;
    while (!(fb < f0) && guard++ < 60) {
        b *= 0.25;
        fb = phi(b);
    }
    if (!(fb < f0)) return {0.0, f0};
    double c = 2.0 * b, fc = phi(c);
    guard = 0;
    while (fc < fb && guard++ < 60) {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = 2.0 * c;
        fc = phi(c);
    }
    (void)fa;
    constexpr double kGolden = 0.3819660112501051;
    double best_t = b, best_f = fb;
    double lo = a, hi = c;
    double x1 = lo + kGolden * (hi - lo), x2 = hi - kGolden * (hi - lo);
    double f1 = phi(x1), f2 = phi(x2);
    for (int it = 0; it < 25; ++it) {
        if (f1 < best_f) best_t = x1, best_f = f1;
        if (f2 < best_f) best_t = x2, best_f = f2;
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + kGolden * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - kGolden * (hi - lo);
            f2 = phi(x2);
        }
        if (hi - lo <= 1e-3 * best_t) break;
    }
    if (f1 < best_f) best_t = x1, best_f = f1;
    if (f2 < best_f) best_t = x2, best_f = f2;
    return {best_t, best_f};
}

}  // namespace detail

// Conjugate gradients with Fletcher-Reeves updates over the training third.
// Stops on loss < tol, gradient norm < tol, max_epochs, or when the
// validation loss has not improved for `patience` epochs; the weights with
// the best validation loss are kept.
inline TrainedNetwork train_network(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& coords,
                                    const NetworkArchitecture& arch, const TrainConfig& cfg) {
    cfg.validate();
    if (theta.rows() != 2 || theta.cols() != coords.cols()) throw EitError("training inputs have inconsistent shapes");
    std::vector<std::size_t> finite;
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        if (std::isfinite(theta(0, j)) && std::isfinite(theta(1, j)) && theta(0, j) > 0.0) {
            finite.push_back(static_cast<std::size_t>(j));
        }
    }
    if (finite.size() < 3) throw EitError("training needs at least three finite samples");
    if (static_cast<std::size_t>(coords.rows()) != arch.output || arch.input != 2) {
        throw EitError("network architecture does not match the data");
    }

    TrainedNetwork net;
    auto parts = detail::split_thirds(finite, cfg.seed);
    net.train_columns = parts[0];
    net.validation_columns = parts[1];
    net.test_columns = parts[2];

    const Eigen::MatrixXd features = objective_features(theta);
    net.input = AffineNormalizer::fit(detail::gather(features, net.train_columns));
    net.output = AffineNormalizer::fit(detail::gather(coords, net.train_columns));
    auto inputs = [&](const std::vector<std::size_t>& c) { return net.input.normalize(detail::gather(features, c)); };
    auto targets = [&](const std::vector<std::size_t>& c) { return net.output.normalize(detail::gather(coords, c)); };
    const Eigen::MatrixXd Xt = inputs(net.train_columns), Yt = targets(net.train_columns);
    const Eigen::MatrixXd Xv = inputs(net.validation_columns), Yv = targets(net.validation_columns);
    const Eigen::MatrixXd Xs = inputs(net.test_columns), Ys = targets(net.test_columns);

    net.mlp = Mlp(arch);
    net.mlp.initialize(cfg.seed);
    Mlp probe = net.mlp;
    auto data_loss = [&](const Mlp& m, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
        return X.cols() ? m.loss_and_gradient(X, Y, 0.0, nullptr) : 0.0;
    };

    Eigen::VectorXd w = net.mlp.parameters();
    Eigen::VectorXd g;
    double f = net.mlp.loss_and_gradient(Xt, Yt, cfg.alpha, &g);
    if (!std::isfinite(f)) throw EitError("initial training loss is not finite");
    Eigen::VectorXd d = -g;
    double step = 1.0 / std::max(1.0, d.norm());
    const auto reset_every = static_cast<std::size_t>(w.size());
    std::size_t since_reset = 0;

    Eigen::VectorXd best_w = w;
    double best_val = data_loss(net.mlp, Xv, Yv);
    std::size_t stale = 0;
    TrainingRecord& rec = net.record;
    rec.stop_reason = "max_epochs";

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (f < cfg.tol) {
            rec.stop_reason = "loss below tolerance";
            break;
        }
        if (g.norm() < cfg.tol) {
            rec.stop_reason = "gradient below tolerance";
            break;
        }
        if (g.dot(d) >= 0.0) {
            d = -g;
            since_reset = 0;
        }
        auto phi = [&](double t) {
            probe.set_parameters(w + t * d);
            return probe.loss_and_gradient(Xt, Yt, cfg.alpha, nullptr);
        };
        auto [t, ft] = detail::line_search(phi, f, step);
        if (!(t > 0.0)) {
            if (since_reset == 0) {
                rec.stop_reason = "line search made no progress";
                break;
            }
            d = -g;
            since_reset = 0;
            --epoch;
            continue;
        }
        if (!std::isfinite(ft)) throw EitError("training loss became non-finite at epoch " + std::to_string(epoch));
        w += t * d;
        step = t;
        net.mlp.set_parameters(w);
        Eigen::VectorXd g_new;
        f = net.mlp.loss_and_gradient(Xt, Yt, cfg.alpha, &g_new);
        const double beta_fr = g_new.squaredNorm() / g.squaredNorm();
        g = std::move(g_new);
        if (++since_reset >= reset_every) {
            d = -g;
            since_reset = 0;
        } else {
            d = -g + beta_fr * d;
        }

        const double val = data_loss(net.mlp, Xv, Yv);
        rec.loss.push_back(f);
        rec.gradient.push_back(g.norm());
        rec.validation.push_back(val);
        rec.epochs = epoch;
        if (val < best_val || Xv.cols() == 0) {
            best_val = val;
            best_w = w;
            rec.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            rec.stop_reason = "validation loss stopped improving";
            break;
        }
    }
    net.mlp.set_parameters(best_w);
    rec.test_loss = data_loss(net.mlp, Xs, Ys);
    return net;
}

inline TrainedNetwork train(const TrainingSet& set, const NetworkArchitecture& arch, const TrainConfig& cfg) {
    return train_network(set.Theta_bar, set.E_bar, arch, cfg);
}

// Least-squares projection onto nondecreasing sequences (pool adjacent violators).
inline std::vector<double> isotonic_regression(const std::vector<double>& y) {
    std::vector<double> value, weight;
    std::vector<std::size_t> count;
    for (double v : y) {
        value.push_back(v);
        weight.push_back(1.0);
        count.push_back(1);
        while (value.size() > 1 && value[value.size() - 2] > value.back()) {
            const std::size_t n = value.size();
            const double w = weight[n - 2] + weight[n - 1];
            value[n - 2] = (weight[n - 2] * value[n - 2] + weight[n - 1] * value[n - 1]) / w;
            weight[n - 2] = w;
            count[n - 2] += count[n - 1];
            value.pop_back();
            weight.pop_back();
            count.pop_back();
        }
    }
    std::vector<double> out;
    for (std::size_t b = 0; b < value.size(); ++b) out.insert(out.end(), count[b], value[b]);
    return out;
}

// Maps raw coordinates onto the nearest valid layout: each electrode is
// projected onto its side, then each side's arclengths are projected onto
// {w/2 <= t_1, t_{j+1} - t_j >= w + gap, t_n <= L - w/2}.
inline ElectrodeLayout project_layout(const Eigen::VectorXd& raw, const PolygonDomain& domain,
                                      const std::vector<std::size_t>& per_side, double width, double min_gap) {
    detail::check_feasible(domain, per_side, width, min_gap);
    const auto side_of = detail::expand_sides(per_side);
    const std::size_t k = side_of.size();
    if (static_cast<std::size_t>(raw.size()) != 2 * k) throw EitError("raw layout has the wrong length");
    std::vector<double> arclength(k);
    const double spacing = width + min_gap;
    std::size_t first = 0;
    for (std::size_t s = 0; s < per_side.size(); ++s) {
        const std::size_t n = per_side[s];
        const Side side = domain.side(s);
        const double lo = 0.5 * width;
        const double hi = side.length() - 0.5 * width - static_cast<double>(n ? n - 1 : 0) * spacing;
        if (hi < lo - 1e-12) throw EitError("projection infeasible on side " + std::to_string(s));
        std::vector<double> u(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t i = first + j;
            u[j] = side.arclength_of({raw[static_cast<Eigen::Index>(i)], raw[static_cast<Eigen::Index>(k + i)]}) -
                   static_cast<double>(j) * spacing;
        }
        const auto fitted = isotonic_regression(u);
        for (std::size_t j = 0; j < n; ++j) {
            arclength[first + j] = std::clamp(fitted[j], lo, std::max(lo, hi)) + static_cast<double>(j) * spacing;
        }
        first += n;
    }
    return ElectrodeLayout::from_arclengths(domain, side_of, arclength, width);
}

// Queries the network at kappa = 1, beta = 0 and projects onto the constraints.
inline ElectrodeLayout optimize_layout(const TrainedNetwork& net, const PolygonDomain& domain,
                                       const std::vector<std::size_t>& per_side, double width, double min_gap) {
    return project_layout(net.predict(ObjectiveVector{1.0, 0.0}), domain, per_side, width, min_gap);
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(j.size()) != rows) throw EitError("matrix has the wrong number of rows");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& r = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(r.size()) != cols) throw EitError("matrix has the wrong number of columns");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline nlohmann::json network_to_json(const TrainedNetwork& net) {
    const auto& a = net.mlp.architecture();
    nlohmann::json j;
    j["architecture"] = {{"input", a.input},
                         {"hidden1", a.hidden1},
                         {"hidden2", a.hidden2},
                         {"output", a.output},
                         {"hidden_activation", "tanh"},
                         {"output_activation", "linear"}};
    auto norm = [](const AffineNormalizer& n) {
        return nlohmann::json{{"center", std::vector<double>(n.center.data(), n.center.data() + n.center.size())},
                              {"half_range", std::vector<double>(n.half_range.data(),
                                                                 n.half_range.data() + n.half_range.size())}};
    };
    j["input_normalizer"] = norm(net.input);
    j["input_normalizer"]["features"] = {"log10_kappa", "beta"};
    j["output_normalizer"] = norm(net.output);
    // Parameters are stored per layer, weight matrices row-major.
    Mlp copy = net.mlp;
    const Eigen::VectorXd p = copy.parameters();
    nlohmann::json layers = nlohmann::json::array();
    const std::size_t dims[4] = {a.input, a.hidden1, a.hidden2, a.output};
    Eigen::Index o = 0;
    for (int l = 0; l < 3; ++l) {
        const auto rows = static_cast<Eigen::Index>(dims[l + 1]);
        const auto cols = static_cast<Eigen::Index>(dims[l]);
        const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(p.data() + o, rows, cols);
        o += rows * cols;
        const Eigen::VectorXd b = p.segment(o, rows);
        o += rows;
        layers.push_back({{"weights", matrix_to_json(W)}, {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    j["layers"] = layers;
    const auto& r = net.record;
    j["training_record"] = {{"loss", r.loss},
                            {"gradient", r.gradient},
                            {"validation", r.validation},
                            {"epochs", r.epochs},
                            {"best_epoch", r.best_epoch},
                            {"test_loss", r.test_loss},
                            {"stop_reason", r.stop_reason}};
    j["split"] = {{"train", net.train_columns}, {"validation", net.validation_columns}, {"test", net.test_columns}};
    return j;
}

inline TrainedNetwork network_from_json(const nlohmann::json& j) {
    TrainedNetwork net;
    const auto& ja = j.at("architecture");
    NetworkArchitecture a;
    a.input = ja.at("input");
    a.hidden1 = ja.at("hidden1");
    a.hidden2 = ja.at("hidden2");
    a.output = ja.at("output");
    net.mlp = Mlp(a);
    auto norm = [](const nlohmann::json& n) {
        AffineNormalizer out;
        const auto c = n.at("center").get<std::vector<double>>();
        const auto h = n.at("half_range").get<std::vector<double>>();
        out.center = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
        out.half_range = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
        return out;
    };
    net.input = norm(j.at("input_normalizer"));
    net.output = norm(j.at("output_normalizer"));
    if (net.input.center.size() != 2 || net.output.center.size() != static_cast<Eigen::Index>(a.output)) {
        throw EitError("network normalizers do not match the architecture");
    }
    Eigen::VectorXd p(net.mlp.parameter_count());
    const std::size_t dims[4] = {a.input, a.hidden1, a.hidden2, a.output};
    Eigen::Index o = 0;
    for (int l = 0; l < 3; ++l) {
        const auto rows = static_cast<Eigen::Index>(dims[l + 1]);
        const auto cols = static_cast<Eigen::Index>(dims[l]);
        const auto& layer = j.at("layers").at(static_cast<std::size_t>(l));
        const Eigen::MatrixXd W = matrix_from_json(layer.at("weights"), rows, cols);
        Eigen::Map<Eigen::MatrixXd>(p.data() + o, rows, cols) = W;
        o += rows * cols;
        const auto b = layer.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(b.size()) != rows) throw EitError("bias has the wrong length");
        p.segment(o, rows) = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
        o += rows;
    }
    net.mlp.set_parameters(p);
    if (j.contains("training_record")) {
        const auto& r = j.at("training_record");
        net.record.loss = r.at("loss").get<std::vector<double>>();
        net.record.gradient = r.at("gradient").get<std::vector<double>>();
        net.record.validation = r.at("validation").get<std::vector<double>>();
        net.record.epochs = r.at("epochs");
        net.record.best_epoch = r.at("best_epoch");
        net.record.test_loss = r.at("test_loss");
        net.record.stop_reason = r.at("stop_reason");
    }
    if (j.contains("split")) {
        net.train_columns = j.at("split").at("train").get<std::vector<std::size_t>>();
        net.validation_columns = j.at("split").at("validation").get<std::vector<std::size_t>>();
        net.test_columns = j.at("split").at("test").get<std::vector<std::size_t>>();
    }
    return net;
}

}  // namespace eitopt

#endif  // EITOPT_NETWORK_HPP
