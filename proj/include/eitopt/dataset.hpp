// eitopt - electrode placement optimization for 2D EIT
//
// Training data: random layouts paired with the objective vector
// [kappa, beta] of each conductivity sample.

#ifndef EITOPT_DATASET_HPP
#define EITOPT_DATASET_HPP

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitopt/core.hpp"
#include "eitopt/forward.hpp"
#include "eitopt/geometry.hpp"
#include "eitopt/io.hpp"
#include "eitopt/mesh.hpp"
#include "eitopt/sampler.hpp"

namespace eitopt {

struct ObjectiveVector {
    double kappa = 1.0;
    double beta = 0.0;

    bool finite() const { return std::isfinite(kappa) && std::isfinite(beta); }
};

struct GaussNewtonStep {
    NodalField sigma0;
    NodalField delta;
    NodalField sigma_hat;
    double beta = 0.0;
};

namespace detail {

// (J^T J + Gamma^{-1})^{-1} J^T r evaluated as Gamma J^T (J Gamma J^T + I)^{-1} r,
// which only needs a measurement-sized solve.
inline Eigen::VectorXd regularized_step(const Eigen::MatrixXd& J, const Eigen::MatrixXd& gamma,
                                        const Eigen::VectorXd& r) {
    const Eigen::MatrixXd GJt = gamma * J.transpose();
    Eigen::MatrixXd S = J * GJt;
    S.diagonal().array() += 1.0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw EitError("one-step Gauss-Newton solve failed");
    const Eigen::VectorXd y = ldlt.solve(r);
    if (!y.allFinite()) throw EitError("one-step Gauss-Newton solve produced non-finite values");
    return GJt * y;
}

inline GaussNewtonStep one_step_from(const TriangularMesh& mesh, const NodalField& sigma_true,
                                     const Eigen::VectorXd& v_true, const SmoothnessPrior& prior,
                                     const ContactImpedances& z, const StimulationProtocol& protocol) {
    GaussNewtonStep out;
    // A constant field is its own mean; summing would round.
    const double mean = sigma_true.minCoeff() == sigma_true.maxCoeff() ? sigma_true[0] : sigma_true.mean();
    out.sigma0 = NodalField::Constant(sigma_true.size(), mean);
    const auto at0 = forward_and_jacobian(mesh, out.sigma0, z, protocol);
    const Eigen::VectorXd r = v_true - at0.forward.voltages;
    out.delta = regularized_step(at0.jacobian, prior.covariance(), r);
    out.sigma_hat = out.sigma0 + out.delta;
    out.beta = (sigma_true - out.sigma_hat).squaredNorm();
    return out;
}

}  // namespace detail

// One Gauss-Newton step from the constant field at the sample mean.
inline GaussNewtonStep one_step_gauss_newton(const TriangularMesh& mesh, const NodalField& sigma_true,
                                             const SmoothnessPrior& prior, const ContactImpedances& z,
                                             const StimulationProtocol& protocol) {
    if (prior.size() != sigma_true.size()) throw EitError("prior does not match the mesh");
    const auto v_true = solve_forward(mesh, sigma_true, z, protocol).voltages;
    return detail::one_step_from(mesh, sigma_true, v_true, prior, z, protocol);
}

inline ObjectiveVector compute_objective(const TriangularMesh& mesh, const NodalField& sigma_true,
                                         const SmoothnessPrior& prior, const ContactImpedances& z,
                                         const StimulationProtocol& protocol) {
    if (prior.size() != sigma_true.size()) throw EitError("prior does not match the mesh");
    const auto truth = forward_and_jacobian(mesh, sigma_true, z, protocol);
    ObjectiveVector theta;
    theta.kappa = condition_number(hessian(truth.jacobian));
    theta.beta = detail::one_step_from(mesh, sigma_true, truth.forward.voltages, prior, z, protocol).beta;
    return theta;
}

struct DatasetSpec {
    PolygonDomain domain;
    std::vector<std::size_t> per_side;
    double width = 0.075;
    double min_gap = 0.075;
    std::size_t layouts = 200;
    std::size_t samples = 50;
    double h_max = 0.075;
    double h_min = 0.0375;
    PriorParams prior;
    double contact_impedance = 1e-5;
    double amplitude = 1.0;
    std::uint64_t seed = 1;
    std::size_t max_resamples = 5;
};

struct TrainingSet {
    Eigen::MatrixXd E_bar;      // 2k x (layouts * samples)
    Eigen::MatrixXd Theta_bar;  // 2 x (layouts * samples), rows kappa and beta
    nlohmann::json manifest;

    std::size_t columns() const { return static_cast<std::size_t>(E_bar.cols()); }

    std::vector<std::size_t> finite_columns() const {
        std::vector<std::size_t> keep;
        for (Eigen::Index j = 0; j < Theta_bar.cols(); ++j) {
            if (std::isfinite(Theta_bar(0, j)) && std::isfinite(Theta_bar(1, j))) {
                keep.push_back(static_cast<std::size_t>(j));
            }
        }
        return keep;
    }
};

inline nlohmann::json domain_to_json(const PolygonDomain& domain) {
    auto poly = [](const Polygon& p) {
        nlohmann::json a = nlohmann::json::array();
        for (Point q : p) a.push_back({q.x, q.y});
        return a;
    };
    nlohmann::json holes = nlohmann::json::array();
    for (const auto& h : domain.holes()) holes.push_back(poly(h));
    return {{"outer", poly(domain.outer())}, {"holes", holes}};
}

inline PolygonDomain domain_from_json(const nlohmann::json& j) {
    auto poly = [](const nlohmann::json& a) {
        Polygon p;
        for (const auto& q : a) p.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
        return p;
    };
    std::vector<Polygon> holes;
    if (j.contains("holes"))
        for (const auto& h : j.at("holes")) holes.push_back(poly(h));
    return PolygonDomain(poly(j.at("outer")), holes);
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Layout i uses seed stream (i, attempt). Samples are drawn once on the first
// layout's mesh and interpolated onto every later mesh; the prior covariance
// is rebuilt on each mesh.
inline TrainingSet build_training_set(const DatasetSpec& spec, std::size_t threads = 1,
                                      const ProgressFn& progress = {}) {
    if (spec.layouts < 1 || spec.samples < 1) throw ConfigError("dataset: layouts and samples must be at least 1");
    spec.prior.validate();
    const std::size_t k = std::accumulate(spec.per_side.begin(), spec.per_side.end(), std::size_t{0});
    const auto z = ContactImpedances::uniform(k, spec.contact_impedance);
    const auto protocol = StimulationProtocol::against_first(k, spec.amplitude);
    const std::size_t N = spec.layouts * spec.samples;

    TrainingSet set;
    set.E_bar.resize(2 * static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(N));
    set.Theta_bar.resize(2, static_cast<Eigen::Index>(N));
    std::vector<std::size_t> attempts(spec.layouts, 0);
    std::vector<std::string> failures(spec.layouts);
    std::vector<std::uint64_t> mesh_ids(spec.layouts, 0);

    TriangularMesh first_mesh;
    std::vector<NodalField> first_samples;
    std::atomic<std::size_t> done{0};

    auto run_layout = [&](std::size_t i) {
        for (std::size_t attempt = 0;; ++attempt) {
            const std::uint64_t layout_seed = derive_seed(derive_seed(spec.seed, "layout"), i * 1000 + attempt);
            try {
                const ElectrodeLayout layout =
                    place_random_electrodes(spec.domain, spec.per_side, spec.width, spec.min_gap, layout_seed);
                const TriangularMesh mesh =
                    generate_mesh(spec.domain, layout, spec.h_max, spec.h_min, derive_seed(layout_seed, "mesh"));
                const SmoothnessPrior prior = build_covariance(mesh, spec.prior);
                std::vector<NodalField> samples;
                if (i == 0) {
                    for (auto& s : draw_samples(prior, spec.samples, derive_seed(spec.seed, "samples")))
                        samples.push_back(std::move(s.values));
                } else {
                    for (const auto& s : first_samples) samples.push_back(interpolate_field(s, first_mesh, mesh));
                }
                std::vector<ObjectiveVector> theta(spec.samples);
                for (std::size_t j = 0; j < spec.samples; ++j) {
                    theta[j] = compute_objective(mesh, samples[j], prior, z, protocol);
                    if (!std::isfinite(theta[j].beta)) throw EitError("non-finite beta");
                }
                for (std::size_t j = 0; j < spec.samples; ++j) {
                    const auto col = static_cast<Eigen::Index>(i * spec.samples + j);
                    set.E_bar.col(col) = layout.midpoints;
                    set.Theta_bar(0, col) = theta[j].kappa;
                    set.Theta_bar(1, col) = theta[j].beta;
                }
                attempts[i] = attempt;
                mesh_ids[i] = mesh.fingerprint();
                if (i == 0) {
                    first_mesh = mesh;
                    first_samples = std::move(samples);
                }
                break;
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                failures[i] += (failures[i].empty() ? "" : "; ") + std::string(e.what());
                if (attempt + 1 > spec.max_resamples) {
                    throw EitError("layout " + std::to_string(i) + " failed after " + std::to_string(attempt + 1) +
                                   " attempts: " + failures[i]);
                }
            }
        }
        const std::size_t d = ++done;
        if (progress) progress(d, spec.layouts);
    };

    run_layout(0);
    parallel_for(spec.layouts - 1, threads, [&](std::size_t i) { run_layout(i + 1); });

    std::size_t sentinels = 0;
    for (Eigen::Index j = 0; j < set.Theta_bar.cols(); ++j)
        if (!std::isfinite(set.Theta_bar(0, j))) ++sentinels;
    std::size_t resamples = 0;
    for (std::size_t a : attempts) resamples += a;

    nlohmann::json& m = set.manifest;
    m["domain"] = domain_to_json(spec.domain);
    m["per_side"] = spec.per_side;
    m["width"] = spec.width;
    m["min_gap"] = spec.min_gap;
    m["layouts"] = spec.layouts;
    m["samples"] = spec.samples;
    m["h_max"] = spec.h_max;
    m["h_min"] = spec.h_min;
    m["prior"] = {{"a", spec.prior.a}, {"b", spec.prior.b}, {"c", spec.prior.c}};
    m["protocol"] = {{"name", "adjacent-against-first"},
                     {"contact_impedance", spec.contact_impedance},
                     {"amplitude", spec.amplitude}};
    m["seed"] = spec.seed;
    m["max_resamples"] = spec.max_resamples;
    m["layout_attempts"] = attempts;
    m["resampled_layouts"] = resamples;
    m["kappa_sentinels"] = sentinels;
    nlohmann::json ids = nlohmann::json::array();
    for (auto id : mesh_ids) ids.push_back(std::to_string(id));
    m["mesh_ids"] = ids;
    return set;
}

inline void save_training_set(const TrainingSet& set, const std::filesystem::path& dir) {
    write_file(dir / "E_bar.csv", matrix_to_csv(set.E_bar));
    write_file(dir / "Theta_bar.csv", matrix_to_csv(set.Theta_bar));
    write_file(dir / "manifest.json", set.manifest.dump(2) + "\n");
}

inline TrainingSet load_training_set(const std::filesystem::path& dir) {
    TrainingSet set;
    set.E_bar = matrix_from_csv(read_file(dir / "E_bar.csv"));
    set.Theta_bar = matrix_from_csv(read_file(dir / "Theta_bar.csv"));
    set.manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    if (set.Theta_bar.rows() != 2 || set.Theta_bar.cols() != set.E_bar.cols()) {
        throw EitError("training set matrices in " + dir.string() + " have inconsistent shapes");
    }
    return set;
}

}  // namespace eitopt

#endif  // EITOPT_DATASET_HPP
