// eitopt - electrode placement optimization for 2D EIT
//
// Layout quality measures that do not depend on training: mean
// discretization error between fine and coarse meshes, mean condition
// numbers of the Hessian and the FE system matrix, and distinguishability.

#ifndef EITOPT_METRICS_HPP
#define EITOPT_METRICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "eitopt/core.hpp"
#include "eitopt/forward.hpp"
#include "eitopt/geometry.hpp"
#include "eitopt/mesh.hpp"
#include "eitopt/sampler.hpp"

namespace eitopt {

struct MetricsSpec {
    PolygonDomain domain;
    double h_coarse = 0.075;
    double h_fine = 0.0375;
    double contact_impedance = 1e-5;
    double amplitude = 1.0;
    PriorParams prior;
    std::size_t mu_samples = 200;
    std::size_t kappa_samples = 200;
    std::size_t delta_pairs = 50;
    std::uint64_t seed = 1001;
    std::uint64_t mesh_seed = 1;

    void validate() const {
        if (!(h_coarse > 0.0) || !(h_fine > 0.0) || h_fine > h_coarse) {
            throw ConfigError("metrics: need 0 < h_fine <= h_coarse");
        }
        if (kappa_samples < 1 || mu_samples < 1) throw ConfigError("metrics: sample counts must be at least 1");
        if (!(contact_impedance > 0.0)) throw ConfigError("metrics: contact impedance must be positive");
        prior.validate();
    }
};

// Electrode-free mesh on which comparison samples are drawn, so every layout
// sees the same fields after interpolation.
struct ReferenceSamples {
    TriangularMesh mesh;
    std::vector<NodalField> fields;
};

inline TriangularMesh reference_mesh(const PolygonDomain& domain, double h, std::uint64_t seed) {
    return generate_mesh(domain, ElectrodeLayout{}, h, 0.5 * h, derive_seed(seed, "reference"));
}

inline ReferenceSamples draw_reference_samples(const PolygonDomain& domain, double h, const PriorParams& prior,
                                               std::size_t count, std::uint64_t seed, std::size_t threads = 1) {
    ReferenceSamples out;
    out.mesh = reference_mesh(domain, h, seed);
    for (auto& s : draw_samples(build_covariance(out.mesh, prior), count, seed, out.mesh.fingerprint(), threads)) {
        out.fields.push_back(std::move(s.values));
    }
    return out;
}

inline TriangularMesh coarse_mesh(const PolygonDomain& domain, const ElectrodeLayout& layout, double h,
                                  std::uint64_t seed) {
    return generate_mesh(domain, layout, h, 0.5 * h, seed);
}

// mu = mean over samples of U_fine - U_coarse.
inline Eigen::VectorXd mean_modeling_error(const TriangularMesh& coarse, const TriangularMesh& fine,
                                           const ReferenceSamples& samples, const ContactImpedances& z,
                                           const StimulationProtocol& protocol, std::size_t threads = 1) {
    if (samples.fields.empty()) throw EitError("mean_modeling_error: no samples");
    const std::size_t n = samples.fields.size();
    std::vector<Eigen::VectorXd> diff(n);
    parallel_for(n, threads, [&](std::size_t j) {
        const NodalField sc = interpolate_field(samples.fields[j], samples.mesh, coarse);
        const NodalField sf = interpolate_field(samples.fields[j], samples.mesh, fine);
        diff[j] = solve_forward(fine, sf, z, protocol).voltages - solve_forward(coarse, sc, z, protocol).voltages;
    });
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(diff[0].size());
    for (const auto& d : diff) mu += d;
    return mu / static_cast<double>(n);
}

inline Eigen::VectorXd mean_modeling_error(const PolygonDomain& domain, const ElectrodeLayout& layout,
                                           const ReferenceSamples& samples, double h_coarse, double h_fine,
                                           const ContactImpedances& z, const StimulationProtocol& protocol,
                                           std::uint64_t mesh_seed, std::size_t threads = 1) {
    if (h_fine > h_coarse) throw ConfigError("mean_modeling_error: h_fine must not exceed h_coarse");
    const TriangularMesh coarse = coarse_mesh(domain, layout, h_coarse, mesh_seed);
    const TriangularMesh fine = coarse_mesh(domain, layout, h_fine, mesh_seed);
    return mean_modeling_error(coarse, fine, samples, z, protocol, threads);
}

struct ConditionMeans {
    double kappa_H = 0.0;
    double kappa_R = 0.0;
    std::size_t used = 0;       // samples with finite kappa_H and kappa_R
    std::size_t sentinels = 0;  // samples excluded
};

// Mean kappa(J^T J) and kappa(R) over samples given on `mesh`. R is the
// grounded FE system, the ungrounded one being singular.
inline ConditionMeans mean_condition_numbers(const TriangularMesh& mesh, const std::vector<NodalField>& samples,
                                             const ContactImpedances& z, const StimulationProtocol& protocol,
                                             std::size_t threads = 1) {
    const std::size_t n = samples.size();
    if (n == 0) throw EitError("mean_condition_numbers: no samples");
    std::vector<double> kh(n), kr(n);
    parallel_for(n, threads, [&](std::size_t j) {
        kh[j] = condition_number(hessian(jacobian(mesh, samples[j], z, protocol)));
        kr[j] = condition_number(Eigen::MatrixXd(assemble_system(mesh, samples[j], z)));
    });
    ConditionMeans out;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(kh[j]) || !std::isfinite(kr[j])) {
            ++out.sentinels;
            continue;
        }
        out.kappa_H += kh[j];
        out.kappa_R += kr[j];
        ++out.used;
    }
    if (out.used == 0) throw EitError("mean_condition_numbers: every sample gave an infinite condition number");
    out.kappa_H /= static_cast<double>(out.used);
    out.kappa_R /= static_cast<double>(out.used);
    return out;
}

inline ConditionMeans mean_condition_numbers(const TriangularMesh& mesh, const ReferenceSamples& samples,
                                             const ContactImpedances& z, const StimulationProtocol& protocol,
                                             std::size_t threads = 1) {
    std::vector<NodalField> fields;
    for (const auto& f : samples.fields) fields.push_back(interpolate_field(f, samples.mesh, mesh));
    return mean_condition_numbers(mesh, fields, z, protocol, threads);
}

// delta = |U(sigma1 + dsigma) - U(sigma1)|^2 on one mesh and protocol.
inline double distinguishability(const TriangularMesh& mesh, const NodalField& sigma1, const NodalField& delta_sigma,
                                 const ContactImpedances& z, const StimulationProtocol& protocol) {
    if (sigma1.size() != delta_sigma.size()) throw EitError("distinguishability: fields differ in length");
    const Eigen::VectorXd a = solve_forward(mesh, sigma1, z, protocol).voltages;
    const Eigen::VectorXd b = solve_forward(mesh, NodalField(sigma1 + delta_sigma), z, protocol).voltages;
    return (b - a).squaredNorm();
}

// Background and perturbation pairs, each min-max rescaled into [lo, hi] on the reference mesh.
struct DistinguishabilityPairs {
    TriangularMesh mesh;
    std::vector<NodalField> sigma1;
    std::vector<NodalField> delta;
};

inline DistinguishabilityPairs draw_distinguishability_pairs(const PolygonDomain& domain, double h,
                                                             const PriorParams& prior, std::size_t count,
                                                             std::uint64_t seed, double lo = 1.0, double hi = 2.0) {
    DistinguishabilityPairs out;
    out.mesh = reference_mesh(domain, h, seed);
    const SmoothnessPrior p = build_covariance(out.mesh, prior);
    const auto background = draw_samples(p, count, derive_seed(seed, "sigma1"));
    const auto change = draw_samples(p, count, derive_seed(seed, "delta"));
    for (std::size_t i = 0; i < count; ++i) {
        out.sigma1.push_back(rescale_to_range(background[i].values, lo, hi));
        out.delta.push_back(rescale_to_range(change[i].values, lo, hi));
    }
    return out;
}

inline std::vector<double> distinguishability_values(const TriangularMesh& mesh, const DistinguishabilityPairs& pairs,
                                                     const ContactImpedances& z, const StimulationProtocol& protocol,
                                                     std::size_t threads = 1) {
    std::vector<double> out(pairs.sigma1.size());
    parallel_for(out.size(), threads, [&](std::size_t i) {
        out[i] = distinguishability(mesh, interpolate_field(pairs.sigma1[i], pairs.mesh, mesh),
                                    interpolate_field(pairs.delta[i], pairs.mesh, mesh), z, protocol);
    });
    return out;
}

// Fraction of pairs where `a` is strictly larger than `b`.
inline double win_rate(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw EitError("win_rate: sequences differ in length or are empty");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) ++wins;
    return static_cast<double>(wins) / static_cast<double>(a.size());
}

struct LayoutQualityReport {
    std::string layout_id;
    std::string geometry_id;
    Eigen::VectorXd mu;
    double mu_l1 = 0.0;
    ConditionMeans kappa;
    std::size_t n_samples = 0;
    std::uint64_t coarse_mesh_id = 0;
    std::uint64_t fine_mesh_id = 0;
    std::size_t coarse_nodes = 0;
    std::size_t fine_nodes = 0;
};

struct QualityInputs {
    ReferenceSamples mu_samples;
    ReferenceSamples kappa_samples;
};

inline QualityInputs draw_quality_inputs(const MetricsSpec& spec, std::size_t threads = 1) {
    spec.validate();
    QualityInputs in;
    in.mu_samples = draw_reference_samples(spec.domain, spec.h_fine, spec.prior, spec.mu_samples,
                                           derive_seed(spec.seed, "mu"), threads);
    in.kappa_samples = draw_reference_samples(spec.domain, spec.h_fine, spec.prior, spec.kappa_samples,
                                              derive_seed(spec.seed, "kappa"), threads);
    return in;
}

inline LayoutQualityReport evaluate_layout(const MetricsSpec& spec, const QualityInputs& in,
                                           const ElectrodeLayout& layout, const std::string& layout_id,
                                           std::size_t threads = 1) {
    const auto k = layout.count();
    const auto z = ContactImpedances::uniform(k, spec.contact_impedance);
    const auto protocol = StimulationProtocol::against_first(k, spec.amplitude);
    const TriangularMesh coarse = coarse_mesh(spec.domain, layout, spec.h_coarse, spec.mesh_seed);
    const TriangularMesh fine = coarse_mesh(spec.domain, layout, spec.h_fine, spec.mesh_seed);
    LayoutQualityReport r;
    r.layout_id = layout_id;
    r.geometry_id = spec.domain.describe();
    r.mu = mean_modeling_error(coarse, fine, in.mu_samples, z, protocol, threads);
    r.mu_l1 = r.mu.lpNorm<1>();
    r.kappa = mean_condition_numbers(coarse, in.kappa_samples, z, protocol, threads);
    r.n_samples = in.mu_samples.fields.size();
    r.coarse_mesh_id = coarse.fingerprint();
    r.fine_mesh_id = fine.fingerprint();
    r.coarse_nodes = coarse.node_count();
    r.fine_nodes = fine.node_count();
    return r;
}

inline nlohmann::json report_to_json(const LayoutQualityReport& r) {
    return {{"layout_id", r.layout_id},
            {"geometry", r.geometry_id},
            {"mu", std::vector<double>(r.mu.data(), r.mu.data() + r.mu.size())},
            {"mu_l1", r.mu_l1},
            {"kappa_H_mean", r.kappa.kappa_H},
            {"kappa_R_mean", r.kappa.kappa_R},
            {"kappa_samples_used", r.kappa.used},
            {"kappa_sentinels", r.kappa.sentinels},
            {"n_samples", r.n_samples},
            {"coarse_mesh_id", std::to_string(r.coarse_mesh_id)},
            {"fine_mesh_id", std::to_string(r.fine_mesh_id)},
            {"coarse_nodes", r.coarse_nodes},
            {"fine_nodes", r.fine_nodes}};
}

struct LayoutComparison {
    LayoutQualityReport optimized;
    LayoutQualityReport uniform;
    double mu_ratio = 0.0;           // |mu_uniform|_1 / |mu_optimized|_1
    double kappa_H_reduction = 0.0;  // 1 - optimized / uniform
    double kappa_R_reduction = 0.0;
};

inline LayoutComparison compare_layouts(const LayoutQualityReport& optimized, const LayoutQualityReport& uniform) {
    LayoutComparison c{optimized, uniform};
    c.mu_ratio = uniform.mu_l1 / optimized.mu_l1;
    c.kappa_H_reduction = 1.0 - optimized.kappa.kappa_H / uniform.kappa.kappa_H;
    c.kappa_R_reduction = 1.0 - optimized.kappa.kappa_R / uniform.kappa.kappa_R;
    return c;
}

inline nlohmann::json comparison_to_json(const LayoutComparison& c) {
    return {{"optimized", report_to_json(c.optimized)},
            {"uniform", report_to_json(c.uniform)},
            {"mu_l1_ratio", c.mu_ratio},
            {"kappa_H_reduction_percent", 100.0 * c.kappa_H_reduction},
            {"kappa_R_reduction_percent", 100.0 * c.kappa_R_reduction}};
}

}  // namespace eitopt

#endif  // EITOPT_METRICS_HPP
