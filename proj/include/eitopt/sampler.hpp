// eitopt - electrode placement optimization for 2D EIT
//
// Smooth random conductivity fields from an exponential covariance, plus
// deterministic ellipse targets.

#ifndef EITOPT_SAMPLER_HPP
#define EITOPT_SAMPLER_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "eitopt/core.hpp"
#include "eitopt/geometry.hpp"
#include "eitopt/mesh.hpp"

namespace eitopt {

struct PriorParams {
    double a = 0.2;   // variance scale
    double b = 0.0;   // correlation length
    double c = 0.0;   // nugget

    // a = 0.2, b = 0.2 * diameter, c = 0.01 * a.
    static PriorParams defaults_for(const PolygonDomain& domain) {
        PriorParams p;
        p.b = 0.2 * domain.diameter();
        p.c = 0.01 * p.a;
        return p;
    }

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0) || !std::isfinite(a + b + c)) {
            throw ConfigError("prior: a, b and c must be positive");
        }
    }
};

class SmoothnessPrior {
public:
    SmoothnessPrior(const std::vector<Point>& points, const PriorParams& params) : params_(params) {
        params.validate();
        const auto n = static_cast<Eigen::Index>(points.size());
        gamma_.resize(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                const double d = distance(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
                const double v = params.a * std::exp(-d / (2.0 * params.b));
                gamma_(i, j) = v;
                gamma_(j, i) = v;
            }
            gamma_(j, j) = params.a + params.c;
        }
        chol_.compute(gamma_);
        if (chol_.info() != Eigen::Success) {
            throw EitError("prior covariance is not positive definite (increase the nugget c)");
        }
    }

    const PriorParams& params() const { return params_; }
    const Eigen::MatrixXd& covariance() const { return gamma_; }
    Eigen::Index size() const { return gamma_.rows(); }

    // Lower Cholesky factor of the covariance, i.e. the inverse of L with
    // L^T L = Gamma^{-1}.
    Eigen::MatrixXd generator() const { return chol_.matrixL(); }

    // sigma = L^{-1} r.
    Eigen::VectorXd generate(const Eigen::VectorXd& r) const { return chol_.matrixL() * r; }

    // L v, so that |L v|^2 = v^T Gamma^{-1} v.
    Eigen::MatrixXd whiten(const Eigen::MatrixXd& v) const { return chol_.matrixL().solve(v); }

    Eigen::MatrixXd precision() const {
        return chol_.solve(Eigen::MatrixXd::Identity(size(), size()));
    }

private:
    PriorParams params_;
    Eigen::MatrixXd gamma_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
};

inline SmoothnessPrior build_covariance(const TriangularMesh& mesh, const PriorParams& params) {
    return SmoothnessPrior(mesh.nodes, params);
}

struct ConductivitySample {
    NodalField values;
    std::uint64_t mesh_id = 0;
};

// Values below 1e-3 of the field mean are raised to that floor.
inline NodalField apply_positivity_floor(NodalField v) {
    const double mean = v.mean();
    if (!(mean > 0.0)) throw EitError("random conductivity draw has non-positive mean");
    const double floor = 1e-3 * mean;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::max(v[i], floor);
    return v;
}

inline Eigen::VectorXd draw_uniform_vector(Eigen::Index n, std::uint64_t seed, std::uint64_t index) {
    Rng rng = make_rng(derive_seed(seed, "blob"), index);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = uniform_open_closed(rng);
    return r;
}

// Sample i depends only on (seed, i).
inline std::vector<ConductivitySample> draw_samples(const SmoothnessPrior& prior, std::size_t count,
                                                    std::uint64_t seed, std::uint64_t mesh_id = 0,
                                                    std::size_t threads = 1) {
    std::vector<ConductivitySample> out(count);
    parallel_for(count, threads, [&](std::size_t i) {
        const Eigen::VectorXd r = draw_uniform_vector(prior.size(), seed, i);
        out[i].values = apply_positivity_floor(prior.generate(r));
        out[i].mesh_id = mesh_id;
    });
    return out;
}

// Affine rescaling of a field onto [lo, hi].
inline NodalField rescale_to_range(const NodalField& v, double lo, double hi) {
    const double vmin = v.minCoeff();
    const double vmax = v.maxCoeff();
    if (!(vmax > vmin)) return NodalField::Constant(v.size(), 0.5 * (lo + hi));
    return (lo + (hi - lo) * (v.array() - vmin) / (vmax - vmin)).matrix();
}

inline ConductivitySample ellipsoid_target(const TriangularMesh& mesh, Point center, Point semi_axes, double angle,
                                           double background, double inclusion) {
    if (!(background > 0.0) || !(inclusion > 0.0)) throw EitError("ellipse target values must be positive");
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    ConductivitySample s;
    s.mesh_id = mesh.fingerprint();
    s.values.resize(static_cast<Eigen::Index>(mesh.node_count()));
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        const Point d = mesh.nodes[i] - center;
        const double u = (ca * d.x + sa * d.y) / semi_axes.x;
        const double v = (-sa * d.x + ca * d.y) / semi_axes.y;
        s.values[static_cast<Eigen::Index>(i)] = (u * u + v * v <= 1.0) ? inclusion : background;
    }
    return s;
}

}  // namespace eitopt

#endif  // EITOPT_SAMPLER_HPP
