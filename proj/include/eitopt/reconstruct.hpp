// eitopt - electrode placement optimization for 2D EIT
//
// Absolute imaging: Gauss-Newton minimization of
//   Psi(sigma) = |L_n (V_s - U(sigma))|^2 + |L_sigma (sigma - sigma_hom)|^2
// with a logarithmic barrier keeping sigma positive, plus noise injection and
// RMSE scoring.

#ifndef EITOPT_RECONSTRUCT_HPP
#define EITOPT_RECONSTRUCT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eitopt/core.hpp"
#include "eitopt/forward.hpp"
#include "eitopt/mesh.hpp"
#include "eitopt/sampler.hpp"

namespace eitopt {

// Per-measurement std eta * max(|V_i|, floor * rms(V)); the floor keeps
// near-zero measurements from getting infinite weight.
struct NoiseModel {
    double eta = 0.01;
    std::uint64_t seed = 1;
    double floor = 1e-6;

    void validate() const {
        if (!(eta > 0.0)) throw ConfigError("noise.eta must be positive");
        if (!(floor > 0.0)) throw ConfigError("noise.floor must be positive");
    }

    Eigen::VectorXd std_dev(const Eigen::VectorXd& v) const {
        validate();
        const double rms = std::sqrt(v.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, v.size())));
        const double lo = rms > 0.0 ? floor * rms : floor;
        return eta * v.cwiseAbs().cwiseMax(lo);
    }

    // Diagonal of L_n, with L_n^T L_n the inverse noise covariance.
    Eigen::VectorXd precision_factor(const Eigen::VectorXd& v) const { return std_dev(v).cwiseInverse(); }
};

inline Eigen::VectorXd add_noise(const Eigen::VectorXd& v, const NoiseModel& noise) {
    if (!v.allFinite()) throw EitError("add_noise: voltages must be finite");
    const Eigen::VectorXd sd = noise.std_dev(v);
    Rng rng = make_rng(derive_seed(noise.seed, "noise"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd out = v;
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] += sd[i] * normal(rng);
    return out;
}

// Weighted residual |L_n (V_s - U(c))|^2 of the constant field c.
inline double homogeneous_residual(double c, const Eigen::VectorXd& v_s, const TriangularMesh& mesh,
                                   const ContactImpedances& z, const StimulationProtocol& protocol,
                                   const Eigen::VectorXd& ln) {
    const NodalField s = NodalField::Constant(static_cast<Eigen::Index>(mesh.node_count()), c);
    return ln.cwiseProduct(v_s - solve_forward(mesh, s, z, protocol).voltages).squaredNorm();
}

struct HomogeneousSearch {
    double lo = 1e-4;
    double hi = 1e4;
    std::size_t grid = 81;  // log-spaced scan points
    double rel_tol = 1e-10;
};

// Scalar sigma minimizing the weighted residual over constant fields: a
// log-spaced scan brackets the minimum, golden-section search refines it.
inline double best_homogeneous(const Eigen::VectorXd& v_s, const TriangularMesh& mesh, const ContactImpedances& z,
                               const StimulationProtocol& protocol, const Eigen::VectorXd& ln,
                               const HomogeneousSearch& search = {}) {
    if (!v_s.allFinite()) throw EitError("best_homogeneous: data must be finite");
    if (!(search.lo > 0.0) || !(search.hi > search.lo) || search.grid < 3) {
        throw ConfigError("best_homogeneous: need 0 < lo < hi and at least 3 grid points");
    }
    auto f = [&](double log_c) { return homogeneous_residual(std::exp(log_c), v_s, mesh, z, protocol, ln); };
    const double a = std::log(search.lo), b = std::log(search.hi);
    const double step = (b - a) / static_cast<double>(search.grid - 1);
    std::vector<double> values(search.grid);
    std::size_t best = 0;
    for (std::size_t i = 0; i < search.grid; ++i) {
        values[i] = f(a + step * static_cast<double>(i));
        if (values[i] < values[best]) best = i;
    }
    if (best == 0 || best + 1 == search.grid) {
        std::ostringstream msg;
        msg << "best_homogeneous: minimum at the search bound " << std::exp(a + step * static_cast<double>(best))
            << " (residual " << values[best] << " against " << values[best == 0 ? 1 : best - 1] << " next to it)";
        throw EitError(msg.str());
    }
    constexpr double kGolden = 0.3819660112501051;
    double lo = a + step * static_cast<double>(best - 1), hi = a + step * static_cast<double>(best + 1);
    double x1 = lo + kGolden * (hi - lo), x2 = hi - kGolden * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > search.rel_tol) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + kGolden * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - kGolden * (hi - lo);
            f2 = f(x2);
        }
    }
    return std::exp(f1 < f2 ? x1 : x2);
}

struct ReconstructionOptions {
    std::size_t max_iterations = 50;
    double rel_tol = 1e-6;
    std::size_t barrier_cycles = 3;
    double barrier_initial = 1e-2;  // times the initial cost
    double barrier_decay = 10.0;
    double barrier_threshold = 0.1;  // barrier acts below this fraction of sigma_hom
    std::size_t max_backtracks = 40;
    HomogeneousSearch homogeneous;
    // Fingerprint of the mesh used to simulate the data, if known; the
    // inversion refuses to run on the same mesh.
    std::optional<std::uint64_t> data_mesh_id;
};

struct ReconstructionResult {
    NodalField sigma_hat;
    double sigma_hom = 0.0;
    std::size_t iterations = 0;
    double final_cost = 0.0;
    std::vector<double> cost;        // Psi + barrier after each accepted iteration, starting at sigma_hom
    std::vector<double> psi;         // Psi alone at the same iterates
    std::vector<double> step_sizes;  // accepted line-search step lengths
    bool stalled = false;            // a line search failed to decrease the cost
};

inline ReconstructionResult reconstruct(const Eigen::VectorXd& v_s, const TriangularMesh& mesh,
                                        const SmoothnessPrior& prior, const NoiseModel& noise,
                                        const ContactImpedances& z, const StimulationProtocol& protocol,
                                        const ReconstructionOptions& opts = {}) {
    if (opts.data_mesh_id && *opts.data_mesh_id == mesh.fingerprint()) {
        throw EitError("reconstruct: inversion mesh is the data simulation mesh (inverse crime)");
    }
    if (static_cast<std::size_t>(prior.size()) != mesh.node_count()) throw EitError("reconstruct: prior does not match the mesh");
    if (static_cast<std::size_t>(v_s.size()) != protocol.measurement_count()) {
        throw EitError("reconstruct: data length does not match the protocol");
    }
    const Eigen::VectorXd ln = noise.precision_factor(v_s);
    const Eigen::VectorXd w = ln.cwiseAbs2();
    const Eigen::MatrixXd P = prior.precision();

    ReconstructionResult out;
    out.sigma_hom = best_homogeneous(v_s, mesh, z, protocol, ln, opts.homogeneous);
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    const NodalField center = NodalField::Constant(n, out.sigma_hom);

    auto psi = [&](const NodalField& s, Eigen::VectorXd* voltages) {
        Eigen::VectorXd u = solve_forward(mesh, s, z, protocol).voltages;
        const Eigen::VectorXd d = s - center;
        const double c = w.dot((v_s - u).cwiseAbs2()) + d.dot(P * d);
        if (voltages) *voltages = std::move(u);
        return c;
    };
    // One-sided barrier, zero above tau and C1 there: -log(s/tau) + s/tau - 1 below.
    const double tau = opts.barrier_threshold * out.sigma_hom;
    auto barrier = [tau](const NodalField& s) {
        double b = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s[i] < tau) b += -std::log(s[i] / tau) + s[i] / tau - 1.0;
        return b;
    };

    NodalField sigma = center;
    double psi_now = psi(sigma, nullptr);
    if (!std::isfinite(psi_now)) throw EitError("reconstruct: initial cost is not finite");
    double mu = opts.barrier_initial * std::max(psi_now, std::numeric_limits<double>::min());
    double cost = psi_now + mu * barrier(sigma);
    out.cost.push_back(cost);
    out.psi.push_back(psi_now);

    for (std::size_t cycle = 0; cycle < opts.barrier_cycles && out.iterations < opts.max_iterations; ++cycle) {
        while (out.iterations < opts.max_iterations) {
            const auto fj = forward_and_jacobian(mesh, sigma, z, protocol);
            const Eigen::VectorXd r = v_s - fj.forward.voltages;
            const Eigen::MatrixXd& J = fj.jacobian;
            // Half gradient and Gauss-Newton Hessian of Psi + mu * barrier.
            Eigen::VectorXd g = -J.transpose() * w.cwiseProduct(r) + P * (sigma - center);
            Eigen::MatrixXd H = J.transpose() * w.asDiagonal() * J + P;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (sigma[i] < tau) {
                    g[i] += 0.5 * mu * (1.0 / tau - 1.0 / sigma[i]);
                    H(i, i) += 0.5 * mu / (sigma[i] * sigma[i]);
                }
            }
            const Eigen::LLT<Eigen::MatrixXd> llt(H);
            if (llt.info() != Eigen::Success) throw EitError("reconstruct: Gauss-Newton system is not positive definite");
            const Eigen::VectorXd dir = llt.solve(-g);
            if (!dir.allFinite()) throw EitError("reconstruct: non-finite search direction");

            // Largest step keeping every node positive, with a safety margin.
            double t = 1.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (dir[i] < 0.0) t = std::min(t, -0.99 * sigma[i] / dir[i]);
            bool accepted = false;
            NodalField trial;
            double trial_psi = psi_now, trial_cost = cost;
            for (std::size_t bt = 0; bt < opts.max_backtracks; ++bt, t *= 0.5) {
                trial = sigma + t * dir;
                trial_psi = psi(trial, nullptr);
                trial_cost = trial_psi + mu * barrier(trial);
                if (std::isfinite(trial_cost) && trial_cost < cost) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                out.stalled = true;
                break;
            }
            const double change = (cost - trial_cost) / std::max(cost, std::numeric_limits<double>::min());
            sigma = std::move(trial);
            cost = trial_cost;
            psi_now = trial_psi;
            out.cost.push_back(cost);
            out.psi.push_back(psi_now);
            out.step_sizes.push_back(t);
            ++out.iterations;
            if (change < opts.rel_tol) break;
        }
        // Lowering the weight of a nonnegative barrier cannot raise the cost.
        mu /= opts.barrier_decay;
        cost = psi_now + mu * barrier(sigma);
    }
    if (!(sigma.minCoeff() > 0.0)) throw EitError("reconstruct: positivity lost");
    out.sigma_hat = std::move(sigma);
    out.final_cost = cost;
    return out;
}

// RMSE between sigma_hat and the fine-mesh truth interpolated to the coarse
// mesh, as a percentage of the interpolated truth's mean.
inline double rmse_percent(const NodalField& sigma_hat, const NodalField& truth_fine, const TriangularMesh& fine,
                           const TriangularMesh& coarse) {
    if (static_cast<std::size_t>(sigma_hat.size()) != coarse.node_count()) throw EitError("rmse: estimate does not match the mesh");
    const NodalField truth = interpolate_field(truth_fine, fine, coarse);
    const double rmse = std::sqrt((truth - sigma_hat).squaredNorm() / static_cast<double>(truth.size()));
    return 100.0 * rmse / truth.mean();
}

}  // namespace eitopt

#endif  // EITOPT_RECONSTRUCT_HPP
