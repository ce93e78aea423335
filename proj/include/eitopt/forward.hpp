// eitopt - electrode placement optimization for 2D EIT
//
// Complete electrode model with piecewise-linear nodal basis functions.
// Units: currents in mA, conductivity in mS/cm, lengths in cm, potentials in V.

#ifndef EITOPT_FORWARD_HPP
#define EITOPT_FORWARD_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eitopt/core.hpp"
#include "eitopt/mesh.hpp"

namespace eitopt {

struct ContactImpedances {
    Eigen::VectorXd z;

    static ContactImpedances uniform(std::size_t electrodes, double value) {
        ContactImpedances c;
        c.z = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(electrodes), value);
        c.validate();
        return c;
    }

    void validate() const {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (!(z[i] > 0.0) || !std::isfinite(z[i])) throw EitError("contact impedance must be positive");
        }
    }

    std::size_t size() const { return static_cast<std::size_t>(z.size()); }
};

// k-1 injections of +amplitude at electrode j+1 against electrode 1, each
// read out as k cyclic adjacent differences U_i - U_{i+1}.
struct StimulationProtocol {
    std::size_t electrodes = 0;
    double amplitude = 1.0;
    Eigen::MatrixXd injections;  // k x (k-1)

    static StimulationProtocol against_first(std::size_t k, double amplitude = 1.0) {
        if (k < 2) throw ConfigError("protocol: at least two electrodes are required");
        StimulationProtocol p;
        p.electrodes = k;
        p.amplitude = amplitude;
        const auto n = static_cast<Eigen::Index>(k);
        p.injections = Eigen::MatrixXd::Zero(n, n - 1);
        for (Eigen::Index j = 0; j + 1 < n; ++j) {
            p.injections(j + 1, j) = amplitude;
            p.injections(0, j) = -amplitude;
        }
        return p;
    }

    std::size_t injection_count() const { return electrodes - 1; }
    std::size_t measurement_count() const { return electrodes * (electrodes - 1); }

    // Current pattern whose potential field is the adjoint of pair (i, i+1).
    Eigen::VectorXd pair_pattern(std::size_t i) const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(electrodes));
        m[static_cast<Eigen::Index>(i)] += 1.0;
        m[static_cast<Eigen::Index>((i + 1) % electrodes)] -= 1.0;
        return m;
    }

    // Measurement order: injection-major, adjacent pair minor.
    Eigen::VectorXd measure(const Eigen::MatrixXd& electrode_potentials) const {
        const std::size_t k = electrodes;
        Eigen::VectorXd v(static_cast<Eigen::Index>(measurement_count()));
        for (std::size_t j = 0; j < injection_count(); ++j) {
            for (std::size_t i = 0; i < k; ++i) {
                v[static_cast<Eigen::Index>(j * k + i)] =
                    electrode_potentials(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                    electrode_potentials(static_cast<Eigen::Index>((i + 1) % k), static_cast<Eigen::Index>(j));
            }
        }
        return v;
    }
};

struct ForwardSolution {
    Eigen::VectorXd voltages;              // k(k-1)
    Eigen::MatrixXd electrode_potentials;  // k x (k-1)
    Eigen::MatrixXd interior_potentials;   // nodes x (k-1)
};

using SparseMatrix = Eigen::SparseMatrix<double>;

namespace detail {

struct ElementGeometry {
    double area;
    std::array<double, 3> gx;  // gradients of the barycentric basis functions
    std::array<double, 3> gy;
};

inline ElementGeometry element_geometry(const TriangularMesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    const Point p[3] = {mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
    ElementGeometry g{};
    const double twice = orient2d(p[0], p[1], p[2]);
    g.area = 0.5 * twice;
    for (int i = 0; i < 3; ++i) {
        const Point& a = p[(i + 1) % 3];
        const Point& b = p[(i + 2) % 3];
        g.gx[i] = (a.y - b.y) / twice;
        g.gy[i] = (b.x - a.x) / twice;
    }
    return g;
}

inline void check_inputs(const TriangularMesh& mesh, const NodalField& sigma, const ContactImpedances& z) {
    if (static_cast<std::size_t>(sigma.size()) != mesh.node_count()) {
        throw EitError("conductivity has " + std::to_string(sigma.size()) + " values for " +
                       std::to_string(mesh.node_count()) + " nodes");
    }
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
            throw EitError("conductivity must be positive and finite (node " + std::to_string(i) + ")");
        }
    }
    if (z.size() != mesh.electrode_count()) throw EitError("contact impedance count does not match electrodes");
    if (mesh.electrode_count() < 2) throw EitError("at least two electrodes are required");
    z.validate();
}

// Every connected component must touch an electrode, otherwise the
// grounded system is singular.
inline void check_connectivity(const TriangularMesh& mesh) {
    std::vector<std::size_t> parent(mesh.node_count());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& t : mesh.triangles) {
        parent[find(t[1])] = find(t[0]);
        parent[find(t[2])] = find(t[0]);
    }
    std::vector<char> grounded(mesh.node_count(), 0);
    for (const auto& edges : mesh.electrode_edges)
        for (const auto& e : edges) grounded[find(e[0])] = 1;
    for (std::size_t n = 0; n < mesh.node_count(); ++n) {
        if (!grounded[find(n)]) throw EitError("singular assembly: mesh component without an electrode");
    }
}

}  // namespace detail

// Pre-grounding CEM system of size nodes + k: domain stiffness plus electrode
// boundary terms weighted by 1/z.
inline SparseMatrix assemble_full_system(const TriangularMesh& mesh, const NodalField& sigma,
                                         const ContactImpedances& z) {
    detail::check_inputs(mesh, sigma, z);
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    const auto k = static_cast<Eigen::Index>(mesh.electrode_count());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.triangle_count() + 8 * 16 * static_cast<std::size_t>(k));
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto g = detail::element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        const double s = (sigma[static_cast<Eigen::Index>(tri[0])] + sigma[static_cast<Eigen::Index>(tri[1])] +
                          sigma[static_cast<Eigen::Index>(tri[2])]) /
                         3.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                trip.emplace_back(static_cast<Eigen::Index>(tri[i]), static_cast<Eigen::Index>(tri[j]),
                                  s * g.area * (g.gx[i] * g.gx[j] + g.gy[i] * g.gy[j]));
            }
    }
    for (Eigen::Index l = 0; l < k; ++l) {
        const double inv_z = 1.0 / z.z[l];
        double length = 0.0;
        for (const auto& e : mesh.electrode_edges[static_cast<std::size_t>(l)]) {
            const auto a = static_cast<Eigen::Index>(e[0]);
            const auto b = static_cast<Eigen::Index>(e[1]);
            const double len = distance(mesh.nodes[e[0]], mesh.nodes[e[1]]);
            length += len;
            trip.emplace_back(a, a, inv_z * len / 3.0);
            trip.emplace_back(b, b, inv_z * len / 3.0);
            trip.emplace_back(a, b, inv_z * len / 6.0);
            trip.emplace_back(b, a, inv_z * len / 6.0);
            trip.emplace_back(a, n + l, -inv_z * len / 2.0);
            trip.emplace_back(b, n + l, -inv_z * len / 2.0);
            trip.emplace_back(n + l, a, -inv_z * len / 2.0);
            trip.emplace_back(n + l, b, -inv_z * len / 2.0);
        }
        trip.emplace_back(n + l, n + l, inv_z * length);
    }
    SparseMatrix A(n + k, n + k);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// Basis for zero-mean electrode potentials: U = C b with columns e_1 - e_{j+1}.
inline Eigen::MatrixXd grounding_basis(std::size_t k) {
    const auto n = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n - 1);
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        C(0, j) = 1.0;
        C(j + 1, j) = -1.0;
    }
    return C;
}

// Grounded CEM matrix R(sigma) of size nodes + k - 1; its inverse maps
// electrode currents to potentials.
inline SparseMatrix assemble_system(const TriangularMesh& mesh, const NodalField& sigma,
                                    const ContactImpedances& z) {
    detail::check_connectivity(mesh);
    const SparseMatrix full = assemble_full_system(mesh, sigma, z);
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    const auto k = static_cast<Eigen::Index>(mesh.electrode_count());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(full.nonZeros()) * 2);
    // Electrode rows/columns of the full matrix fold into the reduced basis.
    std::vector<std::vector<std::pair<Eigen::Index, double>>> basis(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
        basis[0].emplace_back(j, 1.0);
        basis[static_cast<std::size_t>(j + 1)].emplace_back(j, -1.0);
    }
    Eigen::MatrixXd electrode_block = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index col = 0; col < full.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(full, col); it; ++it) {
            const Eigen::Index r = it.row();
            const Eigen::Index c = it.col();
            const double v = it.value();
            if (r < n && c < n) {
                trip.emplace_back(r, c, v);
            } else if (r < n) {
                for (auto [bj, w] : basis[static_cast<std::size_t>(c - n)]) trip.emplace_back(r, n + bj, w * v);
            } else if (c < n) {
                for (auto [bj, w] : basis[static_cast<std::size_t>(r - n)]) trip.emplace_back(n + bj, c, w * v);
            } else {
                electrode_block(r - n, c - n) += v;
            }
        }
    }
    const Eigen::MatrixXd C = grounding_basis(static_cast<std::size_t>(k));
    const Eigen::MatrixXd reduced = C.transpose() * electrode_block * C;
    for (Eigen::Index i = 0; i + 1 < k; ++i)
        for (Eigen::Index j = 0; j + 1 < k; ++j) trip.emplace_back(n + i, n + j, reduced(i, j));
    SparseMatrix R(n + k - 1, n + k - 1);
    R.setFromTriplets(trip.begin(), trip.end());
    return R;
}

// One assembled and factorized CEM system for a fixed (mesh, sigma, z).
class CemModel {
public:
    CemModel(const TriangularMesh& mesh, const NodalField& sigma, const ContactImpedances& z)
        : mesh_(&mesh), system_(assemble_system(mesh, sigma, z)), basis_(grounding_basis(mesh.electrode_count())) {
        solver_.compute(system_);
        if (solver_.info() != Eigen::Success) throw EitError("CEM factorization failed");
    }

    const SparseMatrix& system() const { return system_; }
    std::size_t node_count() const { return mesh_->node_count(); }
    std::size_t electrode_count() const { return mesh_->electrode_count(); }

    struct Fields {
        Eigen::MatrixXd nodal;      // nodes x patterns
        Eigen::MatrixXd electrode;  // k x patterns
    };

    // Potentials for each column of electrode currents (columns must sum to zero).
    Fields solve(const Eigen::MatrixXd& currents) const {
        const auto n = static_cast<Eigen::Index>(node_count());
        const auto k = static_cast<Eigen::Index>(electrode_count());
        if (currents.rows() != k) throw EitError("current pattern has the wrong number of electrodes");
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + k - 1, currents.cols());
        rhs.bottomRows(k - 1) = basis_.transpose() * currents;
        const Eigen::MatrixXd x = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success || !x.allFinite()) throw EitError("CEM solve failed");
        return {x.topRows(n), basis_ * x.bottomRows(k - 1)};
    }

    // Voltage on pair `measure` when driving `drive` (both current patterns).
    double transfer(const Eigen::VectorXd& drive, const Eigen::VectorXd& measure) const {
        return measure.dot(solve(drive).electrode.col(0));
    }

private:
    const TriangularMesh* mesh_;
    SparseMatrix system_;
    Eigen::MatrixXd basis_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

inline ForwardSolution solve_forward(const CemModel& model, const StimulationProtocol& protocol) {
    if (protocol.electrodes != model.electrode_count()) throw EitError("protocol does not match the mesh electrodes");
    auto fields = model.solve(protocol.injections);
    ForwardSolution out;
    out.voltages = protocol.measure(fields.electrode);
    out.electrode_potentials = std::move(fields.electrode);
    out.interior_potentials = std::move(fields.nodal);
    return out;
}

inline ForwardSolution solve_forward(const TriangularMesh& mesh, const NodalField& sigma,
                                     const ContactImpedances& z, const StimulationProtocol& protocol) {
    return solve_forward(CemModel(mesh, sigma, z), protocol);
}

struct ForwardWithJacobian {
    ForwardSolution forward;
    Eigen::MatrixXd jacobian;  // k(k-1) x nodes
};

// Sensitivity of every measurement to every nodal conductivity by the
// adjoint method: dV/dsigma_n = -sum_e (1/3) area_e grad(w) . grad(u), over
// elements e containing node n, with u the injection field and w the field
// driven by the measurement pattern.
inline ForwardWithJacobian forward_and_jacobian(const TriangularMesh& mesh, const NodalField& sigma,
                                                const ContactImpedances& z, const StimulationProtocol& protocol) {
    const CemModel model(mesh, sigma, z);
    ForwardWithJacobian out;
    out.forward = solve_forward(model, protocol);
    const std::size_t k = protocol.electrodes;
    const std::size_t inj = protocol.injection_count();
    Eigen::MatrixXd patterns(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) patterns.col(static_cast<Eigen::Index>(i)) = protocol.pair_pattern(i);
    const Eigen::MatrixXd adjoint = model.solve(patterns).nodal;
    const Eigen::MatrixXd& direct = out.forward.interior_potentials;

    const auto rows = static_cast<Eigen::Index>(protocol.measurement_count());
    out.jacobian = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(mesh.node_count()));
    Eigen::VectorXd ux(static_cast<Eigen::Index>(inj)), uy(static_cast<Eigen::Index>(inj));
    Eigen::VectorXd wx(static_cast<Eigen::Index>(k)), wy(static_cast<Eigen::Index>(k));
    Eigen::VectorXd contrib(rows);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto g = detail::element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        ux.setZero();
        uy.setZero();
        wx.setZero();
        wy.setZero();
        for (int a = 0; a < 3; ++a) {
            const auto node = static_cast<Eigen::Index>(tri[a]);
            ux += g.gx[a] * direct.row(node).transpose();
            uy += g.gy[a] * direct.row(node).transpose();
            wx += g.gx[a] * adjoint.row(node).transpose();
            wy += g.gy[a] * adjoint.row(node).transpose();
        }
        const double scale = -g.area / 3.0;
        for (std::size_t j = 0; j < inj; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            contrib.segment(jj * static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) =
                scale * (ux[jj] * wx + uy[jj] * wy);
        }
        for (int a = 0; a < 3; ++a) out.jacobian.col(static_cast<Eigen::Index>(tri[a])) += contrib;
    }
    return out;
}

inline Eigen::MatrixXd jacobian(const TriangularMesh& mesh, const NodalField& sigma, const ContactImpedances& z,
                                const StimulationProtocol& protocol) {
    return forward_and_jacobian(mesh, sigma, z, protocol).jacobian;
}

// Gauss-Newton Hessian approximation J^T J.
inline Eigen::MatrixXd hessian(const Eigen::MatrixXd& J) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J.cols(), J.cols());
    H.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    return H;
}

// 2-norm condition number sigma_max / sigma_min. Exactly symmetric input uses
// the symmetric eigensolver (singular values are |eigenvalues|); anything else
// goes through a divide-and-conquer SVD. Returns +inf when sigma_min is below
// 1e-300 * sigma_max.
inline double condition_number(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols() || M.rows() == 0) throw EitError("condition_number: matrix must be square");
    Eigen::VectorXd s;
    if (M == M.transpose()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        s = es.eigenvalues().cwiseAbs();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
        s = svd.singularValues();
    }
    const double hi = s.maxCoeff();
    const double lo = s.minCoeff();
    if (!(hi > 0.0) || !(lo > 1e-300 * hi)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace eitopt

#endif  // EITOPT_FORWARD_HPP
