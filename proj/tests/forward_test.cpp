#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/LU>

#include <cmath>
#include <random>

#include "eitopt/forward.hpp"
#include "fd_oracle.hpp"

using namespace eitopt;

namespace {

// Unit square split along the diagonal, one electrode on the bottom edge and
// one on the top edge.
TriangularMesh two_triangles() {
    TriangularMesh m;
    m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    m.electrode_edges = {{{0, 1}}, {{2, 3}}};
    m.h_max = m.h_min = 1.5;
    return m;
}

TriangularMesh square_mesh(double h, std::uint64_t layout_seed = 0) {
    const auto d = PolygonDomain::square();
    const auto layout = layout_seed ? place_random_electrodes(d, {3, 3, 3, 3}, 0.075, 0.075, layout_seed)
                                    : uniform_layout(d, {3, 3, 3, 3}, 0.075);
    return generate_mesh(d, layout, h, h / 2, 1);
}

NodalField smooth_field(const TriangularMesh& m) {
    NodalField s(static_cast<Eigen::Index>(m.node_count()));
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        const Point p = m.nodes[i];
        s[i] = 1.0 + 0.5 * std::exp(-8.0 * ((p.x - 0.35) * (p.x - 0.35) + (p.y - 0.6) * (p.y - 0.6)));
    }
    return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST(Assembly, MatchesDenseHandAssembly) {
    const auto m = two_triangles();
    NodalField sigma(4);
    sigma << 1.0, 2.0, 3.0, 4.0;
    ContactImpedances z;
    z.z = Eigen::Vector2d(0.5, 2.0);
    const Eigen::MatrixXd A(assemble_full_system(m, sigma, z));

    // Oracle: basis gradients from the inverse of the affine interpolation
    // matrix, boundary integrals by Simpson's rule (exact for quadratics).
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 6);
    for (const auto& t : m.triangles) {
        Eigen::Matrix3d P;
        for (int i = 0; i < 3; ++i) P.row(i) << 1.0, m.nodes[t[i]].x, m.nodes[t[i]].y;
        const Eigen::Matrix3d C = P.inverse();  // column i: coefficients of phi_i
        const double area = 0.5 * std::abs(P.determinant());
        const double s = (sigma[t[0]] + sigma[t[1]] + sigma[t[2]]) / 3.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                B(t[i], t[j]) += s * area * (C(1, i) * C(1, j) + C(2, i) * C(2, j));
    }
    for (int l = 0; l < 2; ++l) {
        const auto e = m.electrode_edges[l][0];
        const double len = distance(m.nodes[e[0]], m.nodes[e[1]]);
        auto phi = [](int which, double t) { return which == 0 ? 1.0 - t : t; };
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                const double integral =
                    len / 6.0 * (phi(a, 0) * phi(b, 0) + 4 * phi(a, 0.5) * phi(b, 0.5) + phi(a, 1) * phi(b, 1));
                B(e[a], e[b]) += integral / z.z[l];
            }
            const double integral = len / 6.0 * (phi(a, 0) + 4 * phi(a, 0.5) + phi(a, 1));
            B(e[a], 4 + l) -= integral / z.z[l];
            B(4 + l, e[a]) -= integral / z.z[l];
        }
        B(4 + l, 4 + l) += len / z.z[l];
    }
    EXPECT_LE((A - B).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assembly, SymmetricAndPositiveDefiniteAfterGrounding) {
    const auto m = square_mesh(0.075);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    const Eigen::MatrixXd R(assemble_system(m, NodalField::Ones(static_cast<Eigen::Index>(m.node_count())), z));
    EXPECT_LE((R - R.transpose()).cwiseAbs().maxCoeff(), 1e-12 * R.cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Assembly, JointScalingDoublesTheSystem) {
    const auto m = square_mesh(0.075);
    const NodalField s = smooth_field(m);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    const auto z2 = ContactImpedances::uniform(12, 0.5e-5);
    const SparseMatrix A = assemble_full_system(m, s, z);
    const SparseMatrix A2 = assemble_full_system(m, 2.0 * s, z2);
    EXPECT_LE(Eigen::MatrixXd(A2 - 2.0 * A).cwiseAbs().maxCoeff(), 1e-10 * Eigen::MatrixXd(A).cwiseAbs().maxCoeff());
}

TEST(Assembly, RejectsBadInputs) {
    const auto m = square_mesh(0.075);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    NodalField s = NodalField::Ones(static_cast<Eigen::Index>(m.node_count()));
    s[3] = 0.0;
    EXPECT_THROW(assemble_system(m, s, z), EitError);
    EXPECT_THROW(assemble_system(m, NodalField::Ones(3), z), EitError);
    EXPECT_THROW(ContactImpedances::uniform(12, -1.0), EitError);

    // A floating triangle that touches no electrode.
    auto floating = two_triangles();
    floating.nodes.push_back({5, 5});
    floating.nodes.push_back({6, 5});
    floating.nodes.push_back({5, 6});
    floating.triangles.push_back({4, 5, 6});
    ContactImpedances z2;
    z2.z = Eigen::Vector2d(1, 1);
    EXPECT_THROW(assemble_system(floating, NodalField::Ones(7), z2), EitError);
}

TEST(Protocol, ShapeAndConservation) {
    const auto p = StimulationProtocol::against_first(12);
    EXPECT_EQ(p.measurement_count(), 132u);
    EXPECT_EQ(p.injections.cols(), 11);
    for (Eigen::Index j = 0; j < p.injections.cols(); ++j) EXPECT_EQ(p.injections.col(j).sum(), 0.0);
    EXPECT_EQ(p.injections(3, 2), 1.0);
    EXPECT_EQ(p.injections(0, 2), -1.0);
}

TEST(Forward, MeasurementsMatchElectrodePotentials) {
    const auto m = square_mesh(0.075);
    const auto p = StimulationProtocol::against_first(12);
    const auto sol = solve_forward(m, smooth_field(m), ContactImpedances::uniform(12, 1e-5), p);
    ASSERT_EQ(sol.voltages.size(), 132);
    EXPECT_EQ(sol.voltages, p.measure(sol.electrode_potentials));
    EXPECT_EQ(sol.voltages[2 * 12 + 5], sol.electrode_potentials(5, 2) - sol.electrode_potentials(6, 2));
    EXPECT_EQ(sol.voltages[1 * 12 + 11], sol.electrode_potentials(11, 1) - sol.electrode_potentials(0, 1));
    // Zero-mean electrode potentials.
    EXPECT_LE(sol.electrode_potentials.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Forward, JointScalingLaw) {
    const auto m = square_mesh(0.075);
    const auto p = StimulationProtocol::against_first(12);
    const NodalField s = smooth_field(m);
    const double c = 3.7;
    const auto v = solve_forward(m, s, ContactImpedances::uniform(12, 1e-5), p).voltages;
    const auto vc = solve_forward(m, c * s, ContactImpedances::uniform(12, 1e-5 / c), p).voltages;
    EXPECT_LE((vc - v / c).norm() / (v / c).norm(), 1e-10);
}

TEST(Forward, ReciprocityExhaustive) {
    const auto m = square_mesh(0.09, 21);
    ASSERT_LE(m.node_count(), 300u);
    const auto p = StimulationProtocol::against_first(12);
    const CemModel model(m, smooth_field(m), ContactImpedances::uniform(12, 1e-5));
    double worst = 0.0;
    for (std::size_t a = 0; a < 12; ++a)
        for (std::size_t b = a + 1; b < 12; ++b)
            worst = std::max(worst, rel(model.transfer(p.pair_pattern(a), p.pair_pattern(b)),
                                        model.transfer(p.pair_pattern(b), p.pair_pattern(a))));
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pick(0, 11);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd drive = Eigen::VectorXd::Zero(12), meas = Eigen::VectorXd::Zero(12);
        int a = pick(rng), b = pick(rng), c = pick(rng), d = pick(rng);
        while (b == a) b = pick(rng);
        while (d == c) d = pick(rng);
        drive[a] = 1;
        drive[b] = -1;
        meas[c] = 1;
        meas[d] = -1;
        worst = std::max(worst, rel(model.transfer(drive, meas), model.transfer(meas, drive)));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Forward, RotatedMeshGivesRotatedTransfers) {
    const auto m = square_mesh(0.075);
    auto r = m;
    for (auto& q : r.nodes) q = {1.0 - q.y, q.x};  // quarter turn about the centre
    // The electrode on side s moves to side s + 1.
    for (std::size_t e = 0; e < 12; ++e) r.electrode_edges[(e + 3) % 12] = m.electrode_edges[e];
    const auto z = ContactImpedances::uniform(12, 1e-5);
    const auto p = StimulationProtocol::against_first(12);
    const CemModel a(m, NodalField::Ones(static_cast<Eigen::Index>(m.node_count())), z);
    const CemModel b(r, NodalField::Ones(static_cast<Eigen::Index>(r.node_count())), z);
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t j = 0; j < 12; ++j) {
            EXPECT_LE(rel(a.transfer(p.pair_pattern(i), p.pair_pattern(j)),
                          b.transfer(p.pair_pattern((i + 3) % 12), p.pair_pattern((j + 3) % 12))),
                      1e-8);
        }
    }
}

TEST(Forward, ConvergesUnderRefinement) {
    const auto d = PolygonDomain::square();
    const auto layout = uniform_layout(d, {3, 3, 3, 3}, 0.075);
    const auto p = StimulationProtocol::against_first(12);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    std::vector<Eigen::VectorXd> v;
    for (double h : {0.15, 0.075, 0.0375, 0.01875}) {
        const auto m = generate_mesh(d, layout, h, h / 2, 1);
        v.push_back(solve_forward(m, smooth_field(m), z, p).voltages);
    }
    const double d1 = (v[0] - v[1]).norm(), d2 = (v[1] - v[2]).norm(), d3 = (v[2] - v[3]).norm();
    EXPECT_GT(d1, d2);
    EXPECT_GT(d2, d3);
}

TEST(Jacobian, MatchesCentralDifferences) {
    const auto m = square_mesh(0.075, 5);
    const auto p = StimulationProtocol::against_first(12);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    const NodalField s = smooth_field(m);
    const Eigen::MatrixXd J = jacobian(m, s, z, p);
    ASSERT_EQ(J.rows(), 132);
    ASSERT_EQ(J.cols(), static_cast<Eigen::Index>(m.node_count()));
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<Eigen::Index> row(0, J.rows() - 1), col(0, J.cols() - 1);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index r = row(rng), c = col(rng);
        const double fd = oracle::central_difference(m, s, z, p, r, c, 1e-6 * s[c]);
        worst = std::max(worst, rel(fd, J(r, c)));
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Jacobian, FiniteDifferenceOracleAgreesWithPlainSubtraction) {
    // At a coarse step plain subtraction is accurate enough to cross-check the oracle.
    const auto m = square_mesh(0.075, 5);
    const auto p = StimulationProtocol::against_first(12);
    const auto z = ContactImpedances::uniform(12, 1e-5);
    const NodalField s = smooth_field(m);
    const Eigen::Index r = 40, c = 100;
    const double h = 1e-3 * s[c];
    NodalField sp = s, sm = s;
    sp[c] += h;
    sm[c] -= h;
    const double plain = (solve_forward(m, sp, z, p).voltages[r] - solve_forward(m, sm, z, p).voltages[r]) / (2 * h);
    EXPECT_LE(rel(plain, oracle::central_difference(m, s, z, p, r, c, h)), 1e-6);
}

TEST(Hessian, SymmetricPsdAndHandChecked) {
    Eigen::MatrixXd J(3, 2);
    J << 1, 2, 3, 4, 5, 6;
    Eigen::MatrixXd expected(2, 2);
    expected << 1 + 9 + 25, 2 + 12 + 30, 2 + 12 + 30, 4 + 16 + 36;
    EXPECT_EQ(hessian(J), expected);

    const auto m = square_mesh(0.075);
    const Eigen::MatrixXd H = hessian(jacobian(m, smooth_field(m), ContactImpedances::uniform(12, 1e-5),
                                               StimulationProtocol::against_first(12)));
    EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12 * H.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff(), -1e-10);
    EXPECT_GE(condition_number(H), 1.0);
}

TEST(ConditionNumber, SimpleCases) {
    EXPECT_DOUBLE_EQ(condition_number(Eigen::MatrixXd::Identity(5, 5)), 1.0);
    EXPECT_NEAR(condition_number(Eigen::Vector2d(10, 0.1).asDiagonal().toDenseMatrix()), 100.0, 1e-12);
    EXPECT_TRUE(std::isinf(condition_number(Eigen::Vector2d(1, 0).asDiagonal().toDenseMatrix())));
    EXPECT_THROW(condition_number(Eigen::MatrixXd(2, 3)), EitError);
}

TEST(ConditionNumber, MatchesSvdOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(20, 20);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = g(rng);
    const Eigen::MatrixXd spd = X * X.transpose() + 0.1 * Eigen::MatrixXd::Identity(20, 20);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(spd);
    const auto s = svd.singularValues();
    EXPECT_LE(rel(condition_number(spd), s(0) / s(19)), 1e-8);

    Eigen::JacobiSVD<Eigen::MatrixXd> svx(X);
    EXPECT_LE(rel(condition_number(X), svx.singularValues()(0) / svx.singularValues()(19)), 1e-8);
}
