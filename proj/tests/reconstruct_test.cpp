#include <gtest/gtest.h>

#include <cmath>

#include "eitopt/reconstruct.hpp"

using namespace eitopt;

namespace {

const auto kSquare = PolygonDomain::square();
const auto kZ = ContactImpedances::uniform(12, 1e-5);
const auto kProtocol = StimulationProtocol::against_first(12);

TriangularMesh mesh(double h, std::uint64_t seed) {
    return generate_mesh(kSquare, uniform_layout(kSquare, {3, 3, 3, 3}, 0.075), h, h / 2, seed);
}

NodalField constant(const TriangularMesh& m, double c) {
    return NodalField::Constant(static_cast<Eigen::Index>(m.node_count()), c);
}

}  // namespace

TEST(Noise, VanishingEtaLeavesDataUnchanged) {
    const Eigen::VectorXd v = (Eigen::VectorXd(4) << 1.0, -2.0, 0.0, 3e-3).finished();
    const Eigen::VectorXd vs = add_noise(v, {1e-300, 3});
    EXPECT_LE((vs - v).cwiseAbs().maxCoeff(), 1e-290);
    EXPECT_THROW(add_noise(v, {0.0, 3}), ConfigError);
}

TEST(Noise, EmpiricalRelativeStdMatchesEta) {
    Rng rng = make_rng(4, 0);
    Eigen::VectorXd v(10000);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = uniform_in(rng, 0.5, 2.0) * (i % 2 ? 1 : -1);
    for (double eta : {0.01, 0.05, 0.1}) {
        const Eigen::VectorXd e = (add_noise(v, {eta, 9}) - v).cwiseQuotient(v.cwiseAbs());
        const double sd = std::sqrt((e.array() - e.mean()).square().sum() / (e.size() - 1.0));
        EXPECT_NEAR(sd, eta, 0.05 * eta);
    }
}

TEST(Noise, SeedsControlTheDraw) {
    const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(20, 1.0, 2.0);
    EXPECT_EQ(add_noise(v, {0.05, 1}), add_noise(v, {0.05, 1}));
    EXPECT_NE(add_noise(v, {0.05, 1}), add_noise(v, {0.05, 2}));
}

TEST(Noise, FloorAppliesToTinyMeasurements) {
    const Eigen::VectorXd v = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
    const NoiseModel n{0.1, 1};
    const double rms = std::sqrt(0.5);
    EXPECT_DOUBLE_EQ(n.std_dev(v)[0], 0.1 * 1e-6 * rms);
    EXPECT_DOUBLE_EQ(n.precision_factor(v)[1], 10.0);
}

TEST(Homogeneous, RecoversConstantTruth) {
    const auto m = mesh(0.15, 1);
    const auto v = solve_forward(m, constant(m, 2.3), kZ, kProtocol).voltages;
    const Eigen::VectorXd ln = NoiseModel{0.01, 1}.precision_factor(v);
    EXPECT_NEAR(best_homogeneous(v, m, kZ, kProtocol, ln), 2.3, 2.3e-6);
    EXPECT_THROW(best_homogeneous(v / 1e9, m, kZ, kProtocol, ln), EitError);
}

TEST(Homogeneous, MatchesGridScan) {
    const auto sim = mesh(0.1, 2);
    const auto inv = mesh(0.15, 3);
    NodalField truth(static_cast<Eigen::Index>(sim.node_count()));
    for (std::size_t i = 0; i < sim.node_count(); ++i) truth[i] = 1.0 + sim.nodes[i].x + 0.5 * sim.nodes[i].y;
    const NoiseModel noise{0.02, 5};
    const Eigen::VectorXd vs = add_noise(solve_forward(sim, truth, kZ, kProtocol).voltages, noise);
    const Eigen::VectorXd ln = noise.precision_factor(vs);
    const double found = best_homogeneous(vs, inv, kZ, kProtocol, ln);

    double best = 0.0, best_f = std::numeric_limits<double>::infinity();
    const double cell = (10.0 - 0.1) / 999.0;
    for (int i = 0; i < 1000; ++i) {
        const double c = 0.1 + cell * i;
        const double f = ln.cwiseProduct(vs - solve_forward(inv, constant(inv, c), kZ, kProtocol).voltages).squaredNorm();
        if (f < best_f) best = c, best_f = f;
    }
    EXPECT_LE(std::abs(found - best), cell);
    EXPECT_GT(found, 0.0);
}

TEST(Reconstruct, HomogeneousDataStaysAtTheHomogeneousEstimate) {
    // Zero residual at the prior mean needs data from the inversion model itself.
    const auto inv = mesh(0.15, 3);
    const auto v = solve_forward(inv, constant(inv, 1.7), kZ, kProtocol).voltages;
    const auto prior = build_covariance(inv, PriorParams::defaults_for(kSquare));
    const auto r = reconstruct(v, inv, prior, {0.01, 1}, kZ, kProtocol);
    EXPECT_NEAR(r.sigma_hom, 1.7, 1.7e-6);
    EXPECT_LE((r.sigma_hat.array() - r.sigma_hom).abs().maxCoeff(), 0.01 * r.sigma_hom);
}

TEST(Reconstruct, CostDecreasesAndEstimateIsPositive) {
    const auto sim = mesh(0.05, 2);
    const auto inv = mesh(0.1, 3);
    const auto pp = PriorParams::defaults_for(kSquare);
    NodalField truth = draw_samples(build_covariance(sim, pp), 1, 17)[0].values;
    // Push part of the field close to zero so the barrier has work to do.
    truth = rescale_to_range(truth, 0.02, 2.0);
    const NoiseModel noise{0.05, 3};
    const Eigen::VectorXd vs = add_noise(solve_forward(sim, truth, kZ, kProtocol).voltages, noise);
    ReconstructionOptions opts;
    opts.data_mesh_id = sim.fingerprint();
    const auto prior = build_covariance(inv, pp);
    const auto r = reconstruct(vs, inv, prior, noise, kZ, kProtocol, opts);
    EXPECT_GT(r.sigma_hat.minCoeff(), 0.0);
    ASSERT_GE(r.cost.size(), 2u);
    for (std::size_t i = 1; i < r.cost.size(); ++i) EXPECT_LE(r.cost[i], r.cost[i - 1]);
    EXPECT_LE(r.iterations, opts.max_iterations);
    EXPECT_LT(r.cost.back(), r.cost.front());
    EXPECT_LT(rmse_percent(r.sigma_hat, truth, sim, inv), rmse_percent(constant(inv, r.sigma_hom), truth, sim, inv));

    const auto again = reconstruct(vs, inv, prior, noise, kZ, kProtocol, opts);
    EXPECT_EQ(again.sigma_hat, r.sigma_hat);
}

TEST(Reconstruct, RefusesTheDataMesh) {
    const auto m = mesh(0.15, 3);
    const auto v = solve_forward(m, constant(m, 1.0), kZ, kProtocol).voltages;
    ReconstructionOptions opts;
    opts.data_mesh_id = m.fingerprint();
    EXPECT_THROW(reconstruct(v, m, build_covariance(m, PriorParams::defaults_for(kSquare)), {0.01, 1}, kZ, kProtocol,
                             opts),
                 EitError);
}

TEST(Rmse, ClosedFormsAndDirectOracle) {
    const auto fine = mesh(0.075, 1);
    const auto coarse = mesh(0.15, 2);
    EXPECT_NEAR(rmse_percent(constant(coarse, 2.5), constant(fine, 2.0), fine, coarse), 25.0, 1e-12);

    NodalField truth(static_cast<Eigen::Index>(fine.node_count()));
    for (std::size_t i = 0; i < fine.node_count(); ++i) truth[i] = 1.0 + fine.nodes[i].x * fine.nodes[i].y;
    const NodalField on_coarse = interpolate_field(truth, fine, coarse);
    EXPECT_EQ(rmse_percent(on_coarse, truth, fine, coarse), 0.0);

    NodalField est = on_coarse;
    for (Eigen::Index i = 0; i < est.size(); ++i) est[i] += 0.01 * std::sin(3.0 * i);
    double sum = 0.0, mean = 0.0;
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        sum += (on_coarse[i] - est[i]) * (on_coarse[i] - est[i]);
        mean += on_coarse[i];
    }
    mean /= est.size();
    const double expected = 100.0 * std::sqrt(sum / est.size()) / mean;
    EXPECT_NEAR(rmse_percent(est, truth, fine, coarse), expected, 1e-12 * expected);
}
