#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_networks.hpp"
#include "tfc/dynamics.hpp"
#include "tfc/qp.hpp"
#include "tfc/reference.hpp"

#include <random>

using namespace tfc;
using namespace tfc::testing;

namespace {

Bus barrier_bus() {
  Bus b = controlled_bus(1);
  b.gamma_upper = 1.0;
  b.gamma_lower = 1.0;
  return b;  // bounds +-0.2, thresholds +-0.1
}

}  // namespace

TEST_CASE("barrier law branch selection") {
  const Bus bus = barrier_bus();
  SUBCASE("strictly inside the thresholds: zero") {
    CHECK(ref_control(bus, 0.05, 3.0) == 0.0);
    CHECK(ref_control(bus, -0.05, -3.0) == 0.0);
  }
  SUBCASE("upper branch hand evaluation") {
    // gamma*(0.2 - 0.15)/(0.15 - 0.1) = 1; min{0, 1 - 2} = -1
    CHECK(ref_control(bus, 0.15, 2.0) == doctest::Approx(-1.0).epsilon(1e-12));
    // same point with v = 0: min{0, 1} = 0
    CHECK(ref_control(bus, 0.15, 0.0) == 0.0);
  }
  SUBCASE("lower branch mirrors it") {
    // gamma*(-0.2 + 0.15)/(-0.1 + 0.15) = -1; max{0, -1 - (-2)} = 1
    CHECK(ref_control(bus, -0.15, -2.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ref_control(bus, -0.15, 0.0) == 0.0);
  }
  SUBCASE("exactly at a threshold the barrier collapses to zero") {
    CHECK(ref_control(bus, 0.1, 5.0) == 0.0);
    CHECK(ref_control(bus, -0.1, -5.0) == 0.0);
  }
  SUBCASE("controlled but unconstrained buses always return zero") {
    const Bus helper = controlled_bus(2, 1.0, 1.0, /*constrained=*/false);
    CHECK(ref_control(helper, 0.5, -10.0) == 0.0);
  }
  SUBCASE("uncontrolled bus is rejected") {
    CHECK_THROWS_AS(ref_control(plain_bus(3), 0.0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("drift term") {
  const NetworkModel model = two_bus();
  SUBCASE("all-zero inputs give zero drift") {
    CHECK(drift_term(model, Vec::Zero(1), Vec::Zero(2), Vec::Zero(2), 0) == 0.0);
  }
  SUBCASE("two-bus hand evaluation at node 2") {
    Vec f(1), w(2), p(2);
    f << 0.4;
    w << 0.0, 0.2;
    p << 0.0, 0.1;
    // inflow 0.4 + injection 0.1 - damping 1 * 0.2 = 0.3
    CHECK(drift_term(model, f, w, p, model.index_of(2)) == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("equals q_i + p_i - E_i omega_i for random inputs") {
    std::mt19937 rng(29);
    const NetworkModel net = random_connected(rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec f(net.num_lines()), w(net.num_buses()), p(net.num_buses());
    for (int k = 0; k < f.size(); ++k) f[k] = gauss(rng);
    for (int i = 0; i < w.size(); ++i) {
      w[i] = gauss(rng);
      p[i] = gauss(rng);
    }
    for (int i : net.constrained()) {
      const double expected =
          aggregate_injection(net, f, i) + p[i] - net.damping()[i] * w[i];
      CHECK(drift_term(net, f, w, p, i) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("reference from an interior equilibrium is identically zero and certifies") {
  const NetworkModel model = two_bus();
  Vec p_star(2);
  p_star << 0.5, -0.5;
  const Equilibrium eq = compute_equilibrium(model, p_star, Vec::Zero(1));
  State x0{eq.f_inf, Vec::Constant(2, eq.omega_inf)};
  const Mat pfcst = p_star.replicate(1, 50);

  RefCertificate cert;
  const HorizonTrajectory ref = generate_reference(model, x0, pfcst, 50, 0.01, &cert);
  CHECK(cert.ok);
  CHECK(ref.U.cwiseAbs().maxCoeff() == 0.0);
  // the state holds at the equilibrium
  CHECK((ref.Omega.col(50).array() - eq.omega_inf).abs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate horizon is rejected") {
  const NetworkModel model = two_bus();
  const State x0{Vec::Zero(1), Vec::Zero(2)};
  CHECK_THROWS_AS(generate_reference(model, x0, Mat::Zero(2, 1), 0, 0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_reference(model, x0, Mat::Zero(2, 1), 1, -0.01),
                  std::invalid_argument);
}

TEST_CASE("rolled references satisfy the sign conditions by construction") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> w_dist(-0.18, 0.18);
  std::normal_distribution<double> gauss(0.0, 0.3);
  int active_cases = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const NetworkModel model = random_connected(rng, {4, 9});
    const int n = model.num_buses(), m = model.num_lines();
    State x0{Vec::Zero(m), Vec(n)};
    for (int i = 0; i < n; ++i) x0.omega[i] = w_dist(rng);
    Mat pfcst(n, 40);
    for (int i = 0; i < n; ++i) pfcst.row(i).setConstant(gauss(rng));

    RefCertificate cert;
    const HorizonTrajectory ref = generate_reference(model, x0, pfcst, 40, 0.001, &cert);
    CHECK(phi_disc_member(model, ref.Omega.leftCols(40), ref.U));
    for (int i = 0; i < n; ++i)
      if (!model.bus(i).controlled) CHECK(ref.U.row(i).cwiseAbs().maxCoeff() == 0.0);
    if (ref.U.cwiseAbs().maxCoeff() > 0.0) ++active_cases;

    // sign property spelled out: u <= 0 above the upper threshold, >= 0
    // below the lower one, exactly 0 strictly inside
    for (int i : model.controlled()) {
      const Bus& bus = model.bus(i);
      for (int k = 0; k < 40; ++k) {
        const double w = ref.Omega(i, k), u = ref.U(i, k);
        if (w >= bus.thr_max) CHECK(u <= 0.0);
        else if (w <= bus.thr_min) CHECK(u >= 0.0);
        else CHECK(u == 0.0);
      }
    }
  }
  CHECK(active_cases > 0);  // the sweep must actually exercise the barrier
}

TEST_CASE("certificate true means residuals within 1e-9") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> w_dist(-0.15, 0.15);
  const NetworkModel model = random_connected(rng, {4, 8});
  const int n = model.num_buses();
  State x0{Vec::Zero(model.num_lines()), Vec(n)};
  for (int i = 0; i < n; ++i) x0.omega[i] = w_dist(rng);
  const Mat pfcst = Mat::Zero(n, 30);

  RefCertificate cert;
  const HorizonTrajectory ref = generate_reference(model, x0, pfcst, 30, 0.001, &cert);
  REQUIRE(cert.ok);
  CHECK(cert.max_residual <= 1e-9);

  // re-verify independently of the certificate path
  Vec f_next, w_next;
  for (int k = 0; k < 30; ++k) {
    predict_step(model, ref.F.col(k), ref.Omega.col(k), pfcst.col(k), ref.U.col(k), 0.001,
                 f_next, w_next);
    CHECK((ref.F.col(k + 1) - f_next).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((ref.Omega.col(k + 1) - w_next).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("certificate reports a frequency-bound escape") {
  // strong negative drift with gains too weak at a coarse T: push the bus
  // past its lower bound and expect a named violation
  std::vector<Bus> buses = {controlled_bus(1), plain_bus(2)};
  buses[0].inertia = 0.05;
  const NetworkModel model(buses, {{1, 2, 1.0}});
  State x0{Vec::Zero(1), Vec(2)};
  x0.omega << -0.19, -0.5;
  Mat pfcst = Mat::Zero(2, 60);
  pfcst.row(0).setConstant(-2.0);  // large sustained withdrawal at bus 1
  pfcst.row(1).setConstant(-2.0);

  RefCertificate cert;
  generate_reference(model, x0, pfcst, 60, 0.05, &cert);
  CHECK_FALSE(cert.ok);
  CHECK(cert.detail.find("bus 1") != std::string::npos);
}
