#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_networks.hpp"
#include "tfc/dynamics.hpp"

#include <random>

using namespace tfc;
using namespace tfc::testing;

TEST_CASE("zero state with zero inputs is a fixed point of the plant") {
  const NetworkModel model = two_bus();
  const State zero{Vec::Zero(1), Vec::Zero(2)};
  const State next = plant_step(model, zero, Vec::Zero(2), Vec::Zero(2), 0.01);
  CHECK(next.f.cwiseAbs().maxCoeff() == 0.0);
  CHECK(next.omega.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plant step matches a fine-step reference integration") {
  // two-bus toy, b = 1, M = E = I, omega = (1, -1): one coarse step of 0.01 s
  // against the same integrator run at h = 1e-5
  const NetworkModel model = two_bus();
  State x;
  x.f = Vec::Zero(1);
  x.omega.resize(2);
  x.omega << 1.0, -1.0;
  const Vec p = Vec::Zero(2), u = Vec::Zero(2);

  const State coarse = plant_step(model, x, p, u, 0.01);  // default substeps: h = 1e-3
  const State fine = plant_step(model, x, p, u, 0.01, 1000);
  CHECK((coarse.f - fine.f).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((coarse.omega - fine.omega).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("nonzero input at an uncontrolled bus is rejected") {
  const NetworkModel model = triangle();  // only bus 1 controlled
  const State zero{Vec::Zero(3), Vec::Zero(3)};
  Vec u = Vec::Zero(3);
  u[1] = 0.5;
  CHECK_THROWS_AS(plant_step(model, zero, Vec::Zero(3), u, 0.01), std::invalid_argument);
}

TEST_CASE("predict step hand evaluation") {
  SUBCASE("zero state stays zero") {
    const NetworkModel model = two_bus();
    Vec f_next, w_next;
    predict_step(model, Vec::Zero(1), Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 0.1, f_next,
                 w_next);
    CHECK(f_next.cwiseAbs().maxCoeff() == 0.0);
    CHECK(w_next.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two-bus toy, omega = (1, 0), T = 0.1") {
    // f(1) = 0 + T*b*(omega_1 - omega_2) = 0.1
    // omega(1) = omega + T*(-E*omega - D^T f) = (0.9, 0)  [f(0) = 0]
    const NetworkModel model = two_bus();
    Vec omega(2);
    omega << 1.0, 0.0;
    Vec f_next, w_next;
    predict_step(model, Vec::Zero(1), omega, Vec::Zero(2), Vec::Zero(2), 0.1, f_next, w_next);
    CHECK(f_next[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(w_next[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(w_next[1] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("predict step is linear in state, injection, and input") {
  std::mt19937 rng(11);
  const NetworkModel model = random_connected(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = model.num_buses(), m = model.num_lines();
  auto randvec = [&](int size) {
    Vec v(size);
    for (int i = 0; i < size; ++i) v[i] = gauss(rng);
    return v;
  };
  const Vec f1 = randvec(m), f2 = randvec(m), w1 = randvec(n), w2 = randvec(n);
  const Vec p1 = randvec(n), p2 = randvec(n), u1 = randvec(n), u2 = randvec(n);
  const double a = 0.37, b = -1.21, T = 0.05;

  Vec fa, wa, fb, wb, fc, wc;
  predict_step(model, f1, w1, p1, u1, T, fa, wa);
  predict_step(model, f2, w2, p2, u2, T, fb, wb);
  predict_step(model, a * f1 + b * f2, a * w1 + b * w2, a * p1 + b * p2, a * u1 + b * u2, T, fc,
               wc);
  CHECK((fc - (a * fa + b * fb)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((wc - (a * wa + b * wb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("equilibrium of the two-bus toy") {
  const NetworkModel model = two_bus();
  Vec p_star(2);
  p_star << 1.0, -1.0;
  const Equilibrium eq = compute_equilibrium(model, p_star, Vec::Zero(1));
  CHECK(eq.omega_inf == doctest::Approx(0.0));
  REQUIRE(eq.f_inf.size() == 1);
  CHECK(eq.f_inf[0] == doctest::Approx(1.0).epsilon(1e-10));
  // steady state: D^T f = p*
  const Vec residual = model.incidence().transpose() * eq.f_inf - p_star;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("zero injection gives the zero equilibrium") {
  const NetworkModel model = triangle();
  const Equilibrium eq = compute_equilibrium(model, Vec::Zero(3), Vec::Zero(3));
  CHECK(eq.omega_inf == 0.0);
  CHECK(eq.f_inf.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("equilibrium is invariant to the kernel component of theta") {
  // shifting theta by alpha*1 leaves Y_b D theta unchanged because D*1 = 0
  std::mt19937 rng(3);
  const NetworkModel model = random_connected(rng);
  const int n = model.num_buses();
  Vec theta(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) theta[i] = gauss(rng);
  const Vec base = model.flow_matrix() * theta;
  const Vec shifted = model.flow_matrix() * (theta + Vec::Constant(n, 5.17));
  CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("balanced injections synchronize at zero frequency deviation") {
  std::mt19937 rng(5);
  const NetworkModel model = random_connected(rng);
  const int n = model.num_buses();
  Vec p(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i) p[i] = gauss(rng);
  p.array() -= p.mean();  // sum exactly ~0
  const Equilibrium eq = compute_equilibrium(model, p, Vec::Zero(model.num_lines()));
  CHECK(std::abs(eq.omega_inf) < 1e-15);
}

TEST_CASE("long-horizon open-loop simulation converges to the equilibrium") {
  std::mt19937 rng(17);
  const NetworkModel model = random_connected(rng, {5, 8});
  const int n = model.num_buses();
  Vec p(n);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (int i = 0; i < n; ++i) p[i] = dist(rng);

  State x{Vec::Zero(model.num_lines()), Vec::Zero(n)};
  const Equilibrium eq = compute_equilibrium(model, p, x.f);
  const Vec u = Vec::Zero(n);
  for (int step = 0; step < 5000; ++step) x = plant_step(model, x, p, u, 0.1);
  CHECK((x.f - eq.f_inf).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((x.omega.array() - eq.omega_inf).abs().maxCoeff() < 1e-6);
}

TEST_CASE("aggregate injection") {
  const NetworkModel model = two_bus();
  Vec f(1);
  f << 0.4;
  SUBCASE("single inflow at the negative end") {
    CHECK(aggregate_injection(model, f, model.index_of(2)) == doctest::Approx(0.4));
    CHECK(aggregate_injection(model, f, model.index_of(1)) == doctest::Approx(-0.4));
  }
  SUBCASE("matches -D^T f on random flows") {
    std::mt19937 rng(13);
    const NetworkModel net = random_connected(rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec flows(net.num_lines());
    for (int k = 0; k < net.num_lines(); ++k) flows[k] = gauss(rng);
    const Vec expected = -(net.incidence().transpose() * flows);
    for (int i = 0; i < net.num_buses(); ++i)
      CHECK(aggregate_injection(net, flows, i) == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("node with no incident lines would see zero aggregate injection") {
  // the closest connected analog: a leaf bus sees only its single line
  const NetworkModel model = triangle();
  const Vec f = Vec::Zero(3);
  for (int i = 0; i < 3; ++i) CHECK(aggregate_injection(model, f, i) == 0.0);
}

TEST_CASE("flipping a line orientation leaves frequency trajectories unchanged") {
  // same physical network, one line flipped; flows negate, frequencies agree
  std::vector<Bus> buses = {controlled_bus(1), plain_bus(2), plain_bus(3)};
  const NetworkModel fwd(buses, {{1, 2, 1.0}, {2, 3, 2.0}, {1, 3, 3.0}});
  const NetworkModel flipped(buses, {{1, 2, 1.0}, {3, 2, 2.0}, {1, 3, 3.0}});

  Vec p(3);
  p << 0.3, -0.5, 0.2;
  State xa{Vec::Zero(3), Vec::Zero(3)};
  State xb = xa;
  const Vec u = Vec::Zero(3);
  for (int step = 0; step < 200; ++step) {
    xa = plant_step(fwd, xa, p, u, 0.02);
    xb = plant_step(flipped, xb, p, u, 0.02);
  }
  CHECK((xa.omega - xb.omega).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(xa.f[1] + xb.f[1]) < 1e-12);  // flipped line carries -f
  CHECK(std::abs(xa.f[0] - xb.f[0]) < 1e-12);
}
