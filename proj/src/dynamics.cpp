#include "tfc/dynamics.hpp"

#include <Eigen/SparseLU>

#include <stdexcept>

namespace tfc {

namespace {

void check_dims(const NetworkModel& model, const State& s, const Vec& p, const Vec& u) {
  if (s.f.size() != model.num_lines() || s.omega.size() != model.num_buses())
    throw std::invalid_argument("plant_step: state dimension mismatch");
  if (p.size() != model.num_buses() || u.size() != model.num_buses())
    throw std::invalid_argument("plant_step: injection/input dimension mismatch");
}

}  // namespace

State plant_step(const NetworkModel& model, const State& state, const Vec& p, const Vec& u,
                 double dt, int substeps) {
  check_dims(model, state, p, u);
  if (dt <= 0.0) throw std::invalid_argument("plant_step: dt must be > 0");
  if (substeps < 1) throw std::invalid_argument("plant_step: substeps must be >= 1");
  for (int i = 0; i < model.num_buses(); ++i)
    if (u[i] != 0.0 && !model.bus(i).controlled)
      throw std::invalid_argument("plant_step: nonzero input at uncontrolled bus " +
                                  std::to_string(model.label_of(i)));

  const SpMat& yd = model.flow_matrix();
  const SpMat& d = model.incidence();
  const Vec minv = model.inertia().cwiseInverse();
  const Vec& e = model.damping();

  Vec f = state.f, w = state.omega;
  const double h = dt / substeps;

  Vec kf1, kw1, kf2, kw2, kf3, kw3, kf4, kw4, ft, wt;
  auto deriv = [&](const Vec& fc, const Vec& wc, Vec& df, Vec& dw) {
    df = yd * wc;
    dw = minv.cwiseProduct(p + u - d.transpose() * fc - e.cwiseProduct(wc));
  };

  for (int s = 0; s < substeps; ++s) {
    deriv(f, w, kf1, kw1);
    ft = f + 0.5 * h * kf1;
    wt = w + 0.5 * h * kw1;
    deriv(ft, wt, kf2, kw2);
    ft = f + 0.5 * h * kf2;
    wt = w + 0.5 * h * kw2;
    deriv(ft, wt, kf3, kw3);
    ft = f + h * kf3;
    wt = w + h * kw3;
    deriv(ft, wt, kf4, kw4);
    f += (h / 6.0) * (kf1 + 2.0 * (kf2 + kf3) + kf4);
    w += (h / 6.0) * (kw1 + 2.0 * (kw2 + kw3) + kw4);
  }
  return {std::move(f), std::move(w)};
}

void predict_step(const NetworkModel& model, const Vec& f, const Vec& omega, const Vec& p,
                  const Vec& u, double T, Vec& f_next, Vec& omega_next) {
  if (f.size() != model.num_lines() || omega.size() != model.num_buses() ||
      p.size() != model.num_buses() || u.size() != model.num_buses())
    throw std::invalid_argument("predict_step: dimension mismatch");
  if (T <= 0.0) throw std::invalid_argument("predict_step: T must be > 0");

  f_next = f + T * (model.flow_matrix() * omega);
  const Vec rhs = p + u - model.incidence().transpose() * f - model.damping().cwiseProduct(omega);
  omega_next = omega + T * rhs.cwiseQuotient(model.inertia());
}

Equilibrium compute_equilibrium(const NetworkModel& model, const Vec& p_star, const Vec& f0) {
  const int n = model.num_buses();
  const int m = model.num_lines();
  if (p_star.size() != n || f0.size() != m)
    throw std::invalid_argument("compute_equilibrium: dimension mismatch");

  Equilibrium eq;
  eq.omega_inf = p_star.sum() / model.damping().sum();

  // L theta = p* - E omega_inf 1 - D^T f0, solved with the kernel pinned by
  // a bordered system [L 1; 1^T 0] since L is singular on span{1}.
  const SpMat& d = model.incidence();
  SpMat lap = SpMat(d.transpose()) * model.flow_matrix();
  Vec rhs = p_star - model.damping() * eq.omega_inf - d.transpose() * f0;

  SpMat bordered(n + 1, n + 1);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(lap.nonZeros() + 2 * n);
  for (int col = 0; col < lap.outerSize(); ++col)
    for (SpMat::InnerIterator it(lap, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), col, it.value());
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, n, 1.0);
    trips.emplace_back(n, i, 1.0);
  }
  bordered.setFromTriplets(trips.begin(), trips.end());

  Eigen::SparseLU<SpMat> lu;
  lu.compute(bordered);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("compute_equilibrium: singular solve (is the graph connected?)");
  Vec ext(n + 1);
  ext.head(n) = rhs;
  ext[n] = 0.0;
  Vec sol = lu.solve(ext);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("compute_equilibrium: solve failed");

  eq.f_inf = f0 + model.flow_matrix() * sol.head(n);
  return eq;
}

double aggregate_injection(const NetworkModel& model, const Vec& f, int bus) {
  if (bus < 0 || bus >= model.num_buses())
    throw std::invalid_argument("aggregate_injection: bus index out of range");
  if (f.size() != model.num_lines())
    throw std::invalid_argument("aggregate_injection: flow dimension mismatch");
  double q = 0.0;
  for (int k = 0; k < model.num_lines(); ++k) {
    if (model.line_neg_end(k) == bus) q += f[k];
    if (model.line_pos_end(k) == bus) q -= f[k];
  }
  return q;
}

}  // namespace tfc
