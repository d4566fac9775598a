#include "tfc/qp.hpp"

#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tfc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SignConstraintSet build_phi_cvx(const NetworkModel& model, const HorizonTrajectory& ref) {
  SignConstraintSet set;
  set.N = ref.steps();
  set.controlled = model.controlled();
  const int nu = static_cast<int>(set.controlled.size());
  set.mode.resize(nu, set.N);
  for (int r = 0; r < nu; ++r) {
    const Bus& bus = model.bus(set.controlled[r]);
    for (int k = 0; k < set.N; ++k) {
      const double w = ref.Omega(set.controlled[r], k);
      SignMode mode = SignMode::Interior;
      if (w >= bus.thr_max)
        mode = SignMode::Upper;
      else if (w <= bus.thr_min)
        mode = SignMode::Lower;
      set.mode(r, k) = static_cast<std::uint8_t>(mode);
    }
  }
  return set;
}

bool phi_disc_member(const NetworkModel& model, const Mat& omega, const Mat& u) {
  const int N = static_cast<int>(u.cols());
  for (int i : model.controlled()) {
    const Bus& bus = model.bus(i);
    for (int k = 0; k < N; ++k) {
      const double w = omega(i, k);
      const double ui = u(i, k);
      const bool inside = w > bus.thr_min && w < bus.thr_max;
      if (inside ? (ui != 0.0) : (w * ui > 0.0)) return false;
    }
  }
  return true;
}

QpProblem assemble_qp(const NetworkModel& model, const State& x0, const Mat& pfcst,
                      const SignConstraintSet& modes, int N, double T) {
  const int n = model.num_buses();
  const int m = model.num_lines();
  if (N < 1) throw std::invalid_argument("assemble_qp: N must be >= 1");
  if (T <= 0.0) throw std::invalid_argument("assemble_qp: T must be > 0");
  if (pfcst.rows() != n || pfcst.cols() != N)
    throw std::invalid_argument("assemble_qp: forecast must be n x N");
  if (x0.f.size() != m || x0.omega.size() != n)
    throw std::invalid_argument("assemble_qp: state dimension mismatch");
  if (modes.N != N || static_cast<int>(modes.controlled.size()) != modes.mode.rows())
    throw std::invalid_argument("assemble_qp: sign set does not match horizon");

  QpProblem qp;
  qp.model = &model;
  qp.N = N;
  qp.T = T;
  qp.f0 = x0.f;
  qp.omega0 = x0.omega;
  qp.pfcst = pfcst;
  qp.modes = modes;

  qp.omega_lb = Mat::Constant(n, N, -kInf);
  qp.omega_ub = Mat::Constant(n, N, kInf);
  for (int i : model.constrained()) {
    // a bound the fixed initial state already violates (hold-interval drift)
    // is relaxed to the inherited value, matching the certificate check
    qp.omega_lb.row(i).setConstant(std::min(model.bus(i).omega_min, x0.omega[i]));
    qp.omega_ub.row(i).setConstant(std::max(model.bus(i).omega_max, x0.omega[i]));
  }

  qp.u_lb = Mat::Zero(n, N);
  qp.u_ub = Mat::Zero(n, N);
  qp.weights = Vec::Zero(n);
  for (size_t r = 0; r < modes.controlled.size(); ++r) {
    const int i = modes.controlled[r];
    const Bus& bus = model.bus(i);
    qp.weights[i] = bus.cost_weight;
    for (int k = 0; k < N; ++k) {
      switch (modes.at(static_cast<int>(r), k)) {
        case SignMode::Upper:
          qp.u_lb(i, k) = -kInf;
          qp.u_ub(i, k) = 0.0;
          if (k >= 1) {
            // omega column k lives at omega_lb/ub column k-1
            qp.omega_lb(i, k - 1) = std::max(qp.omega_lb(i, k - 1), bus.thr_max);
          } else if (x0.omega[i] < bus.thr_max) {
            qp.x0_consistent = false;
            qp.x0_conflict = "bus " + std::to_string(bus.id) +
                             ": Upper mode at step 0 contradicts the fixed initial frequency";
          }
          break;
        case SignMode::Lower:
          qp.u_lb(i, k) = 0.0;
          qp.u_ub(i, k) = kInf;
          if (k >= 1) {
            qp.omega_ub(i, k - 1) = std::min(qp.omega_ub(i, k - 1), bus.thr_min);
          } else if (x0.omega[i] > bus.thr_min) {
            qp.x0_consistent = false;
            qp.x0_conflict = "bus " + std::to_string(bus.id) +
                             ": Lower mode at step 0 contradicts the fixed initial frequency";
          }
          break;
        case SignMode::Interior:
          break;  // u fixed at zero by the [0,0] box
      }
    }
  }
  return qp;
}

double qp_objective(const QpProblem& qp, const Mat& U) {
  double obj = 0.0;
  for (int i = 0; i < U.rows(); ++i)
    if (qp.weights[i] > 0.0) obj += qp.weights[i] * U.row(i).squaredNorm();
  return obj;
}

double qp_violation(const QpProblem& qp, const Mat& F, const Mat& Omega, const Mat& U) {
  const NetworkModel& model = *qp.model;
  double worst = 0.0;
  worst = std::max(worst, (F.col(0) - qp.f0).cwiseAbs().maxCoeff());
  worst = std::max(worst, (Omega.col(0) - qp.omega0).cwiseAbs().maxCoeff());

  Vec f_next, w_next;
  for (int k = 0; k < qp.N; ++k) {
    predict_step(model, F.col(k), Omega.col(k), qp.pfcst.col(k), U.col(k), qp.T, f_next, w_next);
    worst = std::max(worst, (F.col(k + 1) - f_next).cwiseAbs().maxCoeff());
    worst = std::max(
        worst,
        model.inertia().cwiseProduct(Omega.col(k + 1) - w_next).cwiseAbs().maxCoeff());
  }
  for (int k = 0; k < qp.N; ++k) {
    for (int i = 0; i < model.num_buses(); ++i) {
      worst = std::max(worst, qp.u_lb(i, k) - U(i, k));
      worst = std::max(worst, U(i, k) - qp.u_ub(i, k));
      worst = std::max(worst, qp.omega_lb(i, k) - Omega(i, k + 1));
      worst = std::max(worst, Omega(i, k + 1) - qp.omega_ub(i, k));
    }
  }
  return worst;
}

SparseQpData realize_sparse(const QpProblem& qp) {
  const NetworkModel& model = *qp.model;
  const int n = model.num_buses();
  const int m = model.num_lines();
  const int N = qp.N;
  const double T = qp.T;

  SparseQpData data;
  data.n_vars = (m + 2 * n) * N;
  data.n_eq = (m + n) * N;

  // variable indexing: F columns 1..N, Omega columns 1..N, U columns 0..N-1
  auto idx_f = [&](int k, int line) { return (k - 1) * m + line; };
  auto idx_w = [&](int k, int i) { return m * N + (k - 1) * n + i; };
  auto idx_u = [&](int k, int i) { return (m + n) * N + k * n + i; };

  data.p_diag = Vec::Zero(data.n_vars);
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < n; ++i) data.p_diag[idx_u(k, i)] = 2.0 * qp.weights[i];

  const SpMat& yd = model.flow_matrix();
  const SpMat& d = model.incidence();
  const Vec& inertia = model.inertia();
  const Vec& damping = model.damping();

  std::vector<Eigen::Triplet<double>> trips;
  data.b = Vec::Zero(data.n_eq);
  const Vec dtf0 = d.transpose() * qp.f0;
  const Vec ydw0 = yd * qp.omega0;

  for (int k = 0; k < N; ++k) {
    const int row_f = k * (m + n);
    const int row_w = row_f + m;
    // f(k+1) - f(k) - T Y_b D omega(k) = 0
    for (int l = 0; l < m; ++l) {
      trips.emplace_back(row_f + l, idx_f(k + 1, l), 1.0);
      if (k >= 1) trips.emplace_back(row_f + l, idx_f(k, l), -1.0);
      else data.b[row_f + l] = qp.f0[l] + T * ydw0[l];
    }
    if (k >= 1)
      for (int col = 0; col < yd.outerSize(); ++col)
        for (SpMat::InnerIterator it(yd, col); it; ++it)
          trips.emplace_back(row_f + static_cast<int>(it.row()), idx_w(k, col), -T * it.value());
    // M omega(k+1) - (M - T E) omega(k) + T D^T f(k) - T u(k) = T p(k)
    for (int i = 0; i < n; ++i) {
      trips.emplace_back(row_w + i, idx_w(k + 1, i), inertia[i]);
      trips.emplace_back(row_w + i, idx_u(k, i), -T);
      if (k >= 1) {
        trips.emplace_back(row_w + i, idx_w(k, i), -(inertia[i] - T * damping[i]));
        data.b[row_w + i] = T * qp.pfcst(i, k);
      } else {
        data.b[row_w + i] = T * qp.pfcst(i, 0) + (inertia[i] - T * damping[i]) * qp.omega0[i] -
                            T * dtf0[i];
      }
    }
    if (k >= 1)
      for (int col = 0; col < d.outerSize(); ++col)
        for (SpMat::InnerIterator it(d, col); it; ++it)
          trips.emplace_back(row_w + col, idx_f(k, static_cast<int>(it.row())), T * it.value());
  }
  data.a_eq.resize(data.n_eq, data.n_vars);
  data.a_eq.setFromTriplets(trips.begin(), trips.end());

  // C = [A_eq; omega selectors for controlled buses, steps 1..N; u selectors]
  const auto& iu = model.controlled();
  const int nu = static_cast<int>(iu.size());
  const int n_wrows = nu * N;
  const int n_urows = n * N;
  const int n_rows = data.n_eq + n_wrows + n_urows;
  data.l = Vec::Zero(n_rows);
  data.u = Vec::Zero(n_rows);
  data.l.head(data.n_eq) = data.b;
  data.u.head(data.n_eq) = data.b;

  std::vector<Eigen::Triplet<double>> ctrips = trips;
  int row = data.n_eq;
  for (int k = 1; k <= N; ++k)
    for (int r = 0; r < nu; ++r) {
      ctrips.emplace_back(row, idx_w(k, iu[r]), 1.0);
      data.l[row] = qp.omega_lb(iu[r], k - 1);
      data.u[row] = qp.omega_ub(iu[r], k - 1);
      ++row;
    }
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < n; ++i) {
      ctrips.emplace_back(row, idx_u(k, i), 1.0);
      data.l[row] = qp.u_lb(i, k);
      data.u[row] = qp.u_ub(i, k);
      ++row;
    }
  data.c.resize(n_rows, data.n_vars);
  data.c.setFromTriplets(ctrips.begin(), ctrips.end());
  return data;
}

void dump_qp(const QpProblem& qp, std::ostream& os) {
  const SparseQpData data = realize_sparse(qp);
  os << "qp n_vars " << data.n_vars << " n_eq " << data.n_eq << " n_rows " << data.c.rows()
     << " N " << qp.N << " T " << qp.T << "\n";
  auto write_vec = [&](const char* name, const Vec& v) {
    os << name << " " << v.size() << "\n";
    for (int i = 0; i < v.size(); ++i) os << v[i] << "\n";
  };
  write_vec("p_diag", data.p_diag);
  os << "a_eq " << data.a_eq.nonZeros() << "\n";
  for (int col = 0; col < data.a_eq.outerSize(); ++col)
    for (SpMat::InnerIterator it(data.a_eq, col); it; ++it)
      os << it.row() << " " << col << " " << it.value() << "\n";
  write_vec("b", data.b);
  os << "c " << data.c.nonZeros() << "\n";
  for (int col = 0; col < data.c.outerSize(); ++col)
    for (SpMat::InnerIterator it(data.c, col); it; ++it)
      os << it.row() << " " << col << " " << it.value() << "\n";
  write_vec("l", data.l);
  write_vec("u", data.u);
}

}  // namespace tfc
