#include "tfc/reference.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tfc {

namespace {
constexpr double kDenomGuard = 1e-9;
constexpr double kResidualTol = 1e-9;
}  // namespace

double ref_control(const Bus& bus, double omega_ref, double v) {
  if (!bus.controlled) throw std::invalid_argument("ref_control: bus is not controlled");
  if (!bus.freq_constrained) return 0.0;

  if (omega_ref >= bus.thr_max) {
    const double denom = omega_ref - bus.thr_max;
    if (denom < kDenomGuard) return 0.0;  // barrier -> +inf, min collapses to 0
    const double barrier = bus.gamma_upper * (bus.omega_max - omega_ref) / denom;
    return std::min(0.0, barrier - v);
  }
  if (omega_ref <= bus.thr_min) {
    const double denom = bus.thr_min - omega_ref;
    if (denom < kDenomGuard) return 0.0;
    const double barrier = bus.gamma_lower * (bus.omega_min - omega_ref) / denom;
    return std::max(0.0, barrier - v);
  }
  return 0.0;
}

double drift_term(const NetworkModel& model, const Vec& f_ref, const Vec& omega_ref,
                  const Vec& p_fcst, int bus) {
  if (!model.bus(bus).freq_constrained)
    throw std::invalid_argument("drift_term: bus is not frequency-constrained");
  return aggregate_injection(model, f_ref, bus) + p_fcst[bus] -
         model.damping()[bus] * omega_ref[bus];
}

HorizonTrajectory generate_reference(const NetworkModel& model, const State& x0, const Mat& pfcst,
                                     int N, double T, RefCertificate* certificate) {
  const int m = model.num_lines();
  const int n = model.num_buses();
  if (N < 1) throw std::invalid_argument("generate_reference: N must be >= 1");
  if (T <= 0.0) throw std::invalid_argument("generate_reference: T must be > 0");
  if (pfcst.rows() != n || pfcst.cols() != N)
    throw std::invalid_argument("generate_reference: forecast must be n x N");
  if (x0.f.size() != m || x0.omega.size() != n)
    throw std::invalid_argument("generate_reference: state dimension mismatch");

  HorizonTrajectory traj;
  traj.T = T;
  traj.Pfcst = pfcst;
  traj.F.resize(m, N + 1);
  traj.Omega.resize(n, N + 1);
  traj.U = Mat::Zero(n, N);
  traj.F.col(0) = x0.f;
  traj.Omega.col(0) = x0.omega;

  Vec f = x0.f, w = x0.omega, u = Vec::Zero(n), f_next, w_next;
  for (int k = 0; k < N; ++k) {
    // q = -D^T f, shared by the drift terms of all constrained buses
    const Vec q = -(model.incidence().transpose() * f);
    u.setZero();
    for (int i : model.constrained()) {
      const double v = q[i] + pfcst(i, k) - model.damping()[i] * w[i];
      u[i] = ref_control(model.bus(i), w[i], v);
    }
    traj.U.col(k) = u;
    predict_step(model, f, w, pfcst.col(k), u, T, f_next, w_next);
    f = f_next;
    w = w_next;
    traj.F.col(k + 1) = f;
    traj.Omega.col(k + 1) = w;
  }

  if (certificate) *certificate = check_trajectory(model, traj);
  return traj;
}

RefCertificate check_trajectory(const NetworkModel& model, const HorizonTrajectory& traj) {
  RefCertificate cert;
  const int N = traj.steps();
  const int n = model.num_buses();
  const double T = traj.T;
  std::ostringstream detail;

  auto fail = [&](const std::string& what) {
    if (cert.ok) cert.detail = what;
    cert.ok = false;
  };

  // Eq. 6 dynamics residuals
  Vec f_next, w_next;
  for (int k = 0; k < N; ++k) {
    predict_step(model, traj.F.col(k), traj.Omega.col(k), traj.Pfcst.col(k), traj.U.col(k), T,
                 f_next, w_next);
    const double rf = (traj.F.col(k + 1) - f_next).cwiseAbs().maxCoeff();
    const Vec m_scaled =
        model.inertia().cwiseProduct(traj.Omega.col(k + 1) - w_next).cwiseAbs();
    const double rw = m_scaled.maxCoeff();
    cert.max_residual = std::max({cert.max_residual, rf, rw});
    if (rf > kResidualTol || rw > kResidualTol) {
      detail.str("");
      detail << "dynamics residual " << std::max(rf, rw) << " at step " << k;
      fail(detail.str());
    }
  }

  // admissible inputs: exactly zero at uncontrolled buses
  for (int i = 0; i < n; ++i)
    if (!model.bus(i).controlled && traj.U.row(i).cwiseAbs().maxCoeff() > 0.0)
      fail("nonzero input at uncontrolled bus " + std::to_string(model.label_of(i)));

  // frequency bounds at steps 1..N; a bound already violated by the fixed
  // initial column (zero-order-hold drift) is relaxed to the inherited value
  // so the trajectory may recover without counting as infeasible
  for (int i : model.constrained()) {
    const Bus& bus = model.bus(i);
    const double lo = std::min(bus.omega_min, traj.Omega(i, 0));
    const double hi = std::max(bus.omega_max, traj.Omega(i, 0));
    for (int k = 1; k <= N; ++k) {
      const double w = traj.Omega(i, k);
      if (w < lo - kResidualTol || w > hi + kResidualTol) {
        detail.str("");
        detail << "frequency bound violated at bus " << bus.id << " step " << k << " (" << w
               << ")";
        fail(detail.str());
      }
    }
  }

  // stability sign conditions at steps 0..N-1
  for (int i : model.controlled()) {
    const Bus& bus = model.bus(i);
    for (int k = 0; k < N; ++k) {
      const double w = traj.Omega(i, k);
      const double u = traj.U(i, k);
      const bool inside = w > bus.thr_min && w < bus.thr_max;
      if (inside ? (u != 0.0) : (w * u > 0.0)) {
        detail.str("");
        detail << "sign condition violated at bus " << bus.id << " step " << k;
        fail(detail.str());
      }
    }
  }
  return cert;
}

}  // namespace tfc
