#include "tfc/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tfc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

struct IterationResult {
  Vec x, z;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
};

// Shared operator-splitting loop. The linear-system step is supplied by the
// workspace (sparse KKT or dense reduced form); everything else -- the
// projection, dual update, residuals, and step-size adaptation -- is common.
// `polish` may finish the solve early: once the duals identify the active
// set, the equality-constrained subproblem is solved directly and verified
// against the KKT conditions, which is exact for a convex QP.
template <typename Workspace, typename PolishFn>
IterationResult run_admm(Workspace& ws, const SolverSettings& st, const Vec& q, const Vec& l,
                         const Vec& u, const Vec* x_init, PolishFn&& polish) {
  const int n = ws.num_vars();
  const int mr = ws.num_rows();

  Vec x = x_init ? *x_init : Vec::Zero(n);
  Vec z = mr > 0 ? ws.apply_c(x).cwiseMax(l).cwiseMin(u) : Vec();
  Vec y = Vec::Zero(mr);

  IterationResult res;
  Vec xt, zt, z_relax, ct_y, cx;
  for (int iter = 1; iter <= st.max_iter; ++iter) {
    ws.kkt_solve(st.sigma * x - q, z, y, xt, zt);
    x = st.alpha * xt + (1.0 - st.alpha) * x;
    z_relax = st.alpha * zt + (1.0 - st.alpha) * z;
    Vec z_new = (z_relax + ws.rho_inv().cwiseProduct(y)).cwiseMax(l).cwiseMin(u);
    y += ws.rho_vec().cwiseProduct(z_relax - z_new);
    z = std::move(z_new);

    if (iter % 5 == 0 || iter == st.max_iter || iter == 1) {
      cx = ws.apply_c(x);
      ct_y = ws.apply_ct(y);
      const double rp = ws.unscale_primal(cx - z);
      const double rd = ws.unscale_dual(ws.p_diag().cwiseProduct(x) + q + ct_y);
      const double eps_p =
          st.eps_abs + st.eps_rel * std::max(ws.unscale_primal_norm(cx), ws.unscale_primal_norm(z));
      const double eps_d = st.eps_abs + st.eps_rel * std::max({ws.unscale_dual_norm(ws.p_diag().cwiseProduct(x)),
                                                               ws.unscale_dual_norm(q),
                                                               ws.unscale_dual_norm(ct_y)});
      res.primal_residual = rp;
      res.dual_residual = rd;
      if (rp <= eps_p && rd <= eps_d) {
        res.status = SolveStatus::Optimal;
        res.iterations = iter;
        res.x = x;
        res.z = z;
        return res;
      }
#ifdef TFC_QP_TRACE
      if (iter % 500 == 0 || iter == 1)
        std::fprintf(stderr, "iter %d rp %.3e rd %.3e eps_p %.3e eps_d %.3e\n", iter, rp, rd,
                     eps_p, eps_d);
#endif
      if (iter % 50 == 0 && rp < 1e-4 && polish(x, y, res)) {
        res.status = SolveStatus::Optimal;
        res.iterations = iter;
        return res;
      }
#ifdef TFC_QP_TRACE
      if (iter % 50 == 0 && rp < 1e-4) std::fprintf(stderr, "iter %d polish rejected\n", iter);
#endif
      if (st.adaptive_rho && iter % st.rho_adapt_interval == 0 && rp > 0.0 && rd > 0.0) {
        const double p_den = std::max(ws.unscale_primal_norm(cx), ws.unscale_primal_norm(z));
        const double d_den = std::max({ws.unscale_dual_norm(ws.p_diag().cwiseProduct(x)),
                                       ws.unscale_dual_norm(q), ws.unscale_dual_norm(ct_y)});
        if (p_den > 0.0 && d_den > 0.0) {
          const double ratio = std::sqrt((rp / p_den) / (rd / d_den));
          if (ratio > 5.0 || ratio < 0.2) ws.rescale_rho(ratio);
        }
      }
    }
  }
  res.iterations = st.max_iter;
  res.x = x;
  res.z = z;
  return res;
}

constexpr auto kNoPolish = [](const Vec&, const Vec&, IterationResult&) { return false; };

// ---------------------------------------------------------------------------
// Sparse KKT workspace: arbitrary sparse C, quasi-definite factorization
// [[P + sigma I, C'], [C, -diag(1/rho)]] refactored only on rho changes.
// Ruiz equilibration keeps the mixed dynamics/bound rows comparable.
// ---------------------------------------------------------------------------

class SparseWorkspace {
 public:
  void setup(const Vec& p_diag, const SpMat& c, int n_eq, const SolverSettings& st) {
    n_ = static_cast<int>(p_diag.size());
    m_ = static_cast<int>(c.rows());
    n_eq_ = n_eq;
    settings_ = st;

    dvar_ = Vec::Ones(n_);
    erow_ = Vec::Ones(m_);
    // Ruiz equilibration over [P C'; C 0]
    Vec p = p_diag;
    SpMat cs = c;
    for (int pass = 0; pass < 10; ++pass) {
      Vec col_norm = Vec::Zero(n_);
      for (int j = 0; j < n_; ++j) col_norm[j] = std::abs(p[j]);
      Vec row_norm = Vec::Zero(m_);
      for (int j = 0; j < cs.outerSize(); ++j)
        for (SpMat::InnerIterator it(cs, j); it; ++it) {
          col_norm[j] = std::max(col_norm[j], std::abs(it.value()));
          row_norm[it.row()] = std::max(row_norm[it.row()], std::abs(it.value()));
        }
      Vec dj = col_norm.unaryExpr(
          [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; });
      Vec ei = row_norm.unaryExpr(
          [](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 1.0; });
      dvar_ = dvar_.cwiseProduct(dj);
      erow_ = erow_.cwiseProduct(ei);
      p = p.cwiseProduct(dj).cwiseProduct(dj);
      cs = ei.asDiagonal() * cs * dj.asDiagonal();
    }
    p_scaled_ = p;
    c_scaled_ = cs;
    ct_scaled_ = cs.transpose();
    rho_base_ = st.rho;
    build_kkt();
  }

  int num_vars() const { return n_; }
  int num_rows() const { return m_; }
  const Vec& p_diag() const { return p_scaled_; }
  const Vec& rho_vec() const { return rho_vec_; }
  const Vec& rho_inv() const { return rho_inv_; }

  Vec apply_c(const Vec& x) const { return c_scaled_ * x; }
  Vec apply_ct(const Vec& y) const { return ct_scaled_ * y; }

  // unscaled norms: primal rows live in E-space, dual rows in D-space
  double unscale_primal(const Vec& r) const { return inf_norm(r.cwiseQuotient(erow_)); }
  double unscale_primal_norm(const Vec& r) const { return unscale_primal(r); }
  double unscale_dual(const Vec& r) const { return inf_norm(r.cwiseQuotient(dvar_)); }
  double unscale_dual_norm(const Vec& r) const { return unscale_dual(r); }

  Vec scale_l(const Vec& l) const { return erow_.cwiseProduct(l); }
  Vec scale_x(const Vec& x) const { return x.cwiseQuotient(dvar_); }
  Vec unscale_x(const Vec& x) const { return dvar_.cwiseProduct(x); }
  Vec unscale_z(const Vec& z) const { return z.cwiseQuotient(erow_); }

  void rescale_rho(double ratio) {
    rho_base_ = std::clamp(rho_base_ * ratio, 1e-6, 1e6);
    build_kkt();
  }

  void kkt_solve(const Vec& rhs_x, const Vec& z, const Vec& y, Vec& xt, Vec& zt) {
    Vec rhs(n_ + m_);
    rhs.head(n_) = rhs_x;
    rhs.tail(m_) = z - rho_inv_.cwiseProduct(y);
    Vec sol = ldlt_.solve(rhs);
    xt = sol.head(n_);
    zt = z + rho_inv_.cwiseProduct(sol.tail(m_) - y);
  }

 private:
  void build_kkt() {
    rho_vec_ = Vec::Constant(m_, rho_base_);
    rho_vec_.head(n_eq_).setConstant(rho_base_ * settings_.rho_eq_scale);
    rho_inv_ = rho_vec_.cwiseInverse();

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n_ + m_ + 2 * c_scaled_.nonZeros());
    for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, p_scaled_[i] + settings_.sigma);
    for (int j = 0; j < c_scaled_.outerSize(); ++j)
      for (SpMat::InnerIterator it(c_scaled_, j); it; ++it) {
        trips.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
        trips.emplace_back(j, n_ + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -rho_inv_[i]);
    SpMat kkt(n_ + m_, n_ + m_);
    kkt.setFromTriplets(trips.begin(), trips.end());
    ldlt_.compute(kkt);
    if (ldlt_.info() != Eigen::Success)
      throw std::runtime_error("qp solver: KKT factorization failed");
  }

  int n_ = 0, m_ = 0, n_eq_ = 0;
  SolverSettings settings_;
  Vec p_scaled_, dvar_, erow_;
  SpMat c_scaled_, ct_scaled_;
  Vec rho_vec_, rho_inv_;
  double rho_base_ = 0.1;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

// ---------------------------------------------------------------------------
// Condensed workspace: inputs at controlled buses are the only decision
// variables; frequency rows become a dense map G built from powers of the
// one-step transition matrix. The reduced Gram matrix is factored once.
// ---------------------------------------------------------------------------

class CondensedWorkspace {
 public:
  void setup(const NetworkModel& model, int N, double T, const Vec& weights,
             const SolverSettings& st) {
    model_ = &model;
    N_ = N;
    T_ = T;
    settings_ = st;
    controlled_ = model.controlled();
    nu_ = static_cast<int>(controlled_.size());
    n_red_ = nu_ * N;
    rows_g_ = nu_ * N;

    const int m = model.num_lines();
    const int n = model.num_buses();
    const int dim = m + n;

    // one-step transition A_d and input map B_d (controlled columns only)
    std::vector<Eigen::Triplet<double>> trips;
    for (int l = 0; l < m; ++l) trips.emplace_back(l, l, 1.0);
    const SpMat& yd = model.flow_matrix();
    for (int j = 0; j < yd.outerSize(); ++j)
      for (SpMat::InnerIterator it(yd, j); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), m + j, T * it.value());
    const SpMat& d = model.incidence();
    const Vec minv = model.inertia().cwiseInverse();
    for (int j = 0; j < d.outerSize(); ++j)
      for (SpMat::InnerIterator it(d, j); it; ++it)
        trips.emplace_back(m + j, static_cast<int>(it.row()), -T * minv[j] * it.value());
    for (int i = 0; i < n; ++i)
      trips.emplace_back(m + i, m + i, 1.0 - T * model.damping()[i] * minv[i]);
    SpMat a_d(dim, dim);
    a_d.setFromTriplets(trips.begin(), trips.end());

    Mat power = Mat::Zero(dim, nu_);  // A_d^s B_d
    for (int c = 0; c < nu_; ++c) power(m + controlled_[c], c) = T * minv[controlled_[c]];

    // G row block for step k picks the controlled-omega rows of A_d^{k-1-j} B_d;
    // the blocks are constant along diagonals of s = k-1-j
    g_ = Mat::Zero(rows_g_, n_red_);
    std::vector<Mat> omega_rows(N);  // nu x nu slices of A^s B
    for (int s = 0; s < N; ++s) {
      Mat slice(nu_, nu_);
      for (int r = 0; r < nu_; ++r) slice.row(r) = power.row(m + controlled_[r]);
      omega_rows[s] = slice;
      if (s + 1 < N) power = a_d * power;
    }
    for (int k = 1; k <= N; ++k)
      for (int j = 0; j < k; ++j)
        g_.block((k - 1) * nu_, j * nu_, nu_, nu_) = omega_rows[k - 1 - j];

    // row equilibration of G keeps step sizes comparable across the horizon
    erow_g_ = Vec::Ones(rows_g_);
    for (int r = 0; r < rows_g_; ++r) {
      const double nrm = g_.row(r).cwiseAbs().maxCoeff();
      if (nrm > 1e-12) erow_g_[r] = 1.0 / std::sqrt(nrm);
    }
    g_ = erow_g_.asDiagonal() * g_;

    p_red_ = Vec::Zero(n_red_);
    for (int k = 0; k < N; ++k)
      for (int c = 0; c < nu_; ++c) p_red_[k * nu_ + c] = 2.0 * weights[controlled_[c]];

    gram_ = g_.transpose() * g_;
    rho_base_ = st.rho;
    factor();
  }

  bool matches(const NetworkModel& model, int N, double T) const {
    return model_ == &model && N_ == N && T_ == T;
  }

  int num_vars() const { return n_red_; }
  int num_rows() const { return rows_g_ + n_red_; }
  const Vec& p_diag() const { return p_red_; }
  const Vec& rho_vec() const { return rho_vec_; }
  const Vec& rho_inv() const { return rho_inv_; }
  int rows_g() const { return rows_g_; }
  int nu() const { return nu_; }
  const std::vector<int>& controlled() const { return controlled_; }
  const Vec& erow_g() const { return erow_g_; }

  Vec apply_c(const Vec& x) const {
    Vec out(rows_g_ + n_red_);
    out.head(rows_g_).noalias() = g_ * x;
    out.tail(n_red_) = x;
    return out;
  }
  Vec apply_ct(const Vec& y) const {
    Vec out = y.tail(n_red_);
    out.noalias() += g_.transpose() * y.head(rows_g_);
    return out;
  }

  double unscale_primal(const Vec& r) const {
    double worst = 0.0;
    for (int i = 0; i < rows_g_; ++i) worst = std::max(worst, std::abs(r[i]) / erow_g_[i]);
    for (int i = rows_g_; i < r.size(); ++i) worst = std::max(worst, std::abs(r[i]));
    return worst;
  }
  double unscale_primal_norm(const Vec& r) const { return unscale_primal(r); }
  double unscale_dual(const Vec& r) const { return inf_norm(r); }
  double unscale_dual_norm(const Vec& r) const { return inf_norm(r); }

  void rescale_rho(double ratio) {
    rho_base_ = std::clamp(rho_base_ * ratio, 1e-6, 1e6);
    factor();
  }

  void kkt_solve(const Vec& rhs_x, const Vec& z, const Vec& y, Vec& xt, Vec& zt) {
    Vec rhs = rhs_x;
    rhs.noalias() +=
        g_.transpose() * (rho_vec_.head(rows_g_).cwiseProduct(z.head(rows_g_)) - y.head(rows_g_));
    rhs += rho_vec_.tail(n_red_).cwiseProduct(z.tail(n_red_)) - y.tail(n_red_);
    xt = llt_.solve(rhs);
    zt = apply_c(xt);
  }

  // Solves the QP restricted to the active set suggested by the dual signs:
  // pinned variables go to their bound, active frequency rows become
  // equalities, and the dense KKT on the free variables is solved and then
  // verified against the full KKT conditions. Returns false when the guess
  // is wrong; the caller keeps iterating.
  bool try_polish(const Vec& l, const Vec& u, const Vec& y, IterationResult& out) const {
    std::vector<char> pinned(n_red_, 0);
    Vec x = Vec::Zero(n_red_);
    std::vector<int> free_vars;
    free_vars.reserve(n_red_);
    for (int r = 0; r < n_red_; ++r) {
      const int row = rows_g_ + r;
      if (l[row] == u[row]) {
        pinned[r] = 1;
        x[r] = l[row];
      } else if (y[row] > 0.0) {
        pinned[r] = 1;
        x[r] = u[row];
      } else if (y[row] < 0.0) {
        pinned[r] = 1;
        x[r] = l[row];
      } else {
        free_vars.push_back(r);
      }
    }
    std::vector<int> active;
    Vec b_active(rows_g_);
    int na = 0;
    for (int r = 0; r < rows_g_; ++r) {
      if (y[r] > 0.0) {
        active.push_back(r);
        b_active[na++] = u[r];
      } else if (y[r] < 0.0) {
        active.push_back(r);
        b_active[na++] = l[r];
      }
    }
    const int nf = static_cast<int>(free_vars.size());
    if (nf + na > 2500) return false;  // dense factor would cost more than iterating

    Vec nu = Vec::Zero(na);
    if (nf > 0) {
      Mat gaf(na, nf);
      for (int a = 0; a < na; ++a)
        for (int f = 0; f < nf; ++f) gaf(a, f) = g_(active[a], free_vars[f]);
      Vec rhs_a = b_active.head(na);
      for (int a = 0; a < na; ++a) {
        double dot = 0.0;
        for (int r = 0; r < n_red_; ++r)
          if (pinned[r]) dot += g_(active[a], r) * x[r];
        rhs_a[a] -= dot;
      }
      const double delta = 1e-9;
      Mat kkt = Mat::Zero(nf + na, nf + na);
      for (int f = 0; f < nf; ++f) kkt(f, f) = p_red_[free_vars[f]] + delta;
      kkt.topRightCorner(nf, na) = gaf.transpose();
      kkt.bottomLeftCorner(na, nf) = gaf;
      kkt.bottomRightCorner(na, na).diagonal().setConstant(-delta);
      Vec rhs(nf + na);
      rhs.head(nf).setZero();
      rhs.tail(na) = rhs_a;
      Eigen::PartialPivLU<Mat> lu(kkt);
      Vec sol = lu.solve(rhs);
      // one round of iterative refinement against the unregularized system
      Vec resid(nf + na);
      for (int f = 0; f < nf; ++f) resid[f] = p_red_[free_vars[f]] * sol[f];
      resid.head(nf).noalias() += gaf.transpose() * sol.tail(na);
      resid.tail(na).noalias() = gaf * sol.head(nf);
      resid.head(nf) -= rhs.head(nf);
      resid.tail(na) -= rhs.tail(na);
      sol -= lu.solve(resid);
      for (int f = 0; f < nf; ++f) x[free_vars[f]] = sol[f];
      nu = sol.tail(na);
    } else if (na > 0) {
      return false;  // all variables pinned but rows still active: inconsistent
    }

    // verify the full KKT conditions of the original problem
    const double tol = 1e-8;
    Vec gx = g_ * x;
    for (int r = 0; r < rows_g_; ++r)
      if (gx[r] < l[r] - tol || gx[r] > u[r] + tol) return false;
    for (int r = 0; r < n_red_; ++r)
      if (x[r] < l[rows_g_ + r] - tol || x[r] > u[rows_g_ + r] + tol) return false;

    Vec y_g = Vec::Zero(rows_g_);
    for (int a = 0; a < na; ++a) {
      const int r = active[a];
      // duals must not push into the interior of the box
      if (l[r] < u[r]) {
        if (y[r] > 0.0 && nu[a] < -tol) return false;
        if (y[r] < 0.0 && nu[a] > tol) return false;
      }
      y_g[r] = nu[a];
    }
    const Vec grad = p_red_.cwiseProduct(x) + g_.transpose() * y_g;
    Vec y_box = Vec::Zero(n_red_);
    for (int r = 0; r < n_red_; ++r) {
      if (pinned[r]) {
        y_box[r] = -grad[r];
        const int row = rows_g_ + r;
        if (l[row] < u[row]) {
          if (x[r] == u[row] && y_box[r] < -tol) return false;
          if (x[r] == l[row] && y_box[r] > tol) return false;
        }
      } else if (std::abs(grad[r]) > tol) {
        return false;  // stationarity fails at a free variable
      }
    }

    out.x = x;
    out.z.resize(rows_g_ + n_red_);
    out.z.head(rows_g_) = gx.cwiseMax(l.head(rows_g_)).cwiseMin(u.head(rows_g_));
    out.z.tail(n_red_) = x;  // pinned entries sit exactly on their bounds
    out.primal_residual = 0.0;
    for (int r = 0; r < rows_g_; ++r)
      out.primal_residual =
          std::max(out.primal_residual, std::abs(gx[r] - out.z[r]) / erow_g_[r]);
    out.dual_residual = 0.0;
    for (int r = 0; r < n_red_; ++r)
      if (!pinned[r]) out.dual_residual = std::max(out.dual_residual, std::abs(grad[r]));
    return true;
  }

 private:
  void factor() {
    rho_vec_ = Vec::Constant(rows_g_ + n_red_, rho_base_);
    rho_inv_ = rho_vec_.cwiseInverse();
    Mat reduced = rho_base_ * gram_;
    reduced.diagonal() += p_red_;
    reduced.diagonal().array() += settings_.sigma + rho_base_;
    llt_.compute(reduced);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("qp solver: reduced factorization failed");
  }

  const NetworkModel* model_ = nullptr;
  int N_ = 0, nu_ = 0, n_red_ = 0, rows_g_ = 0;
  double T_ = 0.0;
  SolverSettings settings_;
  std::vector<int> controlled_;
  Mat g_, gram_;
  Vec erow_g_, p_red_, rho_vec_, rho_inv_;
  double rho_base_ = 0.1;
  Eigen::LLT<Mat> llt_;
};

}  // namespace

class QpSolverCache {
 public:
  std::unique_ptr<SparseWorkspace> sparse;
  const NetworkModel* sparse_model = nullptr;
  int sparse_n = 0;
  double sparse_t = 0.0;
  std::unique_ptr<CondensedWorkspace> condensed;
};

QpSolverCachePtr make_solver_cache() { return std::make_shared<QpSolverCache>(); }

BoxQpResult solve_box_qp(const BoxQp& qp, const SolverSettings& settings, const Vec* x_init) {
  if (qp.c.rows() != qp.l.size() || qp.c.rows() != qp.u.size() ||
      qp.c.cols() != qp.p_diag.size() || qp.q.size() != qp.p_diag.size())
    throw std::invalid_argument("solve_box_qp: dimension mismatch");

  SparseWorkspace ws;
  ws.setup(qp.p_diag, qp.c, qp.n_eq, settings);
  const Vec q_scaled = ws.unscale_x(qp.q);  // D * q
  const Vec l_scaled = ws.scale_l(qp.l);
  const Vec u_scaled = ws.scale_l(qp.u);
  Vec x0;
  if (x_init) x0 = ws.scale_x(*x_init);
  IterationResult it =
      run_admm(ws, settings, q_scaled, l_scaled, u_scaled, x_init ? &x0 : nullptr, kNoPolish);

  BoxQpResult res;
  res.x = ws.unscale_x(it.x);
  res.z = ws.unscale_z(it.z);
  res.status = it.status;
  res.iterations = it.iterations;
  res.primal_residual = it.primal_residual;
  res.dual_residual = it.dual_residual;
  return res;
}

namespace {

// Roll the exact prediction dynamics under the returned inputs so the
// solution trajectory satisfies the equality block to machine precision.
void roll_solution(const QpProblem& qp, QpSolution& sol) {
  const NetworkModel& model = *qp.model;
  const int N = qp.N;
  sol.F.resize(model.num_lines(), N + 1);
  sol.Omega.resize(model.num_buses(), N + 1);
  sol.F.col(0) = qp.f0;
  sol.Omega.col(0) = qp.omega0;
  Vec f_next, w_next;
  for (int k = 0; k < N; ++k) {
    predict_step(model, sol.F.col(k), sol.Omega.col(k), qp.pfcst.col(k), sol.U.col(k), qp.T,
                 f_next, w_next);
    sol.F.col(k + 1) = f_next;
    sol.Omega.col(k + 1) = w_next;
  }
  sol.objective = qp_objective(qp, sol.U);
}

QpSolution solve_sparse_path(const QpProblem& qp, const SolverSettings& st, QpSolverCache* cache,
                             const Mat* u_init) {
  const SparseQpData data = realize_sparse(qp);
  SparseWorkspace* ws = nullptr;
  std::unique_ptr<SparseWorkspace> local;
  if (cache) {
    if (!cache->sparse || cache->sparse_model != qp.model || cache->sparse_n != qp.N ||
        cache->sparse_t != qp.T) {
      cache->sparse = std::make_unique<SparseWorkspace>();
      cache->sparse->setup(data.p_diag, data.c, data.n_eq, st);
      cache->sparse_model = qp.model;
      cache->sparse_n = qp.N;
      cache->sparse_t = qp.T;
    }
    ws = cache->sparse.get();
  } else {
    local = std::make_unique<SparseWorkspace>();
    local->setup(data.p_diag, data.c, data.n_eq, st);
    ws = local.get();
  }

  const NetworkModel& model = *qp.model;
  const int m = model.num_lines();
  const int n = model.num_buses();
  const int N = qp.N;

  Vec x0;
  const Vec* x0_ptr = nullptr;
  if (u_init && u_init->size() > 0) {
    // roll the initializer through the dynamics to get a full z vector
    Vec x(data.n_vars);
    Vec f = qp.f0, w = qp.omega0, f_next, w_next;
    for (int k = 0; k < N; ++k) {
      predict_step(model, f, w, qp.pfcst.col(k), u_init->col(k), qp.T, f_next, w_next);
      f = f_next;
      w = w_next;
      x.segment(k * m, m) = f;
      x.segment(m * N + k * n, n) = w;
      x.segment((m + n) * N + k * n, n) = u_init->col(k);
    }
    x0 = ws->scale_x(x);
    x0_ptr = &x0;
  }

  const Vec l_scaled = ws->scale_l(data.l);
  const Vec u_scaled = ws->scale_l(data.u);
  const Vec q_zero = Vec::Zero(data.n_vars);
  IterationResult it = run_admm(*ws, st, q_zero, l_scaled, u_scaled, x0_ptr, kNoPolish);

  QpSolution sol;
  sol.status = it.status;
  sol.iterations = it.iterations;
  sol.primal_residual = it.primal_residual;
  sol.dual_residual = it.dual_residual;
  sol.condensed = false;

  // inputs come from the projected iterate: box-exact zeros and signs
  const Vec z = ws->unscale_z(it.z);
  const int u_rows_start = data.n_eq + static_cast<int>(model.controlled().size()) * N;
  sol.U.resize(n, N);
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < n; ++i) sol.U(i, k) = z[u_rows_start + k * n + i];
  roll_solution(qp, sol);
  return sol;
}

QpSolution solve_condensed_path(const QpProblem& qp, const SolverSettings& st,
                                QpSolverCache* cache, const Mat* u_init) {
  const NetworkModel& model = *qp.model;
  const int n = model.num_buses();
  const int N = qp.N;

  CondensedWorkspace* ws = nullptr;
  std::unique_ptr<CondensedWorkspace> local;
  if (cache) {
    if (!cache->condensed || !cache->condensed->matches(model, N, qp.T)) {
      cache->condensed = std::make_unique<CondensedWorkspace>();
      cache->condensed->setup(model, N, qp.T, qp.weights, st);
    }
    ws = cache->condensed.get();
  } else {
    local = std::make_unique<CondensedWorkspace>();
    local->setup(model, N, qp.T, qp.weights, st);
    ws = local.get();
  }

  const int nu = ws->nu();
  const auto& iu = ws->controlled();
  const int rows_g = ws->rows_g();

  // free response of the prediction model under zero input
  Mat omega_free(n, N + 1);
  {
    Vec f = qp.f0, w = qp.omega0, f_next, w_next;
    const Vec u0 = Vec::Zero(n);
    omega_free.col(0) = w;
    for (int k = 0; k < N; ++k) {
      predict_step(model, f, w, qp.pfcst.col(k), u0, qp.T, f_next, w_next);
      f = f_next;
      w = w_next;
      omega_free.col(k + 1) = w;
    }
  }

  Vec l(rows_g + nu * N), u(rows_g + nu * N);
  for (int k = 1; k <= N; ++k)
    for (int r = 0; r < nu; ++r) {
      const int row = (k - 1) * nu + r;
      const double scale = ws->erow_g()[row];
      const double lb = qp.omega_lb(iu[r], k - 1);
      const double ub = qp.omega_ub(iu[r], k - 1);
      l[row] = std::isfinite(lb) ? scale * (lb - omega_free(iu[r], k)) : -kInf;
      u[row] = std::isfinite(ub) ? scale * (ub - omega_free(iu[r], k)) : kInf;
    }
  for (int k = 0; k < N; ++k)
    for (int r = 0; r < nu; ++r) {
      l[rows_g + k * nu + r] = qp.u_lb(iu[r], k);
      u[rows_g + k * nu + r] = qp.u_ub(iu[r], k);
    }

  Vec x0;
  const Vec* x0_ptr = nullptr;
  if (u_init && u_init->size() > 0) {
    x0.resize(nu * N);
    for (int k = 0; k < N; ++k)
      for (int r = 0; r < nu; ++r) x0[k * nu + r] = (*u_init)(iu[r], k);
    x0_ptr = &x0;
  }

  const Vec q_zero = Vec::Zero(nu * N);
  auto polish = [&](const Vec&, const Vec& y, IterationResult& out) {
    return ws->try_polish(l, u, y, out);
  };
  IterationResult it = run_admm(*ws, st, q_zero, l, u, x0_ptr, polish);

  QpSolution sol;
  sol.status = it.status;
  sol.iterations = it.iterations;
  sol.primal_residual = it.primal_residual;
  sol.dual_residual = it.dual_residual;
  sol.condensed = true;

  sol.U = Mat::Zero(n, N);
  for (int k = 0; k < N; ++k)
    for (int r = 0; r < nu; ++r) sol.U(iu[r], k) = it.z[rows_g + k * nu + r];
  roll_solution(qp, sol);
  return sol;
}

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const SolverSettings& settings, QpSolverCache* cache,
                    const QpSolution* warm_start) {
  if (!qp.model) throw std::invalid_argument("solve_qp: problem has no model");
  if (!qp.x0_consistent) {
    QpSolution sol;
    sol.status = SolveStatus::Infeasible;
    sol.U = Mat::Zero(qp.model->num_buses(), qp.N);
    roll_solution(qp, sol);
    return sol;
  }

  // shifted warm start takes precedence over the problem's own initializer
  Mat u_init;
  if (warm_start && warm_start->U.cols() == qp.N &&
      warm_start->U.rows() == qp.model->num_buses()) {
    u_init.resize(warm_start->U.rows(), qp.N);
    u_init.leftCols(qp.N - 1) = warm_start->U.rightCols(qp.N - 1);
    u_init.col(qp.N - 1).setZero();
  } else if (qp.init_u.size() > 0) {
    u_init = qp.init_u;
  }
  const Mat* init = u_init.size() > 0 ? &u_init : nullptr;

  const int size = qp.N * (qp.model->num_lines() + qp.model->num_buses());
  const bool condensed =
      settings.path == 2 || (settings.path == 0 && size > settings.condense_threshold);
  return condensed ? solve_condensed_path(qp, settings, cache, init)
                   : solve_sparse_path(qp, settings, cache, init);
}

}  // namespace tfc
