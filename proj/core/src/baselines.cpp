#include "tfb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace tfb {

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::DIM: return "dim";
    case BaselineMethod::EBAL: return "ebal";
    case BaselineMethod::ABAL1: return "abal1";
    case BaselineMethod::OraclePS: return "oracle_ps";
  }
  return "dim";
}

BaselineMethod parse_baseline(std::string_view s) {
  if (s == "dim") return BaselineMethod::DIM;
  if (s == "ebal") return BaselineMethod::EBAL;
  if (s == "abal1") return BaselineMethod::ABAL1;
  if (s == "oracle_ps") return BaselineMethod::OraclePS;
  throw UsageError("unknown baseline '" + std::string(s) +
                   "' (supported: dim, ebal, abal1, oracle_ps)");
}

namespace {

Vector column_sd(const Matrix& rows) {
  const Index n = rows.rows();
  Vector sd(rows.cols());
  for (Index j = 0; j < rows.cols(); ++j) {
    const auto c = rows.col(j);
    sd(j) = n > 1 ? std::sqrt((c.array() - c.mean()).square().sum() / static_cast<double>(n - 1))
                  : 0.0;
  }
  return sd;
}

// Target weights per estimand and group: ATT/ATC weight one group toward
// the other group's mean, ATE weights both toward the pooled mean.
template <class Solver>
GroupWeights per_group(const Matrix& design, Index n_control, Estimand estimand, Solver&& solve_one) {
  const Index n_treated = design.rows() - n_control;
  if (n_control < 1 || n_treated < 1) throw DataError("balancing needs both groups");
  const Matrix controls = design.topRows(n_control), treated = design.bottomRows(n_treated);
  GroupWeights w{Vector::Ones(n_control), Vector::Ones(n_treated)};
  switch (estimand) {
    case Estimand::ATT:
      w.control = solve_one(controls, Vector(treated.colwise().mean().transpose()));
      break;
    case Estimand::ATC:
      w.treated = solve_one(treated, Vector(controls.colwise().mean().transpose()));
      break;
    case Estimand::ATE: {
      const Vector all = design.colwise().mean().transpose();
      w.control = solve_one(controls, all);
      w.treated = solve_one(treated, all);
      break;
    }
  }
  return w;
}

}  // namespace

Vector entropy_balancing(const Matrix& rows, const Vector& target, const EbalOptions& opts) {
  const Index n = rows.rows();
  if (target.size() != rows.cols()) throw DataError("entropy balancing target has wrong length");
  if (n < 1) throw DataError("entropy balancing needs at least one unit");

  // Centered, column-scaled constraint rows; constant columns must already
  // sit on the target.
  const Vector sd = column_sd(rows);
  std::vector<Index> keep;
  for (Index j = 0; j < rows.cols(); ++j) {
    const double scale = 1.0 + std::abs(target(j));
    if (sd(j) > 1e-12 * scale) {
      keep.push_back(j);
    } else if (std::abs(rows(0, j) - target(j)) > 1e-10 * scale) {
      throw NumericalError("entropy balancing is infeasible: column " + std::to_string(j + 1) +
                           " is constant and differs from its target");
    }
  }
  const auto k = static_cast<Index>(keep.size());
  Matrix C(n, k);
  for (Index u = 0; u < k; ++u) {
    const Index j = keep[static_cast<std::size_t>(u)];
    C.col(u) = (rows.col(j).array() - target(j)) / sd(j);
  }
  if (k == 0) return Vector::Ones(n);

  Vector lambda = Vector::Zero(k);
  auto evaluate = [&](const Vector& l, Vector& p) {
    const Vector eta = C * l;
    const double m = eta.maxCoeff();
    p = (eta.array() - m).exp();
    const double s = p.sum();
    p /= s;
    return m + std::log(s);
  };
  Vector p;
  double f = evaluate(lambda, p);
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vector g = C.transpose() * p;
    if (g.cwiseAbs().maxCoeff() < opts.tol) return static_cast<double>(n) * p;
    Matrix H = C.transpose() * p.asDiagonal() * C - g * g.transpose();
    H.diagonal().array() += 1e-12 * std::max(1.0, H.trace());
    const Vector d = -Eigen::LDLT<Matrix>(H).solve(g);
    const double slope = g.dot(d);
    if (!d.allFinite() || !(slope < 0.0)) break;
    double step = 1.0;
    Vector p_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      f_new = evaluate(lambda + step * d, p_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    lambda += step * d;
    p = std::move(p_new);
    f = f_new;
  }
  const double residual = (C.transpose() * p).cwiseAbs().maxCoeff();
  if (residual < opts.tol) return static_cast<double>(n) * p;
  std::ostringstream msg;
  msg << "entropy balancing is infeasible or did not converge: largest scaled imbalance "
      << residual << " after " << opts.max_iters << " Newton steps";
  throw NumericalError(msg.str());
}

GroupWeights entropy_balancing(const Matrix& design, Index n_control, Estimand estimand,
                               const EbalOptions& opts) {
  return per_group(design, n_control, estimand,
                   [&](const Matrix& r, const Vector& t) { return entropy_balancing(r, t, opts); });
}

namespace {

// Primal-dual interior point (Mehrotra predictor-corrector) for
//   min 1/2 ||w||^2 + 1/2 q_tau tau^2
//   s.t. |A w - t| <= d + tau (elementwise), w >= 0, 1'w = n,
// where tau is present only when `with_tau`. The reduced Newton matrix
// I + W_w + A' (W_lo + W_hi) A is factored densely; tau and the sum
// multiplier are eliminated by a 2 x 2 border.
struct QpResult {
  Vector w;
  double tau = 0.0;
  bool converged = false;
  double primal = 0.0, dual = 0.0, gap = 0.0;
};

QpResult balancing_qp(const Matrix& A, const Vector& t, const Vector& d, bool with_tau,
                      double q_tau, const StableBalancingOptions& opts) {
  const Index k = A.rows(), n = A.cols();
  const auto ng = static_cast<double>(n);
  const Index m = 2 * k + n;
  Vector h(m);
  h << d - t, d + t, Vector::Zero(n);
  auto G_times = [&](const Vector& w, double tau) {
    Vector out(m);
    const Vector aw = A * w;
    out << -aw.array() - tau, aw.array() - tau, -w;
    return out;
  };
  const Vector ones = Vector::Ones(n);

  QpResult res;
  res.w = ones;
  double best_merit = std::numeric_limits<double>::infinity();
  Vector w = ones;
  double tau = with_tau ? (A * w - t).cwiseAbs().maxCoeff() + 1.0 : 0.0;
  Vector s = (h - G_times(w, tau)).cwiseMax(1.0);
  Vector z = Vector::Ones(m);
  double nu = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vector zdiff = z.segment(k, k) - z.head(k);
    const Vector r_dw = w + A.transpose() * zdiff - z.tail(n) + nu * ones;
    const double r_dt = with_tau ? q_tau * tau - z.head(2 * k).sum() : 0.0;
    const Vector r_p = G_times(w, tau) + s - h;
    const double r_e = w.sum() - ng;
    const double mu = s.dot(z) / static_cast<double>(m);
    const double scale_d = 1.0 + w.cwiseAbs().maxCoeff() + (with_tau ? q_tau * std::abs(tau) : 0.0);
    const double objective = 0.5 * w.squaredNorm() + 0.5 * q_tau * tau * tau;
    const double primal = std::max(r_p.cwiseAbs().maxCoeff(), std::abs(r_e) / ng);
    const double dual = std::max(r_dw.cwiseAbs().maxCoeff(), std::abs(r_dt)) / scale_d;
    const double gap = s.dot(z) / (1.0 + objective);
    if (!std::isfinite(primal + dual + gap)) break;
    const double merit =
        std::max({primal / opts.tol, dual / opts.dual_tol, gap / opts.gap_tol});
    if (merit < best_merit) {
      best_merit = merit;
      res.w = w;
      res.tau = tau;
      res.primal = primal;
      res.dual = dual;
      res.gap = gap;
    }
    if (merit <= 1.0) break;

    const Vector wdiag = z.cwiseQuotient(s);
    const Vector dn_inv = (Vector::Ones(n) + wdiag.tail(n)).cwiseInverse();
    const Vector w_lo = wdiag.head(k), w_hi = wdiag.segment(k, k);
    Matrix Mfull = A.transpose() * (w_lo + w_hi).asDiagonal() * A;
    Mfull.diagonal() += dn_inv.cwiseInverse();
    const Eigen::LLT<Matrix> llt(Mfull);
    if (llt.info() != Eigen::Success) break;
    auto M_solve = [&](const Vector& r) { return Vector(llt.solve(r)); };
    const Vector c = A.transpose() * (w_lo - w_hi);
    const double k_tt = q_tau + w_lo.sum() + w_hi.sum();
    const Vector u1 = M_solve(ones);
    const Vector uc = with_tau ? M_solve(c) : Vector::Zero(n);
    const double a11 = k_tt - c.dot(uc), a12 = -c.dot(u1);
    const double a21 = -ones.dot(uc), a22 = -ones.dot(u1);
    const double det = a11 * a22 - a12 * a21;

    // Reduced system [M c 1; c' k_tt 0; 1' 0 0] (dw, dt, dnu) = (ra, rb, rc),
    // solved by the border elimination plus two refinement steps against
    // the unfactored operator.
    const Vector dn = Vector::Ones(n) + wdiag.tail(n);
    const Vector w_sum = w_lo + w_hi;
    auto bordered = [&](const Vector& ra, double rb, double rc, Vector& dw, double& dt,
                        double& dnu) {
      const Vector u0 = M_solve(ra);
      if (with_tau) {
        const double b1 = rb - c.dot(u0), b2 = rc - ones.dot(u0);
        dt = (b1 * a22 - a12 * b2) / det;
        dnu = (a11 * b2 - a21 * b1) / det;
        dw = u0 - dt * uc - dnu * u1;
      } else {
        dt = 0.0;
        dnu = (ones.dot(u0) - rc) / ones.dot(u1);
        dw = u0 - dnu * u1;
      }
    };
    auto solve_reduced = [&](const Vector& ra, double rb, double rc, Vector& dw, double& dt,
                             double& dnu) {
      bordered(ra, rb, rc, dw, dt, dnu);
      for (int refine = 0; refine < 2; ++refine) {
        const Vector Mdw = dn.cwiseProduct(dw) + A.transpose() * w_sum.cwiseProduct(A * dw);
        const Vector ea = ra - (Mdw + dt * c + dnu * ones);
        const double eb = with_tau ? rb - (c.dot(dw) + k_tt * dt) : 0.0;
        const double ec = rc - ones.dot(dw);
        Vector cw;
        double ct = 0.0, cn = 0.0;
        bordered(ea, eb, ec, cw, ct, cn);
        dw += cw;
        dt += ct;
        dnu += cn;
      }
    };

    // Newton direction for a complementarity target r_c.
    auto direction = [&](const Vector& r_c, Vector& dw, double& dt, Vector& ds, Vector& dz,
                         double& dnu) {
      const Vector tmp = (-r_c + z.cwiseProduct(r_p)).cwiseQuotient(s);
      const Vector tdiff = tmp.segment(k, k) - tmp.head(k);
      const Vector ra = -r_dw - (A.transpose() * tdiff - tmp.tail(n));
      const double rb = -r_dt + tmp.head(2 * k).sum();
      solve_reduced(ra, rb, -r_e, dw, dt, dnu);
      ds = -r_p - G_times(dw, dt);
      dz = tmp + wdiag.cwiseProduct(G_times(dw, dt));
    };
    auto max_step = [](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      }
      return a;
    };

    Vector dw, ds, dz;
    double dt = 0.0, dnu = 0.0;
    direction(s.cwiseProduct(z), dw, dt, ds, dz, dnu);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3.0);
    const Vector r_c = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
    direction(r_c, dw, dt, ds, dz, dnu);
    const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    w += a * dw;
    tau += a * dt;
    s += a * ds;
    z += a * dz;
    nu += a * dnu;
  }
  res.converged = best_merit <= 1.0;
  // Interior iterates are strictly positive; the sum constraint holds to
  // the residual tolerance and is made exact here.
  res.w = res.w.cwiseMax(0.0);
  res.w *= ng / res.w.sum();
  return res;
}

}  // namespace

Vector stable_balancing(const Matrix& rows, const Vector& target, const Vector& delta_in,
                        const StableBalancingOptions& opts) {
  const Index n = rows.rows();
  const auto ng = static_cast<double>(n);
  if (target.size() != rows.cols()) throw DataError("stable balancing target has wrong length");
  Vector delta = delta_in.size() == 1 ? Vector::Constant(rows.cols(), delta_in(0)) : delta_in;
  if (delta.size() != rows.cols()) throw UsageError("delta must have one entry or one per column");
  if ((delta.array() < 0.0).any() || !delta.allFinite()) throw UsageError("delta must be nonnegative");

  // Column-scaled constraints A w - t in [-d, d] with A = S^{-1} rows' / n.
  const Vector sd = column_sd(rows);
  std::vector<Index> keep;
  for (Index j = 0; j < rows.cols(); ++j) {
    const double scale = 1.0 + std::abs(target(j));
    if (sd(j) > 1e-12 * scale) {
      keep.push_back(j);
    } else if (std::abs(rows(0, j) - target(j)) > delta(j) + 1e-10 * scale) {
      throw NumericalError("stable balancing is infeasible: column " + std::to_string(j + 1) +
                           " is constant and outside its tolerance");
    }
  }
  const auto k = static_cast<Index>(keep.size());
  const Vector uniform = Vector::Ones(n);
  if (k == 0) return uniform;
  Matrix A(k, n);
  Vector t(k), d(k);
  for (Index u = 0; u < k; ++u) {
    const Index j = keep[static_cast<std::size_t>(u)];
    A.row(u) = rows.col(j).transpose() / (sd(j) * ng);
    t(u) = target(j) / sd(j);
    d(u) = delta(j) / sd(j);
  }
  const double excess0 = ((A * uniform - t).cwiseAbs() - d).cwiseMax(0.0).maxCoeff();
  if (excess0 <= 0.0) return uniform;

  const QpResult r = balancing_qp(A, t, d, false, 0.0, opts);
  const double excess = ((A * r.w - t).cwiseAbs() - d).cwiseMax(0.0).maxCoeff();
  if (!r.converged || !(excess <= 1e-6)) {
    std::ostringstream msg;
    msg << "stable balancing could not meet the tolerances (delta may be infeasible): largest "
           "scaled excess imbalance "
        << excess << ", primal residual " << r.primal << ", dual residual " << r.dual;
    throw NumericalError(msg.str());
  }
  return r.w;
}

Vector approx_balancing(const Matrix& rows, const Vector& target, double zeta,
                        double* implied_delta, const StableBalancingOptions& opts) {
  const Index n = rows.rows();
  const auto ng = static_cast<double>(n);
  if (target.size() != rows.cols()) throw DataError("balancing target has wrong length");
  if (!(zeta > 0.0 && zeta < 1.0)) throw UsageError("zeta must lie in (0, 1)");
  if (n < 1) throw DataError("balancing needs at least one unit");
  const Matrix A = rows.transpose() / ng;
  // (1 - zeta) ||w / n||^2 + zeta tau^2, rescaled so the weight term is ||w||^2 / 2.
  const double q_tau = ng * ng * zeta / (1.0 - zeta);
  const QpResult r =
      balancing_qp(A, target, Vector::Zero(rows.cols()), true, q_tau, opts);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "approximate balancing did not converge: primal residual " << r.primal
        << ", dual residual " << r.dual;
    throw NumericalError(msg.str());
  }
  if (implied_delta) *implied_delta = (A * r.w - target).cwiseAbs().maxCoeff();
  return r.w;
}

Vector default_delta(const Matrix& design, Index n_control) {
  const Index n_treated = design.rows() - n_control;
  if (n_control < 2 || n_treated < 2) throw DataError("default delta needs two units per group");
  const Vector sc = column_sd(design.topRows(n_control));
  const Vector st = column_sd(design.bottomRows(n_treated));
  return 0.1 * ((sc.array().square() + st.array().square()) / 2.0).sqrt().matrix();
}

GroupWeights stable_balancing(const Matrix& design, Index n_control, Estimand estimand,
                              const Vector& delta, const StableBalancingOptions& opts) {
  return per_group(design, n_control, estimand, [&](const Matrix& r, const Vector& t) {
    return stable_balancing(r, t, delta, opts);
  });
}

GroupWeights approx_balancing(const Matrix& design, Index n_control, Estimand estimand,
                              double zeta, const StableBalancingOptions& opts) {
  Matrix scaled = design;
  const Vector sd = column_sd(design);
  for (Index j = 0; j < design.cols(); ++j) {
    if (sd(j) > 0.0) scaled.col(j) /= sd(j);
  }
  return per_group(scaled, n_control, estimand, [&](const Matrix& r, const Vector& t) {
    return approx_balancing(r, t, zeta, nullptr, opts);
  });
}

GroupWeights oracle_propensity_weights(const Vector& propensity, Index n_control,
                                       Estimand estimand, bool normalize) {
  const Index n = propensity.size();
  const Index n_treated = n - n_control;
  if (n_control < 1 || n_treated < 1) throw DataError("propensity weights need both groups");
  for (Index i = 0; i < n; ++i) {
    if (!(propensity(i) > 0.0 && propensity(i) < 1.0)) {
      throw DataError("propensity of unit " + std::to_string(i + 1) + " is not in (0, 1)");
    }
  }
  const auto nc = static_cast<double>(n_control), nt = static_cast<double>(n_treated),
             nn = static_cast<double>(n);
  const auto pc = propensity.head(n_control).array();
  const auto pt = propensity.tail(n_treated).array();
  GroupWeights w{Vector::Ones(n_control), Vector::Ones(n_treated)};
  switch (estimand) {
    case Estimand::ATT: w.control = (nc / nt) * pc / (1.0 - pc); break;
    case Estimand::ATC: w.treated = (nt / nc) * (1.0 - pt) / pt; break;
    case Estimand::ATE:
      w.control = nc / (nn * (1.0 - pc));
      w.treated = nt / (nn * pt);
      break;
  }
  if (normalize) {
    if (estimand != Estimand::ATC) w.control *= nc / w.control.sum();
    if (estimand != Estimand::ATT) w.treated *= nt / w.treated.sum();
  }
  return w;
}

double dim(const Dataset& data, Estimand) {
  return data.treated_outcomes().mean() - data.control_outcomes().mean();
}

GroupWeights baseline_weights(const Matrix& design, Index n_control, Estimand estimand,
                              const BaselineConfig& config, const Vector* propensity) {
  switch (config.method) {
    case BaselineMethod::DIM:
      return {Vector::Ones(n_control), Vector::Ones(design.rows() - n_control)};
    case BaselineMethod::EBAL: return entropy_balancing(design, n_control, estimand, config.ebal);
    case BaselineMethod::ABAL1: {
      if (!config.delta && config.implied_delta) {
        return approx_balancing(design, n_control, estimand, config.zeta, config.abal);
      }
      const Vector delta = config.delta ? *config.delta : default_delta(design, n_control);
      return stable_balancing(design, n_control, estimand, delta, config.abal);
    }
    case BaselineMethod::OraclePS:
      if (!propensity) throw UsageError("oracle propensity weights need known propensities");
      return oracle_propensity_weights(*propensity, n_control, estimand, config.normalize);
  }
  throw UsageError("unknown baseline method");
}

}  // namespace tfb
