#include "tfb/tfb_solver.hpp"

#include "tfb/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace tfb {

Vector project_scaled_simplex(const Vector& v, double total) {
  if (!(total > 0.0)) throw UsageError("simplex total must be positive");
  const Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double t = (cumulative - total) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

TfbProblem make_tfb_problem(const BalanceModels& models, Index n_control, double q,
                            Estimand estimand) {
  if (!(q > 0.0 && q < 1.0)) throw UsageError("q must lie in (0, 1)");
  auto need = [](const std::optional<FittedDesign>& d, const char* what) -> const FittedDesign& {
    if (!d) throw UsageError(std::string("estimand needs a ") + what + "-group outcome model");
    return *d;
  };
  auto term = [&](const FittedDesign& fd, int group, const Vector& target) {
    const Index n = fd.design.rows();
    TfbTerm t;
    t.group = group;
    t.rows = group == 0 ? Matrix(fd.design.topRows(n_control))
                        : Matrix(fd.design.bottomRows(n - n_control));
    t.target = target;
    t.beta = fd.fit.coefficients;
    t.cov_factor = fd.fit.cov_factor;
    t.df = static_cast<long>(fd.fit.df());
    if (t.rows.cols() != t.beta.size() || t.cov_factor.cols() != t.beta.size()) {
      throw DataError("outcome model does not match the design it is balanced on");
    }
    return t;
  };

  TfbProblem p;
  p.estimand = estimand;
  p.q = q;
  p.n_control = n_control;
  const FittedDesign* any = models.control ? &*models.control : models.treated ? &*models.treated : nullptr;
  if (!any) throw UsageError("no outcome model supplied");
  p.n_treated = any->design.rows() - n_control;
  if (n_control < 1 || p.n_treated < 1) throw DataError("TFB needs both groups");

  switch (estimand) {
    case Estimand::ATT: {
      const auto& c = need(models.control, "control");
      p.terms.push_back(term(c, 0, c.design.bottomRows(p.n_treated).colwise().mean().transpose()));
      p.sigma2_control = c.fit.residual_variance;
      break;
    }
    case Estimand::ATC: {
      const auto& t = need(models.treated, "treated");
      p.terms.push_back(term(t, 1, t.design.topRows(n_control).colwise().mean().transpose()));
      p.sigma2_treated = t.fit.residual_variance;
      break;
    }
    case Estimand::ATE: {
      const auto& c = need(models.control, "control");
      const auto& t = need(models.treated, "treated");
      p.terms.push_back(term(c, 0, c.design.colwise().mean().transpose()));
      p.terms.push_back(term(t, 1, t.design.colwise().mean().transpose()));
      p.sigma2_control = c.fit.residual_variance;
      p.sigma2_treated = t.fit.residual_variance;
      break;
    }
  }
  return p;
}

namespace {

// Precomputed affine maps so each term evaluation costs O(rank * n_g):
//   R u = m0 - H w_g,  beta' u = v0 - h' w_g.
// |v| is carried exactly by a split pair (p, m) >= 0 with p - m = v, so the
// only smoothed piece left is the norm.
struct CompiledTerm {
  int group;
  Index offset;
  Index split;  // position of (p, m) in the packed vector
  double c;
  Matrix H;
  Vector m0;
  Vector h;
  double v0;
  double eps = 0.0;
};

struct Compiled {
  std::vector<CompiledTerm> terms;
  Index n_control_vars = 0;  // length of the control block (0 if unweighted)
  Index n_weight_vars = 0;
  Index n_vars = 0;
  Index n_control = 0, n_treated = 0;
  double pen_control = 0.0, pen_treated = 0.0;
  int term_of_group[2] = {-1, -1};

  explicit Compiled(const TfbProblem& p) : n_control(p.n_control), n_treated(p.n_treated) {
    n_control_vars = p.weights_control() ? p.n_control : 0;
    n_weight_vars = n_control_vars + (p.weights_treated() ? p.n_treated : 0);
    n_vars = n_weight_vars + 2 * static_cast<Index>(p.terms.size());
    const auto nc = static_cast<double>(p.n_control), nt = static_cast<double>(p.n_treated);
    if (!(p.sigma2_control >= 0.0) || !(p.sigma2_treated >= 0.0)) {
      throw UsageError("residual variances must be nonnegative");
    }
    if (p.weights_control()) pen_control = p.sigma2_control / (nc * nc);
    if (p.weights_treated()) pen_treated = p.sigma2_treated / (nt * nt);
    for (const auto& t : p.terms) {
      if ((t.group == 0 && !p.weights_control()) || (t.group == 1 && !p.weights_treated())) {
        throw UsageError("TFB term weights a group the estimand does not weight");
      }
      if (term_of_group[t.group] >= 0) throw UsageError("at most one TFB term per group");
      const Index ng = t.group == 0 ? p.n_control : p.n_treated;
      if (t.rows.rows() != ng) throw DataError("TFB term rows do not match the group size");
      if (t.target.size() != t.beta.size()) throw DataError("TFB target has the wrong length");
      CompiledTerm ct;
      ct.group = t.group;
      ct.offset = t.group == 0 ? 0 : n_control_vars;
      ct.split = n_weight_vars + 2 * static_cast<Index>(terms.size());
      ct.c = std::sqrt(chi_sq_quantile(p.q, t.df));
      ct.H = t.cov_factor * t.rows.transpose() / static_cast<double>(ng);
      ct.m0 = t.cov_factor * t.target;
      ct.h = t.rows * t.beta / static_cast<double>(ng);
      ct.v0 = t.beta.dot(t.target);
      term_of_group[t.group] = static_cast<int>(terms.size());
      terms.push_back(std::move(ct));
    }
  }

  Index group_size(int g) const { return g == 0 ? n_control : n_treated; }

  double penalty(const Vector& x) const {
    double s = 0.0;
    if (n_control_vars > 0) s += pen_control * x.head(n_control_vars).squaredNorm();
    if (n_weight_vars > n_control_vars) {
      s += pen_treated * x.segment(n_control_vars, n_weight_vars - n_control_vars).squaredNorm();
    }
    return s;
  }

  auto weights_of(const CompiledTerm& t, const Vector& x) const {
    return x.segment(t.offset, group_size(t.group));
  }

  double exact_term(const CompiledTerm& t, const Vector& x) const {
    const auto w = weights_of(t, x);
    return t.c * (t.m0 - t.H * w).norm() + std::abs(t.v0 - t.h.dot(w));
  }

  double exact(const Vector& x) const {
    double s = 0.0;
    for (const auto& t : terms) s += exact_term(t, x);
    return s * s + penalty(x);
  }

  // Surrogate (sum_t c_t sqrt(||R u_t||^2 + eps_t^2) + p_t + m_t)^2 + penalty.
  double smooth(const Vector& x, Vector* grad) const {
    double s = 0.0;
    std::vector<Vector> ru(terms.size());
    std::vector<double> nr(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto& t = terms[k];
      ru[k] = t.m0 - t.H * weights_of(t, x);
      nr[k] = std::sqrt(ru[k].squaredNorm() + t.eps * t.eps);
      s += t.c * nr[k] + x(t.split) + x(t.split + 1);
    }
    if (grad) {
      grad->setZero(n_vars);
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& t = terms[k];
        grad->segment(t.offset, group_size(t.group)).noalias() -=
            (2.0 * s * t.c / nr[k]) * (t.H.transpose() * ru[k]);
        (*grad)(t.split) = 2.0 * s;
        (*grad)(t.split + 1) = 2.0 * s;
      }
      if (n_control_vars > 0) grad->head(n_control_vars) += 2.0 * pen_control * x.head(n_control_vars);
      if (n_weight_vars > n_control_vars) {
        const Index len = n_weight_vars - n_control_vars;
        grad->segment(n_control_vars, len) += 2.0 * pen_treated * x.segment(n_control_vars, len);
      }
    }
    return s * s + penalty(x);
  }

  // Projection of (w, p, m) onto {w in scaled simplex, p, m >= 0,
  // p - m = v0 - h'w}. The multiplier of the equality solves a monotone
  // scalar equation.
  void project_block(const CompiledTerm& t, const Vector& y, Vector& out) const {
    const Index ng = group_size(t.group);
    const auto total = static_cast<double>(ng);
    const Vector yw = y.segment(t.offset, ng);
    const double pb = y(t.split), mb = y(t.split + 1);
    Vector w;
    auto phi = [&](double lam) {
      // Stationarity: w = P(yw - lam h), p = (pb - lam)+, m = (mb + lam)+.
      w = project_scaled_simplex(yw - lam * t.h, total);
      return std::max(pb - lam, 0.0) - std::max(mb + lam, 0.0) - (t.v0 - t.h.dot(w));
    };
    double lo = -1.0, hi = 1.0;
    const double scale = 1.0 + std::abs(pb) + std::abs(mb) + std::abs(t.v0);
    lo = -scale;
    hi = scale;
    double f_lo = phi(lo), f_hi = phi(hi);
    for (int i = 0; i < 200 && f_lo < 0.0; ++i) {
      hi = lo;
      f_hi = f_lo;
      lo *= 2.0;
      f_lo = phi(lo);
    }
    for (int i = 0; i < 200 && f_hi > 0.0; ++i) {
      lo = hi;
      f_lo = f_hi;
      hi *= 2.0;
      f_hi = phi(hi);
    }
    // phi is nonincreasing and piecewise linear: Illinois false position.
    double lam = 0.5 * (lo + hi);
    int side = 0;
    for (int i = 0; i < 200; ++i) {
      lam = (f_lo - f_hi) != 0.0 ? (lo * (-f_hi) + hi * f_lo) / (f_lo - f_hi) : 0.5 * (lo + hi);
      if (!(lam > lo && lam < hi)) lam = 0.5 * (lo + hi);
      const double f = phi(lam);
      if (f == 0.0 || hi - lo <= 1e-15 * (std::abs(lo) + std::abs(hi))) break;
      if (f > 0.0) {
        lo = lam;
        f_lo = f;
        if (side == 1) f_hi *= 0.5;
        side = 1;
      } else {
        hi = lam;
        f_hi = f;
        if (side == -1) f_lo *= 0.5;
        side = -1;
      }
    }
    phi(lam);
    out.segment(t.offset, ng) = w;
    out(t.split) = std::max(pb - lam, 0.0);
    out(t.split + 1) = std::max(mb + lam, 0.0);
  }

  Vector project(const Vector& y) const {
    Vector out(n_vars);
    for (int g = 0; g < 2; ++g) {
      const Index ng = group_size(g);
      const bool weighted = g == 0 ? n_control_vars > 0 : n_weight_vars > n_control_vars;
      if (!weighted) continue;
      const Index offset = g == 0 ? 0 : n_control_vars;
      if (term_of_group[g] >= 0) {
        project_block(terms[static_cast<std::size_t>(term_of_group[g])], y, out);
      } else {
        out.segment(offset, ng) =
            project_scaled_simplex(y.segment(offset, ng), static_cast<double>(ng));
      }
    }
    return out;
  }

  GroupWeights unpack(const Vector& x) const {
    GroupWeights w;
    w.control = n_control_vars > 0 ? Vector(x.head(n_control_vars)) : Vector::Ones(n_control);
    w.treated = n_weight_vars > n_control_vars
                    ? Vector(x.segment(n_control_vars, n_weight_vars - n_control_vars))
                    : Vector::Ones(n_treated);
    return w;
  }

  // Packs weights and sets each split pair to (v+, v-).
  Vector pack(const GroupWeights& w) const {
    Vector x = Vector::Zero(n_vars);
    if (n_control_vars > 0) {
      if (w.control.size() != n_control) throw DataError("control weight length mismatch");
      x.head(n_control_vars) = w.control;
    }
    if (n_weight_vars > n_control_vars) {
      if (w.treated.size() != n_treated) throw DataError("treated weight length mismatch");
      x.segment(n_control_vars, n_weight_vars - n_control_vars) = w.treated;
    }
    for (const auto& t : terms) {
      const double v = t.v0 - t.h.dot(weights_of(t, x));
      x(t.split) = std::max(v, 0.0);
      x(t.split + 1) = std::max(-v, 0.0);
    }
    return x;
  }
};

}  // namespace

double tfb_objective(const GroupWeights& weights, const TfbProblem& problem) {
  const Compiled c(problem);
  return c.exact(c.pack(weights));
}

WeightSolution solve(const TfbProblem& problem, const SolverConfig& config) {
  Compiled c(problem);
  GroupWeights uniform{Vector::Ones(c.n_control), Vector::Ones(c.n_treated)};
  Vector x = c.pack(uniform);

  WeightSolution sol;
  for (auto& t : c.terms) {
    t.eps = config.epsilon_scale * (1.0 + c.exact_term(t, x));
    sol.smoothing_epsilon = std::max(sol.smoothing_epsilon, t.eps);
  }

  double best_exact = c.exact(x);
  Vector best = x;
  std::vector<double> trace{best_exact};

  Vector y = x, grad(c.n_vars), x_new;
  double f_x = c.smooth(x, nullptr);
  double t_mom = 1.0;
  double L = 1.0;
  {
    // Initial curvature guess from a small probe step.
    Vector g0(c.n_vars);
    c.smooth(x, &g0);
    const double gn = g0.norm();
    if (gn > 0.0) {
      const double h = 1e-3 * std::sqrt(static_cast<double>(c.n_vars)) / gn;
      Vector g1(c.n_vars);
      c.smooth(x - h * g0, &g1);
      const double curv = (g1 - g0).norm() / (h * gn);
      if (std::isfinite(curv) && curv > 0.0) L = curv;
    }
  }

  int small_steps = 0;
  int it = 0;
  for (; it < config.max_iters; ++it) {
    const double f_y = c.smooth(y, &grad);
    if (!grad.allFinite() || !std::isfinite(f_y)) {
      std::ostringstream msg;
      msg << "non-finite gradient in TFB solver at iteration " << it << " (objective " << f_y
          << ")";
      throw NumericalError(msg.str());
    }
    L *= 0.9;
    double f_new = 0.0;
    for (int bt = 0; bt < 200; ++bt) {
      x_new = c.project(y - grad / L);
      const Vector d = x_new - y;
      f_new = c.smooth(x_new, nullptr);
      const double bound = f_y + grad.dot(d) + 0.5 * L * d.squaredNorm();
      if (f_new <= bound + 1e-15 * std::abs(f_y)) break;
      L *= 2.0;
    }

    double decrease;
    if (f_new > f_x) {
      // Function-value restart: drop momentum and retry from x.
      t_mom = 1.0;
      y = x;
      decrease = 0.0;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
      y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x);
      t_mom = t_next;
      decrease = f_x - f_new;
      x = x_new;
      f_x = f_new;
      const double e = c.exact(x);
      if (e < best_exact) {
        best_exact = e;
        best = x;
      }
    }
    trace.push_back(best_exact);
    if (trace.size() > config.trace_length) trace.erase(trace.begin());

    const double rel = decrease / std::max(std::abs(f_x + decrease), 1e-300);
    small_steps = rel < config.tol ? small_steps + 1 : 0;
    if (small_steps >= config.patience) {
      sol.converged = true;
      ++it;
      break;
    }
  }

  sol.iterations = it;
  sol.objective = best_exact;
  sol.objective_trace = std::move(trace);
  sol.weights = c.unpack(best);
  return sol;
}

}  // namespace tfb
