#include "bmsopt/ip_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace bmsopt {

void SolverOptions::validate() const {
  if (!(tol > 0 && mu_init > 0 && max_iter > 0 && armijo > 0 && backtrack > 0 &&
        delta_w_init > 0 && delta_w_growth > 1 && delta_c >= 0 && bound_push > 0)) {
    throw std::invalid_argument("solver options must be positive");
  }
  if (!(mu_factor > 0 && mu_factor < 1)) throw std::invalid_argument("mu_factor must lie in (0,1)");
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("fraction-to-boundary factor must lie in (0,1)");
  if (!(backtrack < 1 && armijo < 0.5)) throw std::invalid_argument("bad line-search constants");
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kOptimal: return "optimal";
    case SolverStatus::kMaxIter: return "max-iter";
    case SolverStatus::kInfeasibleDetected: return "infeasible-detected";
    case SolverStatus::kLineSearchFailure: return "line-search-failure";
  }
  return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Barrier problem over w = (x, s): slacks s for the inequality rows, so all
// constraints become equalities e(w) = 0 and every bound sits on w.
class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& nlp, const SolverOptions& opt) : nlp_(nlp), opt_(opt) {
    n_ = nlp.n;
    m_ = nlp.m;
    slack_of_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (!nlp.is_equality(i)) {
        slack_of_[i] = n_ + static_cast<int>(row_of_slack_.size());
        row_of_slack_.push_back(i);
      }
    }
    nw_ = n_ + static_cast<int>(row_of_slack_.size());
    lo_.resize(nw_);
    hi_.resize(nw_);
    for (int i = 0; i < n_; ++i) {
      lo_[i] = nlp.x_lo[i];
      hi_[i] = nlp.x_hi[i];
    }
    for (std::size_t j = 0; j < row_of_slack_.size(); ++j) {
      lo_[n_ + j] = nlp.c_lo[row_of_slack_[j]];
      hi_[n_ + j] = nlp.c_hi[row_of_slack_[j]];
    }
  }

  NlpSolution run(std::vector<double> x0);

 private:
  struct Point {
    Vec w;
    double f = 0.0;          // unscaled objective
    std::vector<double> c;   // constraint values
    Vec e;                   // e(w)
    bool ok = false;
  };

  bool has_lo(int i) const { return std::isfinite(lo_[i]); }
  bool has_hi(int i) const { return std::isfinite(hi_[i]); }

  bool evaluate(Point& p, bool strict) const;
  double barrier(const Point& p, double mu) const;
  void push_inside(Vec& w) const;
  Multipliers multipliers(const Vec& lambda, const Vec& zl, const Vec& zh) const;

  const NlpProblem& nlp_;
  const SolverOptions& opt_;
  int n_ = 0, m_ = 0, nw_ = 0;
  std::vector<int> slack_of_;     // row -> index into w, or -1
  std::vector<int> row_of_slack_; // slack j -> row
  std::vector<double> lo_, hi_;
};

bool InteriorPoint::evaluate(Point& p, bool strict) const {
  std::vector<double> x(p.w.data(), p.w.data() + n_);
  p.ok = false;
  try {
    p.f = nlp_.objective(x);
    if (!std::isfinite(p.f)) {
      if (strict) throw EvaluationError(-1, "objective is not finite");
      return false;
    }
    p.c.assign(m_, 0.0);
    if (m_ > 0) nlp_.constraints(x, p.c);
    p.e.resize(m_);
    for (int i = 0; i < m_; ++i) {
      if (!std::isfinite(p.c[i])) {
        if (strict) {
          throw EvaluationError(i, "constraint " + std::to_string(i) +
                                       (nlp_.con_names.empty() ? "" : " (" + nlp_.con_names[i] + ")") +
                                       " is not finite");
        }
        return false;
      }
      p.e[i] = slack_of_[i] < 0 ? p.c[i] - nlp_.c_lo[i] : p.c[i] - p.w[slack_of_[i]];
    }
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& ex) {
    if (strict) throw EvaluationError(-1, std::string("model evaluation failed: ") + ex.what());
    return false;
  }
  p.ok = true;
  return true;
}

double InteriorPoint::barrier(const Point& p, double mu) const {
  double phi = nlp_.obj_scale * p.f;
  for (int i = 0; i < nw_; ++i) {
    if (has_lo(i)) phi -= mu * std::log(p.w[i] - lo_[i]);
    if (has_hi(i)) phi -= mu * std::log(hi_[i] - p.w[i]);
  }
  return phi;
}

void InteriorPoint::push_inside(Vec& w) const {
  for (int i = 0; i < nw_; ++i) {
    const double k = opt_.bound_push;
    if (has_lo(i) && has_hi(i)) {
      const double width = hi_[i] - lo_[i];
      const double pl = std::min(k * std::max(1.0, std::abs(lo_[i])), 0.5 * k * width);
      const double ph = std::min(k * std::max(1.0, std::abs(hi_[i])), 0.5 * k * width);
      if (width <= 0) throw std::invalid_argument("solver: fixed variables are not supported");
      w[i] = std::clamp(w[i], lo_[i] + pl, hi_[i] - ph);
    } else if (has_lo(i)) {
      w[i] = std::max(w[i], lo_[i] + k * std::max(1.0, std::abs(lo_[i])));
    } else if (has_hi(i)) {
      w[i] = std::min(w[i], hi_[i] - k * std::max(1.0, std::abs(hi_[i])));
    }
  }
}

Multipliers InteriorPoint::multipliers(const Vec& lambda, const Vec& zl, const Vec& zh) const {
  Multipliers mu;
  mu.lambda.assign(lambda.data(), lambda.data() + m_);
  mu.y_lo.assign(m_, 0.0);
  mu.y_hi.assign(m_, 0.0);
  for (int i = 0; i < m_; ++i) {
    if (slack_of_[i] >= 0) {
      mu.y_lo[i] = zl[slack_of_[i]];
      mu.y_hi[i] = zh[slack_of_[i]];
      mu.lambda[i] = mu.y_hi[i] - mu.y_lo[i];
    }
  }
  mu.z_lo.assign(zl.data(), zl.data() + n_);
  mu.z_hi.assign(zh.data(), zh.data() + n_);
  return mu;
}

NlpSolution InteriorPoint::run(std::vector<double> x0) {
  NlpSolution sol;
  const double sigma = nlp_.obj_scale;
  Point cur;
  cur.w = Vec::Zero(nw_);
  for (int i = 0; i < n_; ++i) cur.w[i] = x0[i];
  push_inside(cur.w);
  {
    // Slacks start at the (pushed) constraint values.
    std::vector<double> x(cur.w.data(), cur.w.data() + n_), c(m_);
    if (m_ > 0) nlp_.constraints(x, c);
    for (std::size_t j = 0; j < row_of_slack_.size(); ++j) {
      const double v = c[row_of_slack_[j]];
      cur.w[n_ + j] = std::isfinite(v) ? v : 0.0;
    }
    push_inside(cur.w);
  }
  evaluate(cur, true);

  Vec lambda = Vec::Zero(m_);
  Vec zl = Vec::Zero(nw_), zh = Vec::Zero(nw_);
  for (int i = 0; i < nw_; ++i) {
    if (has_lo(i)) zl[i] = 1.0;
    if (has_hi(i)) zh[i] = 1.0;
  }
  double mu = opt_.mu_init;
  const double mu_min = opt_.tol / 10.0;
  double nu = 1.0;  // l1 penalty
  double delta_w_last = 0.0;
  double lm = 0.0;  // persistent lower bound on the primal shift
  constexpr double kLmInit = 1e-3, kLmMax = 1e6, kShortStep = 1e-2;
  constexpr int kMaxRetry = 8;

  std::vector<double> grad(n_);
  Triplets jac, hess;
  Vec grad_w(nw_);
  SpMat A;  // m x nw

  const auto load_derivatives = [&](const Point& p) {
    std::vector<double> x(p.w.data(), p.w.data() + n_);
    nlp_.gradient(x, grad);
    grad_w.setZero();
    for (int i = 0; i < n_; ++i) grad_w[i] = sigma * grad[i];
    jac.clear();
    if (m_ > 0) nlp_.jacobian(x, jac);
    for (int i = 0; i < m_; ++i) {
      if (slack_of_[i] >= 0) jac.emplace_back(i, slack_of_[i], -1.0);
    }
    A = assemble(m_, nw_, jac);
  };

  // Residuals of the barrier KKT system at (cur, lambda, z).
  const auto errors = [&](double mu_, double& stat, double& prim, double& comp) {
    const Vec r = grad_w + A.transpose() * lambda - zl + zh;
    stat = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    prim = m_ ? cur.e.cwiseAbs().maxCoeff() : 0.0;
    comp = 0.0;
    for (int i = 0; i < nw_; ++i) {
      if (has_lo(i)) comp = std::max(comp, std::abs((cur.w[i] - lo_[i]) * zl[i] - mu_));
      if (has_hi(i)) comp = std::max(comp, std::abs((hi_[i] - cur.w[i]) * zh[i] - mu_));
    }
    return std::max({stat, prim, comp});
  };

  load_derivatives(cur);
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  constexpr double kCurvature = 1e-10;
  double last_alpha = 0.0;

  for (int iter = 0;; ++iter) {
    double stat, prim, comp;
    errors(0.0, stat, prim, comp);
    const Multipliers mult = multipliers(lambda, zl, zh);
    const KktResiduals kkt = kkt_residuals(nlp_, std::vector<double>(cur.w.data(), cur.w.data() + n_), mult);
    sol.history.push_back({iter, mu, sigma * cur.f, kkt.primal, kkt.stationarity, kkt.complementarity,
                           last_alpha, delta_w_last});
    if (opt_.verbose) {
      std::clog << "iter " << iter << " mu " << mu << " f " << sigma * cur.f << " stat " << kkt.stationarity
                << " prim " << kkt.primal << " comp " << kkt.complementarity << " alpha " << last_alpha
                << " dw " << delta_w_last << " lm " << lm << " nu " << nu << " |lam| "
                << (m_ ? lambda.cwiseAbs().maxCoeff() : 0.0) << '\n';
    }
    sol.P.assign(cur.w.data(), cur.w.data() + n_);
    sol.mult = mult;
    sol.kkt = kkt;
    sol.objective = cur.f;
    sol.iterations = iter;
    if (kkt.max() <= opt_.tol) {
      sol.status = SolverStatus::kOptimal;
      return sol;
    }
    if (iter >= opt_.max_iter) {
      sol.status = SolverStatus::kMaxIter;
      sol.message = "iteration limit reached";
      return sol;
    }
    // Monotone barrier update (possibly several times per iteration).
    while (mu > mu_min && errors(mu, stat, prim, comp) <= opt_.kappa_eps * mu) {
      mu = std::max(mu_min, std::min(opt_.mu_factor * mu, std::pow(mu, opt_.mu_superlinear)));
    }

    // Hessian of the Lagrangian (x block only).
    hess.clear();
    {
      std::vector<double> x(cur.w.data(), cur.w.data() + n_);
      std::vector<double> lam(lambda.data(), lambda.data() + m_);
      nlp_.hessian(x, sigma, lam, hess);
    }
    Vec Sigma = Vec::Zero(nw_);
    Vec rd = grad_w + A.transpose() * lambda;
    for (int i = 0; i < nw_; ++i) {
      if (has_lo(i)) {
        const double g = cur.w[i] - lo_[i];
        Sigma[i] += zl[i] / g;
        rd[i] -= mu / g;
      }
      if (has_hi(i)) {
        const double g = hi_[i] - cur.w[i];
        Sigma[i] += zh[i] / g;
        rd[i] += mu / g;
      }
    }
    const int dim = nw_ + m_;
    double step_alpha = 0.0, step_alpha_z = 0.0;
    Vec step_dlam, step_dzl, step_dzh;
    const auto build = [&](double dw, double dc) {
      Triplets t;
      t.reserve(hess.size() + jac.size() + dim);
      for (const auto& h : hess) {
        if (h.row() >= h.col()) t.push_back(h);
        else t.emplace_back(h.col(), h.row(), h.value());
      }
      for (int i = 0; i < nw_; ++i) t.emplace_back(i, i, Sigma[i] + dw);
      for (const auto& a : jac) t.emplace_back(nw_ + a.row(), a.col(), a.value());
      for (int i = 0; i < m_; ++i) t.emplace_back(nw_ + i, nw_ + i, -dc);
      SpMat K(dim, dim);
      K.setFromTriplets(t.begin(), t.end());
      return K;
    };
    // A very short accepted step means the Newton model is poor along a flat
    // direction; retry with a larger primal shift (Levenberg-Marquardt style).
    for (int retry = 0;; ++retry) {
      SpMat K;
      bool use_lu = false;
      // Solve, with a couple of refinement sweeps against the unregularized
      // constraint block.
      const auto kkt_solve = [&](const Vec& rhs) {
        const auto base = [&](const Vec& r) -> Vec { return use_lu ? Vec(lu.solve(r)) : Vec(ldlt.solve(r)); };
        Vec sol_v = base(rhs);
        SpMat Kfull = K;
        for (int i = 0; i < m_; ++i) Kfull.coeffRef(nw_ + i, nw_ + i) = 0.0;
        const SpMat Ksym = Kfull.selfadjointView<Eigen::Lower>();
        for (int it = 0; it < 3; ++it) {
          const Vec res = rhs - Ksym * sol_v;
          if (res.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) break;
          sol_v += base(res);
        }
        return sol_v;
      };
      Vec rhs(dim);
      rhs.head(nw_) = -rd;
      rhs.tail(m_) = -cur.e;
      // Inertia correction: want nw positive and m negative pivots. The
      // unpivoted LDLT breaks down on some orderings of a nonsingular K, so
      // when it fails or reports the wrong signs the step comes from a pivoted
      // LU and is kept if it is accurate and has positive curvature.
      double delta_w = lm;
      Vec d;
      bool factored = false;
      for (int attempt = 0; attempt < 200 && !factored; ++attempt) {
        K = build(delta_w, opt_.delta_c);
        use_lu = false;
        ldlt.compute(K);
        bool inertia_ok = false;
        if (ldlt.info() == Eigen::Success) {
          const Vec D = ldlt.vectorD();
          int pos = 0, neg = 0;
          for (int i = 0; i < dim; ++i) {
            if (D[i] > 0) ++pos;
            else if (D[i] < 0) ++neg;
          }
          inertia_ok = pos == nw_ && neg == m_;
        }
        if (inertia_ok) {
          d = kkt_solve(rhs);
          factored = d.allFinite();
        } else {
          lu.compute(SpMat(K.selfadjointView<Eigen::Lower>()));
          if (lu.info() == Eigen::Success) {
            use_lu = true;
            d = kkt_solve(rhs);
            const SpMat Ksym = K.selfadjointView<Eigen::Lower>();
            Vec res = Ksym * d - rhs;
            res.tail(m_) += opt_.delta_c * d.tail(m_);
            const Vec dw_try = d.head(nw_);
            const double curv = dw_try.dot(Ksym.topLeftCorner(nw_, nw_) * dw_try);
            factored = d.allFinite() &&
                       res.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()) &&
                       curv >= kCurvature * dw_try.squaredNorm();
          }
        }
        if (factored) break;
        if (delta_w == lm) {
          delta_w = std::max(lm * opt_.delta_w_growth,
                             delta_w_last > 0 ? std::max(opt_.delta_w_init, delta_w_last / 3.0) : opt_.delta_w_init);
        } else {
          delta_w *= opt_.delta_w_growth;
        }
        if (delta_w > opt_.delta_w_max) break;
      }
      if (!factored) {
        sol.status = SolverStatus::kLineSearchFailure;
        sol.message = "KKT matrix could not be regularized to the correct inertia";
        return sol;
      }
      delta_w_last = delta_w;

      const Vec dw = d.head(nw_);
      const Vec dlam = d.tail(m_);

      Vec dzl = Vec::Zero(nw_), dzh = Vec::Zero(nw_);
      for (int i = 0; i < nw_; ++i) {
        if (has_lo(i)) {
          const double g = cur.w[i] - lo_[i];
          dzl[i] = mu / g - zl[i] - zl[i] / g * dw[i];
        }
        if (has_hi(i)) {
          const double g = hi_[i] - cur.w[i];
          dzh[i] = mu / g - zh[i] + zh[i] / g * dw[i];
        }
      }
      const double tau = std::max(opt_.tau, 1.0 - mu);
      const auto max_step = [&](const Vec& w, const Vec& step) {
        double a = 1.0;
        for (int i = 0; i < nw_; ++i) {
          if (has_lo(i) && step[i] < 0) a = std::min(a, -tau * (w[i] - lo_[i]) / step[i]);
          if (has_hi(i) && step[i] > 0) a = std::min(a, tau * (hi_[i] - w[i]) / step[i]);
        }
        return a;
      };
      const double alpha_max = max_step(cur.w, dw);
      double alpha_z = 1.0;
      for (int i = 0; i < nw_; ++i) {
        if (has_lo(i) && dzl[i] < 0) alpha_z = std::min(alpha_z, -tau * zl[i] / dzl[i]);
        if (has_hi(i) && dzh[i] < 0) alpha_z = std::min(alpha_z, -tau * zh[i] / dzh[i]);
      }

      // l1 merit with adaptive penalty.
      Vec grad_phi = grad_w;
      for (int i = 0; i < nw_; ++i) {
        if (has_lo(i)) grad_phi[i] -= mu / (cur.w[i] - lo_[i]);
        if (has_hi(i)) grad_phi[i] += mu / (hi_[i] - cur.w[i]);
      }
      const double viol = m_ ? cur.e.lpNorm<1>() : 0.0;
      const double gd = grad_phi.dot(dw);
      if (viol > 1e-10) {
        const SpMat Ksym = K.selfadjointView<Eigen::Lower>();
        const Vec Kd = Ksym.topLeftCorner(nw_, nw_) * dw;
        const double curv = std::max(0.0, 0.5 * dw.dot(Kd));
        const double need = (gd + curv) / (0.9 * viol);
        if (need > nu) nu = need + 1.0;
      }
      const double phi0 = barrier(cur, mu) + nu * viol;
      const double D = gd - nu * viol;
    // Rounding allowance for merit comparisons near convergence.
    const double slack_eps = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(phi0);
  
      Point trial;
      double alpha = alpha_max;
      bool accepted = false;
      for (int ls = 0; ls < 60 && alpha > 1e-16; ++ls, alpha *= opt_.backtrack) {
        trial.w = cur.w + alpha * dw;
        if (evaluate(trial, false)) {
          const double phi = barrier(trial, mu) + nu * (m_ ? trial.e.lpNorm<1>() : 0.0);
          if (std::isfinite(phi) && phi <= phi0 + opt_.armijo * alpha * D + slack_eps) {
            accepted = true;
            break;
          }
          if (ls == 0 && m_ > 0) {
            // Second-order corrections against the curvature of the constraints.
            Vec c_soc = alpha * cur.e + trial.e;
            double viol_prev = trial.e.lpNorm<1>();
            for (int k = 0; k < 4 && !accepted; ++k) {
              Vec rhs2(dim);
              rhs2.head(nw_) = -rd;
              rhs2.tail(m_) = -c_soc;
              const Vec dw2 = kkt_solve(rhs2).head(nw_);
              const double a2 = max_step(cur.w, dw2);
              Point corr;
              corr.w = cur.w + a2 * dw2;
              if (!evaluate(corr, false)) break;
              const double v2 = corr.e.lpNorm<1>();
              const double phi2 = barrier(corr, mu) + nu * v2;
                if (std::isfinite(phi2) && phi2 <= phi0 + opt_.armijo * alpha * D + slack_eps) {
                trial = std::move(corr);
                accepted = true;
                alpha = a2;
                break;
              }
              if (v2 > 0.99 * viol_prev) break;
              viol_prev = v2;
              c_soc = a2 * c_soc + corr.e;
            }
            if (accepted) break;
          }
        }
      }
      const bool short_step = accepted && alpha < kShortStep * alpha_max;
      if ((!accepted || short_step) && retry < kMaxRetry && lm < kLmMax) {
        lm = std::min(kLmMax, std::max(kLmInit, opt_.delta_w_growth * std::max(lm, delta_w)));
        continue;
      }
      if (!accepted) {
        const bool infeasible = prim > 1e3 * opt_.tol && nu > 1e12;
        sol.status = infeasible ? SolverStatus::kInfeasibleDetected : SolverStatus::kLineSearchFailure;
        sol.message = "no acceptable step along the Newton direction (primal " + std::to_string(prim) + ")";
        return sol;
      }
      if (retry == 0 && alpha >= 0.5 * alpha_max) lm = lm > kLmInit ? lm / 4 : 0.0;
      step_alpha = alpha;
      step_alpha_z = alpha_z;
      step_dlam = dlam;
      step_dzl = dzl;
      step_dzh = dzh;
      cur = std::move(trial);
      break;
    }
    const double alpha = step_alpha;
    last_alpha = alpha;
    lambda += alpha * step_dlam;
    zl += step_alpha_z * step_dzl;
    zh += step_alpha_z * step_dzh;
    // Keep the bound multipliers near the central path.
    constexpr double kSigma = 1e10;
    for (int i = 0; i < nw_; ++i) {
      if (has_lo(i)) {
        const double g = cur.w[i] - lo_[i];
        zl[i] = std::clamp(zl[i], mu / (kSigma * g), kSigma * mu / g);
      }
      if (has_hi(i)) {
        const double g = hi_[i] - cur.w[i];
        zh[i] = std::clamp(zh[i], mu / (kSigma * g), kSigma * mu / g);
      }
    }
    load_derivatives(cur);
  }
}

}  // namespace

NlpSolution solve(const NlpProblem& nlp, const SolverOptions& options,
                  const std::optional<std::vector<double>>& initial_guess) {
  nlp.validate();
  options.validate();
  std::vector<double> x0 = initial_guess.value_or(nlp.x0);
  if (static_cast<int>(x0.size()) != nlp.n) throw std::invalid_argument("initial guess has the wrong length");
  InteriorPoint ip(nlp, options);
  return ip.run(std::move(x0));
}

nlohmann::json Certificate::to_json() const {
  return {{"tol", tol},
          {"stationarity", {{"value", kkt.stationarity}, {"pass", stationarity}}},
          {"primal_feasibility", {{"value", kkt.primal}, {"pass", primal}}},
          {"dual_feasibility", {{"min_multiplier", kkt.dual}, {"pass", dual}}},
          {"complementary_slackness", {{"value", kkt.complementarity}, {"pass", complementarity}}},
          {"passed", passed()}};
}

Certificate certify(const NlpProblem& nlp, const NlpSolution& solution, double tol) {
  Certificate c;
  c.tol = tol;
  c.kkt = kkt_residuals(nlp, solution.P, solution.mult);
  c.stationarity = c.kkt.stationarity <= tol;
  c.primal = c.kkt.primal <= tol;
  c.dual = c.kkt.dual_violation() <= tol;
  c.complementarity = c.kkt.complementarity <= tol;
  return c;
}

void write_iterations_csv(const std::vector<IterationRecord>& history,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,mu,objective,primal,dual,complementarity,step\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.iter << ',' << r.mu << ',' << r.objective << ',' << r.primal << ',' << r.dual << ','
        << r.complementarity << ',' << r.step << '\n';
  }
}

}  // namespace bmsopt
