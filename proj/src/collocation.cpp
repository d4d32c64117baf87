#include "bmsopt/collocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/Dense>

#include "bmsopt/ad.hpp"

namespace bmsopt {

namespace {
constexpr int kMaxLocal = 32;
using D1 = Dual<double, kMaxLocal>;
using D2 = Dual<D1, kMaxLocal>;

PhasePlan make_plan(const ChargingProblem& problem, int n_seg) {
  PhasePlan plan;
  const int N = problem.n_cell();
  plan.rank.assign(N, 0);
  if (problem.scheme == Scheme::kSCT) {
    plan.order.resize(N);
    std::iota(plan.order.begin(), plan.order.end(), 0);
    plan.seg_begin = {0};
    plan.seg_end = {n_seg};
    return plan;
  }
  if (n_seg < N) throw std::invalid_argument("DCT needs at least one segment per cell");
  // Cells needing the least charge finish first; ties keep index order.
  plan.order.resize(N);
  std::iota(plan.order.begin(), plan.order.end(), 0);
  std::stable_sort(plan.order.begin(), plan.order.end(), [&](int a, int b) {
    const auto need = [&](int k) {
      return (problem.soc_target - problem.initial[k].soc) * problem.initial[k].Q;
    };
    return need(a) < need(b);
  });
  for (int p = 0; p < N; ++p) plan.rank[plan.order[p]] = p;
  int begin = 0;
  for (int p = 0; p < N; ++p) {
    const int count = n_seg / N + (p < n_seg % N ? 1 : 0);
    plan.seg_begin.push_back(begin);
    plan.seg_end.push_back(begin + count);
    begin += count;
  }
  return plan;
}

}  // namespace

int Transcription::n_inputs() const {
  return problem.layout == VariableLayout::kWithI0 ? layout.n_cell + 1 : layout.n_cell;
}

int Transcription::cell_state(int k, int i) const {
  const int M = layout.n_conc;
  if (i < M) return layout.c_n(k) + i;
  if (i < 2 * M) return layout.c_p(k) + (i - M);
  switch (i - 2 * M) {
    case 0: return layout.T_c(k);
    case 1: return layout.T_s(k);
    case 2: return layout.L_sei(k);
    default: return layout.Q(k);
  }
}

int Transcription::phase_of_tau(double tau) const {
  const int seg = std::min(disc.n_segments - 1, static_cast<int>(tau * disc.n_segments));
  for (int p = 0; p < plan.n_phase(); ++p) {
    if (seg < plan.seg_end[p]) return p;
  }
  return plan.n_phase() - 1;
}

Transcription::Transcription(const ChargingProblem& problem_, const ModuleParameters& mp_,
                             const Discretization& disc_)
    : problem(problem_), mp(mp_), disc(disc_) {
  problem.validate();
  mp.validate();
  if (mp.n_cell() != problem.n_cell()) {
    throw std::invalid_argument("transcribe: module and problem disagree on the cell count");
  }
  if (mp.solvent.models.empty() && mp.solvent.fixed.empty()) {
    throw std::invalid_argument("transcribe: the surrogate model must be fitted first");
  }
  if (disc.q < 1 || disc.n_segments < 1) throw std::invalid_argument("transcribe: bad discretization");
  check_reachable(problem, mp);
  layout = StateLayout(mp, Fidelity::kSurrogate);
  scaling = StateScaling(mp, layout);
  x_basis = SplineBasis(disc.n_segments, disc.states.order, disc.states.smoothness);
  u_basis = SplineBasis(disc.n_segments, disc.inputs.order, disc.inputs.smoothness);
  cps = collocation_points(disc.n_segments, disc.q);
  plan = make_plan(problem, disc.n_segments);
  I_scale = mp.cells[0].Q_nom;
  n_tf_ = problem.n_tf();
  if (n_cell_states() + 2 + 2 + 1 > kMaxLocal) {
    throw std::invalid_argument("transcribe: too many radial nodes for the element derivative width");
  }
  if (n_tf_ + layout.n_cell > kMaxLocal) throw std::invalid_argument("transcribe: too many cells");
  // The square collocation system needs one defect per free state parameter
  // beyond the initial value.
  const int n_def = disc.n_segments * disc.q;
  if (n_def + 1 != x_basis.n_fp()) {
    throw std::invalid_argument("transcribe: state spline has " + std::to_string(x_basis.n_fp()) +
                                " parameters but " + std::to_string(n_def) +
                                " defects + 1 initial condition; choose d, s, q with N_P(d-s)+s = N_P*q+1");
  }
  const auto& cell = mp.cells[0];
  soc_weights_ = bulk_weights(cell.n_conc());
  build_elements();
  build_linear_rows();
  build_nlp();
}

void Transcription::build_elements() {
  const int N = layout.n_cell;
  const int ncs = n_cell_states();
  const int dx = x_basis.order(), du = u_basis.order();
  std::vector<double> bx(dx), bu(du);
  for (int c = 0; c < static_cast<int>(cps.size()); ++c) {
    const double tau = cps[c];
    const int jx = x_basis.eval(tau, bx.data());
    const int ju = u_basis.eval(tau, bu.data());
    const int p = phase_of_tau(tau);
    const auto state_local = [&](int gi) {
      Local l;
      for (int r = 0; r < dx; ++r) l.terms.emplace_back(state_var(gi, jx + r), bx[r]);
      return l;
    };
    const auto input_local = [&](int input) {
      Local l;
      for (int r = 0; r < du; ++r) l.terms.emplace_back(input_var(input, ju + r), bu[r]);
      return l;
    };
    for (int k = 0; k < N; ++k) {
      Element e;
      e.cell = k;
      e.cp = c;
      e.phase = p;
      e.active = plan.rank[k] >= p;
      e.dtau = plan.tau_end(p, disc.n_segments) - plan.tau_begin(p, disc.n_segments);
      for (int i = 0; i < ncs; ++i) e.locals.push_back(state_local(cell_state(k, i)));
      e.nb_slot[0] = e.nb_slot[1] = -1;
      if (k > 0) {
        e.nb_slot[0] = static_cast<int>(e.locals.size());
        e.locals.push_back(state_local(layout.T_s(k - 1)));
      }
      if (k + 1 < N) {
        e.nb_slot[1] = static_cast<int>(e.locals.size());
        e.locals.push_back(state_local(layout.T_s(k + 1)));
      }
      e.input_slot[0] = e.input_slot[1] = -1;
      if (e.active) {
        if (problem.layout == VariableLayout::kWithI0) {
          e.input_slot[0] = static_cast<int>(e.locals.size());
          e.locals.push_back(input_local(0));
          e.input_slot[1] = static_cast<int>(e.locals.size());
          e.locals.push_back(input_local(1 + k));
        } else {
          e.input_slot[0] = static_cast<int>(e.locals.size());
          e.locals.push_back(input_local(k));
        }
      }
      e.time_slot = static_cast<int>(e.locals.size());
      e.locals.push_back(Local{{{tf_var_of_phase(p), 1.0}}});
      e.n_local = static_cast<int>(e.locals.size());
      elements_.push_back(std::move(e));
    }
  }
}

template <typename S>
void Transcription::element_outputs(const Element& e, const S* u, S* out) const {
  const int k = e.cell;
  const int M = layout.n_conc;
  const int ncs = n_cell_states();
  const auto& p = mp.cells[k];
  const auto phys = [&](int slot, int gi) { return S(scaling.offset[gi]) + scaling.scale[gi] * u[slot]; };
  std::vector<S> c_n(M), c_p(M);
  for (int i = 0; i < M; ++i) {
    c_n[i] = phys(i, layout.c_n(k) + i);
    c_p[i] = phys(M + i, layout.c_p(k) + i);
  }
  const S T_c = phys(2 * M, layout.T_c(k));
  const S T_s = phys(2 * M + 1, layout.T_s(k));
  const S L = phys(2 * M + 2, layout.L_sei(k));
  S I(0.0);
  if (e.active) {
    I = problem.layout == VariableLayout::kWithI0 ? (u[e.input_slot[0]] - u[e.input_slot[1]]) * I_scale
                                                   : u[e.input_slot[0]] * I_scale;
  }
  const S c_solv = mp.solvent.surface<S>(k, I, mp.T_amb);
  auto r = cell_rates<S>(p, std::span<const S>(c_n), std::span<const S>(c_p), T_c, T_s, L, I,
                         S(mp.T_amb), c_solv);
  S dT_s = r.dT_s;
  const double gain = 1.0 / (mp.R_m * p.thermal.C_s);
  if (e.nb_slot[0] >= 0) dT_s += gain * (phys(e.nb_slot[0], layout.T_s(k - 1)) - T_s);
  if (e.nb_slot[1] >= 0) dT_s += gain * (phys(e.nb_slot[1], layout.T_s(k + 1)) - T_s);
  const S rate = u[e.time_slot] * (kTimeScale / e.dtau);
  for (int i = 0; i < M; ++i) {
    out[i] = rate * r.dc_n[i] / scaling.scale[layout.c_n(k) + i];
    out[M + i] = rate * r.dc_p[i] / scaling.scale[layout.c_p(k) + i];
  }
  out[2 * M] = rate * r.dT_c / scaling.scale[layout.T_c(k)];
  out[2 * M + 1] = rate * dT_s / scaling.scale[layout.T_s(k)];
  out[2 * M + 2] = rate * r.dL_sei / scaling.scale[layout.L_sei(k)];
  out[2 * M + 3] = rate * r.dQ / scaling.scale[layout.Q(k)];
  out[ncs] = r.V_cell;
}

double Transcription::tau_final(int k) const {
  return problem.scheme == Scheme::kSCT ? 1.0 : plan.tau_end(plan.rank[k], disc.n_segments);
}

double Transcription::local_value(const Local& l, const std::vector<double>& P) const {
  double v = 0.0;
  for (const auto& [i, w] : l.terms) v += w * P[i];
  return v;
}

std::vector<Transcription::Local> Transcription::cost_locals() const {
  std::vector<Local> ls;
  for (int i = 0; i < n_tf_; ++i) ls.push_back(Local{{{i, 1.0}}});
  std::vector<double> b(x_basis.order());
  for (int k = 0; k < layout.n_cell; ++k) {
    const int j0 = x_basis.eval(tau_final(k), b.data());
    Local l;
    for (int r = 0; r < x_basis.order(); ++r) l.terms.emplace_back(state_var(layout.L_sei(k), j0 + r), b[r]);
    ls.push_back(std::move(l));
  }
  return ls;
}

namespace {

// J from the cost locals: [final-time variables..., scaled L_sei(t_f_k)...].
template <typename S>
S cost_from_locals(const Transcription& tr, const S* u) {
  const int N = tr.layout.n_cell;
  const int n_tf = tr.problem.n_tf();
  std::vector<S> t_f(N), L_end(N), rate(N);
  for (int k = 0; k < N; ++k) {
    if (tr.problem.scheme == Scheme::kSCT) {
      t_f[k] = u[0] * Transcription::kTimeScale;
    } else {
      S t(0.0);
      for (int p = 0; p <= tr.plan.rank[k]; ++p) t += u[p];
      t_f[k] = t * Transcription::kTimeScale;
    }
    const int gi = tr.layout.L_sei(k);
    L_end[k] = S(tr.scaling.offset[gi]) + tr.scaling.scale[gi] * u[n_tf + k];
    rate[k] = (L_end[k] - tr.problem.initial[k].L_sei) / t_f[k];
  }
  return cost_terms<S>(tr.problem.weights, tr.problem.scheme, std::span<const S>(t_f),
                       std::span<const S>(L_end), std::span<const S>(rate))
      .J;
}

}  // namespace

double Transcription::eval_objective(const std::vector<double>& P) const {
  const auto ls = cost_locals();
  std::vector<double> u(ls.size());
  for (std::size_t a = 0; a < ls.size(); ++a) u[a] = local_value(ls[a], P);
  return cost_from_locals<double>(*this, u.data());
}

void Transcription::eval_gradient(const std::vector<double>& P, std::vector<double>& g) const {
  const auto ls = cost_locals();
  std::vector<D1> u(ls.size());
  for (std::size_t a = 0; a < ls.size(); ++a) u[a] = D1::variable(local_value(ls[a], P), static_cast<int>(a));
  const D1 J = cost_from_locals<D1>(*this, u.data());
  g.assign(nlp.n, 0.0);
  for (std::size_t a = 0; a < ls.size(); ++a) {
    for (const auto& [i, w] : ls[a].terms) g[i] += J.d[a] * w;
  }
}

void Transcription::objective_hessian(const std::vector<double>& P, double sigma, Triplets& t) const {
  const auto ls = cost_locals();
  const int n = static_cast<int>(ls.size());
  std::vector<D2> u(n);
  for (int a = 0; a < n; ++a) {
    u[a] = D2(D1::variable(local_value(ls[a], P), a));
    u[a].d[a] = D1(1.0);
  }
  const D2 J = cost_from_locals<D2>(*this, u.data());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b <= a; ++b) {
      const double h = sigma * J.d[a].d[b];
      if (h == 0.0) continue;
      for (const auto& [ia, wa] : ls[a].terms) {
        for (const auto& [ib, wb] : ls[b].terms) {
          if (a == b && ia < ib) continue;  // same local: each pair once
          const double v = h * wa * wb;
          if (ia > ib) t.emplace_back(ia, ib, v);
          else if (ia < ib) t.emplace_back(ib, ia, v);
          else t.emplace_back(ia, ia, a == b ? v : 2.0 * v);
        }
      }
    }
  }
}

void Transcription::eval_constraints(const std::vector<double>& P, std::vector<double>& c) const {
  c.assign(n_con_, 0.0);
  const int ns = n_states();
  const int ncp = static_cast<int>(cps.size());
  const int dx = x_basis.order();
  std::vector<double> bx(dx), dbx(dx);
  for (int cp = 0; cp < ncp; ++cp) {
    const int j0 = x_basis.eval(cps[cp], bx.data(), dbx.data());
    for (int gi = 0; gi < ns; ++gi) {
      double v = 0.0;
      for (int r = 0; r < dx; ++r) v += dbx[r] * P[state_var(gi, j0 + r)];
      c[defect_row(gi, cp)] = v;
    }
  }
  const int ncs = n_cell_states();
  std::vector<double> u(kMaxLocal), out(ncs + 1);
  for (const auto& e : elements_) {
    for (int a = 0; a < e.n_local; ++a) u[a] = local_value(e.locals[a], P);
    element_outputs<double>(e, u.data(), out.data());
    for (int i = 0; i < ncs; ++i) c[defect_row(cell_state(e.cell, i), e.cp)] -= out[i];
    c[voltage_row(e.cell, e.cp)] = out[ncs];
  }
  for (const auto& tp : linear_rows_) c[tp.row()] += tp.value() * P[tp.col()];
}

void Transcription::eval_jacobian(const std::vector<double>& P, Triplets& t) const {
  t.clear();
  const int ns = n_states();
  const int ncp = static_cast<int>(cps.size());
  const int dx = x_basis.order();
  std::vector<double> bx(dx), dbx(dx);
  for (int cp = 0; cp < ncp; ++cp) {
    const int j0 = x_basis.eval(cps[cp], bx.data(), dbx.data());
    for (int gi = 0; gi < ns; ++gi) {
      for (int r = 0; r < dx; ++r) t.emplace_back(defect_row(gi, cp), state_var(gi, j0 + r), dbx[r]);
    }
  }
  const int ncs = n_cell_states();
  std::vector<D1> u(kMaxLocal), out(ncs + 1);
  for (const auto& e : elements_) {
    for (int a = 0; a < e.n_local; ++a) u[a] = D1::variable(local_value(e.locals[a], P), a);
    element_outputs<D1>(e, u.data(), out.data());
    for (int o = 0; o <= ncs; ++o) {
      const int row = o < ncs ? defect_row(cell_state(e.cell, o), e.cp) : voltage_row(e.cell, e.cp);
      const double sign = o < ncs ? -1.0 : 1.0;
      for (int a = 0; a < e.n_local; ++a) {
        const double d = out[o].d[a];
        if (d == 0.0) continue;
        for (const auto& [i, w] : e.locals[a].terms) t.emplace_back(row, i, sign * d * w);
      }
    }
  }
  t.insert(t.end(), linear_rows_.begin(), linear_rows_.end());
}

void Transcription::build_linear_rows() {
  // Initial conditions, terminal SOC and total time are linear in P.
  const int ns = n_states();
  const int dx = x_basis.order();
  std::vector<double> bx(dx);
  for (int gi = 0; gi < ns; ++gi) {
    const int j0 = x_basis.eval(0.0, bx.data());
    for (int r = 0; r < dx; ++r) {
      if (bx[r] != 0.0) linear_rows_.emplace_back(ic_row(gi), state_var(gi, j0 + r), bx[r]);
    }
  }
  // Terminal SOC at the end of each cell's phase (cathode bulk stoichiometry).
  for (int k = 0; k < layout.n_cell; ++k) {
    const auto& el = mp.cells[k].pos();
    const int j0 = x_basis.eval(tau_final(k), bx.data());
    for (int i = 0; i < layout.n_conc; ++i) {
      const int gi = layout.c_p(k) + i;
      const double coef = soc_weights_[i] * scaling.scale[gi] / el.c_s_max / (el.theta_100 - el.theta_0);
      for (int r = 0; r < dx; ++r) {
        if (bx[r] != 0.0) linear_rows_.emplace_back(terminal_row(k), state_var(gi, j0 + r), coef * bx[r]);
      }
    }
  }
  if (problem.scheme == Scheme::kDCT) {
    const int row = voltage_row(layout.n_cell, 0);
    for (int p = 0; p < n_tf_; ++p) linear_rows_.emplace_back(row, p, 1.0);
  }
}

void Transcription::eval_hessian(const std::vector<double>& P, double sigma,
                                 const std::vector<double>& lambda, Triplets& t) const {
  t.clear();
  objective_hessian(P, sigma, t);
  const int ncs = n_cell_states();
  std::vector<D2> u(kMaxLocal), out(ncs + 1);
  for (const auto& e : elements_) {
    std::vector<double> w(ncs + 1);
    bool any = false;
    for (int o = 0; o <= ncs; ++o) {
      w[o] = o < ncs ? -lambda[defect_row(cell_state(e.cell, o), e.cp)] : lambda[voltage_row(e.cell, e.cp)];
      any = any || w[o] != 0.0;
    }
    if (!any) continue;
    for (int a = 0; a < e.n_local; ++a) {
      u[a] = D2(D1::variable(local_value(e.locals[a], P), a));
      u[a].d[a] = D1(1.0);
    }
    element_outputs<D2>(e, u.data(), out.data());
    for (int a = 0; a < e.n_local; ++a) {
      for (int b = 0; b <= a; ++b) {
        double h = 0.0;
        for (int o = 0; o <= ncs; ++o) h += w[o] * out[o].d[a].d[b];
        if (h == 0.0) continue;
        for (const auto& [ia, wa] : e.locals[a].terms) {
          for (const auto& [ib, wb] : e.locals[b].terms) {
            if (a == b && ia < ib) continue;
            const double v = h * wa * wb;
            if (ia > ib) t.emplace_back(ia, ib, v);
            else if (ia < ib) t.emplace_back(ib, ia, v);
            else t.emplace_back(ia, ia, a == b ? v : 2.0 * v);
          }
        }
      }
    }
  }
}

void Transcription::build_nlp() {
  const int ns = n_states();
  const int N = layout.n_cell;
  const int ncp = static_cast<int>(cps.size());
  const int nx = x_basis.n_fp(), nu = u_basis.n_fp();
  nlp.n = n_tf_ + ns * nx + n_inputs() * nu;
  n_con_ = ns * ncp + ns + N + N * ncp + (problem.scheme == Scheme::kDCT ? 1 : 0);
  nlp.m = n_con_;
  const auto& b = problem.bounds;

  nlp.x_lo.assign(nlp.n, -kInf);
  nlp.x_hi.assign(nlp.n, kInf);
  nlp.var_scale.assign(nlp.n, 1.0);
  nlp.var_names.resize(nlp.n);
  for (int p = 0; p < n_tf_; ++p) {
    nlp.x_lo[p] = (p == 0 ? 1.0 : 0.0) / kTimeScale;
    nlp.x_hi[p] = b.t_f_max / kTimeScale;
    nlp.var_scale[p] = kTimeScale;
    nlp.var_names[p] = problem.scheme == Scheme::kSCT ? "t_f" : "phase_" + std::to_string(p + 1);
  }
  const auto state_name = [&](int gi) {
    for (int k = 0; k < N; ++k) {
      for (int i = 0; i < n_cell_states(); ++i) {
        if (cell_state(k, i) != gi) continue;
        const int M = layout.n_conc;
        const std::string cell = std::to_string(k + 1);
        if (i < M) return "c_n" + cell + "_" + std::to_string(i + 1);
        if (i < 2 * M) return "c_p" + cell + "_" + std::to_string(i - M + 1);
        static const char* names[] = {"T_c", "T_s", "L_sei", "Q"};
        return std::string(names[i - 2 * M]) + cell;
      }
    }
    return std::string("x") + std::to_string(gi);
  };
  std::vector<std::string> snames(ns);
  for (int gi = 0; gi < ns; ++gi) snames[gi] = state_name(gi);
  for (int gi = 0; gi < ns; ++gi) {
    double lo = -kInf, hi = kInf;
    for (int k = 0; k < N; ++k) {
      const auto& cell = mp.cells[k];
      if (gi >= layout.c_n(k) && gi < layout.c_n(k) + layout.n_conc) {
        lo = cell.neg().theta_min();
        hi = cell.neg().theta_max();
      } else if (gi >= layout.c_p(k) && gi < layout.c_p(k) + layout.n_conc) {
        lo = cell.pos().theta_min();
        hi = cell.pos().theta_max();
      } else if (gi == layout.T_c(k) || gi == layout.T_s(k)) {
        lo = (b.T_min - scaling.offset[gi]) / scaling.scale[gi];
        hi = (b.T_max - scaling.offset[gi]) / scaling.scale[gi];
      }
    }
    for (int j = 0; j < nx; ++j) {
      const int v = state_var(gi, j);
      nlp.x_lo[v] = lo;
      nlp.x_hi[v] = hi;
      nlp.var_scale[v] = scaling.scale[gi];
      nlp.var_names[v] = snames[gi] + "[" + std::to_string(j) + "]";
    }
  }
  for (int in = 0; in < n_inputs(); ++in) {
    double lo, hi;
    std::string name;
    if (problem.layout == VariableLayout::kWithI0) {
      if (in == 0) {
        lo = b.I_0_min, hi = b.I_0_max, name = "I_0";
      } else {
        lo = b.I_B_min, hi = b.I_B_max, name = "I_B" + std::to_string(in);
      }
    } else {
      lo = b.I_cell_min, hi = b.I_cell_max, name = "I_cell" + std::to_string(in + 1);
    }
    for (int j = 0; j < nu; ++j) {
      const int v = input_var(in, j);
      nlp.x_lo[v] = lo / I_scale;
      nlp.x_hi[v] = hi / I_scale;
      nlp.var_scale[v] = I_scale;
      nlp.var_names[v] = name + "[" + std::to_string(j) + "]";
    }
  }

  nlp.c_lo.assign(n_con_, 0.0);
  nlp.c_hi.assign(n_con_, 0.0);
  nlp.con_names.resize(n_con_);
  for (int gi = 0; gi < ns; ++gi) {
    for (int cp = 0; cp < ncp; ++cp) nlp.con_names[defect_row(gi, cp)] = "defect " + snames[gi] + " @cp" + std::to_string(cp);
  }
  // Initial state from the problem's per-cell data.
  std::vector<CellState> init;
  for (int k = 0; k < N; ++k) {
    const auto& ic = problem.initial[k];
    init.push_back(CellState::at_rest(mp.cells[k], ic.soc, ic.T, ic.L_sei, ic.Q, false));
  }
  const auto x0 = ModuleState::from_cells(mp, init, Fidelity::kSurrogate);
  for (int gi = 0; gi < ns; ++gi) {
    const double z0 = (x0.x[gi] - scaling.offset[gi]) / scaling.scale[gi];
    nlp.c_lo[ic_row(gi)] = nlp.c_hi[ic_row(gi)] = z0;
    nlp.con_names[ic_row(gi)] = "initial " + snames[gi];
  }
  for (int k = 0; k < N; ++k) {
    // SOC = (bulk/c_max - theta_0)/(theta_100 - theta_0); the rows hold the
    // linear part only.
    const auto& el = mp.cells[k].pos();
    nlp.c_lo[terminal_row(k)] = nlp.c_hi[terminal_row(k)] =
        problem.soc_target + el.theta_0 / (el.theta_100 - el.theta_0);
    nlp.con_names[terminal_row(k)] = "terminal SOC" + std::to_string(k + 1);
    for (int cp = 0; cp < ncp; ++cp) {
      nlp.c_lo[voltage_row(k, cp)] = b.V_min;
      nlp.c_hi[voltage_row(k, cp)] = b.V_max;
      nlp.con_names[voltage_row(k, cp)] = "V" + std::to_string(k + 1) + " @cp" + std::to_string(cp);
    }
  }
  if (problem.scheme == Scheme::kDCT) {
    const int row = voltage_row(N, 0);
    nlp.c_lo[row] = -kInf;
    nlp.c_hi[row] = b.t_f_max / kTimeScale;
    nlp.con_names[row] = "max final time";
  }

  nlp.objective = [this](const std::vector<double>& P) { return eval_objective(P); };
  nlp.gradient = [this](const std::vector<double>& P, std::vector<double>& g) { eval_gradient(P, g); };
  nlp.constraints = [this](const std::vector<double>& P, std::vector<double>& c) { eval_constraints(P, c); };
  nlp.jacobian = [this](const std::vector<double>& P, Triplets& t) { eval_jacobian(P, t); };
  nlp.hessian = [this](const std::vector<double>& P, double sigma, const std::vector<double>& lam, Triplets& t) {
    eval_hessian(P, sigma, lam, t);
  };

  nlp.x0 = initial_guess();
  std::vector<double> g;
  eval_gradient(nlp.x0, g);
  double gmax = 0.0;
  for (double v : g) gmax = std::max(gmax, std::abs(v));
  // Gradient-based objective scaling; proportional to 1/J so that a common
  // factor on all weights leaves the scaled problem unchanged.
  nlp.obj_scale = gmax > 0 ? 1.0 / gmax : 1.0;
}

std::vector<double> Transcription::initial_guess() const {
  const int N = layout.n_cell;
  const auto& b = problem.bounds;
  const double I_mid = problem.layout == VariableLayout::kWithI0
                           ? 0.5 * (std::abs(b.I_0_min) + std::abs(b.I_0_max))
                           : 0.5 * (std::abs(b.I_cell_min) + std::abs(b.I_cell_max));
  std::vector<double> need(N), t_k(N);
  for (int k = 0; k < N; ++k) {
    need[k] = (problem.soc_target - problem.initial[k].soc) * mp.cells[k].Q_nom * 3600.0;
    t_k[k] = need[k] / I_mid;
  }
  std::vector<double> P(nlp.n, 0.0);
  std::vector<double> I_cell(N, -I_mid);
  std::vector<double> t_end(N);
  if (problem.scheme == Scheme::kSCT) {
    const double t_f = *std::max_element(t_k.begin(), t_k.end());
    P[0] = t_f / kTimeScale;
    for (int k = 0; k < N; ++k) {
      I_cell[k] = -need[k] / t_f;
      t_end[k] = t_f;
    }
  } else {
    double prev = 0.0;
    for (int p = 0; p < N; ++p) {
      const double t = t_k[plan.order[p]];
      P[p] = std::max(t - prev, 0.0) / kTimeScale;
      prev = std::max(prev, t);
    }
    for (int k = 0; k < N; ++k) {
      double t = 0.0;
      for (int p = 0; p <= plan.rank[k]; ++p) t += P[p] * kTimeScale;
      t_end[k] = t;
    }
  }
  const double t_H = *std::max_element(t_end.begin(), t_end.end());
  const auto guess_input = [&](double t) {
    std::vector<double> I(N);
    for (int k = 0; k < N; ++k) I[k] = t < t_end[k] ? I_cell[k] : 0.0;
    return I;
  };
  // Inputs: linear splines interpolate at the Greville points.
  const auto grev = u_basis.greville();
  for (int j = 0; j < u_basis.n_fp(); ++j) {
    const double t = time_at(P, grev[j]);
    std::vector<double> I = guess_input(std::min(t, t_H * (1 - 1e-12)));
    // Finished cells: carry the last active value (irrelevant to the model).
    for (int k = 0; k < N; ++k) if (I[k] == 0.0) I[k] = I_cell[k];
    if (problem.layout == VariableLayout::kWithI0) {
      const double I0 = std::clamp(*std::min_element(I.begin(), I.end()), b.I_0_min, b.I_0_max);
      P[input_var(0, j)] = I0 / I_scale;
      for (int k = 0; k < N; ++k) {
        P[input_var(1 + k, j)] = std::clamp(I0 - I[k], b.I_B_min, b.I_B_max) / I_scale;
      }
    } else {
      for (int k = 0; k < N; ++k) P[input_var(k, j)] = std::clamp(I[k], b.I_cell_min, b.I_cell_max) / I_scale;
    }
  }
  // States: simulate the guessed input and least-squares fit the splines.
  std::vector<CellState> init;
  for (int k = 0; k < N; ++k) {
    const auto& ic = problem.initial[k];
    init.push_back(CellState::at_rest(mp.cells[k], ic.soc, ic.T, ic.L_sei, ic.Q, false));
  }
  SimulationOptions opt;
  opt.horizon = t_H;
  opt.sample_dt = t_H / 4000.0;
  opt.stop_when_all_done = false;
  const auto traj = simulate(mp, ModuleState::from_cells(mp, init, Fidelity::kSurrogate),
                             [&](double t) { return reconstruct_input(guess_input(t)); }, opt);
  const int per_seg = 6;
  const int n_pts = disc.n_segments * per_seg + 1;
  const int nx = x_basis.n_fp();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_pts, nx);
  Eigen::MatrixXd Y(n_pts, n_states());
  std::vector<double> bx(x_basis.order());
  std::size_t cursor = 0;
  for (int r = 0; r < n_pts; ++r) {
    const double tau = static_cast<double>(r) / (n_pts - 1);
    const int j0 = x_basis.eval(tau, bx.data());
    for (int c = 0; c < x_basis.order(); ++c) B(r, j0 + c) = bx[c];
    const double t = std::min(time_at(P, tau), traj.samples.back().t);
    while (cursor + 1 < traj.samples.size() && traj.samples[cursor + 1].t < t) ++cursor;
    const auto& s0 = traj.states[cursor];
    const auto& s1 = traj.states[std::min(cursor + 1, traj.states.size() - 1)];
    const double ta = traj.samples[cursor].t;
    const double tb = traj.samples[std::min(cursor + 1, traj.samples.size() - 1)].t;
    const double w = tb > ta ? std::clamp((t - ta) / (tb - ta), 0.0, 1.0) : 0.0;
    for (int gi = 0; gi < n_states(); ++gi) {
      const double x = (1 - w) * s0[gi] + w * s1[gi];
      Y(r, gi) = (x - scaling.offset[gi]) / scaling.scale[gi];
    }
  }
  const Eigen::MatrixXd W = B.colPivHouseholderQr().solve(Y);
  for (int gi = 0; gi < n_states(); ++gi) {
    for (int j = 0; j < nx; ++j) P[state_var(gi, j)] = W(j, gi);
  }
  return P;
}

std::vector<double> Transcription::final_times(const std::vector<double>& P) const {
  std::vector<double> t(layout.n_cell);
  for (int k = 0; k < layout.n_cell; ++k) {
    if (problem.scheme == Scheme::kSCT) {
      t[k] = P[0] * kTimeScale;
    } else {
      double s = 0.0;
      for (int p = 0; p <= plan.rank[k]; ++p) s += P[p];
      t[k] = s * kTimeScale;
    }
  }
  return t;
}

double Transcription::horizon(const std::vector<double>& P) const {
  const auto t = final_times(P);
  return *std::max_element(t.begin(), t.end());
}

double Transcription::time_at(const std::vector<double>& P, double tau) const {
  tau = std::clamp(tau, 0.0, 1.0);
  double t0 = 0.0;
  for (int p = 0; p < plan.n_phase(); ++p) {
    const double a = plan.tau_begin(p, disc.n_segments), b = plan.tau_end(p, disc.n_segments);
    const double dur = P[tf_var_of_phase(p)] * kTimeScale;
    if (tau <= b || p + 1 == plan.n_phase()) return t0 + (tau - a) / (b - a) * dur;
    t0 += dur;
  }
  return t0;
}

double Transcription::tau_at(const std::vector<double>& P, double t) const {
  double t0 = 0.0;
  for (int p = 0; p < plan.n_phase(); ++p) {
    const double a = plan.tau_begin(p, disc.n_segments), b = plan.tau_end(p, disc.n_segments);
    const double dur = P[tf_var_of_phase(p)] * kTimeScale;
    if (t <= t0 + dur && dur > 0) return a + (t - t0) / dur * (b - a);
    t0 += dur;
  }
  return 1.0;
}

std::vector<double> Transcription::state_at(const std::vector<double>& P, double tau) const {
  std::vector<double> x(n_states());
  std::vector<double> b(x_basis.order());
  const int j0 = x_basis.eval(std::clamp(tau, 0.0, 1.0), b.data());
  for (int gi = 0; gi < n_states(); ++gi) {
    double z = 0.0;
    for (int r = 0; r < x_basis.order(); ++r) z += b[r] * P[state_var(gi, j0 + r)];
    x[gi] = scaling.offset[gi] + scaling.scale[gi] * z;
  }
  return x;
}

double Transcription::soc_at(const std::vector<double>& P, int k, double tau) const {
  const auto x = state_at(P, tau);
  return soc_bulk<double>(mp.cells[k], Electrode::kPos, soc_weights_,
                          std::span<const double>(x).subspan(layout.c_p(k), layout.n_conc));
}

ModuleInput Transcription::input_at(const std::vector<double>& P, double t) const {
  const int N = layout.n_cell;
  const auto t_f = final_times(P);
  const double tau = tau_at(P, t);
  std::vector<double> b(u_basis.order());
  const int j0 = u_basis.eval(std::clamp(tau, 0.0, 1.0), b.data());
  const auto input = [&](int in) {
    double v = 0.0;
    for (int r = 0; r < u_basis.order(); ++r) v += b[r] * P[input_var(in, j0 + r)];
    return v * I_scale;
  };
  const auto active = [&](int k) { return t < t_f[k]; };
  if (problem.layout == VariableLayout::kWithI0) {
    ModuleInput in;
    in.I_0 = input(0);
    for (int k = 0; k < N; ++k) in.I_B.push_back(active(k) ? input(1 + k) : in.I_0);
    return in;
  }
  std::vector<double> I(N);
  for (int k = 0; k < N; ++k) I[k] = active(k) ? input(k) : 0.0;
  return reconstruct_input(I);
}

InputProfile Transcription::input_profile(const std::vector<double>& P) const {
  return [this, P](double t) { return input_at(P, t); };
}

InputProfile Transcription::replay_profile(const std::vector<double>& P) const {
  const int N = layout.n_cell;
  const auto t_f = final_times(P);
  // Cell currents without bypass, each held at its final value.
  const auto cell_currents = [this, P, t_f, N](double t) {
    std::vector<double> I(N);
    std::vector<double> b(u_basis.order());
    for (int k = 0; k < N; ++k) {
      const double tau = std::min(tau_at(P, std::min(t, t_f[k])), tau_final(k));
      const int j0 = u_basis.eval(std::clamp(tau, 0.0, 1.0), b.data());
      const auto input = [&](int in) {
        double v = 0.0;
        for (int r = 0; r < u_basis.order(); ++r) v += b[r] * P[input_var(in, j0 + r)];
        return v * I_scale;
      };
      I[k] = problem.layout == VariableLayout::kWithI0 ? input(0) - input(1 + k) : input(k);
    }
    return I;
  };
  return [cell_currents](double t) { return reconstruct_input(cell_currents(t)); };
}

TerminalSummary Transcription::terminal(const std::vector<double>& P) const {
  TerminalSummary s;
  s.t_f = final_times(P);
  for (int k = 0; k < layout.n_cell; ++k) {
    const double L = state_at(P, tau_final(k))[layout.L_sei(k)];
    s.L_end.push_back(L);
    s.mean_dLdt.push_back((L - problem.initial[k].L_sei) / s.t_f[k]);
  }
  return s;
}

CostBreakdown Transcription::cost(const std::vector<double>& P) const {
  return bmsopt::cost(problem, terminal(P));
}

void Transcription::dump(std::ostream& os) const {
  Triplets jt, ht;
  eval_jacobian(nlp.x0, jt);
  std::vector<double> lam(nlp.m, 1.0);
  eval_hessian(nlp.x0, 1.0, lam, ht);
  const auto J = assemble(nlp.m, nlp.n, jt);
  const auto H = assemble(nlp.n, nlp.n, ht);
  os << "# NLP dump\n";
  os << "scheme " << to_string(problem.scheme) << "\n";
  os << "cells " << layout.n_cell << " states " << n_states() << " segments " << disc.n_segments
     << " state_spline d=" << disc.states.order << " s=" << disc.states.smoothness
     << " input_spline d=" << disc.inputs.order << " s=" << disc.inputs.smoothness << " q=" << disc.q << "\n";
  os << "variables " << nlp.n << " constraints " << nlp.m << " jacobian_nnz " << J.nonZeros()
     << " hessian_lower_nnz " << H.nonZeros() << " obj_scale " << nlp.obj_scale << "\n";
  os << "phase_order";
  for (int k : plan.order) os << ' ' << k + 1;
  os << "\n# variables: index name lo hi x0\n";
  for (int i = 0; i < nlp.n; ++i) {
    os << i << ' ' << nlp.var_names[i] << ' ' << nlp.x_lo[i] << ' ' << nlp.x_hi[i] << ' ' << nlp.x0[i] << '\n';
  }
  os << "# constraints: index name lo hi\n";
  for (int i = 0; i < nlp.m; ++i) {
    os << i << " \"" << nlp.con_names[i] << "\" " << nlp.c_lo[i] << ' ' << nlp.c_hi[i] << '\n';
  }
  os << "# jacobian sparsity: row col\n";
  for (int c = 0; c < J.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(J, c); it; ++it) os << it.row() << ' ' << it.col() << '\n';
  }
}

std::unique_ptr<Transcription> transcribe(const ChargingProblem& problem, const ModuleParameters& mp,
                                          const Discretization& disc) {
  return std::make_unique<Transcription>(problem, mp, disc);
}

}  // namespace bmsopt
