#include "bmsopt/module_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <boost/numeric/odeint.hpp>

namespace bmsopt {

namespace odeint = boost::numeric::odeint;

Fidelity fidelity_from_string(const std::string& s) {
  if (s == "hf" || s == "high-fidelity") return Fidelity::kHighFidelity;
  if (s == "surrogate" || s == "lf") return Fidelity::kSurrogate;
  throw std::invalid_argument("unknown mode '" + s + "' (expected hf or surrogate)");
}

std::string to_string(Fidelity f) { return f == Fidelity::kHighFidelity ? "hf" : "surrogate"; }

void ModuleParameters::validate() const {
  if (cells.empty()) throw std::invalid_argument("module needs at least one cell");
  if (!(R_m > 0)) throw std::invalid_argument("R_m must be positive");
  if (!(T_amb > 0)) throw std::invalid_argument("T_amb must be positive");
  for (const auto& c : cells) {
    c.validate();
    if (c.N_r != cells.front().N_r || c.N_sei != cells.front().N_sei) {
      throw std::invalid_argument("all cells of a module must share the same grid sizes");
    }
  }
}

ModuleParameters load_module(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open module file " + path.string());
  const auto j = nlohmann::json::parse(in);
  ModuleParameters mp;
  const auto base = path.parent_path();
  for (const auto& c : j.at("cells")) {
    if (c.is_string()) {
      mp.cells.push_back(load_cell(base / c.get<std::string>()));
    } else {
      mp.cells.push_back(cell_from_json(c, base));
    }
  }
  mp.R_m = j.value("R_m", mp.R_m);
  mp.T_amb = j.value("T_amb", mp.T_amb);
  mp.validate();
  return mp;
}

StateLayout::StateLayout(const ModuleParameters& mp, Fidelity m)
    : n_cell(mp.n_cell()),
      n_conc(mp.cells.front().n_conc()),
      n_sei(mp.cells.front().N_sei),
      mode(m) {}

ModuleState ModuleState::from_cells(const ModuleParameters& mp, const std::vector<CellState>& cells,
                                    Fidelity mode) {
  if (static_cast<int>(cells.size()) != mp.n_cell()) {
    throw std::invalid_argument("from_cells: expected one state per cell");
  }
  ModuleState s;
  s.layout = StateLayout(mp, mode);
  const auto& L = s.layout;
  s.x.assign(L.size(), 0.0);
  for (int k = 0; k < L.n_cell; ++k) {
    const auto& c = cells[k];
    if (static_cast<int>(c.c_s_n.size()) != L.n_conc || static_cast<int>(c.c_s_p.size()) != L.n_conc) {
      throw std::invalid_argument("from_cells: concentration vector length mismatch");
    }
    std::copy(c.c_s_n.begin(), c.c_s_n.end(), s.x.begin() + L.c_n(k));
    std::copy(c.c_s_p.begin(), c.c_s_p.end(), s.x.begin() + L.c_p(k));
    s.x[L.T_c(k)] = c.T_c;
    s.x[L.T_s(k)] = c.T_s;
    s.x[L.L_sei(k)] = c.L_sei;
    s.x[L.Q(k)] = c.Q;
    if (mode == Fidelity::kHighFidelity) {
      if (static_cast<int>(c.c_solv.size()) != L.n_sei) {
        throw std::invalid_argument("from_cells: high-fidelity mode needs c_solv per cell");
      }
      std::copy(c.c_solv.begin(), c.c_solv.end(), s.x.begin() + L.c_solv(k));
    }
  }
  return s;
}

CellState ModuleState::cell(int k) const {
  const auto& L = layout;
  CellState c;
  c.c_s_n.assign(x.begin() + L.c_n(k), x.begin() + L.c_n(k) + L.n_conc);
  c.c_s_p.assign(x.begin() + L.c_p(k), x.begin() + L.c_p(k) + L.n_conc);
  c.T_c = x[L.T_c(k)];
  c.T_s = x[L.T_s(k)];
  c.L_sei = x[L.L_sei(k)];
  c.Q = x[L.Q(k)];
  if (L.mode == Fidelity::kHighFidelity) {
    c.c_solv.assign(x.begin() + L.c_solv(k), x.begin() + L.c_solv(k) + L.n_sei);
  }
  return c;
}

std::vector<double> module_rhs(const ModuleParameters& mp, const ModuleState& state,
                               const ModuleInput& input) {
  if (static_cast<int>(input.I_B.size()) != mp.n_cell()) {
    throw std::invalid_argument("module_rhs: one balancing current per cell required");
  }
  std::vector<double> I(mp.n_cell());
  for (int k = 0; k < mp.n_cell(); ++k) I[k] = input.I_cell(k);
  std::vector<double> dx(state.x.size());
  module_rhs<double>(mp, state.layout, state.x, I, dx);
  return dx;
}

CellOutputs cell_outputs(const ModuleParameters& mp, const StateLayout& lay,
                         std::span<const double> x, int k, double I_cell) {
  const auto& p = mp.cells[k];
  static thread_local std::vector<double> w;
  if (static_cast<int>(w.size()) != lay.n_conc) w = bulk_weights(lay.n_conc);
  const auto c_n = x.subspan(lay.c_n(k), lay.n_conc);
  const auto c_p = x.subspan(lay.c_p(k), lay.n_conc);
  CellOutputs o;
  o.V_oc = open_circuit_voltage(p, c_n.back(), c_p.back());
  o.V_cell = cell_voltage(p, c_n.back(), c_p.back(), x[lay.T_c(k)], x[lay.L_sei(k)], I_cell);
  o.soc = soc_bulk<double>(p, Electrode::kPos, w, c_p);
  return o;
}

StateScaling::StateScaling(const ModuleParameters& mp, const StateLayout& lay) {
  offset.assign(lay.size(), 0.0);
  scale.assign(lay.size(), 1.0);
  for (int k = 0; k < lay.n_cell; ++k) {
    const auto& p = mp.cells[k];
    for (int i = 0; i < lay.n_conc; ++i) {
      scale[lay.c_n(k) + i] = p.neg().c_s_max;
      scale[lay.c_p(k) + i] = p.pos().c_s_max;
    }
    for (int idx : {lay.T_c(k), lay.T_s(k)}) {
      offset[idx] = 298.15;
      scale[idx] = 10.0;
    }
    scale[lay.L_sei(k)] = 1e-9;
    offset[lay.Q(k)] = p.Q_nom;
    scale[lay.Q(k)] = 1e-3;
    if (lay.mode == Fidelity::kHighFidelity) {
      for (int i = 0; i < lay.n_sei; ++i) {
        scale[lay.c_solv(k) + i] = p.aging.eps_sei * p.aging.c_solv_bulk;
      }
    }
  }
}

namespace {

void check_validity(const ModuleParameters& mp, const StateLayout& lay,
                    const std::vector<double>& x, double t) {
  for (int k = 0; k < lay.n_cell; ++k) {
    const auto& p = mp.cells[k];
    for (auto [e, off] : {std::pair{Electrode::kNeg, lay.c_n(k)}, std::pair{Electrode::kPos, lay.c_p(k)}}) {
      const double cmax = p.of(e).c_s_max;
      for (int i = 0; i < lay.n_conc; ++i) {
        const double c = x[off + i];
        if (!(c > 1e-6 * cmax && c < (1.0 - 1e-6) * cmax)) {
          throw CellError(k, t,
                          std::string(e == Electrode::kNeg ? "anode" : "cathode") +
                              " concentration left the valid range (c = " + std::to_string(c) + ")");
        }
      }
    }
    if (!(x[lay.L_sei(k)] > 0) || !(x[lay.Q(k)] > 0) || !(x[lay.T_c(k)] > 0) || !(x[lay.T_s(k)] > 0)) {
      throw CellError(k, t, "non-physical thermal/aging state");
    }
  }
}

class Simulator {
 public:
  Simulator(const ModuleParameters& mp, StateLayout lay, const InputProfile& input,
            const SimulationOptions& opt)
      : mp_(mp), lay_(lay), sc_(mp, lay), input_(input), opt_(opt), done_(lay.n_cell, false) {
    weights_ = bulk_weights(lay.n_conc);
  }

  std::vector<double> to_phys(const std::vector<double>& z) const {
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = sc_.offset[i] + sc_.scale[i] * z[i];
    return x;
  }
  std::vector<double> to_scaled(const std::vector<double>& x) const {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - sc_.offset[i]) / sc_.scale[i];
    return z;
  }

  ModuleInput input_at(double t) const {
    ModuleInput u = input_(t);
    if (static_cast<int>(u.I_B.size()) != lay_.n_cell) {
      throw std::invalid_argument("input profile must give one balancing current per cell");
    }
    for (int k = 0; k < lay_.n_cell; ++k) {
      if (done_[k]) u.I_B[k] = u.I_0;
    }
    return u;
  }

  void rhs(const std::vector<double>& z, std::vector<double>& dz, double t) const {
    const auto x = to_phys(z);
    const ModuleInput u = input_at(t);
    std::vector<double> I(lay_.n_cell);
    for (int k = 0; k < lay_.n_cell; ++k) I[k] = u.I_cell(k);
    dz.resize(z.size());
    try {
      module_rhs<double>(mp_, lay_, x, I, dz);
    } catch (const CellError& e) {
      // A trial stage left the model domain. Report a huge rate so the step
      // is rejected and retried smaller; accepted states are checked apart.
      stage_error_ = CellError(e.cell(), t, e.detail());
      std::fill(dz.begin(), dz.end(), 1e30);
      return;
    }
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] /= sc_.scale[i];
  }

  double soc(const std::vector<double>& x, int k) const {
    return soc_bulk<double>(mp_.cells[k], Electrode::kPos, weights_,
                            std::span<const double>(x).subspan(lay_.c_p(k), lay_.n_conc));
  }

  void record(Trajectory& tr, double t, const std::vector<double>& x) const {
    const ModuleInput u = input_at(t);
    TrajectorySample s;
    s.t = t;
    s.I_0 = u.I_0;
    const int N = lay_.n_cell;
    for (int k = 0; k < N; ++k) {
      const double I = u.I_cell(k);
      const auto o = cell_outputs(mp_, lay_, x, k, I);
      s.I_B.push_back(u.I_B[k]);
      s.I_cell.push_back(I);
      s.V.push_back(o.V_cell);
      s.soc.push_back(o.soc);
      s.T_c.push_back(x[lay_.T_c(k)]);
      s.T_s.push_back(x[lay_.T_s(k)]);
      s.L_sei.push_back(x[lay_.L_sei(k)]);
      s.Q.push_back(x[lay_.Q(k)]);
    }
    tr.samples.push_back(std::move(s));
    tr.states.push_back(x);
  }

  void log_bounds(Trajectory& tr, double t, const std::vector<double>& x) {
    const ModuleInput u = input_at(t);
    if (inside_.empty()) inside_.assign(lay_.n_cell * 6, true);
    for (int k = 0; k < lay_.n_cell; ++k) {
      const auto& p = mp_.cells[k];
      const auto o = cell_outputs(mp_, lay_, x, k, u.I_cell(k));
      const double th_n = x[lay_.c_n(k) + lay_.n_conc - 1] / p.neg().c_s_max;
      const double th_p = x[lay_.c_p(k) + lay_.n_conc - 1] / p.pos().c_s_max;
      const double Tmax = std::max(x[lay_.T_c(k)], x[lay_.T_s(k)]);
      const double Tmin = std::min(x[lay_.T_c(k)], x[lay_.T_s(k)]);
      const std::pair<const char*, std::pair<bool, double>> checks[6] = {
          {"V_max", {o.V_cell <= opt_.V_max, o.V_cell}},
          {"V_min", {o.V_cell >= opt_.V_min, o.V_cell}},
          {"T_max", {Tmax <= opt_.T_max, Tmax}},
          {"T_min", {Tmin >= opt_.T_min, Tmin}},
          {"theta_n", {th_n >= p.neg().theta_min() && th_n <= p.neg().theta_max(), th_n}},
          {"theta_p", {th_p >= p.pos().theta_min() && th_p <= p.pos().theta_max(), th_p}},
      };
      for (int c = 0; c < 6; ++c) {
        const bool ok = checks[c].second.first;
        char& was = inside_[k * 6 + c];
        if (was && !ok) tr.events.push_back({t, k, checks[c].first, checks[c].second.second});
        was = ok;
      }
    }
  }

  Trajectory run(const ModuleState& initial) {
    if (!(opt_.horizon > 0)) throw std::invalid_argument("simulate: horizon must be positive");
    Trajectory tr;
    tr.layout = lay_;
    tr.done_time.assign(lay_.n_cell, -1.0);
    check_validity(mp_, lay_, initial.x, 0.0);
    std::vector<double> z = to_scaled(initial.x);
    double t = 0.0;
    auto sys = [this](const std::vector<double>& zz, std::vector<double>& dd, double tt) {
      rhs(zz, dd, tt);
    };
    // Error control on the state only (a_dxdt = 0): the stiff solvent
    // surface node would otherwise loosen the tolerance through |dx/dt|.
    using Controlled = odeint::controlled_runge_kutta<odeint::runge_kutta_dopri5<std::vector<double>>>;
    odeint::dense_output_runge_kutta<Controlled> stepper(
        Controlled(Controlled::error_checker_type(opt_.abs_tol, opt_.rel_tol, 1.0, 0.0),
                   Controlled::step_adjuster_type(opt_.max_step)));
    if (opt_.soc_cutoff) {
      const auto x0 = initial.x;
      for (int k = 0; k < lay_.n_cell; ++k) {
        if (soc(x0, k) >= *opt_.soc_cutoff) {
          done_[k] = true;
          tr.done_time[k] = 0.0;
        }
      }
    }
    record(tr, 0.0, initial.x);
    log_bounds(tr, 0.0, initial.x);
    double next_sample = opt_.sample_dt > 0 ? opt_.sample_dt : opt_.horizon;
    stepper.initialize(z, t, 1e-3);
    std::vector<double> zi(z.size());
    const auto all_done = [&] {
      return opt_.soc_cutoff && opt_.stop_when_all_done &&
             std::all_of(done_.begin(), done_.end(), [](bool b) { return b; });
    };
    while (t < opt_.horizon && !all_done()) {
      double t0 = 0.0, t1 = 0.0;
      try {
        std::tie(t0, t1) = stepper.do_step(sys);
      } catch (const odeint::step_adjustment_error&) {
        if (stage_error_) throw *stage_error_;
        throw std::runtime_error("integrator step size underflow at t=" + std::to_string(t));
      }
      ++tr.steps;
      double t_stop = std::min(t1, opt_.horizon);
      // Locate the earliest SOC cutoff crossing within the step.
      int crossing = -1;
      if (opt_.soc_cutoff) {
        stepper.calc_state(t_stop, zi);
        const auto xe = to_phys(zi);
        double best = t_stop;
        for (int k = 0; k < lay_.n_cell; ++k) {
          if (done_[k] || soc(xe, k) < *opt_.soc_cutoff) continue;
          double lo = t0, hi = t_stop;
          for (int it = 0; it < 60 && hi - lo > 1e-9 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            stepper.calc_state(mid, zi);
            (soc(to_phys(zi), k) >= *opt_.soc_cutoff ? hi : lo) = mid;
          }
          if (hi < best || crossing < 0) {
            best = std::min(best, hi);
            crossing = k;
          }
        }
        if (crossing >= 0) t_stop = best;
      }
      while (opt_.sample_dt > 0 && next_sample < t_stop) {
        stepper.calc_state(next_sample, zi);
        record(tr, next_sample, to_phys(zi));
        next_sample += opt_.sample_dt;
      }
      stepper.calc_state(t_stop, zi);
      auto x = to_phys(zi);
      try {
        check_validity(mp_, lay_, x, t_stop);
      } catch (...) {
        record(tr, t_stop, x);
        throw;
      }
      t = t_stop;
      log_bounds(tr, t, x);
      if (crossing >= 0) {
        for (int k = 0; k < lay_.n_cell; ++k) {
          if (!done_[k] && soc(x, k) >= *opt_.soc_cutoff - 1e-12) {
            done_[k] = true;
            tr.done_time[k] = t;
          }
        }
        record(tr, t, x);
        if (next_sample <= t) next_sample = t + opt_.sample_dt;
        // Input is discontinuous here: restart the integrator.
        stepper.initialize(zi, t, 1e-3);
      } else if (t >= opt_.horizon || opt_.sample_dt <= 0) {
        record(tr, t, x);
      }
    }
    if (tr.samples.back().t < t) record(tr, t, to_phys(zi));
    tr.t_end = t;
    return tr;
  }

 private:
  const ModuleParameters& mp_;
  StateLayout lay_;
  StateScaling sc_;
  const InputProfile& input_;
  SimulationOptions opt_;
  std::vector<bool> done_;
  std::vector<char> inside_;
  std::vector<double> weights_;
  mutable std::optional<CellError> stage_error_;
};

}  // namespace

Trajectory simulate(const ModuleParameters& mp, const ModuleState& initial,
                    const InputProfile& input, const SimulationOptions& opt) {
  if (static_cast<int>(initial.x.size()) != initial.layout.size() ||
      initial.layout.n_cell != mp.n_cell()) {
    throw std::invalid_argument("simulate: initial state does not match the module");
  }
  Simulator sim(mp, initial.layout, input, opt);
  return sim.run(initial);
}

void Trajectory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int N = layout.n_cell;
  out << "t,I0";
  for (const char* col : {"IB", "Icell", "V", "SOC", "Tc", "Ts", "Lsei", "Q"}) {
    for (int k = 1; k <= N; ++k) out << ',' << col << '_' << k;
  }
  out << '\n' << std::setprecision(10);
  for (const auto& s : samples) {
    out << s.t << ',' << s.I_0;
    for (const auto* v : {&s.I_B, &s.I_cell, &s.V, &s.soc, &s.T_c, &s.T_s, &s.L_sei, &s.Q}) {
      for (double x : *v) out << ',' << x;
    }
    out << '\n';
  }
}

CycleProtocol constant_current_protocol(double c_rate, double Q_nom, int n_cell) {
  const double I0 = -c_rate * Q_nom;
  std::ostringstream name;
  name << c_rate << "C";
  return {name.str(), [I0, n_cell](double) { return ModuleInput{I0, std::vector<double>(n_cell, 0.0)}; }};
}

std::vector<CycleRecord> cycle(const ModuleParameters& mp, const CycleProtocol& protocol,
                               int n_cycles, const CycleSettings& st, const RestPolicy& rest) {
  const int N = mp.n_cell();
  if (n_cycles < 0) throw std::invalid_argument("cycle: negative cycle count");
  if (static_cast<int>(st.soc_init.size()) != N) {
    throw std::invalid_argument("cycle: one initial SOC per cell required");
  }
  const bool hf = st.mode == Fidelity::kHighFidelity;
  std::vector<double> L(N), Q(N), Q_nom(N);
  for (int k = 0; k < N; ++k) {
    L[k] = st.L_sei0.empty() ? 5e-9 : st.L_sei0.at(k);
    Q_nom[k] = mp.cells[k].Q_nom;
    Q[k] = st.Q0.empty() ? Q_nom[k] : st.Q0.at(k);
  }
  std::vector<std::vector<double>> c_solv(N);
  std::vector<CycleRecord> out;
  for (int n = 1; n <= n_cycles; ++n) {
    std::vector<CellState> cells;
    for (int k = 0; k < N; ++k) {
      auto c = CellState::at_rest(mp.cells[k], st.soc_init[k], mp.T_amb, L[k], Q[k], hf);
      if (hf && !c_solv[k].empty()) c.c_solv = c_solv[k];
      cells.push_back(std::move(c));
    }
    SimulationOptions opt;
    opt.horizon = st.max_charge_time;
    opt.sample_dt = 0.0;
    opt.soc_cutoff = st.soc_target;
    Trajectory tr;
    try {
      tr = simulate(mp, ModuleState::from_cells(mp, cells, st.mode), protocol.input, opt);
    } catch (const std::exception& e) {
      throw std::runtime_error(protocol.name + ", cycle " + std::to_string(n) + ": " + e.what());
    }
    if (std::any_of(tr.done_time.begin(), tr.done_time.end(), [](double d) { return d < 0; })) {
      throw std::runtime_error(protocol.name + ", cycle " + std::to_string(n) +
                               ": target SOC not reached within the charge-time limit");
    }
    if (st.enforce_bounds && !tr.events.empty()) {
      const auto& e = tr.events.front();
      throw std::runtime_error(protocol.name + ", cycle " + std::to_string(n) + ": cell " +
                               std::to_string(e.cell + 1) + " violated " + e.kind + " at t=" +
                               std::to_string(e.t) + " s (value " + std::to_string(e.value) + ")");
    }
    auto x = tr.final_state();
    if (rest.rest_s > 0) {
      const auto idle = [N](double) { return ModuleInput{0.0, std::vector<double>(N, 0.0)}; };
      SimulationOptions ro;
      ro.horizon = rest.rest_s;
      ro.sample_dt = 0.0;
      ModuleState ms{tr.layout, x};
      x = simulate(mp, ms, idle, ro).final_state();
    }
    CycleRecord r;
    r.cycle = n;
    r.charge_time = *std::max_element(tr.done_time.begin(), tr.done_time.end());
    for (int k = 0; k < N; ++k) {
      L[k] = x[tr.layout.L_sei(k)];
      Q[k] = x[tr.layout.Q(k)];
      if (hf) {
        c_solv[k].assign(x.begin() + tr.layout.c_solv(k),
                         x.begin() + tr.layout.c_solv(k) + tr.layout.n_sei);
      }
      r.Q.push_back(Q[k]);
      r.L_sei.push_back(L[k]);
      r.loss_pct.push_back((Q_nom[k] - Q[k]) / Q_nom[k] * 100.0);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_cycles_csv(const std::vector<CycleRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int N = records.empty() ? 0 : static_cast<int>(records.front().Q.size());
  out << "cycle,charge_time";
  for (const char* col : {"Q", "Lsei", "loss_pct"}) {
    for (int k = 1; k <= N; ++k) out << ',' << col << '_' << k;
  }
  out << '\n' << std::setprecision(10);
  for (const auto& r : records) {
    out << r.cycle << ',' << r.charge_time;
    for (const auto* v : {&r.Q, &r.L_sei, &r.loss_pct}) {
      for (double x : *v) out << ',' << x;
    }
    out << '\n';
  }
}

}  // namespace bmsopt
