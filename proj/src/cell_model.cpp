#include "bmsopt/cell_model.hpp"

namespace bmsopt {

std::vector<double> bulk_weights(int n_conc) {
  if (n_conc < 2) throw std::invalid_argument("bulk_weights: need at least two radial nodes");
  const int M = n_conc;
  std::vector<double> w(M);
  for (int i = 1; i < M; ++i) w[i - 1] = static_cast<double>(i) * i;
  w[M - 1] = 0.5 * M * (M - 1);
  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;
  return w;
}

CellState CellState::at_rest(const CellParameters& p, double soc, double T, double L_sei, double Q,
                             bool with_solvent) {
  CellState s;
  s.c_s_n.assign(p.n_conc(), p.neg().theta_at_soc(soc) * p.neg().c_s_max);
  s.c_s_p.assign(p.n_conc(), p.pos().theta_at_soc(soc) * p.pos().c_s_max);
  s.T_c = T;
  s.T_s = T;
  s.L_sei = L_sei;
  s.Q = Q;
  if (with_solvent) s.c_solv.assign(p.N_sei, p.aging.eps_sei * p.aging.c_solv_bulk);
  return s;
}

}  // namespace bmsopt
