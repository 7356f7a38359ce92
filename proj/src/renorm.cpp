#include "penergy/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "penergy/parallel.hpp"

namespace penergy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> to_std(const Vec& u) { return {u.data(), u.data() + u.size()}; }

void check_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("exponent p must lie in (1, inf)");
}

double solve_trace(const CompiledGraph& cg, const Vec& u, const SolverConfig& cfg, const char* what, int n) {
  auto r = cg.solve(to_std(u), cfg);
  if (!r.converged) {
    std::ostringstream os;
    os << what << " at level " << n << ": solve did not converge (residual " << r.residual << ", "
       << r.iterations << " iterations)";
    throw SolveFailure(os.str());
  }
  return r.energy;
}

// Aitken Δ² on three consecutive terms; nullopt when the differences do not contract monotonically.
std::optional<double> aitken(double r0, double r1, double r2) {
  const double d1 = r1 - r0, d2 = r2 - r1;
  if (!(d1 * d2 > 0) || !(std::abs(d2) < std::abs(d1))) return std::nullopt;
  const double denom = d2 - d1;
  if (denom == 0.0) return std::nullopt;
  return r2 - d2 * d2 / denom;
}

}  // namespace

GraphExpansion base_level_graph(const StructureSpec& spec, double p, int n, double scale) {
  check_exponent(p);
  if (n < 0) throw std::invalid_argument("level must be nonnegative");
  const int m = spec.m();
  const VertexNet net = build_net(spec, n);
  auto k = std::make_shared<GraphPForm>(GraphPForm::complete(m, p));
  auto base = k->expand();
  GraphExpansion ex = expand_cells(net, *base, scale);
  ex.embed = net.boundary_ids;
  return ex;
}

double deep_trace(const StructureSpec& spec, double p, int n, const Vec& u, const SolverConfig& cfg) {
  if (u.size() != spec.m()) throw std::invalid_argument("boundary data must have one value per V_0 vertex");
  auto ex = base_level_graph(spec, p, n);
  CompiledGraph cg(ex.graph, ex.embed);
  return solve_trace(cg, u, cfg, "deep trace", n);
}

std::vector<Vec> rho_directions(int m) {
  if (m < 2) throw std::invalid_argument("need at least two boundary vertices");
  Vec a = Vec::Ones(m), b = Vec::Zero(m), c(m);
  a[0] = 0;
  b[0] = 0;
  b[1] = -1;
  if (m > 2) b[2] = 1;
  for (int k = 0; k < m; ++k) c[k] = k;
  std::vector<Vec> dirs{a, b, c};
  for (auto& d : dirs) d.array() -= d.mean();
  return dirs;
}

RhoEstimate estimate_rho(const StructureSpec& spec, double p, int n_max, const SolverConfig& cfg, int threads) {
  check_exponent(p);
  if (n_max < 3) throw std::invalid_argument("estimate_rho needs n_max >= 3");
  RhoEstimate est;
  est.p = p;
  est.depth = n_max;
  est.directions = rho_directions(spec.m());
  const std::size_t D = est.directions.size();
  est.traces.assign(D, std::vector<double>(n_max + 1, 0.0));

  // Level n is solved with weights σ^n, σ the previous reference ratio, so energies stay of order one
  // and the relative stopping rule keeps its meaning; the factor is divided out afterwards.
  double log_scale = 0.0, sigma = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    const double scale = std::exp(log_scale);
    auto ex = base_level_graph(spec, p, n, scale);
    CompiledGraph cg(ex.graph, ex.embed);
    std::vector<double> e(D);
    parallel_for(D, threads, [&](std::size_t d) { e[d] = solve_trace(cg, est.directions[d], cfg, "deep trace", n); });
    for (std::size_t d = 0; d < D; ++d) est.traces[d][n] = e[d] / scale;
    if (n > 0) sigma = est.traces[0][n - 1] / est.traces[0][n];
    log_scale += std::log(sigma);
  }

  est.ratios.assign(D, {});
  est.extrapolated.assign(D, 0.0);
  est.aitken_used.assign(D, false);
  double step_error = 0.0;
  bool cauchy = true;
  for (std::size_t d = 0; d < D; ++d) {
    auto& r = est.ratios[d];
    for (int n = 0; n < n_max; ++n) r.push_back(est.traces[d][n] / est.traces[d][n + 1]);
    const std::size_t L = r.size();
    const double last = r[L - 1];
    auto a2 = aitken(r[L - 3], r[L - 2], r[L - 1]);
    if (a2) {
      est.extrapolated[d] = *a2;
      est.aitken_used[d] = true;
      // Distance between successive Aitken values, or to the last ratio when only one is available.
      std::optional<double> a1 = L >= 4 ? aitken(r[L - 4], r[L - 3], r[L - 2]) : std::nullopt;
      step_error = std::max(step_error, a1 ? std::abs(*a2 - *a1) : std::abs(*a2 - last));
    } else {
      est.extrapolated[d] = last;
      step_error = std::max(step_error, std::abs(r[L - 1] - r[L - 2]));
    }
    const double settled = 1e-12 * std::abs(last);
    const double d1 = std::abs(r[L - 2] - r[L - 3]), d2 = std::abs(r[L - 1] - r[L - 2]);
    const bool tiny = d1 <= settled && d2 <= settled;
    if (!(tiny || d2 <= d1)) cauchy = false;
  }
  est.rho = std::accumulate(est.extrapolated.begin(), est.extrapolated.end(), 0.0) / static_cast<double>(D);
  const auto [lo, hi] = std::minmax_element(est.extrapolated.begin(), est.extrapolated.end());
  est.error = std::max(*hi - *lo, step_error);
  est.cauchy = cauchy;
  return est;
}

namespace {

std::shared_ptr<const FormHandle> oracle_graph(const StructureSpec& spec, double p, int depth, double scale) {
  return base_level_graph(spec, p, depth, scale).graph;
}

std::vector<int> oracle_boundary(const StructureSpec& spec, int depth) { return build_net(spec, depth).boundary_ids; }

}  // namespace

E0Oracle::E0Oracle(StructureSpec spec, double p, int depth, double rho, double rho_estimate, double normalization,
                   const SolverConfig& cfg)
    : TraceForm(oracle_graph(spec, p, depth, std::pow(rho, depth) * normalization), oracle_boundary(spec, depth), cfg,
                FormKind::oracle),
      spec_(std::move(spec)),
      p_(p),
      depth_(depth),
      rho_(rho),
      rho_estimate_(rho_estimate),
      normalization_(normalization),
      residual_(kNaN) {}

double E0Oracle::tolerance() const {
  return std::isfinite(residual_) ? std::max(cfg_.tol, residual_) : cfg_.tol;
}

std::shared_ptr<const E0Oracle> E0Oracle::rescaled(double c) const {
  if (!(c > 0)) throw std::invalid_argument("rescaling factor must be positive");
  auto o = std::make_shared<E0Oracle>(spec_, p_, depth_, rho_, rho_estimate_, normalization_ * c, cfg_);
  o->set_residual(residual_);
  return o;
}

std::shared_ptr<const E0Oracle> build_e0_oracle(const StructureSpec& spec, double p, int depth, const SolverConfig& cfg,
                                                const RhoEstimate* estimate, int residual_samples) {
  check_exponent(p);
  if (depth < 0) throw std::invalid_argument("oracle depth must be nonnegative");
  // ρ from the reference direction 1_{q_1}, which has the energy of the first estimation direction.
  double s0 = 0, s1 = 0;
  if (estimate && estimate->p == p && estimate->depth >= depth + 1) {
    s0 = estimate->traces[0][depth];
    s1 = estimate->traces[0][depth + 1];
  } else {
    Vec ref = Vec::Zero(spec.m());
    ref[0] = 1.0;
    // Weights guess^n keep both energies of order one for the relative stopping rule.
    const double guess = std::max(1.0, static_cast<double>(spec.N()) / 2.0);
    for (int n : {depth, depth + 1}) {
      const double w = std::pow(guess, n);
      auto ex = base_level_graph(spec, p, n, w);
      CompiledGraph cg(ex.graph, ex.embed);
      (n == depth ? s0 : s1) = solve_trace(cg, ref, cfg, "oracle reference", n) / w;
    }
  }
  const double rho = s0 / s1;
  const double rho_hat = estimate ? estimate->rho : kNaN;
  auto o = std::make_shared<E0Oracle>(spec, p, depth, rho, rho_hat, 1.0, cfg);
  if (residual_samples > 0) o->set_residual(fixed_point_residual(*o, cfg, residual_samples));
  return o;
}

std::shared_ptr<const TraceForm> renormalized_trace(std::shared_ptr<const FormHandle> form, const StructureSpec& spec,
                                                    double rho, int levels, const SolverConfig& cfg) {
  if (levels < 1) throw std::invalid_argument("renormalization needs at least one level");
  auto net = std::make_shared<const VertexNet>(build_net(spec, levels));
  auto level = std::make_shared<LevelForm>(net, std::move(form), rho);
  return std::make_shared<TraceForm>(level, net->boundary_ids, cfg);
}

double fixed_point_residual(const E0Oracle& oracle, const SolverConfig& cfg, int samples, std::uint64_t seed) {
  const int m = oracle.size();
  auto net = std::make_shared<const VertexNet>(build_net(oracle.spec(), 1));
  // Non-owning alias: the solver does not outlive this call.
  std::shared_ptr<const FormHandle> cell(std::shared_ptr<const FormHandle>{}, &oracle);
  DirichletSolver solver(net, cell, oracle.rho(), net->boundary_ids);
  std::vector<Vec> dirs = rho_directions(m);
  for (int s = 0; s < samples; ++s) dirs.push_back(sample_direction(m, seed, static_cast<std::uint64_t>(s)));
  double worst = 0.0;
  for (const Vec& d : dirs) {
    const double e = oracle.value(d);
    if (!(e > 0)) continue;
    const Vec u = d / std::pow(e, 1.0 / oracle.exponent());
    auto sol = solver.solve(to_std(u), cfg);
    if (!sol.converged) throw SolveFailure("fixed-point residual: one-level solve did not converge");
    worst = std::max(worst, std::abs(sol.objective - oracle.value(u)));
  }
  return worst;
}

EigenPair eigen_pair(const StructureSpec& spec, double p, int i, const E0Oracle& oracle, const SolverConfig& cfg) {
  if (spec.m() != 3) throw std::invalid_argument("eigenfunctions are defined for three boundary vertices");
  if (i < 0 || i >= 3) throw std::invalid_argument("symbol out of range");
  if (spec.boundary_fixed_symbol[i] < 0) throw std::invalid_argument("symbol does not fix a boundary vertex");
  if (oracle.exponent() != p) throw std::invalid_argument("oracle exponent does not match p");
  // F_s fixes q_i; the eigenfunctions are read on the cell of s.
  const int s = spec.boundary_fixed_symbol[i];
  const int j = (i + 1) % 3, k = (i + 2) % 3;
  EigenPair ep;
  ep.p = p;
  ep.i = i;
  ep.kappa = std::pow(oracle.rho(), -1.0 / (p - 1.0));
  ep.kappa_estimate = std::isfinite(oracle.rho_estimate()) ? std::pow(oracle.rho_estimate(), -1.0 / (p - 1.0)) : kNaN;
  ep.h1 = Vec::Zero(3);
  ep.h1[j] = ep.h1[k] = 1.0;
  ep.h2 = Vec::Zero(3);
  ep.h2[j] = -1.0;
  ep.h2[k] = 1.0;

  auto net = std::make_shared<const VertexNet>(build_net(spec, 1));
  std::shared_ptr<const FormHandle> cell(std::shared_ptr<const FormHandle>{}, &oracle);
  DirichletSolver solver(net, cell, oracle.rho(), net->boundary_ids);
  auto s1 = solver.solve(to_std(ep.h1), cfg);
  auto s2 = solver.solve(to_std(ep.h2), cfg);
  if (!s1.converged || !s2.converged) throw SolveFailure("eigenfunction extension did not converge");
  ep.h1_level1 = s1.values;
  ep.h2_level1 = s2.values;
  const int x = net->cell(static_cast<std::uint64_t>(s))[k];
  ep.kappa_read = s1.values[x];
  ep.lambda = s2.values[x];
  ep.consistent = std::abs(ep.kappa_read - ep.kappa) <= 10.0 * cfg.tol;
  return ep;
}

std::vector<SweepRow> sweep_p(const StructureSpec& spec, const std::vector<double>& grid, int depth, int oracle_depth,
                              const SolverConfig& cfg, int threads) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    check_exponent(grid[k]);
    if (k > 0 && !(grid[k] > grid[k - 1])) throw std::invalid_argument("p grid must be strictly ascending");
  }
  std::vector<SweepRow> rows(grid.size());
  // Rows are independent; each row runs its own solves single-threaded.
  parallel_for(grid.size(), threads, [&](std::size_t k) {
    SweepRow& row = rows[k];
    const double p = grid[k];
    row.p = p;
    row.depth = depth;
    try {
      auto est = estimate_rho(spec, p, depth, cfg);
      row.rho = est.rho;
      row.error = est.error;
      row.cauchy = est.cauchy;
      row.rho_resist = std::pow(est.rho, 1.0 / (p - 1.0));
      row.rho_resist_error = row.rho_resist / ((p - 1.0) * est.rho) * est.error;
      row.kappa = std::pow(est.rho, -1.0 / (p - 1.0));
      auto oracle = build_e0_oracle(spec, p, oracle_depth, cfg, &est);
      row.residual = oracle->residual();
      row.lambda = spec.m() == 3 ? eigen_pair(spec, p, 0, *oracle, cfg).lambda : kNaN;
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = e.what();
    }
  });
  return rows;
}

}  // namespace penergy
