#include "penergy/solver.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace penergy {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Ldlt = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>;

double energy_target(double tol, double energy, double p) {
  return tol * (1.0 + std::pow(std::max(energy, 0.0), (p - 1.0) / p));
}

// sgn(d)|d|^(p-1)
inline double flux_term(double d, double p) {
  if (d == 0.0) return 0.0;
  if (p == 2.0) return d;
  return std::copysign(std::pow(std::abs(d), p - 1.0), d);
}

// Flux of an edge under the energy smoothed at `eps` (exact when eps = 0 or p >= 2). For p < 2 the
// exact flux is not Lipschitz at 0, so the stopping rule measures fluxes at the continuation floor.
inline double measured_flux(double d, double p, double eps) {
  if (p >= 2.0 || eps == 0.0) return flux_term(d, p);
  return d * std::pow(d * d + eps * eps, 0.5 * p - 1.0);
}

inline double power_term(double d, double p) {
  if (p == 2.0) return d * d;
  return std::pow(std::abs(d), p);
}

}  // namespace

struct CompiledGraph::Impl {
  double p = 2;
  int n = 0;
  std::vector<int> free_of;     // vertex -> free index or -1
  std::vector<int> vertex_of;   // free index -> vertex
  std::vector<int> ea, eb;      // edge endpoints
  std::vector<double> ew;
  std::vector<int> fa, fb;      // free indices of endpoints or -1
  std::vector<int> pos_aa, pos_bb, pos_ab;  // value slots in the lower-triangular Hessian
  SpMat pattern;
  std::unique_ptr<Ldlt> laplacian;  // p = 2 factorization
  std::vector<int> pinned_slot;     // vertex -> index in pinned list or -1
  double max_weighted_degree = 0;
};

CompiledGraph::~CompiledGraph() = default;

CompiledGraph::CompiledGraph(std::shared_ptr<const GraphPForm> graph, std::vector<int> pinned)
    : graph_(std::move(graph)), pinned_(std::move(pinned)), impl_(std::make_unique<Impl>()) {
  auto& I = *impl_;
  const int nv = graph_->size();
  I.p = graph_->exponent();
  I.free_of.assign(nv, 0);
  I.pinned_slot.assign(nv, -1);
  if (pinned_.empty()) throw std::invalid_argument("Dirichlet problem needs a non-empty pinned set");
  for (std::size_t k = 0; k < pinned_.size(); ++k) {
    int x = pinned_[k];
    if (x < 0 || x >= nv) throw std::invalid_argument("pinned vertex out of range");
    if (I.pinned_slot[x] != -1) throw std::invalid_argument("vertex pinned twice");
    I.pinned_slot[x] = static_cast<int>(k);
    I.free_of[x] = -1;
  }
  int nf = 0;
  for (int x = 0; x < nv; ++x) I.free_of[x] = (I.pinned_slot[x] == -1) ? nf++ : -1;
  free_count_ = nf;
  I.n = nf;

  const auto& edges = graph_->edges();
  // Every free component must touch a pinned vertex.
  {
    std::vector<int> parent(nv);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : edges)
      if (e.w > 0) parent[find(e.a)] = find(e.b);
    std::vector<char> anchored(nv, 0);
    for (int x : pinned_) anchored[find(x)] = 1;
    for (int x = 0; x < nv; ++x)
      if (!anchored[find(x)]) throw std::invalid_argument("disconnected free region: vertex " + std::to_string(x));
  }
  // Fill-reducing order of the free vertices.
  if (nf > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < nf; ++k) trip.emplace_back(k, k, 1.0);
    for (const auto& e : edges) {
      int a = I.free_of[e.a], b = I.free_of[e.b];
      if (a >= 0 && b >= 0 && a != b) {
        trip.emplace_back(a, b, 1.0);
        trip.emplace_back(b, a, 1.0);
      }
    }
    SpMat full(nf, nf);
    full.setFromTriplets(trip.begin(), trip.end());
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    Eigen::AMDOrdering<int> amd;
    amd(full, pinv);
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm = pinv.inverse();
    for (int x = 0; x < nv; ++x)
      if (I.free_of[x] >= 0) I.free_of[x] = perm.indices()[I.free_of[x]];
  }
  I.vertex_of.assign(nf, -1);
  for (int x = 0; x < nv; ++x)
    if (I.free_of[x] >= 0) I.vertex_of[I.free_of[x]] = x;

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < nf; ++k) trip.emplace_back(k, k, 0.0);
  const std::size_t ne = edges.size();
  I.ea.resize(ne);
  I.eb.resize(ne);
  I.ew.resize(ne);
  I.fa.resize(ne);
  I.fb.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    I.ea[e] = edges[e].a;
    I.eb[e] = edges[e].b;
    I.ew[e] = edges[e].w;
    I.fa[e] = I.free_of[edges[e].a];
    I.fb[e] = I.free_of[edges[e].b];
    if (I.fa[e] >= 0 && I.fb[e] >= 0 && I.fa[e] != I.fb[e])
      trip.emplace_back(std::max(I.fa[e], I.fb[e]), std::min(I.fa[e], I.fb[e]), 0.0);
  }
  {
    std::vector<double> deg(nv, 0.0);
    for (const auto& e : edges) {
      deg[e.a] += e.w;
      deg[e.b] += e.w;
    }
    for (int x = 0; x < nv; ++x)
      if (I.free_of[x] >= 0) I.max_weighted_degree = std::max(I.max_weighted_degree, deg[x]);
  }
  if (nf == 0) return;
  I.pattern.resize(nf, nf);
  I.pattern.setFromTriplets(trip.begin(), trip.end());
  I.pattern.makeCompressed();
  auto slot = [&](int row, int col) {
    const int* rows = I.pattern.innerIndexPtr();
    int lo = I.pattern.outerIndexPtr()[col], hi = I.pattern.outerIndexPtr()[col + 1];
    const int* it = std::lower_bound(rows + lo, rows + hi, row);
    return static_cast<int>(it - rows);
  };
  I.pos_aa.assign(ne, -1);
  I.pos_bb.assign(ne, -1);
  I.pos_ab.assign(ne, -1);
  for (std::size_t e = 0; e < ne; ++e) {
    if (I.fa[e] >= 0) I.pos_aa[e] = slot(I.fa[e], I.fa[e]);
    if (I.fb[e] >= 0) I.pos_bb[e] = slot(I.fb[e], I.fb[e]);
    if (I.fa[e] >= 0 && I.fb[e] >= 0 && I.fa[e] != I.fb[e])
      I.pos_ab[e] = slot(std::max(I.fa[e], I.fb[e]), std::min(I.fa[e], I.fb[e]));
  }

  SpMat lap = I.pattern;
  double* val = lap.valuePtr();
  for (std::size_t e = 0; e < ne; ++e) {
    if (I.pos_aa[e] >= 0) val[I.pos_aa[e]] += I.ew[e];
    if (I.pos_bb[e] >= 0) val[I.pos_bb[e]] += I.ew[e];
    if (I.pos_ab[e] >= 0) val[I.pos_ab[e]] -= I.ew[e];
  }
  I.laplacian = std::make_unique<Ldlt>();
  I.laplacian->compute(lap);
  if (I.laplacian->info() != Eigen::Success) throw std::runtime_error("p = 2 factorization failed");
}

double CompiledGraph::smoothing_floor(double osc, double scale, double target) const {
  const double p = impl_->p;
  double floor = 1e-13 * osc;
  // Rounding of the values perturbs a flat edge's smoothed flux by about w ε^(p-2) ulp(x); keep that
  // a decade below the target.
  if (p < 2.0 && target > 0) {
    const double noise = 10.0 * impl_->max_weighted_degree * std::numeric_limits<double>::epsilon() * scale;
    floor = std::max(floor, std::pow(noise / target, 1.0 / (2.0 - p)));
  }
  return floor;
}

double CompiledGraph::max_free_residual(const Vec& x, double eps) const {
  const auto& I = *impl_;
  if (I.n == 0) return 0.0;
  Vec r = Vec::Zero(I.n);
  for (std::size_t e = 0; e < I.ew.size(); ++e) {
    double t = I.ew[e] * measured_flux(x[I.ea[e]] - x[I.eb[e]], I.p, eps);
    if (I.fa[e] >= 0) r[I.fa[e]] += t;
    if (I.fb[e] >= 0) r[I.fb[e]] -= t;
  }
  return r.cwiseAbs().maxCoeff();
}

Vec CompiledGraph::pinned_flux(const Vec& x, double eps) const {
  const auto& I = *impl_;
  Vec flux = Vec::Zero(static_cast<Eigen::Index>(pinned_.size()));
  const auto& edges = graph_->edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    int a = edges[e].a, b = edges[e].b;
    int sa = I.pinned_slot[a], sb = I.pinned_slot[b];
    if (sa < 0 && sb < 0) continue;
    double t = edges[e].w * measured_flux(x[a] - x[b], I.p, eps);
    if (sa >= 0) flux[sa] += t;
    if (sb >= 0) flux[sb] -= t;
  }
  return flux;
}

GraphSolveResult CompiledGraph::solve(std::span<const double> pinned_values, const SolverConfig& cfg,
                                      const Vec* start) const {
  cfg.validate();
  const auto& I = *impl_;
  const int nv = graph_->size();
  const double p = I.p;
  if (pinned_values.size() != pinned_.size()) throw std::invalid_argument("pinned value count mismatch");
  for (double v : pinned_values)
    if (!std::isfinite(v)) throw std::invalid_argument("pinned values must be finite");

  GraphSolveResult out;
  const auto [lo_it, hi_it] = std::minmax_element(pinned_values.begin(), pinned_values.end());
  const double lo = *lo_it, hi = *hi_it, osc = hi - lo;

  Vec x(nv);
  if (osc == 0.0) {
    x.setConstant(lo);
    out.values = std::move(x);
    out.converged = true;
    return out;
  }

  const std::size_t ne = I.ew.size();
  auto energy_of = [&](const Vec& y) {
    double s = 0;
    for (std::size_t e = 0; e < ne; ++e) s += I.ew[e] * power_term(y[I.ea[e]] - y[I.eb[e]], p);
    return s;
  };

  // Linear warm start: L_ff x_f = -L_fp x_p.
  auto linear_solve = [&](Vec& y) {
    Vec rhs = Vec::Zero(I.n);
    for (std::size_t e = 0; e < ne; ++e) {
      if (I.fa[e] >= 0 && I.fb[e] < 0) rhs[I.fa[e]] += I.ew[e] * y[I.eb[e]];
      if (I.fb[e] >= 0 && I.fa[e] < 0) rhs[I.fb[e]] += I.ew[e] * y[I.ea[e]];
    }
    Vec xf = I.laplacian->solve(rhs);
    for (int k = 0; k < I.n; ++k) y[I.vertex_of[k]] = xf[k];
  };

  const bool use_start = start && cfg.warm_start == WarmStart::given;
  if (use_start) {
    if (start->size() != nv) throw std::invalid_argument("warm start has wrong length");
    x = *start;
  } else {
    x.setConstant(0.5 * (lo + hi));
  }
  for (std::size_t k = 0; k < pinned_.size(); ++k) x[pinned_[k]] = pinned_values[k];
  if (I.n == 0) {
    out.energy = energy_of(x);
    out.values = std::move(x);
    out.converged = true;
    return out;
  }
  if (!use_start) linear_solve(x);

  // Work in normalized units so that the smoothing schedule is scale free.
  double eps = cfg.smoothing_start * osc;
  const bool smooth = (p != 2.0);
  if (!smooth) eps = 0.0;

  Vec g(I.n), gt(I.n), step(I.n), trial(nv);
  SpMat H = I.pattern;
  Ldlt ldlt;
  ldlt.analyzePattern(H);

  auto smoothed = [&](const Vec& y, double ep, Vec* grad, SpMat* hess) {
    double F = 0;
    if (grad) grad->setZero();
    double* hv = hess ? hess->valuePtr() : nullptr;
    if (hess) std::fill(hv, hv + hess->nonZeros(), 0.0);
    const double e2 = ep * ep;
    for (std::size_t e = 0; e < ne; ++e) {
      const double d = y[I.ea[e]] - y[I.eb[e]];
      const double w = I.ew[e];
      double f, f1, f2;
      if (!smooth) {
        f = d * d;
        f1 = d;
        f2 = 1.0;
      } else {
        const double s = d * d + e2;
        if (s == 0.0) {
          f = f1 = 0.0;
          f2 = (p >= 2.0) ? 0.0 : std::numeric_limits<double>::max() * 1e-10;
        } else {
          const double sp = std::pow(s, 0.5 * p - 2.0);
          f = sp * s * s;
          f1 = d * sp * s;
          f2 = sp * ((p - 1.0) * d * d + e2);
        }
      }
      F += w * f;
      if (grad) {
        if (I.fa[e] >= 0) (*grad)[I.fa[e]] += w * f1;
        if (I.fb[e] >= 0) (*grad)[I.fb[e]] -= w * f1;
      }
      if (hv) {
        const double h = w * f2;
        if (I.pos_aa[e] >= 0) hv[I.pos_aa[e]] += h;
        if (I.pos_bb[e] >= 0) hv[I.pos_bb[e]] += h;
        if (I.pos_ab[e] >= 0) hv[I.pos_ab[e]] -= h;
      }
    }
    return F;
  };

  int it = 0;
  double energy = energy_of(x);
  double target = energy_target(cfg.tol, energy, p);
  const double eps_floor = smooth ? smoothing_floor(osc, std::max(std::abs(lo), std::abs(hi)), target) : 0.0;
  if (smooth) eps = std::max(eps, eps_floor);
  double residual = max_free_residual(x, eps_floor);
  // Levenberg damping, relative to the largest Hessian diagonal. For p > 2 the curvature of flat edges
  // vanishes with eps and the undamped step overshoots along them by orders of magnitude.
  double damping = 0.0;
  while (residual > target && it < cfg.max_iter) {
    double F = smoothed(x, eps, &g, &H);
    const double gnorm = g.cwiseAbs().maxCoeff();
    const double stage_tol = std::max(target, (eps / osc) * (1.0 + std::pow(energy, (p - 1.0) / p)));
    if (smooth && gnorm <= stage_tol && eps > eps_floor) {
      eps = std::max(eps * cfg.smoothing_decay, eps_floor);
      continue;
    }
    // Newton step; fall back to a regularized Hessian when the factorization is not positive definite.
    const double hmax = H.diagonal().maxCoeff();
    if (damping > 0)
      for (int k = 0; k < I.n; ++k) H.coeffRef(k, k) += damping * hmax;
    ldlt.factorize(H);
    bool ok = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0;
    if (ok) {
      step = ldlt.solve(-g);
      ok = step.allFinite() && step.dot(g) < 0;
    }
    if (!ok) {
      const double dmax = H.diagonal().cwiseAbs().maxCoeff();
      double mu = 1e-12 * std::max(dmax, 1e-300);
      for (int attempt = 0; attempt < 30 && !ok; ++attempt, mu *= 10) {
        SpMat R = H;
        for (int k = 0; k < I.n; ++k) R.coeffRef(k, k) += mu;
        ldlt.factorize(R);
        if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0) {
          step = ldlt.solve(-g);
          ok = step.allFinite() && step.dot(g) < 0;
        }
      }
      if (!ok) step = -g / std::max(dmax, 1e-300);
    }
    const double slope = p * g.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.backtrack) {
      trial = x;
      for (int k = 0; k < I.n; ++k) trial[I.vertex_of[k]] += t * step[k];
      const double Ft = smoothed(trial, eps, nullptr, nullptr);
      // Once the change in F is at its rounding level the Armijo test carries no information. The line
      // function is convex, so a directional derivative at the trial point below armijo * slope implies
      // the same sufficient decrease.
      if (std::abs(Ft - F) <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(F)) {
        smoothed(trial, eps, &gt, nullptr);
        if (p * gt.dot(step) <= cfg.armijo * slope) {
          accepted = true;
          break;
        }
      } else if (Ft <= F + cfg.armijo * t * slope) {
        accepted = true;
        break;
      }
    }
    ++it;
    if (accepted && t == 1.0) {
      damping = damping > 1e-15 ? 0.1 * damping : 0.0;
    } else if (t < 0.1 || !accepted) {
      damping = std::max((t < 1e-3 ? 100.0 : 10.0) * damping, 1e-12);
    }
    if (accepted) {
      x.swap(trial);
    } else if (damping < 1.0) {
      continue;
    } else if (smooth && eps > eps_floor) {
      eps = std::max(eps * cfg.smoothing_decay, eps_floor);
    } else {
      break;
    }
    energy = energy_of(x);
    residual = max_free_residual(x, eps_floor);
    target = energy_target(cfg.tol, energy, p);
  }
  out.values = std::move(x);
  out.energy = energy;
  out.residual = residual;
  out.iterations = it;
  out.smoothing = eps_floor;
  out.converged = residual <= target;
  return out;
}

GraphSolveResult minimize_handle(const FormHandle& h, const std::vector<int>& pinned,
                                 std::span<const double> pinned_values, const SolverConfig& cfg, const Vec* start) {
  cfg.validate();
  const int nv = h.size();
  const double p = h.exponent();
  if (pinned.empty() || pinned.size() != pinned_values.size()) throw std::invalid_argument("bad pinned set");
  std::vector<char> is_pinned(nv, 0);
  for (int x : pinned) is_pinned[x] = 1;
  std::vector<int> free;
  for (int x = 0; x < nv; ++x)
    if (!is_pinned[x]) free.push_back(x);
  const auto [lo_it, hi_it] = std::minmax_element(pinned_values.begin(), pinned_values.end());
  GraphSolveResult out;
  Vec x = (start && cfg.warm_start == WarmStart::given) ? *start : Vec::Constant(nv, 0.5 * (*lo_it + *hi_it));
  for (std::size_t k = 0; k < pinned.size(); ++k) x[pinned[k]] = pinned_values[k];
  if (*lo_it == *hi_it) {
    x.setConstant(*lo_it);
    out.values = x;
    out.converged = true;
    return out;
  }
  const int nf = static_cast<int>(free.size());
  auto grad_free = [&](const Vec& y) {
    Vec gr = h.gradient(y);
    Vec gf(nf);
    for (int k = 0; k < nf; ++k) gf[k] = gr[free[k]];
    return gf;
  };
  double f = h.value(x);
  Vec g = nf ? grad_free(x) : Vec();
  auto target_of = [&](double e) { return energy_target(cfg.tol, e, p); };
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(nf, nf);
  bool scaled = false;
  int it = 0;
  while (nf && g.cwiseAbs().maxCoeff() > target_of(f) && it < cfg.max_iter) {
    Vec dir = -(Hinv * g);
    if (dir.dot(g) >= 0) {
      Hinv.setIdentity();
      dir = -g;
    }
    const double slope = p * g.dot(dir);
    double t = 1.0;
    Vec trial = x;
    double ft = f;
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.backtrack) {
      trial = x;
      for (int k = 0; k < nf; ++k) trial[free[k]] += t * dir[k];
      ft = h.value(trial);
      if (ft <= f + cfg.armijo * t * slope + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f)) {
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted) break;
    Vec gn = grad_free(trial);
    Vec s = t * dir, y = p * (gn - g);
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        Hinv *= sy / y.dot(y);
        scaled = true;
      }
      const double r = 1.0 / sy;
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(nf, nf) - r * s * y.transpose();
      Hinv = A * Hinv * A.transpose() + r * s * s.transpose();
    }
    x = trial;
    f = ft;
    g = gn;
  }
  out.values = x;
  out.energy = f;
  out.residual = nf ? g.cwiseAbs().maxCoeff() : 0.0;
  out.iterations = it;
  out.converged = out.residual <= target_of(f);
  return out;
}

DirichletSolver::DirichletSolver(std::shared_ptr<const VertexNet> net, std::shared_ptr<const FormHandle> cell_form,
                                 double rho, std::vector<int> pinned_ids, bool use_expansion)
    : net_(std::move(net)), pinned_ids_(std::move(pinned_ids)) {
  if (!net_ || !cell_form) throw std::invalid_argument("Dirichlet problem needs a net and a cell form");
  if (pinned_ids_.empty()) throw std::invalid_argument("Dirichlet problem needs a non-empty pinned set");
  level_ = std::make_shared<LevelForm>(net_, std::move(cell_form), rho);
  is_pinned_.assign(net_->vertex_count, 0);
  for (int x : pinned_ids_) {
    if (x < 0 || x >= net_->vertex_count) throw std::invalid_argument("pinned vertex out of range");
    is_pinned_[x] = 1;
  }
  if (use_expansion) {
    if (auto inner = level_->inner().expand()) {
      edges_per_cell_ = inner->graph->edges().size();
      auto ex = expand_cells(*net_, *inner, level_->cell_scale());
      compiled_ = std::make_shared<CompiledGraph>(ex.graph, pinned_ids_);
    }
  }
}

Solution DirichletSolver::solve(std::span<const double> pinned_values, const SolverConfig& cfg,
                                const Vec* start) const {
  Solution sol;
  const int nv = net_->vertex_count;
  const auto cells = net_->cells();
  const double scale = level_->cell_scale();
  if (compiled_) {
    Vec full_start;
    const Vec* sp = nullptr;
    if (start && cfg.warm_start == WarmStart::given) {
      if (start->size() == compiled_->graph().size()) {
        sp = start;
      } else {
        // Private vertices take their p = 2 profile; net vertices take the given values.
        SolverConfig lin = cfg;
        lin.warm_start = WarmStart::linear;
        lin.max_iter = 1;
        full_start = compiled_->solve(pinned_values, lin).values;
        full_start.head(nv) = *start;
        sp = &full_start;
      }
    }
    auto r = compiled_->solve(pinned_values, cfg, sp);
    sol.values = r.values.head(nv);
    sol.objective = r.energy;
    sol.residual = r.residual;
    sol.iterations = r.iterations;
    sol.converged = r.converged;
    sol.expanded_values = r.values;
    sol.cell_energies.resize(cells);
    for (std::uint64_t c = 0; c < cells; ++c)
      sol.cell_energies[c] =
          compiled_->graph().partial_value(r.values, c * edges_per_cell_, (c + 1) * edges_per_cell_) / scale;
    return sol;
  }
  auto r = minimize_handle(*level_, pinned_ids_, pinned_values, cfg, start);
  sol.values = r.values;
  sol.objective = r.energy;
  sol.residual = r.residual;
  sol.iterations = r.iterations;
  sol.converged = r.converged;
  sol.cell_energies.resize(cells);
  for (std::uint64_t c = 0; c < cells; ++c) sol.cell_energies[c] = level_->inner().value(level_->cell_values(r.values, c));
  return sol;
}

double DirichletSolver::kirchhoff_residual(const Vec& values, int x) const {
  if (x < 0 || x >= net_->vertex_count || is_pinned_[x])
    throw std::invalid_argument("kirchhoff_residual needs a free vertex, got " + std::to_string(x));
  const int m = net_->boundary_count;
  double sum = 0;
  for (std::uint64_t c = 0; c < net_->cells(); ++c) {
    auto ids = net_->cell(c);
    for (int a = 0; a < m; ++a) {
      if (ids[a] != x) continue;
      Vec ind = Vec::Zero(m);
      ind[a] = 1.0;
      sum += level_->cell_scale() * level_->inner().derivative(level_->cell_values(values, c), ind);
    }
  }
  return sum;
}

Solution solve_dirichlet(const DirichletProblem& prob, const SolverConfig& cfg, const Vec* start) {
  DirichletSolver solver(prob.net, prob.cell_form, prob.rho, prob.pinned_ids);
  return solver.solve(prob.pinned_values, cfg, start);
}

double kirchhoff_residual(const DirichletProblem& prob, const Vec& values, int x) {
  DirichletSolver solver(prob.net, prob.cell_form, prob.rho, prob.pinned_ids, false);
  return solver.kirchhoff_residual(values, x);
}

std::pair<double, Vec> trace_energy(const DirichletProblem& prob, std::span<const double> u_B, const SolverConfig& cfg) {
  DirichletSolver solver(prob.net, prob.cell_form, prob.rho, prob.pinned_ids);
  auto sol = solver.solve(u_B, cfg);
  if (!sol.converged) {
    std::ostringstream os;
    os << "trace solve did not converge: residual " << sol.residual << " after " << sol.iterations << " iterations";
    throw SolveFailure(os.str());
  }
  return {sol.objective, sol.values};
}

}  // namespace penergy
