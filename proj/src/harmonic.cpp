#include "penergy/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "penergy/parallel.hpp"

namespace penergy {

namespace {

std::vector<double> to_std(const Vec& u) { return {u.data(), u.data() + u.size()}; }

double oscillation(const Vec& t) { return t.size() ? t.maxCoeff() - t.minCoeff() : 0.0; }

std::shared_ptr<const FormHandle> as_form(const std::shared_ptr<const E0Oracle>& o) { return o; }

}  // namespace

CellExtender::CellExtender(std::shared_ptr<const E0Oracle> oracle, SolverConfig cfg)
    : oracle_(std::move(oracle)), cfg_(cfg) {
  if (!oracle_) throw std::invalid_argument("cell extender needs an oracle");
  cfg_.validate();
  net_ = std::make_shared<const VertexNet>(build_net(oracle_->spec(), 1));
  solver_ = std::make_shared<const DirichletSolver>(net_, as_form(oracle_), oracle_->rho(), net_->boundary_ids);
}

CellExtender::Result CellExtender::extend(const Vec& tuple) const {
  const int m = net_->boundary_count;
  if (tuple.size() != m) throw std::invalid_argument("cell tuple has the wrong length");
  Result r;
  const double lo = tuple.minCoeff(), osc = oscillation(tuple);
  if (osc == 0.0) {
    r.values = Vec::Constant(net_->vertex_count, lo);
    r.energies.assign(net_->cells(), 0.0);
    return r;
  }
  const Vec t = (tuple.array() - lo) / osc;
  auto sol = solver_->solve(to_std(t), cfg_);
  if (!sol.converged) {
    std::ostringstream os;
    os << "cell solve did not converge (residual " << sol.residual << ", " << sol.iterations << " iterations)";
    throw SolveFailure(os.str());
  }
  r.values = (sol.values.array() * osc + lo).matrix();
  // The values the boundary was pinned to are restored exactly.
  for (int a = 0; a < m; ++a) r.values[net_->boundary_ids[a]] = tuple[a];
  const double escale = std::pow(osc, oracle_->exponent());
  r.energies.resize(sol.cell_energies.size());
  for (std::size_t c = 0; c < r.energies.size(); ++c) r.energies[c] = sol.cell_energies[c] * escale;
  return r;
}

Vec HarmonicFunction::tuple(int level, std::uint64_t cell) const {
  if (level < 0 || level > depth) throw std::out_of_range("level exceeds the extension depth");
  const int m = spec.m();
  const auto& t = tuples[level];
  if ((cell + 1) * m > t.size()) throw std::out_of_range("cell index out of range");
  Vec out(m);
  for (int a = 0; a < m; ++a) out[a] = t[cell * m + a];
  return out;
}

Vec HarmonicFunction::values_at(int level) const {
  if (level < 0 || level > depth) throw std::out_of_range("level exceeds the extension depth");
  const VertexNet lnet = level == depth ? *net : build_net(spec, level);
  const int m = spec.m();
  Vec v(lnet.vertex_count);
  const auto& t = tuples[level];
  for (std::uint64_t c = 0; c < lnet.cells(); ++c) {
    auto ids = lnet.cell(c);
    for (int a = 0; a < m; ++a) v[ids[a]] = t[c * m + a];
  }
  return v;
}

double HarmonicFunction::level_energy(int level) const {
  if (level < 0 || level > depth) throw std::out_of_range("level exceeds the extension depth");
  double s = 0;
  for (double e : energies[level]) s += e;
  return std::pow(oracle->rho(), level) * s;
}

HarmonicFunction harmonic_extend(std::shared_ptr<const E0Oracle> oracle, const Vec& u0, int n, const SolverConfig& cfg,
                                 int threads) {
  if (!oracle) throw std::invalid_argument("harmonic extension needs an oracle");
  if (n < 0) throw std::invalid_argument("depth must be nonnegative");
  const StructureSpec& spec = oracle->spec();
  const int m = spec.m(), N = spec.N();
  if (u0.size() != m) throw std::invalid_argument("boundary data must have one value per V_0 vertex");
  HarmonicFunction h;
  h.spec = spec;
  h.p = oracle->exponent();
  h.depth = n;
  h.oracle = oracle;
  h.tuples.resize(n + 1);
  h.energies.resize(n + 1);
  h.tuples[0] = to_std(u0);
  h.energies[0] = {oracle->value(u0)};

  CellExtender ext(oracle, cfg);
  const VertexNet& net1 = ext.net();
  for (int k = 0; k < n; ++k) {
    const std::uint64_t parents = cell_count(N, k);
    auto& next = h.tuples[k + 1];
    auto& next_e = h.energies[k + 1];
    next.assign(parents * N * m, 0.0);
    next_e.assign(parents * N, 0.0);
    parallel_for(parents, threads, [&](std::size_t c) {
      CellExtender::Result r;
      try {
        r = ext.extend(h.tuple(k, c));
      } catch (const SolveFailure& e) {
        throw SolveFailure(std::string(e.what()) + " in cell '" + word_string(word_from_index(c, k, N)) + "'");
      }
      for (int s = 0; s < N; ++s) {
        auto ids = net1.cell(s);
        const std::uint64_t child = c * N + s;
        for (int a = 0; a < m; ++a) next[child * m + a] = r.values[ids[a]];
        next_e[child] = r.energies[s];
      }
    });
  }
  h.net = std::make_shared<const VertexNet>(build_net(spec, n));
  h.values = h.values_at(n);
  return h;
}

Vec global_harmonic(const E0Oracle& oracle, const Vec& u0, int n, const SolverConfig& cfg) {
  auto net = std::make_shared<const VertexNet>(build_net(oracle.spec(), n));
  std::shared_ptr<const FormHandle> cell(std::shared_ptr<const FormHandle>{}, &oracle);
  DirichletSolver solver(net, cell, oracle.rho(), net->boundary_ids);
  auto sol = solver.solve(to_std(u0), cfg);
  if (!sol.converged) throw SolveFailure("global harmonic solve did not converge");
  return sol.values;
}

std::uint64_t repeated_word_index(int s, int n, int N) {
  std::uint64_t idx = 0;
  for (int k = 0; k < n; ++k) idx = idx * N + s;
  return idx;
}

PfResult pf_experiment(std::shared_ptr<const E0Oracle> oracle, const Vec& u0, int i, int n_max,
                       const SolverConfig& cfg) {
  const StructureSpec& spec = oracle->spec();
  const int m = spec.m();
  if (i < 0 || i >= m) throw std::invalid_argument("boundary vertex out of range");
  if (u0.size() != m) throw std::invalid_argument("boundary data must have one value per V_0 vertex");
  const double p = oracle->exponent();
  PfResult res;
  res.i = i;
  res.symbol = spec.boundary_fixed_symbol[i];
  res.h1 = Vec::Ones(m);
  res.h1[i] = 0.0;
  const Vec gh = oracle->gradient(u0), g1 = oracle->gradient(res.h1);
  res.derivative_h = gh[i];
  res.derivative_h1 = g1[i];
  if (!(std::abs(g1[i]) > cfg.tol)) throw std::runtime_error("degenerate eigenfunction derivative at q_i");
  const double sgn = gh[i] > 0 ? 1.0 : (gh[i] < 0 ? -1.0 : 0.0);
  res.c = -sgn * std::pow(std::abs(gh[i] / g1[i]), 1.0 / (p - 1.0));
  res.dominated = (u0.array() >= u0[i]).all();

  CellExtender ext(oracle, cfg);
  const double growth = std::pow(oracle->rho(), 1.0 / (p - 1.0));
  Vec t = u0;
  const double base = u0[i];
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0) {
      auto r = ext.extend(t);
      auto ids = ext.net().cell(static_cast<std::uint64_t>(res.symbol));
      for (int a = 0; a < m; ++a) t[a] = r.values[ids[a]];
    }
    PfRow row;
    row.n = n;
    row.rescaled = std::pow(growth, n) * (t.array() - base).matrix();
    row.distance = (row.rescaled - res.c * res.h1).cwiseAbs().maxCoeff();
    res.rows.push_back(std::move(row));
  }
  res.monotone_from = n_max + 1;
  for (int n = n_max; n >= 1 && res.rows[n].distance <= res.rows[n - 1].distance; --n) res.monotone_from = n - 1;
  if (n_max == 0) res.monotone_from = 0;
  return res;
}

ComparisonReport comparison_suite(std::shared_ptr<const E0Oracle> oracle, int n, int samples, std::uint64_t seed,
                                  const SolverConfig& cfg, int threads) {
  const int m = oracle->size();
  ComparisonReport rep;
  rep.pairs = samples;
  rep.depth = n;
  rep.worst_weak = std::numeric_limits<double>::infinity();
  rep.min_strong_margin = std::numeric_limits<double>::infinity();
  const VertexNet net = build_net(oracle->spec(), n);
  std::vector<char> interior(net.vertex_count, 1);
  for (int b : net.boundary_ids) interior[b] = 0;

  struct PairResult {
    bool degenerate = false;
    double weak = 0, strong = 0;
    int weak_vertex = -1, strong_vertex = -1;
  };
  std::vector<PairResult> results(samples);
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t s) {
    const Vec u0 = sample_direction(m, seed, 3 * s);
    const Vec a = sample_direction(m, seed, 3 * s + 1), mask = sample_direction(m, seed, 3 * s + 2);
    Vec d = a.cwiseAbs();
    // Every tenth pair is the identical control; otherwise some coordinates stay equal.
    for (int k = 0; k < m; ++k)
      if (s % 10 == 0 || mask[k] < -0.3) d[k] = 0.0;
    const Vec v0 = u0 + d;
    auto hu = harmonic_extend(oracle, u0, n, cfg);
    auto hv = harmonic_extend(oracle, v0, n, cfg);
    const Vec diff = hv.values - hu.values;
    PairResult& pr = results[s];
    pr.degenerate = d.maxCoeff() == 0.0;
    pr.weak = std::numeric_limits<double>::infinity();
    pr.strong = std::numeric_limits<double>::infinity();
    for (int x = 0; x < net.vertex_count; ++x) {
      if (diff[x] < pr.weak) {
        pr.weak = diff[x];
        pr.weak_vertex = x;
      }
      if (interior[x] && diff[x] < pr.strong) {
        pr.strong = diff[x];
        pr.strong_vertex = x;
      }
    }
  });
  // Values are accurate to about tol relative to the unit oscillation of the sampled data.
  const double slack = 10.0 * cfg.tol;
  for (int s = 0; s < samples; ++s) {
    const auto& pr = results[s];
    rep.worst_weak = std::min(rep.worst_weak, pr.weak);
    if (pr.weak < -slack) {
      ++rep.weak_violations;
      if (rep.witnesses.size() < 10) rep.witnesses.push_back({static_cast<std::uint64_t>(s), pr.weak_vertex, pr.weak, "weak"});
    }
    if (pr.degenerate) continue;
    ++rep.strong_pairs;
    rep.min_strong_margin = std::min(rep.min_strong_margin, pr.strong);
    if (!(pr.strong > cfg.tol)) {
      ++rep.strong_failures;
      if (rep.witnesses.size() < 10)
        rep.witnesses.push_back({static_cast<std::uint64_t>(s), pr.strong_vertex, pr.strong, "strong"});
    }
  }
  if (samples == 0) rep.worst_weak = 0;
  if (rep.strong_pairs == 0) rep.min_strong_margin = 0;
  return rep;
}

double constant_c3(const E0Oracle& oracle, const SolverConfig& cfg) {
  const StructureSpec& spec = oracle.spec();
  if (spec.m() != 3) throw std::invalid_argument("C_{p,3} is defined for three boundary vertices");
  const double p = oracle.exponent();
  std::shared_ptr<const E0Oracle> alias(std::shared_ptr<const E0Oracle>{}, &oracle);
  CellExtender ext(alias, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    const int s = spec.boundary_fixed_symbol[i];
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      Vec e = Vec::Zero(3);
      e[j] = 1.0;
      auto r = ext.extend(e);
      auto ids = ext.net().cell(static_cast<std::uint64_t>(s));
      for (int k = 0; k < 3; ++k)
        if (k != i) best = std::min(best, r.values[ids[k]]);
    }
  }
  return std::pow(oracle.rho(), 1.0 / (p - 1.0)) * best;
}

OscillationProfile oscillation_profile(const HarmonicFunction& h, const SolverConfig& cfg) {
  const double p = h.p, rho = h.oracle->rho();
  const int m = h.spec.m(), N = h.spec.N();
  const Vec u0 = h.boundary();
  const double osc0 = oscillation(u0), E0 = h.energies[0][0];
  if (!(osc0 > 0) || !(E0 > 0)) throw std::invalid_argument("oscillation profile needs a non-constant function");
  OscillationProfile prof;
  for (int k = 0; k <= h.depth; ++k) {
    OscillationLevel lv;
    lv.level = k;
    const double os = std::pow(rho, k / (p - 1.0)), es = std::pow(rho, k * p / (p - 1.0));
    for (std::uint64_t c = 0; c < cell_count(N, k); ++c) {
      lv.max_osc_ratio = std::max(lv.max_osc_ratio, oscillation(h.tuple(k, c)) * os / osc0);
      lv.max_energy_ratio = std::max(lv.max_energy_ratio, h.energies[k][c] * es / E0);
    }
    prof.c1 = std::max(prof.c1, lv.max_energy_ratio);
    prof.levels.push_back(lv);
  }
  prof.c2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    if (u0[i] != u0.maxCoeff() && u0[i] != u0.minCoeff()) continue;
    const int s = h.spec.boundary_fixed_symbol[i];
    std::vector<double> ratios;
    for (int n = 0; n <= h.depth; ++n) {
      const std::uint64_t c = repeated_word_index(s, n, N);
      prof.c2 = std::min(prof.c2, h.energies[n][c] * std::pow(rho, n * p / (p - 1.0)) / E0);
      if (n > 0) {
        const double prev = oscillation(h.tuple(n - 1, repeated_word_index(s, n - 1, N)));
        ratios.push_back(prev > 0 ? oscillation(h.tuple(n, c)) / prev : 0.0);
      }
    }
    prof.chain_osc_ratios.push_back(std::move(ratios));
  }
  prof.c3 = m == 3 ? constant_c3(*h.oracle, cfg) : std::numeric_limits<double>::quiet_NaN();
  return prof;
}

HoelderReport hoelder_check(std::shared_ptr<const E0Oracle> oracle, int n, int samples, std::uint64_t seed,
                            const SolverConfig& cfg) {
  if (n < 1) throw std::invalid_argument("the Hoelder check needs depth >= 1");
  const StructureSpec& spec = oracle->spec();
  const int m = spec.m();
  const double p = oracle->exponent(), rho = oracle->rho();
  HoelderReport rep;
  auto net = std::make_shared<const VertexNet>(build_net(spec, n));
  LevelForm level(net, as_form(oracle), rho);
  const auto ex = level.expand();
  if (!ex) throw std::logic_error("oracle level form has no graph realization");
  DirichletSolver solver(net, as_form(oracle), rho, net->boundary_ids);

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x686fu};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> pick_interior(0, static_cast<int>(net->interior_ids.size()) - 1);
  std::uniform_int_distribution<int> pick_any(0, net->vertex_count - 1);

  auto resistance_to = [&](int x, const std::vector<int>& others) {
    std::vector<int> pinned{ex->embed[x]};
    std::vector<double> vals{1.0};
    for (int y : others) {
      pinned.push_back(ex->embed[y]);
      vals.push_back(0.0);
    }
    CompiledGraph cg(ex->graph, pinned);
    auto r = cg.solve(vals, cfg);
    if (!r.converged) throw SolveFailure("resistance solve did not converge");
    return 1.0 / r.energy;
  };

  const double slack = 10.0 * cfg.tol;
  for (int s = 0; s < samples; ++s) {
    const Vec u0 = sample_direction(m, seed, 1000003ull + s);
    auto sol = solver.solve(to_std(u0), cfg);
    if (!sol.converged) throw SolveFailure("harmonic solve did not converge");
    const int x = net->interior_ids[pick_interior(rng)];
    int y = pick_any(rng);
    if (y == x) y = (y + 1) % net->vertex_count;
    const double Rxy = resistance_to(x, {y});
    const double RxB = resistance_to(x, net->boundary_ids);
    const double bound = std::pow(Rxy / RxB, 1.0 / (p - 1.0)) * oscillation(u0);
    const double lhs = std::abs(sol.values[x] - sol.values[y]);
    ++rep.pairs;
    rep.worst_ratio = std::max(rep.worst_ratio, bound > 0 ? lhs / bound : 0.0);
    if (lhs > bound + slack) ++rep.violations;
  }

  // R(F_w(q_a), F_w(q_b)) on the level-|w| form against ρ^{-|w|} R(q_a, q_b).
  std::uniform_int_distribution<int> pick_len(1, n), pick_sym(0, spec.N() - 1), pick_b(0, m - 1);
  std::vector<std::shared_ptr<const VertexNet>> nets(n + 1);
  std::vector<std::optional<GraphExpansion>> exps(n + 1);
  for (int k = 1; k <= n; ++k) {
    nets[k] = std::make_shared<const VertexNet>(build_net(spec, k));
    exps[k] = LevelForm(nets[k], as_form(oracle), rho).expand();
  }
  for (int s = 0; s < samples; ++s) {
    const int k = pick_len(rng);
    Word w(k);
    for (auto& c : w) c = pick_sym(rng);
    int a = pick_b(rng), b = pick_b(rng);
    if (a == b) b = (a + 1) % m;
    const auto ids = cell_vertex_ids(*nets[k], w);
    CompiledGraph cg(exps[k]->graph, {exps[k]->embed[ids[a]], exps[k]->embed[ids[b]]});
    auto r = cg.solve(std::vector<double>{0.0, 1.0}, cfg);
    if (!r.converged) throw SolveFailure("resistance solve did not converge");
    const double Rw = 1.0 / r.energy;
    const double R0 = effective_resistance(*oracle, a, b, cfg);
    const double ratio = Rw * std::pow(rho, k) / R0;
    ++rep.contraction_samples;
    rep.worst_contraction = std::max(rep.worst_contraction, ratio);
    if (Rw > std::pow(rho, -k) * R0 * (1.0 + slack)) ++rep.contraction_violations;
  }
  return rep;
}

}  // namespace penergy
