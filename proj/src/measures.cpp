#include "penergy/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "penergy/parallel.hpp"

namespace penergy {

namespace {

double ipow(double base, int e) { return std::pow(base, static_cast<double>(e)); }

void require_level(const HarmonicFunction& h, int n) {
  if (n < 0 || n > h.depth) throw std::out_of_range("measure level exceeds the extension depth");
}

}  // namespace

double CellMeasure::total() const {
  double s = 0;
  for (double x : mass) s += x;
  return s;
}

CellMeasure CellMeasure::coarsen() const {
  if (depth == 0) throw std::logic_error("cannot coarsen a depth-0 measure");
  CellMeasure out{p, depth - 1, symbol_count, {}, provenance};
  const std::size_t N = static_cast<std::size_t>(symbol_count);
  out.mass.assign(mass.size() / N, 0.0);
  for (std::size_t c = 0; c < mass.size(); ++c) out.mass[c / N] += mass[c];
  return out;
}

CellMeasure energy_measure(const HarmonicFunction& h, int n) {
  require_level(h, n);
  CellMeasure mu{h.p, n, h.spec.N(), {}, "energy"};
  const double scale = ipow(h.oracle->rho(), n);
  mu.mass.reserve(h.energies[n].size());
  for (double e : h.energies[n]) mu.mass.push_back(scale * e);
  return mu;
}

CellMeasure derivative_measure(const HarmonicFunction& u, const HarmonicFunction& v, int n, int threads) {
  require_level(u, n);
  require_level(v, n);
  if (u.oracle != v.oracle && u.oracle->rho() != v.oracle->rho())
    throw std::invalid_argument("derivative measure needs both functions on the same oracle");
  CellMeasure mu{u.p, n, u.spec.N(), {}, "derivative"};
  const std::uint64_t cells = cell_count(u.spec.N(), n);
  const double scale = ipow(u.oracle->rho(), n);
  mu.mass.assign(cells, 0.0);
  parallel_for(cells, threads, [&](std::size_t c) {
    mu.mass[c] = scale * u.oracle->derivative(u.tuple(n, c), v.tuple(n, c));
  });
  return mu;
}

double additivity_defect(const HarmonicFunction& h) {
  const double total = h.level_energy(0);
  double worst = 0;
  for (int k = 1; k <= h.depth; ++k) {
    const auto parent = energy_measure(h, k - 1), merged = energy_measure(h, k).coarsen();
    for (std::size_t c = 0; c < parent.mass.size(); ++c)
      worst = std::max(worst, std::abs(merged.mass[c] - parent.mass[c]) / total);
  }
  return worst;
}

double Polynomial::operator()(double t) const {
  double s = 0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) s = s * t + *it;
  return s;
}

double Polynomial::derivative(double t) const {
  double s = 0;
  for (std::size_t k = coefficients.size(); k-- > 1;) s = s * t + static_cast<double>(k) * coefficients[k];
  return s;
}

ChainRuleReport chain_rule_check(const HarmonicFunction& u, const Polynomial& phi, int n, int sub_depth) {
  if (sub_depth < 0) throw std::invalid_argument("sub-depth must be nonnegative");
  if (n + sub_depth > u.depth) throw std::invalid_argument("chain-rule check needs the extension to depth n + sub-depth");
  const int N = u.spec.N(), m = u.spec.m();
  const double p = u.p, rho = u.oracle->rho();
  const std::uint64_t block = cell_count(N, sub_depth);
  ChainRuleReport rep;
  rep.sub_depth = sub_depth;
  for (int lvl = 1; lvl <= n; ++lvl) {
    const int fine = lvl + sub_depth;
    const double scale = ipow(rho, fine);
    const std::uint64_t cells = cell_count(N, lvl);
    std::vector<double> mphi(cells, 0.0), mu(cells, 0.0);
    for (std::uint64_t c = 0; c < cells; ++c) {
      for (std::uint64_t t = 0; t < block; ++t) {
        const std::uint64_t d = c * block + t;
        Vec tup = u.tuple(fine, d);
        for (int a = 0; a < m; ++a) tup[a] = phi(tup[a]);
        mphi[c] += scale * u.oracle->value(tup);
        mu[c] += scale * u.energies[fine][d];
      }
    }
    double total = 0;
    for (double x : mphi) total += x;
    ChainRuleLevel row;
    row.level = lvl;
    row.total_phi = total;
    for (std::uint64_t c = 0; c < cells; ++c) {
      const double x = u.tuples[lvl][c * m];
      const double pred = std::pow(std::abs(phi.derivative(x)), p) * mu[c];
      row.deviation = std::max(row.deviation, std::abs(mphi[c] - pred));
    }
    row.deviation = total > 0 ? row.deviation / total : 0.0;
    rep.levels.push_back(row);
  }
  return rep;
}

double delta_bound(double c2, double rho, double p, int block) {
  const double A = c2 * std::pow(rho, -block / (p - 1.0));
  if (!(A > 0) || A > 1) return std::numeric_limits<double>::quiet_NaN();
  return std::cos(std::asin(std::sqrt(A)) - std::asin(std::sqrt(A / 2)));
}

namespace {

struct Node {
  std::uint64_t index = 0;
  std::size_t parent = 0;
  Vec tu, tv;
  double eu = 0, ev = 0;
};

double osc(const Vec& t) { return t.maxCoeff() - t.minCoeff(); }

}  // namespace

AffinityTable hellinger_experiment(std::shared_ptr<const E0Oracle> oracle_p, std::shared_ptr<const E0Oracle> oracle_q,
                                   const Vec& u0, const Vec& v0, int block, int levels, const SolverConfig& cfg,
                                   const HellingerOptions& opt) {
  if (!oracle_p || !oracle_q) throw std::invalid_argument("Hellinger experiment needs two oracles");
  const StructureSpec& spec = oracle_p->spec();
  if (spec.N() != oracle_q->spec().N() || spec.m() != oracle_q->spec().m())
    throw std::invalid_argument("both oracles must live on the same structure");
  if (block < 1 || levels < 1) throw std::invalid_argument("block length and level count must be positive");
  const int N = spec.N(), m = spec.m(), D = block * levels;
  const double p = oracle_p->exponent(), q = oracle_q->exponent();
  const double rp = oracle_p->rho(), rq = oracle_q->rho();
  const double Eu = oracle_p->value(u0), Ev = oracle_q->value(v0);
  if (!(Eu > 0) || !(Ev > 0)) throw std::invalid_argument("Hellinger experiment needs non-constant boundary data");

  CellExtender ext_p(oracle_p, cfg), ext_q(oracle_q, cfg);
  const VertexNet& net1 = ext_p.net();

  std::vector<std::vector<Node>> tree(D + 1);
  tree[0].push_back({0, 0, u0, v0, Eu, Ev});
  for (int k = 0; k < D; ++k) {
    const auto& parents = tree[k];
    std::vector<std::vector<Node>> kids(parents.size());
    const double sp = ipow(rp, k + 1) / Eu, sq = ipow(rq, k + 1) / Ev;
    parallel_for(parents.size(), opt.threads, [&](std::size_t i) {
      const Node& par = parents[i];
      const auto a = ext_p.extend(par.tu);
      const auto b = ext_q.extend(par.tv);
      for (int s = 0; s < N; ++s) {
        if (a.energies[s] * sp < opt.prune_floor && b.energies[s] * sq < opt.prune_floor) continue;
        auto ids = net1.cell(s);
        Node c;
        c.index = par.index * N + s;
        c.parent = i;
        c.tu.resize(m);
        c.tv.resize(m);
        for (int j = 0; j < m; ++j) {
          c.tu[j] = a.values[ids[j]];
          c.tv[j] = b.values[ids[j]];
        }
        c.eu = a.energies[s];
        c.ev = b.energies[s];
        kids[i].push_back(std::move(c));
      }
    });
    for (auto& ks : kids)
      for (auto& c : ks) tree[k + 1].push_back(std::move(c));
  }

  // Finest-level masses, aggregated upward so that every parent is exactly the sum of its kept children.
  std::vector<std::vector<double>> P(D + 1), Q(D + 1);
  P[D].resize(tree[D].size());
  Q[D].resize(tree[D].size());
  for (std::size_t i = 0; i < tree[D].size(); ++i) {
    P[D][i] = ipow(rp, D) * tree[D][i].eu;
    Q[D][i] = ipow(rq, D) * tree[D][i].ev;
  }
  for (int k = D; k-- > 0;) {
    P[k].assign(tree[k].size(), 0.0);
    Q[k].assign(tree[k].size(), 0.0);
    for (std::size_t i = 0; i < tree[k + 1].size(); ++i) {
      P[k][tree[k + 1][i].parent] += P[k + 1][i];
      Q[k][tree[k + 1][i].parent] += Q[k + 1][i];
    }
  }
  const double zp = P[0][0], zq = Q[0][0];
  for (int k = 0; k <= D; ++k) {
    for (auto& x : P[k]) x /= zp;
    for (auto& x : Q[k]) x /= zq;
  }

  AffinityTable tab;
  tab.p = p;
  tab.q = q;
  tab.block = block;
  tab.levels = levels;
  tab.active_cells = tree[D].size();
  std::vector<double> cum{1.0};  // over nodes at level (n-1)·block
  for (int n = 1; n <= levels; ++n) {
    const int top = (n - 1) * block, bottom = n * block;
    std::vector<double> sum(tree[top].size(), 0.0);
    for (std::size_t i = 0; i < tree[bottom].size(); ++i) {
      std::size_t a = i;
      for (int k = bottom; k > top; --k) a = tree[k][a].parent;
      sum[a] += std::sqrt(P[bottom][i] * Q[bottom][i]);
    }
    AffinityLevel row;
    row.level = n;
    row.min_affinity = std::numeric_limits<double>::infinity();
    std::vector<double> alpha(tree[top].size(), 0.0);
    for (std::size_t a = 0; a < tree[top].size(); ++a) {
      if (!(P[top][a] > 0) || !(Q[top][a] > 0)) continue;
      alpha[a] = sum[a] / std::sqrt(P[top][a] * Q[top][a]);
      ++row.parents;
      row.max_affinity = std::max(row.max_affinity, alpha[a]);
      row.min_affinity = std::min(row.min_affinity, alpha[a]);
      row.max_cum_product = std::max(row.max_cum_product, cum[a] * alpha[a]);
    }
    if (row.parents == 0) row.min_affinity = 0;
    std::vector<double> next(tree[bottom].size());
    for (std::size_t i = 0; i < tree[bottom].size(); ++i) {
      std::size_t a = i;
      for (int k = bottom; k > top; --k) a = tree[k][a].parent;
      next[i] = cum[a] * alpha[a];
    }
    cum = std::move(next);
    tab.rows.push_back(row);
  }

  // C_{p,2} along the s^n chains of the extreme vertices of u0, when those cells were kept.
  tab.c2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    if (u0[i] != u0.maxCoeff() && u0[i] != u0.minCoeff()) continue;
    const int s = spec.boundary_fixed_symbol[i];
    for (int k = 0; k <= D; ++k) {
      const std::uint64_t want = repeated_word_index(s, k, N);
      for (const auto& nd : tree[k])
        if (nd.index == want) {
          if (osc(nd.tu) > 0) tab.c2 = std::min(tab.c2, nd.eu * std::pow(rp, k * p / (p - 1.0)) / Eu);
          break;
        }
    }
  }
  tab.bound_delta = delta_bound(tab.c2, rp, p, block);
  return tab;
}

std::vector<AtomRow> atom_check(const HarmonicFunction& h, int x) {
  const VertexNet& net = *h.net;
  if (x < 0 || x >= net.vertex_count) throw std::out_of_range("vertex id out of range");
  const int N = h.spec.N();
  std::vector<std::uint64_t> finest;
  for (std::uint64_t c = 0; c < net.cells(); ++c) {
    auto ids = net.cell(c);
    if (std::find(ids.begin(), ids.end(), x) != ids.end()) finest.push_back(c);
  }
  std::vector<AtomRow> rows;
  for (int n = 0; n <= h.depth; ++n) {
    const std::uint64_t div = cell_count(N, h.depth - n);
    AtomRow row;
    row.level = n;
    for (auto c : finest) {
      const std::uint64_t a = c / div;
      if (std::find(row.cells.begin(), row.cells.end(), a) == row.cells.end()) row.cells.push_back(a);
    }
    std::sort(row.cells.begin(), row.cells.end());
    for (auto a : row.cells) row.mass += ipow(h.oracle->rho(), n) * h.energies[n][a];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace penergy
