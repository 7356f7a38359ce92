#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "penergy/harmonic.hpp"

namespace penergy {

/// Masses of the level-n cells K_w in word order.
struct CellMeasure {
  double p = 0;
  int depth = 0;
  int symbol_count = 0;
  std::vector<double> mass;
  std::string provenance;

  double total() const;
  /// The depth-(n-1) measure obtained by summing children.
  CellMeasure coarsen() const;
};

/// μ⟨h⟩(K_w) = ρ^n oracle(h∘F_w|V_0).
CellMeasure energy_measure(const HarmonicFunction& h, int n);

/// μ⟨u;v⟩(K_w) = ρ^n oracle'(u∘F_w; v∘F_w). Masses are signed.
CellMeasure derivative_measure(const HarmonicFunction& u, const HarmonicFunction& v, int n, int threads = 1);

/// Largest relative coarsening defect over levels 1..depth: |Σ children − parent| / total.
double additivity_defect(const HarmonicFunction& h);

/// Polynomial Φ(t) = Σ c_k t^k.
struct Polynomial {
  std::vector<double> coefficients;
  double operator()(double t) const;
  double derivative(double t) const;
};

struct ChainRuleLevel {
  int level = 0;
  double deviation = 0;  // max_w |μ⟨Φ(u)⟩(K_w) − |Φ'(u(x_w))|^p μ⟨u⟩(K_w)| / μ⟨Φ(u)⟩(K)
  double total_phi = 0;  // μ⟨Φ(u)⟩(K) at this resolution
};

struct ChainRuleReport {
  int sub_depth = 0;
  std::vector<ChainRuleLevel> levels;  // levels 1..n
};

/// Φ(u) is not harmonic in a cell, so its cell energies use the discrete energy of Φ(u) on the
/// cell's V_s: μ⟨Φ(u)⟩(K_w) ≈ ρ^{|w|+s} Σ_{|τ|=s} oracle(Φ(u)∘F_{wτ}). μ⟨u⟩ uses the same resolution.
/// `u` must be extended to depth at least n + sub_depth.
ChainRuleReport chain_rule_check(const HarmonicFunction& u, const Polynomial& phi, int n, int sub_depth = 3);

struct AffinityLevel {
  int level = 0;
  double max_affinity = 0;
  double min_affinity = 0;
  double max_cum_product = 0;
  std::size_t parents = 0;
};

struct AffinityTable {
  double p = 0, q = 0;
  int block = 0;
  int levels = 0;
  std::vector<AffinityLevel> rows;
  double c2 = 0;           // empirical C_{p,2} along extreme-vertex chains of u
  double bound_delta = 0;  // δ_{p,N}, NaN when A > 1
  std::size_t active_cells = 0;  // cells kept at the finest level
};

struct HellingerOptions {
  /// Cells whose P and P̃ masses are both below floor × total are not refined.
  double prune_floor = 1e-14;
  int threads = 1;
};

/// P = μ_p⟨u⟩ / total and P̃ = μ_q⟨v⟩ / total to depth N·L; per level the conditional affinities
/// Σ_{|τ|=N} √(P(wτ)/P(w)) √(P̃(wτ)/P̃(w)) over parents w of length (n-1)N.
AffinityTable hellinger_experiment(std::shared_ptr<const E0Oracle> oracle_p, std::shared_ptr<const E0Oracle> oracle_q,
                                   const Vec& u0, const Vec& v0, int block, int levels, const SolverConfig& cfg,
                                   const HellingerOptions& opt = {});

/// δ_{p,N} = cos(arcsin √A − arcsin √(A/2)), A = c2 ρ^{-N/(p-1)}; NaN when A ∉ (0,1].
double delta_bound(double c2, double rho, double p, int block);

struct AtomRow {
  int level = 0;
  double mass = 0;          // total mass of the cells containing x
  std::vector<std::uint64_t> cells;
};

/// For n = 0..h.depth, the total mass of the level-n cells containing the vertex x of V_depth.
std::vector<AtomRow> atom_check(const HarmonicFunction& h, int x);

}  // namespace penergy
