#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "penergy/forms.hpp"
#include "penergy/renorm.hpp"
#include "penergy/solver.hpp"
#include "penergy/structure.hpp"

namespace penergy {

/// The one-level Dirichlet problem with oracle cells, compiled once and reused for every cell.
class CellExtender {
 public:
  CellExtender(std::shared_ptr<const E0Oracle> oracle, SolverConfig cfg);

  struct Result {
    Vec values;                  // on V_1
    std::vector<double> energies;  // oracle value of each child tuple
  };
  /// Harmonic extension of boundary data on V_0 to V_1. Data are shifted and scaled to unit
  /// oscillation for the solve, so the relative accuracy does not degrade in small cells.
  Result extend(const Vec& tuple) const;

  const VertexNet& net() const { return *net_; }
  const E0Oracle& oracle() const { return *oracle_; }
  const SolverConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<const E0Oracle> oracle_;
  SolverConfig cfg_;
  std::shared_ptr<const VertexNet> net_;
  std::shared_ptr<const DirichletSolver> solver_;
};

struct HarmonicFunction {
  StructureSpec spec;
  double p = 0;
  int depth = 0;
  std::shared_ptr<const E0Oracle> oracle;
  std::shared_ptr<const VertexNet> net;  // V_depth
  Vec values;                             // on V_depth
  /// tuples[k][c * m + a] = h(F_w(q_a)) for the cell w of index c at level k.
  std::vector<std::vector<double>> tuples;
  /// energies[k][c] = oracle(h∘F_w|V_0), without the ρ^k factor.
  std::vector<std::vector<double>> energies;

  Vec tuple(int level, std::uint64_t cell) const;
  Vec boundary() const { return tuple(0, 0); }
  /// Values on V_level, assembled from the level's cell tuples.
  Vec values_at(int level) const;
  /// Σ_{|w|=level} ρ^level oracle(h∘F_w).
  double level_energy(int level) const;
};

/// Recursive extension: one one-level solve per cell, level by level, cells in word order.
HarmonicFunction harmonic_extend(std::shared_ptr<const E0Oracle> oracle, const Vec& u0, int n, const SolverConfig& cfg,
                                 int threads = 1);

/// A single global solve on V_n with oracle cells; the cross-check for the recursion.
Vec global_harmonic(const E0Oracle& oracle, const Vec& u0, int n, const SolverConfig& cfg);

/// Cell index of the word s^n.
std::uint64_t repeated_word_index(int s, int n, int N);

struct PfRow {
  int n = 0;
  Vec rescaled;  // ρ^{n/(p-1)} (h∘F_{s^n}|V_0 − h(q_i))
  double distance = 0;  // sup |rescaled − c h^(1)|
};

struct PfResult {
  int i = 0;             // boundary vertex q_i (0-based), fixed by symbol s
  int symbol = 0;
  double c = 0;          // c_{p,i}(h)
  double derivative_h = 0;   // oracle derivative of h at 1_{q_i}
  double derivative_h1 = 0;  // same for h^(1)
  bool dominated = false;    // h ≥ h(q_i) on V_0
  Vec h1;
  std::vector<PfRow> rows;
  /// n from which the distances never increase (n_max + 1 if they increase at the end).
  int monotone_from = 0;
};

PfResult pf_experiment(std::shared_ptr<const E0Oracle> oracle, const Vec& u0, int i, int n_max,
                       const SolverConfig& cfg);

struct ComparisonWitness {
  std::uint64_t pair = 0;
  int vertex = 0;
  double margin = 0;
  std::string kind;
};

struct ComparisonReport {
  int pairs = 0;
  int depth = 0;
  int weak_violations = 0;
  double worst_weak = 0;        // min over pairs and vertices of (v − u), scaled
  int strong_pairs = 0;         // non-degenerate pairs
  int strong_failures = 0;
  double min_strong_margin = 0; // min over non-degenerate pairs of the interior margin
  std::vector<ComparisonWitness> witnesses;  // first few violations
  bool passed() const { return weak_violations == 0 && strong_failures == 0; }
};

/// Sampled ordered boundary pairs u0 ≤ v0: weak comparison on all of V_n, strict interior margin
/// for non-degenerate pairs.
ComparisonReport comparison_suite(std::shared_ptr<const E0Oracle> oracle, int n, int samples, std::uint64_t seed,
                                  const SolverConfig& cfg, int threads = 1);

struct OscillationLevel {
  int level = 0;
  double max_osc_ratio = 0;     // max_w osc(h∘F_w) ρ^{k/(p-1)} / osc(h)
  double max_energy_ratio = 0;  // max_w E(h∘F_w) ρ^{kp/(p-1)} / E(h)
};

struct OscillationProfile {
  std::vector<OscillationLevel> levels;
  double c1 = 0;  // empirical C_{p,1}: max energy ratio over levels
  double c2 = 0;  // empirical C_{p,2}: min over n of E(h∘F_{s^n}) ρ^{np/(p-1)} / E(h) along extreme vertices
  double c3 = 0;  // ρ^{1/(p-1)} min harext[1_{q_j}]∘F_i over V_0∖{q_i} (three boundary vertices only)
  /// Per level, osc(h∘F_{s^k}) / osc(h∘F_{s^{k-1}}) along the chain of each extreme vertex.
  std::vector<std::vector<double>> chain_osc_ratios;
};

OscillationProfile oscillation_profile(const HarmonicFunction& h, const SolverConfig& cfg);

/// C_{p,3} of the oracle (three boundary vertices only).
double constant_c3(const E0Oracle& oracle, const SolverConfig& cfg);

struct HoelderReport {
  int pairs = 0;
  int violations = 0;
  double worst_ratio = 0;  // max of |h(x)−h(y)| / bound
  int contraction_samples = 0;
  int contraction_violations = 0;
  double worst_contraction = 0;  // max of R(F_w x, F_w y) ρ^{|w|} / R(x,y)
  bool passed() const { return violations == 0 && contraction_violations == 0; }
};

HoelderReport hoelder_check(std::shared_ptr<const E0Oracle> oracle, int n, int samples, std::uint64_t seed,
                            const SolverConfig& cfg);

}  // namespace penergy
