#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "penergy/forms.hpp"

namespace penergy {

struct GraphSolveResult {
  Vec values;
  double energy = 0;
  double residual = 0;  // max Kirchhoff residual over free vertices
  int iterations = 0;
  bool converged = false;
  /// Smoothing at which residuals were measured (0 when exact).
  double smoothing = 0;
};

/// A graph form with a fixed pinned set, prepared for repeated Dirichlet solves:
/// fill-reducing order, Hessian pattern and the p = 2 factorization for warm starts.
class CompiledGraph {
 public:
  CompiledGraph(std::shared_ptr<const GraphPForm> graph, std::vector<int> pinned);
  ~CompiledGraph();

  /// Damped Newton on the smoothed energy with ε-continuation.
  GraphSolveResult solve(std::span<const double> pinned_values, const SolverConfig& cfg,
                         const Vec* start = nullptr) const;
  /// (1/p) dE/du at each pinned vertex, in pinned order, under the energy smoothed at `eps`.
  Vec pinned_flux(const Vec& values, double eps = 0.0) const;
  double max_free_residual(const Vec& values, double eps = 0.0) const;
  /// Continuation floor for data of oscillation `osc` and magnitude `scale` (p < 2 only): the
  /// smallest smoothing at which rounding of the values keeps fluxes a decade below `target`.
  double smoothing_floor(double osc, double scale, double target) const;

  const GraphPForm& graph() const { return *graph_; }
  const std::vector<int>& pinned() const { return pinned_; }
  int free_count() const { return free_count_; }

 private:
  struct Impl;
  std::shared_ptr<const GraphPForm> graph_;
  std::vector<int> pinned_;
  int free_count_ = 0;
  std::unique_ptr<Impl> impl_;
};

/// BFGS on an arbitrary handle with pinned coordinates; used when no graph realization exists.
GraphSolveResult minimize_handle(const FormHandle& h, const std::vector<int>& pinned,
                                 std::span<const double> pinned_values, const SolverConfig& cfg,
                                 const Vec* start = nullptr);

struct DirichletProblem {
  std::shared_ptr<const VertexNet> net;
  std::shared_ptr<const FormHandle> cell_form;
  double rho = 1.0;
  std::vector<int> pinned_ids;
  std::vector<double> pinned_values;
};

struct Solution {
  Vec values;  // on the net
  double objective = 0;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  /// cell_form value of each level-n cell tuple at the minimizer (without the ρ^n factor).
  std::vector<double> cell_energies;
  /// Values on the expanded graph when the solve ran there; a valid warm start.
  Vec expanded_values;
};

/// A Dirichlet problem without its pinned values, reusable across many boundary data.
class DirichletSolver {
 public:
  /// With `use_expansion`, cell forms that are traces of graph forms are solved on the expanded graph,
  /// which is the same minimization by trace compatibility.
  DirichletSolver(std::shared_ptr<const VertexNet> net, std::shared_ptr<const FormHandle> cell_form, double rho,
                  std::vector<int> pinned_ids, bool use_expansion = true);

  Solution solve(std::span<const double> pinned_values, const SolverConfig& cfg, const Vec* start = nullptr) const;
  double kirchhoff_residual(const Vec& values, int x) const;
  bool expanded() const { return compiled_ != nullptr; }
  const LevelForm& objective() const { return *level_; }

 private:
  std::shared_ptr<const VertexNet> net_;
  std::shared_ptr<const LevelForm> level_;
  std::vector<int> pinned_ids_;
  std::vector<char> is_pinned_;
  std::shared_ptr<const CompiledGraph> compiled_;
  std::size_t edges_per_cell_ = 0;
};

Solution solve_dirichlet(const DirichletProblem& prob, const SolverConfig& cfg, const Vec* start = nullptr);

/// Σ over cells containing x of ρ^n E^(0)(u∘F_w; 1_{F_w^{-1}(x)}).
double kirchhoff_residual(const DirichletProblem& prob, const Vec& values, int x);

/// Trace onto the pinned set: (minimized energy, minimizer).
std::pair<double, Vec> trace_energy(const DirichletProblem& prob, std::span<const double> u_B, const SolverConfig& cfg);

}  // namespace penergy
