#pragma once

#include <memory>
#include <string>
#include <vector>

#include "penergy/forms.hpp"
#include "penergy/solver.hpp"
#include "penergy/structure.hpp"

namespace penergy {

/// Level-n graph of the complete base form (unit weights), i.e. R_{1,n} of K_m, with the V_0 embedding.
GraphExpansion base_level_graph(const StructureSpec& spec, double p, int n, double scale = 1.0);

/// S_n(u): trace of the base graph form through V_n with ρ = 1.
double deep_trace(const StructureSpec& spec, double p, int n, const Vec& u, const SolverConfig& cfg);

/// Standard test directions, constants projected out: (0,1,...,1), (0,-1,1,0,...), (0,1,2,...).
std::vector<Vec> rho_directions(int m);

struct RhoEstimate {
  double p = 0;
  int depth = 0;                              // deepest trace level
  std::vector<Vec> directions;
  std::vector<std::vector<double>> traces;    // [direction][n] S_n, n = 0..depth
  std::vector<std::vector<double>> ratios;    // [direction][n] S_n / S_{n+1}, n = 0..depth-1
  std::vector<double> extrapolated;           // per direction
  std::vector<bool> aitken_used;
  double rho = 0;
  /// Spread of the final per-direction values, or the size of the extrapolation step if larger.
  double error = 0;
  /// |r_n - r_{n-1}| non-increasing over the last three levels (or settled at rounding level).
  bool cauchy = false;
};

RhoEstimate estimate_rho(const StructureSpec& spec, double p, int n_max, const SolverConfig& cfg, int threads = 1);

/// The deep-trace realization of E^(0): value(u) = ρ^n S_n(u), a trace form on V_0.
/// Its ρ is the reference-direction ratio S_n(1_{q_1}) / S_{n+1}(1_{q_1}), which makes the
/// fixed-point equation exact along the reference direction.
class E0Oracle final : public TraceForm {
 public:
  E0Oracle(StructureSpec spec, double p, int depth, double rho, double rho_estimate, double normalization,
           const SolverConfig& cfg);

  const StructureSpec& spec() const { return spec_; }
  double p() const { return p_; }
  int depth() const { return depth_; }
  double rho() const { return rho_; }
  /// ρ̂ from estimate_rho, if one was supplied (NaN otherwise).
  double rho_estimate() const { return rho_estimate_; }
  double normalization() const { return normalization_; }
  /// Fixed-point residual measured at build time (NaN if not measured).
  double residual() const { return residual_; }
  void set_residual(double r) { residual_ = r; }
  /// Accuracy of identities that hold exactly only for a true fixed point.
  double tolerance() const;
  std::shared_ptr<const E0Oracle> rescaled(double c) const;

 private:
  StructureSpec spec_;
  double p_;
  int depth_;
  double rho_;
  double rho_estimate_;
  double normalization_;
  double residual_;
};

std::shared_ptr<const E0Oracle> build_e0_oracle(const StructureSpec& spec, double p, int depth,
                                                const SolverConfig& cfg, const RhoEstimate* estimate = nullptr,
                                                int residual_samples = 8);

/// `levels` steps of renormalization at once: the V_0 trace of Σ_{|w|=levels} ρ^levels form(v∘F_w).
std::shared_ptr<const TraceForm> renormalized_trace(std::shared_ptr<const FormHandle> form, const StructureSpec& spec,
                                                    double rho, int levels, const SolverConfig& cfg);

/// max over unit-energy directions of |ρ · trace-through-one-level(u) − oracle(u)|.
double fixed_point_residual(const E0Oracle& oracle, const SolverConfig& cfg, int samples, std::uint64_t seed = 1);

struct EigenPair {
  double p = 0;
  int i = 0;  // 0-based symbol
  double kappa = 0;           // ρ^{-1/(p-1)} of the oracle
  double kappa_read = 0;      // h^(1)(F_i(q_k))
  double kappa_estimate = 0;  // ρ̂^{-1/(p-1)} from estimate_rho (NaN if absent)
  double lambda = 0;          // h^(2)(F_i(q_k))
  Vec h1, h2;                 // boundary data
  Vec h1_level1, h2_level1;   // values on V_1
  bool consistent = false;    // |kappa_read - kappa| <= 10 tol
};

EigenPair eigen_pair(const StructureSpec& spec, double p, int i, const E0Oracle& oracle, const SolverConfig& cfg);

struct SweepRow {
  double p = 0;
  double rho = 0;
  double rho_resist = 0;
  double rho_resist_error = 0;  // error indicator carried over to ρ^{1/(p-1)}
  double lambda = 0;
  double kappa = 0;
  double residual = 0;
  double error = 0;
  int depth = 0;
  bool cauchy = false;
  bool ok = true;
  std::string message;
};

std::vector<SweepRow> sweep_p(const StructureSpec& spec, const std::vector<double>& grid, int depth,
                              int oracle_depth, const SolverConfig& cfg, int threads = 1);

}  // namespace penergy
