#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "penergy/solver_config.hpp"
#include "penergy/structure.hpp"

namespace penergy {

using Vec = Eigen::VectorXd;

/// Raised when a minimization behind a form evaluation fails.
class SolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormKind { graph, level, trace, oracle };
const char* to_string(FormKind kind);

struct Edge {
  int a, b;
  double w;
};

class GraphPForm;

/// A graph form on a (possibly larger) vertex set whose restriction or trace realizes a handle.
/// `embed[x]` is the graph vertex carrying the handle's vertex x.
struct GraphExpansion {
  std::shared_ptr<const GraphPForm> graph;
  std::vector<int> embed;
};

/// An evaluable p-homogeneous energy on a finite vertex set.
class FormHandle {
 public:
  virtual ~FormHandle() = default;
  virtual int size() const = 0;
  virtual double exponent() const = 0;
  virtual FormKind kind() const = 0;
  virtual double value(const Vec& u) const = 0;
  /// Component x is E(u; 1_x) = (1/p) dE/du_x.
  virtual Vec gradient(const Vec& u) const = 0;
  virtual double derivative(const Vec& u, const Vec& v) const;
  /// A graph realization, if the form is a graph form or a trace/level form built from one.
  virtual std::optional<GraphExpansion> expand() const { return std::nullopt; }

 protected:
  void check_length(const Vec& u) const;
};

/// ½ Σ_{x,y} L_xy |u(x) - u(y)|^p, stored as one weighted edge per unordered pair.
class GraphPForm final : public FormHandle {
 public:
  GraphPForm(int vertex_count, double p, std::vector<Edge> edges, bool require_connected = true);
  static GraphPForm complete(int vertex_count, double p, double weight = 1.0);

  int size() const override { return vertex_count_; }
  double exponent() const override { return p_; }
  FormKind kind() const override { return FormKind::graph; }
  double value(const Vec& u) const override;
  Vec gradient(const Vec& u) const override;
  double derivative(const Vec& u, const Vec& v) const override;
  std::optional<GraphExpansion> expand() const override;

  const std::vector<Edge>& edges() const { return edges_; }
  /// Energy of the edges [first, last).
  double partial_value(const Vec& u, std::size_t first, std::size_t last) const;

 private:
  int vertex_count_;
  double p_;
  std::vector<Edge> edges_;
};

double graph_energy(const GraphPForm& form, const Vec& u);
double energy_derivative(const FormHandle& h, const Vec& u, const Vec& v);

/// Σ_{|w|=n} ρ^n inner(u∘F_w), summed in lexicographic word order.
class LevelForm final : public FormHandle {
 public:
  LevelForm(std::shared_ptr<const VertexNet> net, std::shared_ptr<const FormHandle> inner, double rho);

  int size() const override { return net_->vertex_count; }
  double exponent() const override { return inner_->exponent(); }
  FormKind kind() const override { return FormKind::level; }
  double value(const Vec& u) const override;
  Vec gradient(const Vec& u) const override;
  std::optional<GraphExpansion> expand() const override;

  const VertexNet& net() const { return *net_; }
  const FormHandle& inner() const { return *inner_; }
  std::shared_ptr<const FormHandle> inner_ptr() const { return inner_; }
  double rho() const { return rho_; }
  double cell_scale() const;  // ρ^n
  Vec cell_values(const Vec& u, std::uint64_t cell) const;

 private:
  std::shared_ptr<const VertexNet> net_;
  std::shared_ptr<const FormHandle> inner_;
  double rho_;
};

double level_energy(const LevelForm& lf, const Vec& u);

/// Copies `inner` into every level-n cell, scaling weights by `scale` and gluing the embedded V_0 copies.
/// Net vertices keep their ids; private vertices follow cell by cell. Edges of cell c occupy
/// [c * E, (c + 1) * E) where E is the inner edge count.
GraphExpansion expand_cells(const VertexNet& net, const GraphExpansion& inner, double scale);

class CompiledGraph;

/// E|_B(u) = inf{E(v) : v|_B = u}.
class TraceForm : public FormHandle {
 public:
  TraceForm(std::shared_ptr<const FormHandle> inner, std::vector<int> boundary, SolverConfig cfg,
            FormKind kind = FormKind::trace);

  int size() const override { return static_cast<int>(boundary_.size()); }
  double exponent() const override { return inner_->exponent(); }
  FormKind kind() const override { return kind_; }
  double value(const Vec& u) const override;
  /// Envelope identity: boundary flux of the minimizer, solved at 0.01 × tol.
  Vec gradient(const Vec& u) const override;
  std::optional<GraphExpansion> expand() const override;

  /// Minimizer on the inner vertex set (or on the expanded graph when one exists).
  Vec minimizer(const Vec& u, const SolverConfig& cfg) const;
  const SolverConfig& config() const { return cfg_; }
  const std::vector<int>& boundary() const { return boundary_; }
  const FormHandle& inner() const { return *inner_; }

 protected:
  std::shared_ptr<const FormHandle> inner_;
  std::vector<int> boundary_;
  SolverConfig cfg_;
  FormKind kind_;
  std::optional<GraphExpansion> expansion_;
  std::shared_ptr<const CompiledGraph> compiled_;
};

/// 1 / inf{value(u) : u(x) = 0, u(y) = 1}.
double effective_resistance(const FormHandle& h, int x, int y, const SolverConfig& cfg);

struct PropertyCheck {
  std::string name;
  int samples = 0;
  double worst = 0;  // worst scaled signed residual; negative means violated
  bool passed = true;
};

struct PropertyReport {
  double p = 0;
  double threshold = 1e-8;
  std::vector<PropertyCheck> checks;
  /// Largest observed ratio in the Hölder-continuity bound of the derivative (empirical c_p).
  double derivative_continuity_ratio = 0;
  bool passed() const;
};

PropertyReport property_suite(const FormHandle& h, int samples, std::uint64_t seed, double threshold = 1e-8);

/// Worst gap between derivative(u, v) and the central difference (E(u+tv) − E(u−tv)) / (2tp), relative to
/// max(|derivative|, E(u)^{(p-1)/p} E(v)^{1/p}).
double derivative_fd_defect(const FormHandle& h, int samples, std::uint64_t seed, double step = 1e-5);

/// i.i.d. uniform on [-1,1] with the mean removed.
Vec sample_direction(int size, std::uint64_t seed, std::uint64_t stream);

}  // namespace penergy
