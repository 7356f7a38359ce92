#include "penergy/forms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "penergy/solver.hpp"

namespace penergy {

namespace {

inline double flux_term(double d, double p) {
  if (d == 0.0) return 0.0;
  if (p == 2.0) return d;
  return std::copysign(std::pow(std::abs(d), p - 1.0), d);
}

inline double power_term(double d, double p) {
  if (p == 2.0) return d * d;
  return std::pow(std::abs(d), p);
}

}  // namespace

const char* to_string(FormKind kind) {
  switch (kind) {
    case FormKind::graph: return "graph";
    case FormKind::level: return "level";
    case FormKind::trace: return "trace";
    case FormKind::oracle: return "deep-trace oracle";
  }
  return "?";
}

void FormHandle::check_length(const Vec& u) const {
  if (u.size() != size()) {
    std::ostringstream os;
    os << "length mismatch: form on " << size() << " vertices, got " << u.size() << " values";
    throw std::invalid_argument(os.str());
  }
}

double FormHandle::derivative(const Vec& u, const Vec& v) const {
  check_length(v);
  return gradient(u).dot(v);
}

GraphPForm::GraphPForm(int vertex_count, double p, std::vector<Edge> edges, bool require_connected)
    : vertex_count_(vertex_count), p_(p), edges_(std::move(edges)) {
  if (vertex_count_ < 1) throw std::invalid_argument("graph form needs at least one vertex");
  if (!(p_ > 1.0) || !std::isfinite(p_)) throw std::invalid_argument("exponent p must lie in (1, inf)");
  for (const auto& e : edges_) {
    if (e.a < 0 || e.b < 0 || e.a >= vertex_count_ || e.b >= vertex_count_)
      throw std::invalid_argument("edge endpoint out of range");
    if (e.a == e.b) throw std::invalid_argument("graph weights must have zero diagonal");
    if (!(e.w >= 0) || !std::isfinite(e.w)) throw std::invalid_argument("graph weights must be nonnegative");
  }
  if (require_connected) {
    std::vector<int> parent(vertex_count_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    int components = vertex_count_;
    for (const auto& e : edges_) {
      if (e.w <= 0) continue;
      int a = find(e.a), b = find(e.b);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    if (components != 1) throw std::invalid_argument("graph of positive weights is not connected");
  }
}

GraphPForm GraphPForm::complete(int vertex_count, double p, double weight) {
  std::vector<Edge> edges;
  for (int a = 0; a < vertex_count; ++a)
    for (int b = a + 1; b < vertex_count; ++b) edges.push_back({a, b, weight});
  return GraphPForm(vertex_count, p, std::move(edges));
}

double GraphPForm::partial_value(const Vec& u, std::size_t first, std::size_t last) const {
  double s = 0;
  for (std::size_t e = first; e < last; ++e) s += edges_[e].w * power_term(u[edges_[e].a] - u[edges_[e].b], p_);
  return s;
}

double GraphPForm::value(const Vec& u) const {
  check_length(u);
  return partial_value(u, 0, edges_.size());
}

Vec GraphPForm::gradient(const Vec& u) const {
  check_length(u);
  Vec g = Vec::Zero(vertex_count_);
  for (const auto& e : edges_) {
    double t = e.w * flux_term(u[e.a] - u[e.b], p_);
    g[e.a] += t;
    g[e.b] -= t;
  }
  return g;
}

double GraphPForm::derivative(const Vec& u, const Vec& v) const {
  check_length(u);
  check_length(v);
  double s = 0;
  for (const auto& e : edges_) s += e.w * flux_term(u[e.a] - u[e.b], p_) * (v[e.a] - v[e.b]);
  return s;
}

std::optional<GraphExpansion> GraphPForm::expand() const {
  std::vector<int> embed(vertex_count_);
  std::iota(embed.begin(), embed.end(), 0);
  return GraphExpansion{std::make_shared<GraphPForm>(*this), std::move(embed)};
}

double graph_energy(const GraphPForm& form, const Vec& u) { return form.value(u); }

double energy_derivative(const FormHandle& h, const Vec& u, const Vec& v) { return h.derivative(u, v); }

LevelForm::LevelForm(std::shared_ptr<const VertexNet> net, std::shared_ptr<const FormHandle> inner, double rho)
    : net_(std::move(net)), inner_(std::move(inner)), rho_(rho) {
  if (!net_ || !inner_) throw std::invalid_argument("level form needs a net and an inner form");
  if (inner_->size() != net_->boundary_count)
    throw std::invalid_argument("net/spec mismatch: inner form has " + std::to_string(inner_->size()) +
                                " vertices, cells have " + std::to_string(net_->boundary_count));
  if (!(rho_ > 0)) throw std::invalid_argument("scale rho must be positive");
}

double LevelForm::cell_scale() const { return std::pow(rho_, net_->level); }

Vec LevelForm::cell_values(const Vec& u, std::uint64_t cell) const {
  auto ids = net_->cell(cell);
  Vec t(ids.size());
  for (std::size_t a = 0; a < ids.size(); ++a) t[a] = u[ids[a]];
  return t;
}

double LevelForm::value(const Vec& u) const {
  check_length(u);
  double s = 0;
  for (std::uint64_t c = 0; c < net_->cells(); ++c) s += inner_->value(cell_values(u, c));
  return cell_scale() * s;
}

Vec LevelForm::gradient(const Vec& u) const {
  check_length(u);
  Vec g = Vec::Zero(size());
  const double scale = cell_scale();
  for (std::uint64_t c = 0; c < net_->cells(); ++c) {
    Vec gc = inner_->gradient(cell_values(u, c));
    auto ids = net_->cell(c);
    for (std::size_t a = 0; a < ids.size(); ++a) g[ids[a]] += scale * gc[a];
  }
  return g;
}

double level_energy(const LevelForm& lf, const Vec& u) { return lf.value(u); }

GraphExpansion expand_cells(const VertexNet& net, const GraphExpansion& inner, double scale) {
  const auto& ig = *inner.graph;
  const int m = net.boundary_count;
  if (static_cast<int>(inner.embed.size()) != m) throw std::invalid_argument("inner expansion does not match the cells");
  std::vector<int> role(ig.size(), -1);  // inner vertex -> boundary index, or -1 if private
  for (int a = 0; a < m; ++a) role[inner.embed[a]] = a;
  std::vector<int> private_vertices;
  for (int v = 0; v < ig.size(); ++v)
    if (role[v] < 0) private_vertices.push_back(v);
  const int np = static_cast<int>(private_vertices.size());
  std::vector<int> private_rank(ig.size(), -1);
  for (int k = 0; k < np; ++k) private_rank[private_vertices[k]] = k;

  const std::uint64_t cells = net.cells();
  const std::uint64_t total = net.vertex_count + cells * np;
  if (total > 0x7fffffffull) throw std::length_error("expanded graph too large");
  std::vector<Edge> edges;
  edges.reserve(cells * ig.edges().size());
  for (std::uint64_t c = 0; c < cells; ++c) {
    auto ids = net.cell(c);
    const int base = static_cast<int>(net.vertex_count + c * np);
    auto map = [&](int v) { return role[v] >= 0 ? ids[role[v]] : base + private_rank[v]; };
    for (const auto& e : ig.edges()) edges.push_back({map(e.a), map(e.b), e.w * scale});
  }
  std::vector<int> embed(net.vertex_count);
  std::iota(embed.begin(), embed.end(), 0);
  return GraphExpansion{
      std::make_shared<GraphPForm>(static_cast<int>(total), ig.exponent(), std::move(edges), false), std::move(embed)};
}

std::optional<GraphExpansion> LevelForm::expand() const {
  auto inner = inner_->expand();
  if (!inner) return std::nullopt;
  return expand_cells(*net_, *inner, cell_scale());
}

TraceForm::TraceForm(std::shared_ptr<const FormHandle> inner, std::vector<int> boundary, SolverConfig cfg,
                     FormKind kind)
    : inner_(std::move(inner)), boundary_(std::move(boundary)), cfg_(cfg), kind_(kind) {
  if (!inner_) throw std::invalid_argument("trace needs an inner form");
  if (boundary_.empty()) throw std::invalid_argument("trace needs a non-empty boundary set");
  cfg_.validate();
  std::vector<char> seen(inner_->size(), 0);
  for (int x : boundary_) {
    if (x < 0 || x >= inner_->size()) throw std::invalid_argument("trace boundary vertex out of range");
    if (seen[x]) throw std::invalid_argument("trace boundary vertex repeated");
    seen[x] = 1;
  }
  if (auto ex = inner_->expand()) {
    std::vector<int> pinned;
    for (int x : boundary_) pinned.push_back(ex->embed[x]);
    compiled_ = std::make_shared<CompiledGraph>(ex->graph, pinned);
    expansion_ = GraphExpansion{ex->graph, std::move(pinned)};
  }
}

std::optional<GraphExpansion> TraceForm::expand() const { return expansion_; }

namespace {

[[noreturn]] void trace_failure(const char* what, double residual, int iterations) {
  std::ostringstream os;
  os << what << ": inner solve did not converge (residual " << residual << ", " << iterations << " iterations)";
  throw SolveFailure(os.str());
}

}  // namespace

Vec TraceForm::minimizer(const Vec& u, const SolverConfig& cfg) const {
  check_length(u);
  std::vector<double> pv(u.data(), u.data() + u.size());
  if (compiled_) {
    auto r = compiled_->solve(pv, cfg);
    if (!r.converged) trace_failure("trace", r.residual, r.iterations);
    return r.values;
  }
  auto r = minimize_handle(*inner_, boundary_, pv, cfg);
  if (!r.converged) trace_failure("trace", r.residual, r.iterations);
  return r.values;
}

double TraceForm::value(const Vec& u) const {
  check_length(u);
  std::vector<double> pv(u.data(), u.data() + u.size());
  if (compiled_) {
    auto r = compiled_->solve(pv, cfg_);
    if (!r.converged) trace_failure("trace value", r.residual, r.iterations);
    return r.energy;
  }
  auto r = minimize_handle(*inner_, boundary_, pv, cfg_);
  if (!r.converged) trace_failure("trace value", r.residual, r.iterations);
  return r.energy;
}

Vec TraceForm::gradient(const Vec& u) const {
  check_length(u);
  const SolverConfig tight = cfg_.tightened(0.01);
  std::vector<double> pv(u.data(), u.data() + u.size());
  if (compiled_) {
    auto r = compiled_->solve(pv, tight);
    if (!r.converged) trace_failure("trace derivative", r.residual, r.iterations);
    return compiled_->pinned_flux(r.values, r.smoothing);
  }
  auto r = minimize_handle(*inner_, boundary_, pv, tight);
  if (!r.converged) trace_failure("trace derivative", r.residual, r.iterations);
  Vec g = inner_->gradient(r.values);
  Vec out(boundary_.size());
  for (std::size_t k = 0; k < boundary_.size(); ++k) out[k] = g[boundary_[k]];
  return out;
}

double effective_resistance(const FormHandle& h, int x, int y, const SolverConfig& cfg) {
  if (x == y) throw std::invalid_argument("effective resistance needs distinct vertices");
  if (x < 0 || y < 0 || x >= h.size() || y >= h.size()) throw std::invalid_argument("vertex out of range");
  const std::vector<double> pv{0.0, 1.0};
  double e;
  if (auto ex = h.expand()) {
    CompiledGraph cg(ex->graph, {ex->embed[x], ex->embed[y]});
    auto r = cg.solve(pv, cfg);
    if (!r.converged) throw SolveFailure("effective resistance: minimization failed");
    e = r.energy;
  } else {
    auto r = minimize_handle(h, {x, y}, pv, cfg);
    if (!r.converged) throw SolveFailure("effective resistance: minimization failed");
    e = r.energy;
  }
  return 1.0 / e;
}

Vec sample_direction(int size, std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vec u(size);
  for (int k = 0; k < size; ++k) u[k] = U(rng);
  u.array() -= u.mean();
  return u;
}

bool PropertyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed; });
}

PropertyReport property_suite(const FormHandle& h, int samples, std::uint64_t seed, double threshold) {
  const double p = h.exponent();
  const int n = h.size();
  PropertyReport rep;
  rep.p = p;
  rep.threshold = threshold;
  const double tiny = 1e-300;
  enum { clarkson_strong, clarkson_weak, unit, normal, subadd, hoelder, monotone, count };
  const char* names[count] = {"clarkson (power mean)", "clarkson (sum)", "unit contraction", "normal contraction",
                              "strong subadditivity", "derivative hoelder bound", "derivative monotonicity"};
  std::vector<double> worst(count, std::numeric_limits<double>::infinity());
  std::vector<int> used(count, 0);
  auto record = [&](int k, double r) {
    worst[k] = std::min(worst[k], r);
    ++used[k];
  };
  const double alpha = std::min(1.0 / p, (p - 1.0) / p);

  for (int s = 0; s < samples; ++s) {
    const Vec u = sample_direction(n, seed, 4 * static_cast<std::uint64_t>(s));
    const Vec v = sample_direction(n, seed, 4 * static_cast<std::uint64_t>(s) + 1);
    const double Eu = h.value(u), Ev = h.value(v);
    const double Ep = h.value(u + v), Em = h.value(u - v);
    const double A = Ep + Em, S = 2.0 * (Eu + Ev);
    const double Q = 2.0 * std::pow(std::pow(Eu, 1.0 / (p - 1.0)) + std::pow(Ev, 1.0 / (p - 1.0)), p - 1.0);
    const double cscale = std::max({A, S, Q, tiny});
    if (p <= 2.0) {
      record(clarkson_strong, (A - Q) / cscale);
      record(clarkson_weak, (S - A) / cscale);
    } else {
      record(clarkson_strong, (Q - A) / cscale);
      record(clarkson_weak, (A - S) / cscale);
    }

    const Vec u2 = 2.0 * u;  // values reach beyond [0,1] so that both cut-offs act
    const double Eu2 = h.value(u2);
    const Vec cut = u2.cwiseMax(0.0).cwiseMin(1.0);
    record(unit, (Eu2 - h.value(cut)) / std::max(Eu2, tiny));
    record(normal, (Eu2 - h.value(u2.cwiseAbs())) / std::max(Eu2, tiny));

    const double Emin = h.value(u.cwiseMin(v)), Emax = h.value(u.cwiseMax(v));
    record(subadd, (Eu + Ev - Emin - Emax) / std::max(Eu + Ev, tiny));

    const double bound = std::pow(Eu, (p - 1.0) / p) * std::pow(Ev, 1.0 / p);
    const Vec gu = h.gradient(u);
    record(hoelder, (bound - std::abs(gu.dot(v))) / std::max(bound, tiny));

    // (u2 - u1) ∧ v = 0: nonnegative increments and v supported where the increment vanishes.
    const Vec w = sample_direction(n, seed, 4 * static_cast<std::uint64_t>(s) + 2);
    const Vec z = sample_direction(n, seed, 4 * static_cast<std::uint64_t>(s) + 3);
    const Vec d = w.cwiseMax(0.0);
    Vec vm = z.cwiseAbs();
    for (int k = 0; k < n; ++k)
      if (d[k] > 0) vm[k] = 0.0;
    const Vec u1b = u, u2b = u + d;
    const double Ev_m = h.value(vm);
    if (Ev_m > 0) {
      const double E1 = Eu, E2 = h.value(u2b);
      const double g1 = gu.dot(vm), g2 = h.gradient(u2b).dot(vm);
      const double mscale = (std::pow(E1, (p - 1.0) / p) + std::pow(E2, (p - 1.0) / p)) * std::pow(Ev_m, 1.0 / p);
      record(monotone, (g1 - g2) / std::max(mscale, tiny));
      const double Ed = h.value(u1b - u2b);
      const double denom = std::pow(std::max(E1, E2), (p - 1.0 - alpha) / p) * std::pow(Ed, alpha / p) *
                           std::pow(Ev_m, 1.0 / p);
      if (denom > tiny) rep.derivative_continuity_ratio = std::max(rep.derivative_continuity_ratio, std::abs(g1 - g2) / denom);
    }
  }
  for (int k = 0; k < count; ++k) {
    PropertyCheck c;
    c.name = names[k];
    c.samples = used[k];
    c.worst = used[k] ? worst[k] : 0.0;
    c.passed = c.worst >= -threshold;
    rep.checks.push_back(c);
  }
  return rep;
}

double derivative_fd_defect(const FormHandle& h, int samples, std::uint64_t seed, double step) {
  const double p = h.exponent();
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    const Vec u = sample_direction(h.size(), seed, 2 * static_cast<std::uint64_t>(s));
    const Vec v = sample_direction(h.size(), seed, 2 * static_cast<std::uint64_t>(s) + 1);
    const double exact = h.derivative(u, v);
    const double fd = (h.value(u + step * v) - h.value(u - step * v)) / (2.0 * step * p);
    const double scale = std::max(std::abs(exact), std::pow(h.value(u), (p - 1.0) / p) * std::pow(h.value(v), 1.0 / p));
    if (scale > 0) worst = std::max(worst, std::abs(exact - fd) / scale);
  }
  return worst;
}

}  // namespace penergy
