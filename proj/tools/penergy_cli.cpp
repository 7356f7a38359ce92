#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "penergy/measures.hpp"
#include "penergy/parallel.hpp"

namespace {

using namespace penergy;
using json = nlohmann::ordered_json;

/// Bad flag values that CLI11 cannot see (grids, boundary lists, inconsistent sizes).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
  void note(std::string key, Cell value) { summary.emplace_back(std::move(key), std::move(value)); }
};

std::string cell_text(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) return fmt_double(*d);
  if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

json cell_json(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
  if (auto i = std::get_if<long long>(&c)) return json(*i);
  return json(std::get<std::string>(c));
}

void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << cell_text(row[k]);
    os << '\n';
  }
}

json to_json(const std::string& command, const Table& t) {
  json j;
  j["command"] = command;
  json s = json::object();
  for (const auto& [k, v] : t.summary) s[k] = cell_json(v);
  j["summary"] = s;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (std::size_t k = 0; k < row.size(); ++k) r[t.columns[k]] = cell_json(row[k]);
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j;
}

struct Common {
  std::string structure = "sg";
  SolverConfig cfg;
  int threads = default_threads();
  std::uint64_t seed = 1;
  std::string out;
  bool json = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--structure", c.structure, "preset name (sg, vicsek) or structure file");
  sub->add_option("--tol", c.cfg.tol, "solver tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", c.cfg.max_iter, "Newton iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--smoothing-start", c.cfg.smoothing_start, "initial smoothing, relative to the data oscillation")
      ->check(CLI::PositiveNumber);
  sub->add_option("--smoothing-decay", c.cfg.smoothing_decay, "smoothing reduction factor")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--threads", c.threads, "worker threads (default: PENERGY_THREADS or 1)")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "sampling seed");
  sub->add_option("--out", c.out, "CSV output path (stdout when omitted)");
  sub->add_flag("--json", c.json, "JSON mirror: next to --out, or on stdout instead of CSV");
}

void emit(const std::string& command, const Common& c, const Table& t) {
  if (!c.out.empty()) {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + c.out);
    write_csv(f, t);
    if (c.json) {
      std::filesystem::path jp(c.out);
      jp.replace_extension(".json");
      std::ofstream jf(jp, std::ios::binary);
      if (!jf) throw std::runtime_error("cannot write " + jp.string());
      jf << to_json(command, t).dump(2) << '\n';
    }
    for (const auto& [k, v] : t.summary) std::cout << k << " = " << cell_text(v) << '\n';
    return;
  }
  if (c.json) {
    std::cout << to_json(command, t).dump(2) << '\n';
    return;
  }
  for (const auto& [k, v] : t.summary) std::cout << k << " = " << cell_text(v) << '\n';
  if (!t.rows.empty()) {
    if (!t.summary.empty()) std::cout << '\n';
    write_csv(std::cout, t);
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (v.empty()) throw UsageError(std::string("empty ") + what);
  return v;
}

/// "a:b:step" (inclusive, tolerant of rounding at b) or a comma list; ascending, all p > 1.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(parse_list(item, "grid")[0]);
    if (parts.size() != 3 || !(parts[2] > 0) || parts[1] < parts[0]) throw UsageError("grid must be a:b:step with a <= b, step > 0");
    const long long count = std::llround(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long long k = 0; k <= count; ++k) grid.push_back(parts[0] + static_cast<double>(k) * parts[2]);
  } else {
    grid = parse_list(text, "grid");
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 1)) throw UsageError("grid exponents must exceed 1");
    if (k && !(grid[k] > grid[k - 1])) throw UsageError("grid must be strictly ascending");
  }
  return grid;
}

Vec parse_boundary(const std::string& text, int m) {
  const auto v = parse_list(text, "boundary");
  if (static_cast<int>(v.size()) != m)
    throw UsageError("boundary needs " + std::to_string(m) + " values, got " + std::to_string(v.size()));
  Vec u(m);
  for (int k = 0; k < m; ++k) u[k] = v[k];
  return u;
}

Vec default_boundary(int m) {
  Vec u = Vec::Ones(m);
  u[0] = 0;
  return u;
}

void require_p(double p) {
  if (!(p > 1)) throw UsageError("--p must exceed 1");
}

std::vector<Cell> tuple_cells(const Vec& t) {
  std::vector<Cell> c;
  for (int k = 0; k < t.size(); ++k) c.emplace_back(t[k]);
  return c;
}

std::vector<std::string> value_columns(int m, const std::string& prefix) {
  std::vector<std::string> cols;
  for (int k = 1; k <= m; ++k) cols.push_back(prefix + std::to_string(k));
  return cols;
}

double oscillation(const Vec& t) { return t.maxCoeff() - t.minCoeff(); }

// ---------------------------------------------------------------------------------------------------------

Table run_rho(const StructureSpec& spec, double p, int depth, const Common& c) {
  require_p(p);
  if (depth < 3) throw UsageError("--depth must be at least 3");
  const auto est = estimate_rho(spec, p, depth, c.cfg, c.threads);
  Table t;
  t.columns = {"direction", "n", "trace", "ratio"};
  for (std::size_t d = 0; d < est.directions.size(); ++d)
    for (int n = 0; n <= est.depth; ++n)
      t.add({static_cast<long long>(d + 1), static_cast<long long>(n), est.traces[d][n],
             n < est.depth ? est.ratios[d][n] : std::nan("")});
  t.note("structure", spec.name);
  t.note("p", p);
  t.note("depth", static_cast<long long>(est.depth));
  t.note("rho", est.rho);
  t.note("rho_resist", std::pow(est.rho, 1.0 / (p - 1.0)));
  t.note("error", est.error);
  t.note("cauchy", std::string(est.cauchy ? "true" : "false"));
  return t;
}

Table run_sweep(const StructureSpec& spec, const std::vector<double>& grid, int depth, int oracle_depth,
                const Common& c) {
  const auto rows = sweep_p(spec, grid, depth, oracle_depth, c.cfg, c.threads);
  Table t;
  t.columns = {"p", "rho", "rho_resist", "lambda", "kappa", "residual", "depth"};
  long long failed = 0;
  for (const auto& r : rows) {
    t.add({r.p, r.rho, r.rho_resist, r.lambda, r.kappa, r.residual, static_cast<long long>(r.depth)});
    if (!r.ok) {
      ++failed;
      std::cerr << "p = " << fmt_double(r.p) << ": " << r.message << '\n';
    }
  }
  t.note("structure", spec.name);
  t.note("rows", static_cast<long long>(rows.size()));
  t.note("failed_rows", failed);
  return t;
}

Table run_extend(const StructureSpec& spec, double p, const Vec& u0, int depth, int oracle_depth, const Common& c) {
  require_p(p);
  auto oracle = build_e0_oracle(spec, p, oracle_depth, c.cfg);
  const auto h = harmonic_extend(oracle, u0, depth, c.cfg, c.threads);
  const int m = spec.m(), N = spec.N();
  Table t;
  t.columns = {"word"};
  for (auto& s : value_columns(m, "v")) t.columns.push_back(s);
  t.columns.push_back("cell_energy");
  t.columns.push_back("osc");
  for (int k = 0; k <= depth; ++k)
    for (std::uint64_t cell = 0; cell < cell_count(N, k); ++cell) {
      const Vec tup = h.tuple(k, cell);
      std::vector<Cell> row{word_string(word_from_index(cell, k, N))};
      for (auto& x : tuple_cells(tup)) row.push_back(x);
      row.emplace_back(h.energies[k][cell]);
      row.emplace_back(oscillation(tup));
      t.add(std::move(row));
    }
  t.note("p", p);
  t.note("rho", oracle->rho());
  t.note("oracle_residual", oracle->residual());
  t.note("energy", h.level_energy(0));
  t.note("additivity_defect", additivity_defect(h));
  return t;
}

Table run_pf(const StructureSpec& spec, double p, const Vec& u0, int i, int nmax, int oracle_depth, const Common& c) {
  require_p(p);
  if (i < 1 || i > spec.m()) throw UsageError("--i must name a boundary vertex (1-based)");
  auto oracle = build_e0_oracle(spec, p, oracle_depth, c.cfg);
  const auto r = pf_experiment(oracle, u0, i - 1, nmax, c.cfg);
  const int m = spec.m();
  Table t;
  t.columns = {"n", "word"};
  for (auto& s : value_columns(m, "r")) t.columns.push_back(s);
  t.columns.push_back("distance");
  for (const auto& row : r.rows) {
    std::vector<Cell> cells{static_cast<long long>(row.n), word_string(Word(row.n, r.symbol))};
    for (auto& x : tuple_cells(row.rescaled)) cells.push_back(x);
    cells.emplace_back(row.distance);
    t.add(std::move(cells));
  }
  t.note("p", p);
  t.note("i", static_cast<long long>(i));
  t.note("c", r.c);
  t.note("dominated", std::string(r.dominated ? "true" : "false"));
  t.note("monotone_from", static_cast<long long>(r.monotone_from));
  return t;
}

Table run_measure(const StructureSpec& spec, double p, const Vec& u0, int depth, int oracle_depth, const Common& c) {
  require_p(p);
  auto oracle = build_e0_oracle(spec, p, oracle_depth, c.cfg);
  const auto h = harmonic_extend(oracle, u0, depth, c.cfg, c.threads);
  const auto mu = energy_measure(h, depth);
  const double total = mu.total();
  Table t;
  t.columns = {"word", "mass", "mass_fraction"};
  for (std::uint64_t cell = 0; cell < mu.mass.size(); ++cell)
    t.add({word_string(word_from_index(cell, depth, spec.N())), mu.mass[cell], total > 0 ? mu.mass[cell] / total : 0.0});
  t.note("p", p);
  t.note("depth", static_cast<long long>(depth));
  t.note("total", total);
  t.note("energy", h.level_energy(0));
  t.note("additivity_defect", additivity_defect(h));
  return t;
}

Table run_singularity(const StructureSpec& spec, double p, double q, const Vec& u0, const Vec& v0, int block,
                      int levels, int oracle_depth, const Common& c) {
  require_p(p);
  require_p(q);
  auto op = build_e0_oracle(spec, p, oracle_depth, c.cfg);
  auto oq = p == q ? op : build_e0_oracle(spec, q, oracle_depth, c.cfg);
  HellingerOptions opt;
  opt.threads = c.threads;
  const auto tab = hellinger_experiment(op, oq, u0, v0, block, levels, c.cfg, opt);
  Table t;
  t.columns = {"level", "max_affinity", "max_cum_product", "bound_delta"};
  for (const auto& r : tab.rows)
    t.add({static_cast<long long>(r.level), r.max_affinity, r.max_cum_product, tab.bound_delta});
  t.note("p", p);
  t.note("q", q);
  t.note("N", static_cast<long long>(block));
  t.note("levels", static_cast<long long>(levels));
  t.note("c2", tab.c2);
  t.note("active_cells", static_cast<long long>(tab.active_cells));
  return t;
}

Table run_eigen(const StructureSpec& spec, double p, int i, int oracle_depth, const Common& c) {
  require_p(p);
  if (spec.m() != 3) throw UsageError("eigenpairs need three boundary vertices");
  std::vector<int> symbols;
  if (i == 0) symbols = {0, 1, 2};
  else if (i >= 1 && i <= 3) symbols = {i - 1};
  else throw UsageError("--i must be 1, 2, 3 (or 0 for all)");
  auto oracle = build_e0_oracle(spec, p, oracle_depth, c.cfg);
  Table t;
  t.columns = {"p", "i", "kappa", "kappa_read", "lambda", "consistent"};
  for (int s : symbols) {
    const auto e = eigen_pair(spec, p, s, *oracle, c.cfg);
    t.add({p, static_cast<long long>(s + 1), e.kappa, e.kappa_read, e.lambda, std::string(e.consistent ? "true" : "false")});
  }
  t.note("rho", oracle->rho());
  t.note("oracle_residual", oracle->residual());
  return t;
}

struct CheckRow {
  std::string suite, name;
  long long samples;
  double worst;
  bool passed;
};

/// Property suites; every row reports a signed margin (negative means violated).
Table run_check(const StructureSpec& spec, const std::string& suite, double p, int depth, int samples, const Common& c,
                bool& all_passed) {
  require_p(p);
  std::vector<CheckRow> rows;
  const double threshold = 1e-9;
  auto forms = [&] {
    const auto graph = GraphPForm::complete(spec.m(), p);
    auto oracle = build_e0_oracle(spec, p, depth, c.cfg);
    for (const FormHandle* h : {static_cast<const FormHandle*>(&graph), static_cast<const FormHandle*>(oracle.get())}) {
      const std::string label = h == &graph ? "graph" : "oracle";
      const auto rep = property_suite(*h, samples, c.seed, threshold);
      for (const auto& ck : rep.checks) rows.push_back({"forms", label + ": " + ck.name, ck.samples, ck.worst, ck.passed});
    }
    const double fd = derivative_fd_defect(graph, samples, c.seed);
    rows.push_back({"forms", "graph: derivative vs central difference", samples, 1e-6 - fd, fd <= 1e-6});
  };
  auto harmonic = [&] {
    auto oracle = build_e0_oracle(spec, p, depth, c.cfg);
    const double tol = oracle->tolerance();
    const auto cmp = comparison_suite(oracle, 3, samples, c.seed, c.cfg, c.threads);
    rows.push_back({"harmonic", "weak comparison", cmp.pairs, cmp.worst_weak, cmp.weak_violations == 0});
    rows.push_back({"harmonic", "strong comparison margin", cmp.strong_pairs, cmp.min_strong_margin, cmp.strong_failures == 0});
    const auto hr = hoelder_check(oracle, 3, samples, c.seed, c.cfg);
    rows.push_back({"harmonic", "hoelder bound", hr.pairs, 1.0 - hr.worst_ratio, hr.violations == 0});
    rows.push_back({"harmonic", "resistance contraction", hr.contraction_samples, 1.0 - hr.worst_contraction,
                    hr.contraction_violations == 0});
    const auto h = harmonic_extend(oracle, default_boundary(spec.m()), 4, c.cfg, c.threads);
    const double defect = additivity_defect(h);
    rows.push_back({"harmonic", "energy additivity", 4, 4 * tol - defect, defect <= 4 * tol});
  };
  if (suite == "forms" || suite == "all") forms();
  if (suite == "harmonic" || suite == "all") harmonic();
  if (rows.empty()) throw UsageError("unknown suite '" + suite + "' (forms, harmonic, all)");
  Table t;
  t.columns = {"suite", "check", "samples", "worst", "passed"};
  all_passed = true;
  for (const auto& r : rows) {
    t.add({r.suite, r.name, r.samples, r.worst, std::string(r.passed ? "true" : "false")});
    all_passed = all_passed && r.passed;
  }
  t.note("p", p);
  t.note("passed", std::string(all_passed ? "true" : "false"));
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-energy forms on self-similar sets: renormalization, harmonic extension, energy measures"};
  app.require_subcommand(1);
  Common c;

  double p = 2, q = 3;
  int depth = 7, i = 1, nmax = 12, block = 2, levels = 5, samples = 200;
  // Oracle depths: deep where only a few solves follow, shallow where thousands of cells are extended.
  int od_sweep = 5, od_extend = 5, od_pf = 7, od_measure = 5, od_singular = 3, od_eigen = 7, od_check = 4;
  std::string grid_text, boundary_text, boundary_q_text, suite = "all";

  auto rho = app.add_subcommand("rho", "estimate the renormalization factor");
  rho->add_option("--p", p)->required();
  rho->add_option("--depth", depth, "deepest trace level");

  auto sweep = app.add_subcommand("sweep", "rho, lambda and kappa over a grid of exponents");
  sweep->add_option("--grid", grid_text, "a:b:step or a comma list")->required();
  sweep->add_option("--depth", depth, "deepest trace level");
  sweep->add_option("--oracle-depth", od_sweep, "oracle depth for the eigenpairs");

  auto extend = app.add_subcommand("extend", "harmonic extension, one row per cell");
  extend->add_option("--p", p)->required();
  extend->add_option("--boundary", boundary_text, "comma-separated values on V_0");
  extend->add_option("--depth", depth)->required();
  extend->add_option("--oracle-depth", od_extend);

  auto pf = app.add_subcommand("pf", "Perron-Frobenius limit along the cells i^n");
  pf->add_option("--p", p);
  pf->add_option("--i", i, "boundary vertex, 1-based");
  pf->add_option("--boundary", boundary_text);
  pf->add_option("--nmax", nmax);
  pf->add_option("--oracle-depth", od_pf);

  auto measure = app.add_subcommand("measure", "energy measure of a harmonic function");
  measure->add_option("--p", p)->required();
  measure->add_option("--boundary", boundary_text);
  measure->add_option("--depth", depth)->required();
  measure->add_option("--oracle-depth", od_measure);

  auto singular = app.add_subcommand("singularity", "Hellinger affinities of the p- and q-energy measures");
  singular->add_option("--p", p)->required();
  singular->add_option("--q", q)->required();
  singular->add_option("--N", block, "block length");
  singular->add_option("--levels", levels);
  singular->add_option("--boundary", boundary_text, "data of u");
  singular->add_option("--boundary-q", boundary_q_text, "data of v (default: same as u)");
  singular->add_option("--oracle-depth", od_singular);

  auto eigen = app.add_subcommand("eigen", "eigenpair (kappa, lambda) at a boundary fixed point");
  eigen->add_option("--p", p)->required();
  eigen->add_option("--i", i, "symbol 1..3, 0 for all");
  eigen->add_option("--oracle-depth", od_eigen);

  auto check = app.add_subcommand("check", "property suites; exit 1 on a violation");
  check->add_option("--suite", suite, "forms, harmonic or all");
  check->add_option("--p", p);
  check->add_option("--oracle-depth", od_check);
  check->add_option("--samples", samples)->check(CLI::PositiveNumber);

  for (auto* s : {rho, sweep, extend, pf, measure, singular, eigen, check}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    c.cfg.validate();
    const StructureSpec spec = load_structure(c.structure);
    const int m = spec.m();
    const Vec u0 = boundary_text.empty() ? default_boundary(m) : parse_boundary(boundary_text, m);
    for (int d : {depth, od_sweep, od_extend, od_pf, od_measure, od_singular, od_eigen, od_check})
      if (d < 0) throw UsageError("depths must be nonnegative");
    int status = 0;
    Table t;
    std::string name;
    if (*rho) {
      name = "rho";
      t = run_rho(spec, p, depth, c);
    } else if (*sweep) {
      name = "sweep";
      t = run_sweep(spec, parse_grid(grid_text), depth, od_sweep, c);
    } else if (*extend) {
      name = "extend";
      t = run_extend(spec, p, u0, depth, od_extend, c);
    } else if (*pf) {
      name = "pf";
      if (nmax < 0) throw UsageError("--nmax must be nonnegative");
      t = run_pf(spec, p, boundary_text.empty() ? Vec(Vec::LinSpaced(m, 0, m - 1)) : u0, i, nmax, od_pf, c);
    } else if (*measure) {
      name = "measure";
      t = run_measure(spec, p, u0, depth, od_measure, c);
    } else if (*singular) {
      name = "singularity";
      if (block < 1 || levels < 1) throw UsageError("--N and --levels must be positive");
      const Vec v0 = boundary_q_text.empty() ? u0 : parse_boundary(boundary_q_text, m);
      t = run_singularity(spec, p, q, u0, v0, block, levels, od_singular, c);
    } else if (*eigen) {
      name = "eigen";
      t = run_eigen(spec, p, i, od_eigen, c);
    } else if (*check) {
      name = "check";
      bool passed = true;
      t = run_check(spec, suite, p, od_check, samples, c, passed);
      status = passed ? 0 : 1;
    }
    emit(name, c, t);
    return status;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const StructureError& e) {
    std::cerr << "structure error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
