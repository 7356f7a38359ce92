#include "penergy/structure.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace penergy {

namespace {

std::string quad_text(const Gluing& g) {
  std::ostringstream os;
  os << "[" << g.i + 1 << "," << g.a + 1 << "," << g.j + 1 << "," << g.b + 1 << "]";
  return os.str();
}

std::string perm_text(const Permutation& g) {
  std::ostringstream os;
  os << "[";
  for (std::size_t k = 0; k < g.size(); ++k) os << (k ? "," : "") << g[k] + 1;
  os << "]";
  return os.str();
}

bool is_permutation_of(const Permutation& g, int m) {
  if (static_cast<int>(g.size()) != m) return false;
  std::vector<char> seen(m, 0);
  for (int x : g) {
    if (x < 0 || x >= m || seen[x]) return false;
    seen[x] = 1;
  }
  return true;
}

using Slot = std::pair<int, int>;

std::set<std::pair<Slot, Slot>> gluing_set(const std::vector<Gluing>& table) {
  std::set<std::pair<Slot, Slot>> out;
  for (const auto& g : table) {
    Slot s{g.i, g.a}, t{g.j, g.b};
    out.insert(s < t ? std::make_pair(s, t) : std::make_pair(t, s));
  }
  return out;
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  // The smaller slot stays the root so a class is represented by its first slot.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a;
    else parent[a] = b;
  }
};

}  // namespace

Permutation compose(const Permutation& g, const Permutation& h) {
  Permutation out(h.size());
  for (std::size_t a = 0; a < h.size(); ++a) out[a] = g[h[a]];
  return out;
}

std::vector<int> induced_symbol_permutation(const StructureSpec& spec, const Permutation& g) {
  std::vector<int> pi(spec.symbol_count);
  std::iota(pi.begin(), pi.end(), 0);
  for (int a = 0; a < spec.boundary_count; ++a) pi[spec.boundary_fixed_symbol[a]] = spec.boundary_fixed_symbol[g[a]];
  return pi;
}

void validate_structure(StructureSpec& spec) {
  const int N = spec.symbol_count, m = spec.boundary_count;
  if (N < 1) throw StructureError("symbols must be a positive integer");
  if (m < 2) throw StructureError("boundary must be at least 2");

  if (static_cast<int>(spec.boundary_fixed_symbol.size()) != m)
    throw StructureError("fixed must assign a symbol to every boundary vertex");
  std::set<int> fixed_symbols;
  for (int a = 0; a < m; ++a) {
    int i = spec.boundary_fixed_symbol[a];
    if (i < 0 || i >= N)
      throw StructureError("fixed entry " + std::to_string(a + 1) + ": symbol out of range");
    if (!fixed_symbols.insert(i).second)
      throw StructureError("fixed entry " + std::to_string(a + 1) + ": symbol already fixes another vertex");
  }

  std::map<Slot, std::size_t> used;
  for (std::size_t k = 0; k < spec.identifications.size(); ++k) {
    const auto& g = spec.identifications[k];
    if (g.i < 0 || g.i >= N || g.j < 0 || g.j >= N || g.a < 0 || g.a >= m || g.b < 0 || g.b >= m)
      throw StructureError("identification " + quad_text(g) + ": index out of range");
    if (g.i == g.j) throw StructureError("identification " + quad_text(g) + ": a cell cannot be glued to itself");
    for (Slot s : {Slot{g.i, g.a}, Slot{g.j, g.b}}) {
      if (used.count(s))
        throw StructureError("identification " + quad_text(g) + ": junction multiply glued (slot (" +
                             std::to_string(s.first + 1) + "," + std::to_string(s.second + 1) + ") also in " +
                             quad_text(spec.identifications[used[s]]) + ")");
      if (spec.boundary_fixed_symbol[s.second] == s.first)
        throw StructureError("identification " + quad_text(g) +
                             ": glues a boundary fixed point, so three or more cells would meet");
      used[s] = k;
    }
  }

  const auto table = gluing_set(spec.identifications);
  for (const auto& g : spec.symmetry_generators) {
    if (!is_permutation_of(g, m)) throw StructureError("symmetry " + perm_text(g) + ": not a permutation of the boundary");
    auto pi = induced_symbol_permutation(spec, g);
    std::vector<int> sorted = pi;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < N; ++i)
      if (sorted[i] != i) throw StructureError("symmetry " + perm_text(g) + ": induced symbol map is not a bijection");
    std::vector<Gluing> mapped;
    for (const auto& q : spec.identifications) mapped.push_back({pi[q.i], g[q.a], pi[q.j], g[q.b]});
    if (gluing_set(mapped) != table)
      throw StructureError("symmetry " + perm_text(g) + ": does not preserve the identification table");
  }

  if (!spec.coords.empty() && static_cast<int>(spec.coords.size()) != m)
    throw StructureError("coords must list one point per boundary vertex");

  Permutation id(m);
  std::iota(id.begin(), id.end(), 0);
  std::vector<Permutation> group{id};
  std::set<Permutation> seen{id};
  for (std::size_t k = 0; k < group.size(); ++k) {
    for (const auto& g : spec.symmetry_generators) {
      auto h = compose(group[k], g);
      if (seen.insert(h).second) group.push_back(h);
    }
  }
  spec.group = std::move(group);
}

StructureSpec parse_structure_spec(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw StructureError(std::string("schema violation: ") + e.what());
  }
  if (!root.IsMap()) throw StructureError("schema violation: document must be a key/value map");

  auto need = [&](const char* key) {
    if (!root[key]) throw StructureError(std::string("schema violation: missing key '") + key + "'");
    return root[key];
  };
  StructureSpec spec;
  try {
    if (root["name"]) spec.name = root["name"].as<std::string>();
    spec.symbol_count = need("symbols").as<int>();
    spec.boundary_count = need("boundary").as<int>();
    for (const auto& q : need("identify")) {
      if (!q.IsSequence() || q.size() != 4) throw StructureError("schema violation: identify entries are [i,a,j,b]");
      spec.identifications.push_back({q[0].as<int>() - 1, q[1].as<int>() - 1, q[2].as<int>() - 1, q[3].as<int>() - 1});
    }
    if (root["symmetry"]) {
      for (const auto& g : root["symmetry"]) {
        Permutation perm;
        for (const auto& x : g) perm.push_back(x.as<int>() - 1);
        spec.symmetry_generators.push_back(std::move(perm));
      }
    }
    spec.boundary_fixed_symbol.assign(spec.boundary_count, -1);
    for (const auto& kv : need("fixed")) {
      int a = kv.first.as<int>() - 1;
      if (a < 0 || a >= spec.boundary_count)
        throw StructureError("schema violation: fixed key " + std::to_string(a + 1) + " out of range");
      spec.boundary_fixed_symbol[a] = kv.second.as<int>() - 1;
    }
    if (root["coords"]) {
      for (const auto& c : root["coords"]) {
        if (c.size() != 2) throw StructureError("schema violation: coords entries are [x,y]");
        spec.coords.push_back({c[0].as<double>(), c[1].as<double>()});
      }
    }
  } catch (const YAML::Exception& e) {
    throw StructureError(std::string("schema violation: ") + e.what());
  }
  validate_structure(spec);
  return spec;
}

StructureSpec preset_structure(std::string_view name) {
  if (name == "sg") {
    return parse_structure_spec(
        "name: sg\n"
        "symbols: 3\n"
        "boundary: 3\n"
        "identify: [[1,2,2,1],[1,3,3,1],[2,3,3,2]]\n"
        "symmetry: [[1,3,2],[3,2,1]]\n"
        "fixed: {1: 1, 2: 2, 3: 3}\n"
        "coords: [[0,0],[1,0],[0.5,0.8660254037844386]]\n");
  }
  if (name == "vicsek") {
    return parse_structure_spec(
        "name: vicsek\n"
        "symbols: 5\n"
        "boundary: 4\n"
        "identify: [[1,3,5,1],[2,4,5,2],[3,1,5,3],[4,2,5,4]]\n"
        "symmetry: [[2,3,4,1],[1,4,3,2]]\n"
        "fixed: {1: 1, 2: 2, 3: 3, 4: 4}\n"
        "coords: [[0,0],[1,0],[1,1],[0,1]]\n");
  }
  throw StructureError("unknown preset '" + std::string(name) + "'");
}

StructureSpec load_structure(const std::string& name_or_path) {
  if (name_or_path == "sg" || name_or_path == "vicsek") return preset_structure(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw StructureError("cannot open structure document '" + name_or_path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto spec = parse_structure_spec(buffer.str());
  if (spec.name.empty()) spec.name = name_or_path;
  return spec;
}

std::vector<double> apply_symmetry(const StructureSpec& spec, const Permutation& g, std::span<const double> u) {
  if (std::find(spec.group.begin(), spec.group.end(), g) == spec.group.end())
    throw StructureError("permutation " + perm_text(g) + " is not an element of the symmetry group");
  if (static_cast<int>(u.size()) != spec.boundary_count) throw StructureError("boundary data has wrong length");
  std::vector<double> out(u.size());
  for (std::size_t a = 0; a < u.size(); ++a) out[a] = u[g[a]];
  return out;
}

std::uint64_t cell_count(int N, int level) {
  std::uint64_t c = 1;
  for (int k = 0; k < level; ++k) c *= static_cast<std::uint64_t>(N);
  return c;
}

std::uint64_t word_index(const Word& w, int N) {
  std::uint64_t idx = 0;
  for (int s : w) idx = idx * N + s;
  return idx;
}

Word word_from_index(std::uint64_t index, int length, int N) {
  Word w(length);
  for (int k = length - 1; k >= 0; --k) {
    w[k] = static_cast<int>(index % N);
    index /= N;
  }
  return w;
}

std::string word_string(const Word& w) {
  std::string s;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] >= 9 && k) s += '.';
    s += std::to_string(w[k] + 1);
  }
  return s;
}

Word parse_word(std::string_view text, int N) {
  Word w;
  for (char c : text) {
    if (c < '1' || c > '9' || c - '1' >= N) throw StructureError("invalid word '" + std::string(text) + "'");
    w.push_back(c - '1');
  }
  return w;
}

VertexNet build_net(const StructureSpec& spec, int n, std::size_t slot_cap) {
  if (n < 0) throw StructureError("level must be non-negative");
  const int N = spec.symbol_count, m = spec.boundary_count;
  const std::uint64_t cells = cell_count(N, n);
  const std::uint64_t slots = cells * m;
  if (slots > slot_cap || slots > 0xffffffffull)
    throw StructureError("resource limit exceeded: level " + std::to_string(n) + " needs " + std::to_string(slots) +
                         " slots (cap " + std::to_string(slot_cap) + ")");

  // fixed-symbol tails: cell index of (prefix, i, f^t) = ((prefix*N + i) * N^t) + f*(N^t - 1)/(N - 1)
  std::vector<std::uint64_t> pow(n + 1, 1), tail(m * (n + 1), 0);
  for (int t = 1; t <= n; ++t) pow[t] = pow[t - 1] * N;
  for (int a = 0; a < m; ++a)
    for (int t = 1; t <= n; ++t) tail[a * (n + 1) + t] = tail[a * (n + 1) + t - 1] * N + spec.boundary_fixed_symbol[a];

  UnionFind uf(slots);
  for (int k = 0; k < n; ++k) {
    const int t = n - k - 1;
    for (std::uint64_t v = 0; v < pow[k]; ++v) {
      for (const auto& g : spec.identifications) {
        std::uint64_t c1 = (v * N + g.i) * pow[t] + tail[g.a * (n + 1) + t];
        std::uint64_t c2 = (v * N + g.j) * pow[t] + tail[g.b * (n + 1) + t];
        uf.unite(static_cast<std::uint32_t>(c1 * m + g.a), static_cast<std::uint32_t>(c2 * m + g.b));
      }
    }
  }

  VertexNet net;
  net.level = n;
  net.symbol_count = N;
  net.boundary_count = m;
  net.cell_map.assign(slots, -1);
  int next = 0;
  for (std::uint64_t s = 0; s < slots; ++s) {
    std::uint32_t r = uf.find(static_cast<std::uint32_t>(s));
    if (r == s) net.cell_map[s] = next++;
    else net.cell_map[s] = net.cell_map[r];
  }
  net.vertex_count = next;
  std::vector<char> is_boundary(next, 0);
  for (int a = 0; a < m; ++a) {
    int id = net.cell_map[tail[a * (n + 1) + n] * m + a];
    net.boundary_ids.push_back(id);
    is_boundary[id] = 1;
  }
  for (int x = 0; x < next; ++x)
    if (!is_boundary[x]) net.interior_ids.push_back(x);
  return net;
}

std::vector<int> cell_vertex_ids(const VertexNet& net, const Word& w) {
  if (static_cast<int>(w.size()) != net.level)
    throw StructureError("word length " + std::to_string(w.size()) + " does not match net level " +
                         std::to_string(net.level));
  for (int s : w)
    if (s < 0 || s >= net.symbol_count) throw StructureError("word symbol out of range");
  auto ids = net.cell(word_index(w, net.symbol_count));
  return {ids.begin(), ids.end()};
}

std::vector<int> net_symmetry(const StructureSpec& spec, const VertexNet& net, const Permutation& g) {
  const int N = net.symbol_count, m = net.boundary_count, n = net.level;
  auto pi = induced_symbol_permutation(spec, g);
  std::vector<int> image(net.vertex_count, -1);
  for (std::uint64_t c = 0; c < net.cells(); ++c) {
    Word w = word_from_index(c, n, N);
    for (auto& s : w) s = pi[s];
    auto target = net.cell(word_index(w, N));
    auto source = net.cell(c);
    for (int a = 0; a < m; ++a) {
      int x = source[a], y = target[g[a]];
      if (image[x] == -1) image[x] = y;
      else if (image[x] != y) throw StructureError("symmetry " + perm_text(g) + " is not well defined on the net");
    }
  }
  return image;
}

std::vector<int> refine_ids(const StructureSpec& spec, const VertexNet& coarse, const VertexNet& fine) {
  const int N = spec.symbol_count, m = spec.boundary_count;
  const int t = fine.level - coarse.level;
  if (t < 0) throw StructureError("refine_ids needs a finer net");
  std::vector<int> out(coarse.vertex_count, -1);
  for (std::uint64_t c = 0; c < coarse.cells(); ++c) {
    for (int a = 0; a < m; ++a) {
      std::uint64_t f = c;
      for (int k = 0; k < t; ++k) f = f * N + spec.boundary_fixed_symbol[a];
      out[coarse.cell(c)[a]] = fine.cell(f)[a];
    }
  }
  return out;
}

std::vector<std::pair<std::uint64_t, int>> vertex_slots(const VertexNet& net, int vertex) {
  std::vector<std::pair<std::uint64_t, int>> out;
  const int m = net.boundary_count;
  for (std::size_t s = 0; s < net.cell_map.size(); ++s)
    if (net.cell_map[s] == vertex) out.emplace_back(s / m, static_cast<int>(s % m));
  return out;
}

}  // namespace penergy
