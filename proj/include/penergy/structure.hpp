#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace penergy {

/// Thrown for malformed or inconsistent structure descriptions.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symbols are stored 0-based; text I/O uses 1-based symbols.
using Word = std::vector<int>;

/// F_i(q_a) is glued to F_j(q_b); all indices 0-based.
struct Gluing {
  int i, a, j, b;
};

/// A permutation of V_0; `g[a]` is the image of boundary vertex a.
using Permutation = std::vector<int>;

struct StructureSpec {
  std::string name;
  int symbol_count = 0;
  int boundary_count = 0;
  std::vector<Gluing> identifications;
  std::vector<Permutation> symmetry_generators;
  std::vector<int> boundary_fixed_symbol;
  std::vector<std::array<double, 2>> coords;

  /// Filled by validation: every element of the generated group, identity first.
  std::vector<Permutation> group;

  int N() const { return symbol_count; }
  int m() const { return boundary_count; }
};

/// Checks the invariants and fills `group`. Throws StructureError naming the offending entry.
void validate_structure(StructureSpec& spec);

/// Parses the key/value (YAML flow) document: symbols, boundary, identify, symmetry, fixed, coords.
StructureSpec parse_structure_spec(std::string_view document);

/// "sg" or "vicsek".
StructureSpec preset_structure(std::string_view name);

/// A preset name, or otherwise a path to a structure document.
StructureSpec load_structure(const std::string& name_or_path);

/// The symbol permutation induced by a boundary permutation.
std::vector<int> induced_symbol_permutation(const StructureSpec& spec, const Permutation& g);

/// u∘g. Throws if g is not a group element.
std::vector<double> apply_symmetry(const StructureSpec& spec, const Permutation& g,
                                   std::span<const double> u);

Permutation compose(const Permutation& g, const Permutation& h);  // (g∘h)[a] = g[h[a]]

// Words are indexed lexicographically: index = sum w_k N^(n-1-k).
std::uint64_t word_index(const Word& w, int N);
Word word_from_index(std::uint64_t index, int length, int N);
std::string word_string(const Word& w);  // 1-based symbols, "" for the empty word
Word parse_word(std::string_view text, int N);
std::uint64_t cell_count(int N, int level);

struct VertexNet {
  int level = 0;
  int symbol_count = 0;
  int boundary_count = 0;
  int vertex_count = 0;
  std::vector<int> cell_map;  // cell index * m + local index -> vertex id
  std::vector<int> boundary_ids;
  std::vector<int> interior_ids;

  std::uint64_t cells() const { return cell_map.size() / static_cast<std::size_t>(boundary_count); }
  std::span<const int> cell(std::uint64_t index) const {
    return {cell_map.data() + index * boundary_count, static_cast<std::size_t>(boundary_count)};
  }
};

inline constexpr std::size_t kDefaultSlotCap = std::size_t{1} << 27;

VertexNet build_net(const StructureSpec& spec, int n, std::size_t slot_cap = kDefaultSlotCap);

std::vector<int> cell_vertex_ids(const VertexNet& net, const Word& w);

/// Vertex permutation of V_n induced by g: vertex of (w, a) maps to vertex of (π(w), g(a)).
/// Throws if the map is not well defined on glued classes.
std::vector<int> net_symmetry(const StructureSpec& spec, const VertexNet& net, const Permutation& g);

/// For each vertex of `coarse`, its id in `fine` (same spec, deeper level).
std::vector<int> refine_ids(const StructureSpec& spec, const VertexNet& coarse, const VertexNet& fine);

/// (cell index, local index) slots whose vertex is `vertex`.
std::vector<std::pair<std::uint64_t, int>> vertex_slots(const VertexNet& net, int vertex);

}  // namespace penergy
