#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "penergy/structure.hpp"

using namespace penergy;

TEST(Structure, PresetsValidate) {
  auto sg = preset_structure("sg");
  EXPECT_EQ(sg.N(), 3);
  EXPECT_EQ(sg.m(), 3);
  EXPECT_EQ(sg.group.size(), 6u);
  EXPECT_EQ(sg.group.front(), (Permutation{0, 1, 2}));

  auto v = preset_structure("vicsek");
  EXPECT_EQ(v.N(), 5);
  EXPECT_EQ(v.m(), 4);
  EXPECT_EQ(v.group.size(), 8u);
}

TEST(Structure, UnknownPresetThrows) {
  EXPECT_THROW(preset_structure("carpet"), StructureError);
  EXPECT_THROW(load_structure("/nonexistent/structure.yaml"), StructureError);
}

TEST(Structure, MalformedDocumentsAreRejected) {
  const char* missing_key = "symbols: 3\nboundary: 3\nidentify: []\nsymmetry: []\ncoords: [[0,0],[1,0],[0,1]]\n";
  EXPECT_THROW(parse_structure_spec(missing_key), StructureError);

  const char* self_glue =
      "symbols: 3\nboundary: 3\nidentify: [[1,2,1,3]]\nsymmetry: []\nfixed: {1: 1, 2: 2, 3: 3}\n"
      "coords: [[0,0],[1,0],[0,1]]\n";
  EXPECT_THROW(parse_structure_spec(self_glue), StructureError);

  const char* bad_symmetry =
      "symbols: 3\nboundary: 3\nidentify: [[1,2,2,1],[1,3,3,1],[2,3,3,2]]\nsymmetry: [[1,1,2]]\n"
      "fixed: {1: 1, 2: 2, 3: 3}\ncoords: [[0,0],[1,0],[0,1]]\n";
  EXPECT_THROW(parse_structure_spec(bad_symmetry), StructureError);

  EXPECT_THROW(parse_structure_spec("[1, 2, 3]"), StructureError);
}

TEST(Structure, WordsRoundTrip) {
  Word w{0, 2, 1};
  EXPECT_EQ(word_string(w), "132");
  EXPECT_EQ(parse_word("132", 3), w);
  EXPECT_EQ(word_string({}), "");
  EXPECT_EQ(word_index(w, 3), 0u * 9 + 2 * 3 + 1);
  for (std::uint64_t i = 0; i < cell_count(5, 3); ++i) EXPECT_EQ(word_index(word_from_index(i, 3, 5), 5), i);
  EXPECT_THROW(parse_word("14", 3), StructureError);
  EXPECT_THROW(parse_word("1a", 3), StructureError);
}

TEST(Structure, VertexCounts) {
  auto sg = preset_structure("sg");
  auto vi = preset_structure("vicsek");
  int pow3 = 3, pow5 = 1;
  for (int n = 0; n <= 5; ++n) {
    auto net = build_net(sg, n);
    EXPECT_EQ(net.vertex_count, (pow3 + 3) / 2) << "sg level " << n;
    EXPECT_EQ(net.cells(), cell_count(3, n));
    EXPECT_EQ(net.boundary_ids.size(), 3u);
    EXPECT_EQ(net.interior_ids.size() + 3, static_cast<std::size_t>(net.vertex_count));
    auto vn = build_net(vi, n);
    EXPECT_EQ(vn.vertex_count, 3 * pow5 + 1) << "vicsek level " << n;
    pow3 *= 3;
    pow5 *= 5;
  }
}

TEST(Structure, NetsGlueAtJunctions) {
  auto sg = preset_structure("sg");
  auto net = build_net(sg, 1);
  // F_1(q_2) = F_2(q_1)
  EXPECT_EQ(cell_vertex_ids(net, {0})[1], cell_vertex_ids(net, {1})[0]);
  EXPECT_NE(cell_vertex_ids(net, {0})[1], cell_vertex_ids(net, {0})[2]);
  // the three interior vertices of V_1 each lie in two cells
  for (int x : net.interior_ids) EXPECT_EQ(vertex_slots(net, x).size(), 2u);
  for (int x : net.boundary_ids) EXPECT_EQ(vertex_slots(net, x).size(), 1u);
}

TEST(Structure, ResourceLimit) {
  auto sg = preset_structure("sg");
  EXPECT_THROW(build_net(sg, 12, 1000), StructureError);
}

TEST(Structure, SymmetriesActOnNets) {
  for (const char* name : {"sg", "vicsek"}) {
    auto spec = preset_structure(name);
    auto net = build_net(spec, 3);
    for (const auto& g : spec.group) {
      auto image = net_symmetry(spec, net, g);
      std::set<int> seen(image.begin(), image.end());
      EXPECT_EQ(static_cast<int>(seen.size()), net.vertex_count) << name;
      for (int a = 0; a < spec.m(); ++a) EXPECT_EQ(image[net.boundary_ids[a]], net.boundary_ids[g[a]]);
    }
  }
}

TEST(Structure, ApplySymmetry) {
  auto sg = preset_structure("sg");
  std::vector<double> u{1, 2, 3};
  auto r = apply_symmetry(sg, {2, 1, 0}, u);
  EXPECT_EQ(r, (std::vector<double>{3, 2, 1}));
  EXPECT_THROW(apply_symmetry(sg, {0, 0, 1}, u), StructureError);
  auto id = compose(Permutation{1, 2, 0}, Permutation{2, 0, 1});
  EXPECT_EQ(id, (Permutation{0, 1, 2}));
}

TEST(Structure, RefinementKeepsCoarseVertices) {
  auto spec = preset_structure("vicsek");
  auto coarse = build_net(spec, 1);
  auto fine = build_net(spec, 3);
  auto ids = refine_ids(spec, coarse, fine);
  ASSERT_EQ(static_cast<int>(ids.size()), coarse.vertex_count);
  std::set<int> distinct(ids.begin(), ids.end());
  EXPECT_EQ(distinct.size(), ids.size());
  for (int a = 0; a < spec.m(); ++a) EXPECT_EQ(ids[coarse.boundary_ids[a]], fine.boundary_ids[a]);
}
