#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "cdkit/error.hpp"
#include "cdkit/graph.hpp"
#include "support.hpp"

using namespace cdkit;
using cdkit::support::random_dag;

namespace {

MixedGraph chain() {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_directed("B", "C");
  return g;
}

MixedGraph collider() {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_directed("C", "B");
  return g;
}

// d-separation by enumerating every simple path of the skeleton.
bool dsep_by_paths(const MixedGraph& g, std::size_t x, std::size_t y, const std::set<std::size_t>& s) {
  const auto p = g.size();
  std::vector<std::vector<char>> desc(p, std::vector<char>(p, 0));
  for (std::size_t v = 0; v < p; ++v) {
    std::vector<std::size_t> stack{v};
    desc[v][v] = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto c : g.children(u))
        if (!desc[v][c]) desc[v][c] = 1, stack.push_back(c);
    }
  }
  auto activates = [&](std::size_t c) {
    for (auto z : s)
      if (desc[c][z]) return true;
    return false;
  };
  std::vector<std::size_t> path{x};
  std::vector<char> on(p, 0);
  on[x] = 1;
  std::function<bool(std::size_t)> open_path = [&](std::size_t u) -> bool {
    if (u == y) {
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        auto a = path[k - 1], m = path[k], b = path[k + 1];
        bool is_collider = g.is_directed(a, m) && g.is_directed(b, m);
        if (is_collider ? !activates(m) : s.count(m) > 0) return false;
      }
      return true;
    }
    for (auto w : g.adjacents(u)) {
      if (on[w]) continue;
      on[w] = 1;
      path.push_back(w);
      bool found = open_path(w);
      path.pop_back();
      on[w] = 0;
      if (found) return true;
    }
    return false;
  };
  return !open_path(x);
}

std::set<std::array<std::size_t, 3>> v_structures(const MixedGraph& g) {
  std::set<std::array<std::size_t, 3>> out;
  for (std::size_t z = 0; z < g.size(); ++z) {
    auto pa = g.parents(z);
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = i + 1; j < pa.size(); ++j)
        if (!g.adjacent(pa[i], pa[j])) out.insert({std::min(pa[i], pa[j]), z, std::max(pa[i], pa[j])});
  }
  return out;
}

// Every DAG that orients the CPDAG's undirected edges without new cycles or
// v-structures.
std::vector<MixedGraph> extensions(const MixedGraph& cpdag) {
  std::vector<Edge> undirected;
  for (const auto& e : cpdag.edges())
    if (cpdag.is_undirected(e.a, e.b)) undirected.push_back(e);
  const auto base_v = v_structures(cpdag);
  std::vector<MixedGraph> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << undirected.size()); ++mask) {
    MixedGraph g = cpdag;
    for (std::size_t k = 0; k < undirected.size(); ++k) {
      const auto& e = undirected[k];
      if (mask >> k & 1) g.add_directed(e.a, e.b);
      else g.add_directed(e.b, e.a);
    }
    if (g.directed_cycle()) continue;
    if (v_structures(g) != base_v) continue;
    out.push_back(g);
  }
  return out;
}

}  // namespace

TEST(MixedGraph, RejectsSelfLoopsAndKeepsOneEdgePerPair) {
  MixedGraph g({"A", "B"});
  EXPECT_THROW(g.add_directed(0, 0), GraphError);
  g.add_directed("A", "B");
  g.add_undirected("A", "B");
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_TRUE(g.is_undirected(0, 1));
}

TEST(MixedGraph, DuplicateNodeNamesRejected) { EXPECT_THROW(MixedGraph({"A", "A"}), GraphError); }

TEST(DSeparation, ChainBlockedByMiddle) {
  auto g = chain();
  EXPECT_TRUE(d_separated(g, "A", "C", {"B"}));
  EXPECT_FALSE(d_separated(g, "A", "C", {}));
}

TEST(DSeparation, ColliderActivatedByConditioning) {
  auto g = collider();
  EXPECT_TRUE(d_separated(g, "A", "C", {}));
  EXPECT_FALSE(d_separated(g, "A", "C", {"B"}));
}

TEST(DSeparation, DescendantOfColliderActivates) {
  MixedGraph g({"A", "B", "C", "D"});
  g.add_directed("A", "B");
  g.add_directed("C", "B");
  g.add_directed("B", "D");
  EXPECT_FALSE(d_separated(g, "A", "C", {"D"}));
}

TEST(DSeparation, UnknownNodeThrows) { EXPECT_THROW(d_separated(chain(), "A", "Z", {}), GraphError); }

TEST(DSeparation, AgreesWithPathEnumerationOnRandomDags) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t p = rep % 2 ? 6 : 7;
    auto g = random_dag(p, 0.35, rng);
    for (std::size_t x = 0; x < p; ++x) {
      for (std::size_t y = x + 1; y < p; ++y) {
        std::vector<std::size_t> rest;
        for (std::size_t v = 0; v < p; ++v)
          if (v != x && v != y) rest.push_back(v);
        for (std::size_t mask = 0; mask < (std::size_t{1} << rest.size()); ++mask) {
          std::vector<std::size_t> s;
          std::set<std::size_t> ss;
          for (std::size_t k = 0; k < rest.size(); ++k)
            if (mask >> k & 1) s.push_back(rest[k]), ss.insert(rest[k]);
          const bool fast = d_separated(g, x, y, s);
          ASSERT_EQ(fast, dsep_by_paths(g, x, y, ss)) << "rep " << rep;
          ASSERT_EQ(fast, d_separated(g, y, x, s));
        }
      }
    }
  }
}

TEST(Cpdag, ChainIsUndirected) {
  auto c = cpdag_of(chain());
  EXPECT_TRUE(c.is_undirected(0, 1));
  EXPECT_TRUE(c.is_undirected(1, 2));
}

TEST(Cpdag, ColliderIsKept) {
  auto c = cpdag_of(collider());
  EXPECT_TRUE(c.is_directed(0, 1));
  EXPECT_TRUE(c.is_directed(2, 1));
}

TEST(Cpdag, CyclicInputThrows) {
  MixedGraph g({"A", "B"});
  g.add_directed("A", "B");
  MixedGraph h({"A", "B", "C"});
  h.add_directed("A", "B");
  h.add_directed("B", "C");
  h.add_directed("C", "A");
  EXPECT_THROW(cpdag_of(h), GraphError);
}

TEST(Cpdag, MatchesEquivalenceClassEnumeration) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<std::size_t> size(3, 10);
    auto dag = random_dag(size(rng), 0.3, rng);
    auto cpdag = cpdag_of(dag);
    auto members = extensions(cpdag);
    ASSERT_FALSE(members.empty());
    bool contains_truth = false;
    for (const auto& m : members) {
      contains_truth = contains_truth || m == dag;
      EXPECT_EQ(v_structures(m), v_structures(dag));
      // Re-deriving from any member gives the same CPDAG.
      EXPECT_EQ(cpdag_of(m), cpdag);
    }
    EXPECT_TRUE(contains_truth);
    // Completeness: each undirected edge takes both orientations in the class.
    for (const auto& e : cpdag.edges()) {
      if (!cpdag.is_undirected(e.a, e.b)) continue;
      bool fwd = false, back = false;
      for (const auto& m : members) {
        fwd = fwd || m.is_directed(e.a, e.b);
        back = back || m.is_directed(e.b, e.a);
      }
      EXPECT_TRUE(fwd && back) << edge_text(cpdag, e.a, e.b);
    }
  }
}

TEST(Meek, RuleOneOrientsAwayFromArrow) {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_undirected("B", "C");
  auto m = meek_closure(g);
  EXPECT_TRUE(m.is_directed(1, 2));
}

TEST(Meek, TierOrientsEarlierToLater) {
  MixedGraph g({"A", "B"});
  g.add_undirected("A", "B");
  Knowledge k;
  k.set_tier("A", 1);
  k.set_tier("B", 2);
  EXPECT_TRUE(meek_closure(g, k).is_directed(0, 1));
}

TEST(Meek, UndirectedTriangleUnchanged) {
  MixedGraph g({"A", "B", "C"});
  g.add_undirected("A", "B");
  g.add_undirected("B", "C");
  g.add_undirected("A", "C");
  EXPECT_EQ(meek_closure(g), g);
}

TEST(Meek, BidirectedEdgesSurviveAndAreNotEvidence) {
  MixedGraph g({"A", "B", "C"});
  g.add_bidirected(0, 1);
  g.add_undirected("B", "C");
  auto m = meek_closure(g);
  EXPECT_TRUE(m.is_bidirected(0, 1));
  EXPECT_TRUE(m.is_undirected(1, 2));
}

TEST(Meek, KnowledgeCycleIsReported) {
  MixedGraph g({"A", "B", "C"});
  g.add_undirected("A", "B");
  g.add_undirected("B", "C");
  g.add_undirected("A", "C");
  Knowledge k;
  k.require("A", "B");
  k.require("B", "C");
  k.require("C", "A");
  try {
    meek_closure(g, k);
    FAIL() << "expected GraphError";
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
  }
}

TEST(Meek, MonotoneAndIdempotentOnRandomPatterns) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    auto dag = random_dag(8, 0.3, rng);
    auto pattern = pattern_of(dag);
    auto once = meek_closure(pattern);
    EXPECT_EQ(meek_closure(once), once);
    for (const auto& e : pattern.edges()) {
      if (pattern.is_directed(e.a, e.b)) EXPECT_TRUE(once.is_directed(e.a, e.b));
      if (pattern.is_directed(e.b, e.a)) EXPECT_TRUE(once.is_directed(e.b, e.a));
    }
  }
}

TEST(Shd, Examples) {
  auto g = chain();
  EXPECT_EQ(shd(g, g), 0u);
  MixedGraph flipped({"A", "B", "C"});
  flipped.add_directed("B", "A");
  flipped.add_directed("B", "C");
  EXPECT_EQ(shd(g, flipped), 1u);
  MixedGraph empty(support::letters(5)), complete(support::letters(5));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b) complete.add_undirected(a, b);
  EXPECT_EQ(shd(empty, complete), 10u);
}

TEST(Shd, NodeSetMismatchThrows) {
  EXPECT_THROW(shd(MixedGraph({"A", "B"}), MixedGraph({"A", "C"})), GraphError);
}

TEST(Shd, IsAMetricOnRandomTriples) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    auto a = cpdag_of(random_dag(6, 0.4, rng));
    auto b = cpdag_of(random_dag(6, 0.4, rng));
    auto c = cpdag_of(random_dag(6, 0.4, rng));
    EXPECT_EQ(shd(a, b), shd(b, a));
    EXPECT_EQ(shd(a, b) == 0, a == b);
    EXPECT_LE(shd(a, c), shd(a, b) + shd(b, c));
  }
}

TEST(Shd, MatchesNodesByName) {
  auto g = chain();
  auto r = g.reordered({"C", "A", "B"});
  EXPECT_EQ(shd(g, r), 0u);
}

TEST(Score, PerfectAgainstItself) {
  auto c = cpdag_of(collider());
  auto s = score(c, c);
  EXPECT_DOUBLE_EQ(s.adjacency_precision, 1.0);
  EXPECT_DOUBLE_EQ(s.adjacency_recall, 1.0);
  EXPECT_DOUBLE_EQ(s.arrowhead_precision, 1.0);
  EXPECT_DOUBLE_EQ(s.arrowhead_recall, 1.0);
}

TEST(Score, CountsMissingAdjacency) {
  auto truth = chain();
  MixedGraph est({"A", "B", "C"});
  est.add_undirected("A", "B");
  auto s = score(est, truth);
  EXPECT_DOUBLE_EQ(s.adjacency_precision, 1.0);
  EXPECT_DOUBLE_EQ(s.adjacency_recall, 0.5);
}

TEST(Serialization, DotDirectedEdge) {
  MixedGraph g({"A", "B"});
  g.add_directed("A", "B");
  auto dot = to_dot(g);
  EXPECT_NE(dot.find("\"A\" -> \"B\";"), std::string::npos);
  EXPECT_EQ(dot.find("dir="), std::string::npos);
}

TEST(Serialization, DotBidirectedEdge) {
  MixedGraph g({"A", "B"});
  g.add_bidirected(0, 1);
  EXPECT_NE(to_dot(g).find("dir=both"), std::string::npos);
}

TEST(Serialization, JsonRoundTripOnRandomGraphs) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto g = cpdag_of(random_dag(7, 0.4, rng));
    if (rep % 3 == 0 && g.num_edges() > 0) {
      auto e = g.edges().front();
      g.add_bidirected(e.a, e.b);
    }
    EXPECT_EQ(from_json(to_json(g)), g);
  }
}

TEST(Serialization, MalformedJsonReportsPosition) {
  try {
    from_json("{\"nodes\": [\"A\", }");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

TEST(Serialization, ManifestDigestCarried) {
  auto text = to_json(chain(), "abc123");
  EXPECT_NE(text.find("\"manifest\": \"abc123\""), std::string::npos);
  EXPECT_EQ(from_json(text), chain());
}
