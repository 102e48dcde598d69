#include <gtest/gtest.h>

#include <algorithm>

#include "cdkit/effects.hpp"
#include "cdkit/error.hpp"
#include "cdkit/synth.hpp"

using namespace cdkit;

namespace {

NodeSpec linear(const std::string& name, std::map<std::string, double> coefs) {
  NodeSpec n{name, Scale::continuous, {}, std::nullopt, {}};
  for (const auto& [p, c] : coefs) n.mechanism.coefficients[p] = {c};
  return n;
}

GenerativeSpec make_spec(const std::vector<NodeSpec>& nodes) {
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& n : nodes)
    for (const auto& [p, c] : n.mechanism.coefficients) parents[n.name].push_back(p);
  return GenerativeSpec::from_parents(nodes, parents);
}

}  // namespace

TEST(Ida, DirectedEdgeGivesSingleValue) {
  auto spec = make_spec({linear("X", {}), linear("Y", {{"X", 2.0}})});
  auto data = generate(spec, 10000, 1);
  MixedGraph g({"X", "Y"});
  g.add_directed("X", "Y");
  auto e = ida_local(g, data, "X", "Y");
  ASSERT_EQ(e.values.size(), 1u);
  EXPECT_NEAR(e.values[0], 2.0, 0.05);
  EXPECT_EQ(e.bounds.first, e.bounds.second);
}

TEST(Ida, ChainTotalEffect) {
  auto spec = make_spec({linear("X", {}), linear("M", {{"X", 1.5}}), linear("Y", {{"M", 1.0}})});
  auto data = generate(spec, 10000, 2);
  MixedGraph g({"M", "X", "Y"});
  g.add_directed("X", "M");
  g.add_directed("M", "Y");
  auto e = ida_local(g, data, "X", "Y");
  ASSERT_EQ(e.values.size(), 1u);
  EXPECT_NEAR(e.values[0], 1.5, 0.05);
}

TEST(Ida, OneUndirectedNeighbourGivesTwoValues) {
  // Z -> X -> Y <- W; the CPDAG keeps X - Z undirected.
  auto spec = make_spec({linear("W", {}), linear("Z", {}), linear("X", {{"Z", 0.8}}),
                         linear("Y", {{"X", 1.0}, {"W", 0.7}})});
  auto data = generate(spec, 5000, 3);
  MixedGraph g({"W", "X", "Y", "Z"});
  g.add_undirected("X", "Z");
  g.add_directed("X", "Y");
  g.add_directed("W", "Y");
  auto e = ida_local(g, data, "X", "Y");
  ASSERT_EQ(e.values.size(), 2u);
  EXPECT_EQ(e.parent_sets[0], std::vector<std::string>{});
  EXPECT_EQ(e.parent_sets[1], std::vector<std::string>{"Z"});
  EXPECT_EQ(e.bounds.first, *std::min_element(e.values.begin(), e.values.end()));
  EXPECT_EQ(e.bounds.second, *std::max_element(e.values.begin(), e.values.end()));
}

TEST(Ida, AmbiguousDirectionIncludesZero) {
  // X - Y undirected: either X causes Y or Y is a parent of X.
  auto spec = make_spec({linear("X", {}), linear("Y", {{"X", 1.0}})});
  auto data = generate(spec, 5000, 4);
  MixedGraph g({"X", "Y"});
  g.add_undirected("X", "Y");
  auto e = ida_local(g, data, "X", "Y");
  ASSERT_EQ(e.values.size(), 2u);
  EXPECT_NEAR(e.values[0], 1.0, 0.05);
  EXPECT_EQ(e.values[1], 0.0);
}

TEST(Ida, NonDescendantHasZeroEffect) {
  auto spec = make_spec({linear("X", {}), linear("Y", {}), linear("Z", {{"X", 1.0}, {"Y", 1.0}})});
  auto data = generate(spec, 10000, 5);
  MixedGraph g({"X", "Y", "Z"});
  g.add_directed("X", "Z");
  g.add_directed("Y", "Z");
  auto e = ida_local(g, data, "X", "Y");
  for (double v : e.values) EXPECT_NEAR(v, 0.0, 0.05);
}

TEST(Ida, SiblingsMustNotCreateVStructures) {
  // X has undirected neighbours A and B that are not adjacent: {A, B} together
  // would form a new collider at X.
  auto spec = make_spec({linear("X", {}), linear("A", {{"X", 1.0}}), linear("B", {{"X", 1.0}}),
                         linear("Y", {{"X", 1.0}})});
  auto data = generate(spec, 2000, 6);
  MixedGraph g({"A", "B", "X", "Y"});
  g.add_undirected("A", "X");
  g.add_undirected("B", "X");
  g.add_undirected("X", "Y");
  auto e = ida_local(g, data, "X", "Y");
  EXPECT_EQ(e.values.size(), 4u);
  for (const auto& s : e.parent_sets) EXPECT_LE(s.size(), 1u);
}

TEST(Ida, SelfEffectIsOne) {
  auto data = generate(make_spec({linear("X", {})}), 10, 1);
  MixedGraph g({"X"});
  auto e = ida_local(g, data, "X", "X");
  EXPECT_EQ(e.values, std::vector<double>{1.0});
}

TEST(Ida, InvalidGraphsRejected) {
  auto data = generate(make_spec({linear("A", {}), linear("B", {}), linear("C", {})}), 50, 1);
  MixedGraph conflict({"A", "B", "C"});
  conflict.add_directed("A", "B");
  conflict.add_directed("C", "B");
  conflict.set_mark(1, 2, Mark::arrow);
  conflict.set_mark(2, 1, Mark::arrow);
  EXPECT_THROW(ida_local(conflict, data, "A", "C"), GraphError);

  MixedGraph open({"A", "B", "C"});
  open.add_directed("A", "B");
  open.add_undirected("B", "C");
  try {
    ida_local(open, data, "B", "C");
    FAIL() << "expected a graph error";
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("B --- C"), std::string::npos);
  }

  MixedGraph cycle({"A", "B", "C"});
  cycle.add_directed("A", "B");
  cycle.add_directed("B", "C");
  cycle.add_directed("C", "A");
  EXPECT_THROW(ida_local(cycle, data, "A", "C"), GraphError);
  EXPECT_FALSE(cpdag_violations(cycle).empty());
}

TEST(Ida, RequiresContinuousKnownVariables) {
  NodeSpec g{"G", Scale::categorical, {"a", "b"}, std::nullopt, {}};
  g.mechanism.kind = MechanismKind::multinomial;
  g.mechanism.table = {{0.5, 0.5}};
  auto data = generate(make_spec({g, linear("Y", {})}), 20, 1);
  MixedGraph graph({"G", "Y", "Q"});
  graph.add_directed("G", "Y");
  EXPECT_THROW(ida_local(graph, data, "G", "Y"), ValidationError);
  EXPECT_THROW(ida_local(graph, data, "Q", "Y"), ValidationError);
}

TEST(Ida, InvariantToRowOrder) {
  auto spec = make_spec({linear("Z", {}), linear("X", {{"Z", 0.5}}), linear("Y", {{"X", 1.0}, {"Z", 1.0}})});
  auto data = generate(spec, 500, 9);
  std::vector<std::size_t> rows(500);
  for (std::size_t i = 0; i < 500; ++i) rows[i] = 499 - i;
  auto reversed = data.select_rows(rows);
  MixedGraph g({"X", "Y", "Z"});
  g.add_undirected("X", "Y");
  g.add_undirected("X", "Z");
  g.add_undirected("Y", "Z");
  auto a = ida_local(g, data, "X", "Y"), b = ida_local(g, reversed, "X", "Y");
  ASSERT_EQ(a.values.size(), b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-10);
}
