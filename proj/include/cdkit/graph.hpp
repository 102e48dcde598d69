#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdkit/knowledge.hpp"

namespace cdkit {

enum class Mark : std::uint8_t { tail = 1, arrow = 2 };

// One edge with the mark at each endpoint. tail/arrow is a -> b, tail/tail is
// undirected, arrow/arrow is bi-directed (an orientation conflict).
struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  Mark mark_a = Mark::tail;
  Mark mark_b = Mark::tail;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Graph over named nodes with at most one edge per unordered pair and two
// endpoint marks per edge. Iteration helpers return nodes in name order.
class MixedGraph {
 public:
  MixedGraph() = default;
  explicit MixedGraph(std::vector<std::string> nodes);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& name(std::size_t i) const { return nodes_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;

  // Node indices sorted by name, and each index's position in that order.
  const std::vector<std::size_t>& name_order() const { return order_; }
  std::size_t rank(std::size_t i) const { return rank_[i]; }

  bool adjacent(std::size_t a, std::size_t b) const { return end(a, b) != 0; }
  // Mark at `at`'s end of the edge between `at` and `other`.
  std::optional<Mark> mark_at(std::size_t at, std::size_t other) const;
  bool is_directed(std::size_t from, std::size_t to) const {
    return end(from, to) == arrow_ && end(to, from) == tail_;
  }
  bool is_undirected(std::size_t a, std::size_t b) const { return end(a, b) == tail_ && end(b, a) == tail_; }
  bool is_bidirected(std::size_t a, std::size_t b) const { return end(a, b) == arrow_ && end(b, a) == arrow_; }

  void set_edge(std::size_t a, std::size_t b, Mark mark_a, Mark mark_b);
  void add_undirected(std::size_t a, std::size_t b) { set_edge(a, b, Mark::tail, Mark::tail); }
  void add_directed(std::size_t from, std::size_t to) { set_edge(from, to, Mark::tail, Mark::arrow); }
  void add_bidirected(std::size_t a, std::size_t b) { set_edge(a, b, Mark::arrow, Mark::arrow); }
  // Sets the mark at `at`'s end of an existing edge.
  void set_mark(std::size_t at, std::size_t other, Mark mark);
  void remove_edge(std::size_t a, std::size_t b);

  // Name-based conveniences.
  void add_directed(std::string_view from, std::string_view to) { add_directed(require_index(from), require_index(to)); }
  void add_undirected(std::string_view a, std::string_view b) { add_undirected(require_index(a), require_index(b)); }

  std::vector<std::size_t> adjacents(std::size_t v) const;
  std::vector<std::size_t> parents(std::size_t v) const;
  std::vector<std::size_t> children(std::size_t v) const;
  std::vector<std::size_t> undirected_neighbors(std::size_t v) const;

  // Edges with a < b by name rank, in name order.
  std::vector<Edge> edges() const;
  std::size_t num_edges() const;
  bool only_directed() const;
  bool has_bidirected() const;

  // A directed cycle among the directed edges, as a node sequence, if any.
  std::optional<std::vector<std::size_t>> directed_cycle() const;
  bool is_dag() const { return only_directed() && !directed_cycle(); }
  // Topological order of a DAG (ties broken by name); throws GraphError on a cycle.
  std::vector<std::size_t> topological_order() const;

  // Same graph with nodes listed in `order` (a permutation of the node names).
  MixedGraph reordered(const std::vector<std::string>& order) const;
  // Node-preserving copy without edges.
  MixedGraph empty_copy() const { return MixedGraph(nodes_); }

  friend bool operator==(const MixedGraph&, const MixedGraph&) = default;

 private:
  static constexpr std::uint8_t tail_ = static_cast<std::uint8_t>(Mark::tail);
  static constexpr std::uint8_t arrow_ = static_cast<std::uint8_t>(Mark::arrow);

  std::uint8_t end(std::size_t a, std::size_t b) const { return ends_[a * nodes_.size() + b]; }

  std::vector<std::string> nodes_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;
  // ends_[a * p + b]: mark at b's end of edge a-b (0 = no edge).
  std::vector<std::uint8_t> ends_;
};

// Separating sets recorded during skeleton search, keyed by unordered pair.
class SepsetTable {
 public:
  void set(std::size_t a, std::size_t b, std::vector<std::size_t> sepset);
  const std::vector<std::size_t>* get(std::size_t a, std::size_t b) const;
  bool contains(std::size_t a, std::size_t b) const { return get(a, b) != nullptr; }
  std::size_t size() const { return table_.size(); }
  const std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>& entries() const { return table_; }

  friend bool operator==(const SepsetTable&, const SepsetTable&) = default;

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> table_;
};

// d-separation of x and y given s in a DAG (reachability / Bayes-ball).
bool d_separated(const MixedGraph& dag, std::size_t x, std::size_t y, std::span<const std::size_t> s);
bool d_separated(const MixedGraph& dag, std::string_view x, std::string_view y,
                 const std::vector<std::string>& s);

// CPDAG (essential graph) of a DAG.
MixedGraph cpdag_of(const MixedGraph& dag);

// The skeleton with every unshielded collider of a DAG oriented.
MixedGraph pattern_of(const MixedGraph& dag);

// Meek rules 1-4 plus knowledge-implied orientations, to a fixpoint.
// Bi-directed edges are left untouched and never used as evidence.
// Throws GraphError if knowledge-forced orientations close a directed cycle.
MixedGraph meek_closure(const MixedGraph& g);
MixedGraph meek_closure(const MixedGraph& g, const Knowledge& knowledge);
MixedGraph meek_closure(const MixedGraph& g, const ResolvedKnowledge* knowledge);

// Unshielded triples (x, z, y) with x < y.
using TripleSet = std::set<std::array<std::size_t, 3>>;
// As above; rules 1 and 3 do not fire through the listed ambiguous triples.
MixedGraph meek_closure(const MixedGraph& g, const ResolvedKnowledge* knowledge, const TripleSet* ambiguous);

// Number of node pairs whose adjacency or endpoint marks differ. Nodes are
// matched by name; throws GraphError on a node-set mismatch.
std::size_t shd(const MixedGraph& g1, const MixedGraph& g2);

struct EdgeDiff {
  std::string a, b;
  std::string left, right;  // textual edge form in each graph, "" when absent
};
std::vector<EdgeDiff> edge_differences(const MixedGraph& g1, const MixedGraph& g2);

// Adjacency and arrowhead precision/recall of an estimate against a reference
// graph over the same node names. Ratios with an empty denominator are 1.
struct GraphScores {
  double adjacency_precision = 1.0;
  double adjacency_recall = 1.0;
  double adjacency_f1 = 1.0;
  double arrowhead_precision = 1.0;
  double arrowhead_recall = 1.0;
};
GraphScores score(const MixedGraph& estimate, const MixedGraph& reference);

// "a -> b", "a --- b", "a <-> b"
std::string edge_text(const MixedGraph& g, std::size_t a, std::size_t b);

std::string to_dot(const MixedGraph& g, const std::string& comment = {});
std::string to_json(const MixedGraph& g, const std::string& manifest_digest = {});
// Throws ParseError (with byte position) on malformed input.
MixedGraph from_json(const std::string& text);
MixedGraph load_graph_json(const std::string& path);

}  // namespace cdkit
