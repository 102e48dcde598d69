#include "cdkit/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdkit/error.hpp"

namespace cdkit {

MixedGraph::MixedGraph(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
  const auto p = nodes_.size();
  std::set<std::string> seen;
  for (const auto& n : nodes_)
    if (!seen.insert(n).second) throw GraphError("duplicate node name '" + n + "'");
  order_.resize(p);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::sort(order_.begin(), order_.end(), [&](auto a, auto b) { return nodes_[a] < nodes_[b]; });
  rank_.resize(p);
  for (std::size_t r = 0; r < p; ++r) rank_[order_[r]] = r;
  ends_.assign(p * p, 0);
}

std::optional<std::size_t> MixedGraph::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i] == name) return i;
  return std::nullopt;
}

std::size_t MixedGraph::require_index(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw GraphError("unknown node '" + std::string(name) + "'");
  return *i;
}

std::optional<Mark> MixedGraph::mark_at(std::size_t at, std::size_t other) const {
  auto e = end(other, at);
  if (e == 0) return std::nullopt;
  return static_cast<Mark>(e);
}

void MixedGraph::set_edge(std::size_t a, std::size_t b, Mark mark_a, Mark mark_b) {
  if (a == b) throw GraphError("self-loop on '" + nodes_.at(a) + "'");
  const auto p = nodes_.size();
  if (a >= p || b >= p) throw GraphError("node index out of range");
  ends_[b * p + a] = static_cast<std::uint8_t>(mark_a);
  ends_[a * p + b] = static_cast<std::uint8_t>(mark_b);
}

void MixedGraph::set_mark(std::size_t at, std::size_t other, Mark mark) {
  if (!adjacent(at, other)) throw GraphError("no edge between '" + nodes_[at] + "' and '" + nodes_[other] + "'");
  ends_[other * nodes_.size() + at] = static_cast<std::uint8_t>(mark);
}

void MixedGraph::remove_edge(std::size_t a, std::size_t b) {
  const auto p = nodes_.size();
  ends_[a * p + b] = 0;
  ends_[b * p + a] = 0;
}

std::vector<std::size_t> MixedGraph::adjacents(std::size_t v) const {
  std::vector<std::size_t> out;
  for (auto u : order_)
    if (u != v && adjacent(v, u)) out.push_back(u);
  return out;
}

std::vector<std::size_t> MixedGraph::parents(std::size_t v) const {
  std::vector<std::size_t> out;
  for (auto u : order_)
    if (u != v && is_directed(u, v)) out.push_back(u);
  return out;
}

std::vector<std::size_t> MixedGraph::children(std::size_t v) const {
  std::vector<std::size_t> out;
  for (auto u : order_)
    if (u != v && is_directed(v, u)) out.push_back(u);
  return out;
}

std::vector<std::size_t> MixedGraph::undirected_neighbors(std::size_t v) const {
  std::vector<std::size_t> out;
  for (auto u : order_)
    if (u != v && is_undirected(v, u)) out.push_back(u);
  return out;
}

std::vector<Edge> MixedGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t r = 0; r < order_.size(); ++r) {
    for (std::size_t s = r + 1; s < order_.size(); ++s) {
      auto a = order_[r], b = order_[s];
      if (!adjacent(a, b)) continue;
      out.push_back(Edge{a, b, *mark_at(a, b), *mark_at(b, a)});
    }
  }
  return out;
}

std::size_t MixedGraph::num_edges() const {
  std::size_t n = 0;
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (adjacent(a, b)) ++n;
  return n;
}

bool MixedGraph::only_directed() const {
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (adjacent(a, b) && !is_directed(a, b) && !is_directed(b, a)) return false;
  return true;
}

bool MixedGraph::has_bidirected() const {
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (is_bidirected(a, b)) return true;
  return false;
}

std::optional<std::vector<std::size_t>> MixedGraph::directed_cycle() const {
  const auto p = size();
  std::vector<int> state(p, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> stack;
  std::optional<std::vector<std::size_t>> found;
  auto dfs = [&](auto&& self, std::size_t v) -> void {
    state[v] = 1;
    stack.push_back(v);
    for (auto c : children(v)) {
      if (found) return;
      if (state[c] == 1) {
        auto it = std::find(stack.begin(), stack.end(), c);
        found = std::vector<std::size_t>(it, stack.end());
        return;
      }
      if (state[c] == 0) self(self, c);
    }
    stack.pop_back();
    state[v] = 2;
  };
  for (auto v : order_) {
    if (found) break;
    if (state[v] == 0) dfs(dfs, v);
  }
  return found;
}

std::vector<std::size_t> MixedGraph::topological_order() const {
  const auto p = size();
  std::vector<std::size_t> indeg(p, 0);
  for (std::size_t v = 0; v < p; ++v) indeg[v] = parents(v).size();
  std::set<std::size_t> ready;  // keyed by rank
  for (std::size_t v = 0; v < p; ++v)
    if (indeg[v] == 0) ready.insert(rank_[v]);
  std::vector<std::size_t> out;
  while (!ready.empty()) {
    auto v = order_[*ready.begin()];
    ready.erase(ready.begin());
    out.push_back(v);
    for (auto c : children(v))
      if (--indeg[c] == 0) ready.insert(rank_[c]);
  }
  if (out.size() != p) throw GraphError("graph contains a directed cycle");
  return out;
}

MixedGraph MixedGraph::reordered(const std::vector<std::string>& order) const {
  MixedGraph out(order);
  if (out.size() != size()) throw GraphError("reordered: node count mismatch");
  std::vector<std::size_t> map(size());
  for (std::size_t i = 0; i < size(); ++i) map[i] = out.require_index(nodes_[i]);
  for (const auto& e : edges()) out.set_edge(map[e.a], map[e.b], e.mark_a, e.mark_b);
  return out;
}

// --- SepsetTable ------------------------------------------------------------

void SepsetTable::set(std::size_t a, std::size_t b, std::vector<std::size_t> sepset) {
  table_[{std::min(a, b), std::max(a, b)}] = std::move(sepset);
}

const std::vector<std::size_t>* SepsetTable::get(std::size_t a, std::size_t b) const {
  auto it = table_.find({std::min(a, b), std::max(a, b)});
  return it == table_.end() ? nullptr : &it->second;
}

// --- d-separation -----------------------------------------------------------

bool d_separated(const MixedGraph& dag, std::size_t x, std::size_t y, std::span<const std::size_t> s) {
  const auto p = dag.size();
  if (x >= p || y >= p) throw GraphError("d_separated: unknown node");
  if (x == y) throw GraphError("d_separated: x and y must differ");
  std::vector<char> in_s(p, 0);
  for (auto v : s) {
    if (v >= p) throw GraphError("d_separated: unknown node in conditioning set");
    in_s[v] = 1;
  }
  if (in_s[x] || in_s[y]) throw GraphError("d_separated: x and y must not be in the conditioning set");

  // Ancestors of the conditioning set (inclusive).
  std::vector<char> anc(p, 0);
  std::vector<std::size_t> work(s.begin(), s.end());
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    if (anc[v]) continue;
    anc[v] = 1;
    for (auto u : dag.parents(v)) work.push_back(u);
  }

  // Reachable (node, direction) states; up = arrived from a child.
  enum Dir : int { up = 0, down = 1 };
  std::vector<char> seen(2 * p, 0);
  std::deque<std::pair<std::size_t, Dir>> queue{{x, up}};
  while (!queue.empty()) {
    auto [v, d] = queue.front();
    queue.pop_front();
    if (seen[2 * v + d]) continue;
    seen[2 * v + d] = 1;
    if (v == y) return false;
    if (d == up && !in_s[v]) {
      for (auto u : dag.parents(v)) queue.emplace_back(u, up);
      for (auto c : dag.children(v)) queue.emplace_back(c, down);
    } else if (d == down) {
      if (!in_s[v])
        for (auto c : dag.children(v)) queue.emplace_back(c, down);
      if (anc[v])
        for (auto u : dag.parents(v)) queue.emplace_back(u, up);
    }
  }
  return true;
}

bool d_separated(const MixedGraph& dag, std::string_view x, std::string_view y, const std::vector<std::string>& s) {
  std::vector<std::size_t> idx;
  for (const auto& v : s) idx.push_back(dag.require_index(v));
  return d_separated(dag, dag.require_index(x), dag.require_index(y), idx);
}

// --- CPDAG and Meek closure ------------------------------------------------------

MixedGraph pattern_of(const MixedGraph& dag) {
  if (!dag.only_directed()) throw GraphError("expected a DAG (directed edges only)");
  if (auto cyc = dag.directed_cycle()) {
    std::string msg = "graph has a directed cycle:";
    for (auto v : *cyc) msg += " " + dag.name(v);
    throw GraphError(msg);
  }
  MixedGraph out = dag.empty_copy();
  for (const auto& e : dag.edges()) out.add_undirected(e.a, e.b);
  for (std::size_t c = 0; c < dag.size(); ++c) {
    auto pa = dag.parents(c);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t j = i + 1; j < pa.size(); ++j) {
        if (dag.adjacent(pa[i], pa[j])) continue;
        out.add_directed(pa[i], c);
        out.add_directed(pa[j], c);
      }
    }
  }
  return out;
}

MixedGraph cpdag_of(const MixedGraph& dag) { return meek_closure(pattern_of(dag)); }

namespace {

// Meek rules for orienting the undirected edge a - b as a -> b.
bool meek_orients(const MixedGraph& g, std::size_t a, std::size_t b, const TripleSet* ambiguous) {
  const auto& order = g.name_order();
  auto usable = [&](std::size_t u, std::size_t mid, std::size_t w) {
    return !ambiguous || !ambiguous->contains({std::min(u, w), mid, std::max(u, w)});
  };
  // R1: c -> a, c and b nonadjacent.
  for (auto c : order)
    if (c != b && g.is_directed(c, a) && !g.adjacent(c, b) && usable(c, a, b)) return true;
  // R2: a -> c -> b.
  for (auto c : order)
    if (g.is_directed(a, c) && g.is_directed(c, b)) return true;
  // R3: a - c -> b, a - d -> b, c and d nonadjacent.
  std::vector<std::size_t> into_b;
  for (auto c : order)
    if (c != a && g.is_undirected(a, c) && g.is_directed(c, b)) into_b.push_back(c);
  for (std::size_t i = 0; i < into_b.size(); ++i)
    for (std::size_t j = i + 1; j < into_b.size(); ++j)
      if (!g.adjacent(into_b[i], into_b[j]) && usable(into_b[i], a, into_b[j])) return true;
  // R4: a - c, c -> d -> b, a adjacent d, c and b nonadjacent.
  for (auto c : order) {
    if (c == b || !g.is_undirected(a, c) || g.adjacent(c, b)) continue;
    for (auto d : order)
      if (d != a && d != b && g.is_directed(c, d) && g.is_directed(d, b) && g.adjacent(a, d)) return true;
  }
  return false;
}

bool knowledge_determined(const ResolvedKnowledge& k, std::size_t from, std::size_t to) {
  return k.requires_dir(from, to) || !k.allows(to, from);
}

}  // namespace

MixedGraph meek_closure(const MixedGraph& g) { return meek_closure(g, nullptr); }

MixedGraph meek_closure(const MixedGraph& g, const ResolvedKnowledge* k) { return meek_closure(g, k, nullptr); }

MixedGraph meek_closure(const MixedGraph& g, const Knowledge& knowledge) {
  auto resolved = resolve(knowledge, g.nodes());
  return meek_closure(g, &resolved);
}

MixedGraph meek_closure(const MixedGraph& g, const ResolvedKnowledge* k, const TripleSet* ambiguous) {
  MixedGraph out = g;
  const auto& order = out.name_order();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < order.size(); ++r) {
      for (std::size_t s = r + 1; s < order.size(); ++s) {
        auto a = order[r], b = order[s];
        if (!out.is_undirected(a, b)) continue;
        if (k) {
          bool ab = k->allows(a, b), ba = k->allows(b, a);
          if (k->requires_dir(a, b) || (ab && !ba)) {
            out.add_directed(a, b);
            changed = true;
            continue;
          }
          if (k->requires_dir(b, a) || (ba && !ab)) {
            out.add_directed(b, a);
            changed = true;
            continue;
          }
        }
        if ((!k || k->allows(a, b)) && meek_orients(out, a, b, ambiguous)) {
          out.add_directed(a, b);
          changed = true;
        } else if ((!k || k->allows(b, a)) && meek_orients(out, b, a, ambiguous)) {
          out.add_directed(b, a);
          changed = true;
        }
      }
    }
  }
  if (k) {
    // A cycle made only of knowledge-determined orientations cannot be fixed by the data.
    MixedGraph forced = out.empty_copy();
    for (std::size_t a = 0; a < out.size(); ++a)
      for (std::size_t b = 0; b < out.size(); ++b)
        if (out.is_directed(a, b) && knowledge_determined(*k, a, b)) forced.add_directed(a, b);
    if (auto cyc = forced.directed_cycle()) {
      std::string msg = "background knowledge forces a directed cycle:";
      for (auto v : *cyc) msg += " " + out.name(v) + " ->";
      msg += " " + out.name(cyc->front());
      throw GraphError(msg);
    }
  }
  return out;
}

// --- Comparison ---------------------------------------------------------------

namespace {

std::vector<std::size_t> node_map(const MixedGraph& g1, const MixedGraph& g2) {
  if (g1.size() != g2.size()) throw GraphError("graphs have different node sets");
  std::vector<std::size_t> map(g1.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    auto j = g2.index_of(g1.name(i));
    if (!j) throw GraphError("node '" + g1.name(i) + "' missing from second graph");
    map[i] = *j;
  }
  return map;
}

}  // namespace

std::string edge_text(const MixedGraph& g, std::size_t a, std::size_t b) {
  if (!g.adjacent(a, b)) return "";
  if (g.is_directed(a, b)) return g.name(a) + " -> " + g.name(b);
  if (g.is_directed(b, a)) return g.name(b) + " -> " + g.name(a);
  if (g.is_bidirected(a, b)) return g.name(a) + " <-> " + g.name(b);
  return g.name(a) + " --- " + g.name(b);
}

std::vector<EdgeDiff> edge_differences(const MixedGraph& g1, const MixedGraph& g2) {
  auto map = node_map(g1, g2);
  std::vector<EdgeDiff> out;
  const auto& order = g1.name_order();
  for (std::size_t r = 0; r < order.size(); ++r) {
    for (std::size_t s = r + 1; s < order.size(); ++s) {
      auto a = order[r], b = order[s];
      auto a2 = map[a], b2 = map[b];
      bool same = g1.mark_at(a, b) == g2.mark_at(a2, b2) && g1.mark_at(b, a) == g2.mark_at(b2, a2);
      if (!same) out.push_back({g1.name(a), g1.name(b), edge_text(g1, a, b), edge_text(g2, a2, b2)});
    }
  }
  return out;
}

std::size_t shd(const MixedGraph& g1, const MixedGraph& g2) { return edge_differences(g1, g2).size(); }

GraphScores score(const MixedGraph& estimate, const MixedGraph& reference) {
  const auto map = node_map(reference, estimate);
  std::size_t adj_tp = 0, adj_est = 0, adj_ref = 0, head_tp = 0, head_est = 0, head_ref = 0;
  for (std::size_t a = 0; a < reference.size(); ++a) {
    for (std::size_t b = a + 1; b < reference.size(); ++b) {
      const auto ea = map[a], eb = map[b];
      const bool r = reference.adjacent(a, b), e = estimate.adjacent(ea, eb);
      adj_ref += r;
      adj_est += e;
      adj_tp += r && e;
      for (auto [u, v] : {std::pair{a, b}, std::pair{b, a}}) {
        const bool rh = r && reference.mark_at(v, u) == Mark::arrow;
        const bool eh = e && estimate.mark_at(map[v], map[u]) == Mark::arrow;
        head_ref += rh;
        head_est += eh;
        head_tp += rh && eh;
      }
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 1.0;
  };
  GraphScores s;
  s.adjacency_precision = ratio(adj_tp, adj_est);
  s.adjacency_recall = ratio(adj_tp, adj_ref);
  const double ps = s.adjacency_precision + s.adjacency_recall;
  s.adjacency_f1 = ps > 0.0 ? 2.0 * s.adjacency_precision * s.adjacency_recall / ps : 0.0;
  s.arrowhead_precision = ratio(head_tp, head_est);
  s.arrowhead_recall = ratio(head_tp, head_ref);
  return s;
}

// --- Serialization ------------------------------------------------------------

namespace {

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

const char* mark_name(Mark m) { return m == Mark::arrow ? "arrow" : "tail"; }

}  // namespace

std::string to_dot(const MixedGraph& g, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "// " << comment << '\n';
  out << "digraph G {\n";
  for (auto v : g.name_order()) out << "  " << dot_quote(g.name(v)) << ";\n";
  for (const auto& e : g.edges()) {
    if (g.is_directed(e.a, e.b)) {
      out << "  " << dot_quote(g.name(e.a)) << " -> " << dot_quote(g.name(e.b)) << ";\n";
    } else if (g.is_directed(e.b, e.a)) {
      out << "  " << dot_quote(g.name(e.b)) << " -> " << dot_quote(g.name(e.a)) << ";\n";
    } else if (g.is_bidirected(e.a, e.b)) {
      out << "  " << dot_quote(g.name(e.a)) << " -> " << dot_quote(g.name(e.b)) << " [dir=both];\n";
    } else {
      out << "  " << dot_quote(g.name(e.a)) << " -> " << dot_quote(g.name(e.b)) << " [dir=none];\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string to_json(const MixedGraph& g, const std::string& manifest_digest) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes();
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) {
    edges.push_back({{"a", g.name(e.a)}, {"b", g.name(e.b)}, {"mark_a", mark_name(e.mark_a)},
                     {"mark_b", mark_name(e.mark_b)}});
  }
  j["edges"] = edges;
  if (!manifest_digest.empty()) j["manifest"] = manifest_digest;
  return j.dump(2) + "\n";
}

MixedGraph from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("graph json: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  auto fail = [](const std::string& why) { throw ParseError("graph json: " + why); };
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) fail("expected object with 'nodes' array");
  std::vector<std::string> nodes;
  for (const auto& n : j["nodes"]) {
    if (!n.is_string()) fail("node names must be strings");
    nodes.push_back(n.get<std::string>());
  }
  MixedGraph g;
  try {
    g = MixedGraph(nodes);
  } catch (const GraphError& e) {
    fail(e.what());
  }
  if (!j.contains("edges")) return g;
  if (!j["edges"].is_array()) fail("'edges' must be an array");
  auto parse_mark = [&](const nlohmann::json& m) {
    if (!m.is_string()) fail("edge marks must be strings");
    auto s = m.get<std::string>();
    if (s == "tail") return Mark::tail;
    if (s == "arrow") return Mark::arrow;
    fail("unknown edge mark '" + s + "'");
    return Mark::tail;
  };
  for (const auto& e : j["edges"]) {
    if (!e.is_object() || !e.contains("a") || !e.contains("b") || !e["a"].is_string() || !e["b"].is_string())
      fail("edge entries need string fields 'a' and 'b'");
    auto a = g.index_of(e["a"].get<std::string>());
    auto b = g.index_of(e["b"].get<std::string>());
    if (!a || !b) fail("edge references unknown node");
    if (*a == *b) fail("self-loop on '" + g.name(*a) + "'");
    if (g.adjacent(*a, *b)) fail("duplicate edge between '" + g.name(*a) + "' and '" + g.name(*b) + "'");
    Mark ma = e.contains("mark_a") ? parse_mark(e["mark_a"]) : Mark::tail;
    Mark mb = e.contains("mark_b") ? parse_mark(e["mark_b"]) : Mark::tail;
    g.set_edge(*a, *b, ma, mb);
  }
  return g;
}

MixedGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace cdkit
