#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cdkit/citest.hpp"
#include "cdkit/graph.hpp"
#include "cdkit/knowledge.hpp"

namespace cdkit {

enum class VStructRule { standard, conservative, majority };
enum class ConflictMode { bidirected, pvalue_preference };
// What a not-computable test means: delete (p := 1, edge removed), keep
// (p := 0, edge retained) or abort the search.
enum class NaPolicy { delete_edge, keep_edge, error };

std::string to_string(VStructRule r);
std::string to_string(ConflictMode m);
std::string to_string(NaPolicy p);
VStructRule parse_vstruct_rule(const std::string& s);
ConflictMode parse_conflict_mode(const std::string& s);
NaPolicy parse_na_policy(const std::string& s);

struct EngineConfig {
  double alpha = 0.01;
  std::optional<std::size_t> m_max;  // unbounded when empty
  VStructRule vstruct_rule = VStructRule::standard;
  ConflictMode conflict_mode = ConflictMode::bidirected;
  NaPolicy na_policy = NaPolicy::delete_edge;
  std::size_t workers = 1;
  // Restrict conditioning sets to variables not later than both tested
  // variables. Set by tpc().
  bool tier_restricted = false;

  // Throws ValidationError.
  void validate() const;
};

enum class Decision { independent, dependent };

struct TraceEntry {
  // Conditioning-set size for skeleton tests; -1 for tests run while
  // classifying unshielded triples (conservative / majority rules).
  int level = 0;
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> s;
  CITestResult result;
  double p_used = 1.0;  // p-value after the NA policy
  Decision decision = Decision::dependent;

  bool skeleton_phase() const { return level >= 0; }
};

// Ordered log of every test performed. Text form, one test per line:
//   <level> <x> <y> {<s1>,<s2>,...} <p> <independent|dependent>
// where level is "vs" for triple-classification tests and p is "NA" when the
// test was not computable (the decision then reflects the NA policy).
struct SearchTrace {
  std::vector<std::string> names;
  std::vector<TraceEntry> entries;

  std::string to_text() const;
  static SearchTrace from_text(std::istream& in, const std::vector<std::string>& names);
  friend bool operator==(const SearchTrace& a, const SearchTrace& b);
};

struct SkeletonResult {
  MixedGraph graph;  // undirected
  SepsetTable sepsets;
  // p-value of the test that removed each pair, keyed like SepsetTable.
  std::map<std::pair<std::size_t, std::size_t>, double> sepset_pvalues;
  SearchTrace trace;
};

struct SearchResult {
  MixedGraph graph;
  SepsetTable sepsets;
  SearchTrace trace;
  // Unshielded triples (x, z, y), x < y, left unclassified by the
  // conservative or majority rule.
  TripleSet ambiguous_triples;
};

// Order-independent (stable) adjacency search. Adjacency sets are frozen at
// the start of each level; deletions are applied at the level boundary, so
// the result does not depend on worker count or column order.
SkeletonResult skeleton_stable(const IndependenceTest& tester, const EngineConfig& config,
                               const Knowledge& knowledge = {});

struct Orientation {
  MixedGraph graph;
  TripleSet ambiguous_triples;
};

// Applies knowledge-forced orientations and orients unshielded colliders.
// Tests run by the conservative/majority rules are appended to `trace`.
Orientation orient_v_structures(const SkeletonResult& skeleton, const IndependenceTest& tester,
                                const EngineConfig& config, const ResolvedKnowledge* knowledge,
                                SearchTrace* trace = nullptr);

// skeleton_stable -> orient_v_structures -> Meek closure with knowledge. Context
// variables are expanded first.
SearchResult pc(const IndependenceTest& tester, const EngineConfig& config, const Knowledge& knowledge = {});

// pc with tier-restricted conditioning sets, tier-derived forbidden edges and
// context-variable expansion. Every variable needs a tier.
SearchResult tpc(const IndependenceTest& tester, const EngineConfig& config, const Knowledge& knowledge);

// Rebuilds the skeleton from the skeleton-phase decisions of a trace.
MixedGraph replay_skeleton(const SearchTrace& trace, const Knowledge& knowledge = {});

// Perfect independence oracle: p = 1 when d-separated in `dag`, else 0.
class DSeparationOracle : public IndependenceTest {
 public:
  explicit DSeparationOracle(MixedGraph dag);
  std::vector<std::string> names() const override { return dag_.nodes(); }
  CITestResult test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const override;
  std::string describe() const override { return "d-separation oracle"; }

 private:
  MixedGraph dag_;
};

}  // namespace cdkit
