#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace cdkit {

using NamePair = std::pair<std::string, std::string>;

// Background knowledge over variable names.
//
// `forbidden` and `required_directed` hold ordered pairs (a, b) meaning a -> b.
// `forbidden_adjacent` and `required_adjacent` hold unordered pairs, stored with
// first < second. Tiers are 1-based; a variable without a tier is unconstrained.
// Context variables are exogenous: context_all variables point into every other
// non-context variable, context_tier variables only into their own tier.
struct Knowledge {
  std::map<std::string, int> tiers;
  std::set<NamePair> forbidden;
  std::set<NamePair> required_directed;
  std::set<NamePair> required_adjacent;
  std::set<NamePair> forbidden_adjacent;
  std::set<std::string> context_all;
  std::set<std::string> context_tier;

  void forbid(const std::string& from, const std::string& to) { forbidden.emplace(from, to); }
  void require(const std::string& from, const std::string& to) { required_directed.emplace(from, to); }
  void forbid_adjacent(const std::string& a, const std::string& b);
  void require_adjacent(const std::string& a, const std::string& b);
  void set_tier(const std::string& v, int tier) { tiers[v] = tier; }
  std::optional<int> tier(const std::string& v) const;

  bool empty() const;
  bool is_context(const std::string& v) const { return context_all.count(v) || context_tier.count(v); }

  friend bool operator==(const Knowledge&, const Knowledge&) = default;
};

NamePair unordered_pair(const std::string& a, const std::string& b);

// Adds b -> a to `forbidden` for every pair with tier(a) < tier(b).
Knowledge tiers_to_forbidden(const Knowledge& k);

// Materializes context variables into explicit required/forbidden edges.
// Throws ValidationError if the result is inconsistent.
Knowledge expand_context(const Knowledge& k, const std::vector<std::string>& all_vars);

// Every invariant violation, including references to unknown variables.
std::vector<std::string> validate(const Knowledge& k, const std::vector<std::string>& variables);

// Line-oriented text format:
//   tier 1: country sex
//   forbid a -> b      forbid a -- b
//   require a -> b     require a -- b
//   context-all: country sex
//   context-tier: age_t0
// `blacklist`/`whitelist` are accepted as aliases of forbid/require. `#` starts a comment.
Knowledge read_knowledge(std::istream& in);
Knowledge load_knowledge(const std::string& path);
void write_knowledge(std::ostream& out, const Knowledge& k);

// Index-resolved view used by the search engine and orientation closure.
struct ResolvedKnowledge {
  std::size_t p = 0;
  std::vector<int> tier;                 // 0 = no tier
  std::vector<std::uint8_t> forbid_dir;  // [a * p + b]: a -> b forbidden
  std::vector<std::uint8_t> require_dir; // [a * p + b]: a -> b required
  std::vector<std::uint8_t> gap;         // symmetric: no edge of any orientation
  std::vector<std::uint8_t> forced;      // symmetric: adjacency required

  bool forbids(std::size_t from, std::size_t to) const { return forbid_dir[from * p + to] != 0; }
  bool requires_dir(std::size_t from, std::size_t to) const { return require_dir[from * p + to] != 0; }
  bool is_gap(std::size_t a, std::size_t b) const { return gap[a * p + b] != 0; }
  bool is_forced(std::size_t a, std::size_t b) const { return forced[a * p + b] != 0; }
  bool has_tiers() const;
  // False if knowledge rules out from -> to (explicitly, by tier order, or by
  // a required opposite orientation).
  bool allows(std::size_t from, std::size_t to) const;
};

ResolvedKnowledge resolve(const Knowledge& k, const std::vector<std::string>& names);

}  // namespace cdkit
