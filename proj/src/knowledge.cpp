#include "cdkit/knowledge.hpp"

#include <algorithm>
#include <functional>
#include <fstream>
#include <sstream>

#include "cdkit/error.hpp"

namespace cdkit {

NamePair unordered_pair(const std::string& a, const std::string& b) {
  return a < b ? NamePair{a, b} : NamePair{b, a};
}

void Knowledge::forbid_adjacent(const std::string& a, const std::string& b) {
  forbidden_adjacent.insert(unordered_pair(a, b));
}

void Knowledge::require_adjacent(const std::string& a, const std::string& b) {
  required_adjacent.insert(unordered_pair(a, b));
}

std::optional<int> Knowledge::tier(const std::string& v) const {
  auto it = tiers.find(v);
  if (it == tiers.end()) return std::nullopt;
  return it->second;
}

bool Knowledge::empty() const {
  return tiers.empty() && forbidden.empty() && required_directed.empty() && required_adjacent.empty() &&
         forbidden_adjacent.empty() && context_all.empty() && context_tier.empty();
}

Knowledge tiers_to_forbidden(const Knowledge& k) {
  Knowledge out = k;
  for (const auto& [a, ta] : k.tiers)
    for (const auto& [b, tb] : k.tiers)
      if (ta < tb) out.forbid(b, a);
  return out;
}

Knowledge expand_context(const Knowledge& k, const std::vector<std::string>& all_vars) {
  for (const auto& c : k.context_all)
    if (std::find(all_vars.begin(), all_vars.end(), c) == all_vars.end())
      throw ValidationError("context variable '" + c + "' is not a known variable");
  for (const auto& c : k.context_tier)
    if (std::find(all_vars.begin(), all_vars.end(), c) == all_vars.end())
      throw ValidationError("context variable '" + c + "' is not a known variable");

  Knowledge out = k;
  for (const auto& c : k.context_all) {
    for (const auto& v : all_vars)
      if (!k.is_context(v)) out.require(c, v);
  }
  for (const auto& c : k.context_tier) {
    auto tc = k.tier(c);
    for (const auto& v : all_vars) {
      if (v == c) continue;
      auto tv = k.tier(v);
      bool same_tier = tc && tv && *tc == *tv;
      if (same_tier && !k.is_context(v)) {
        out.require(c, v);
      } else if (!same_tier) {
        out.forbid_adjacent(c, v);
      }
    }
  }
  std::vector<std::string> context(k.context_all.begin(), k.context_all.end());
  context.insert(context.end(), k.context_tier.begin(), k.context_tier.end());
  for (std::size_t i = 0; i < context.size(); ++i)
    for (std::size_t j = i + 1; j < context.size(); ++j) out.forbid_adjacent(context[i], context[j]);
  // Context variables are exogenous: nothing points into them.
  for (const auto& c : context)
    for (const auto& v : all_vars)
      if (v != c) out.forbid(v, c);

  auto problems = validate(out, all_vars);
  if (!problems.empty()) {
    std::string msg = "knowledge inconsistent after context expansion:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return out;
}

std::vector<std::string> validate(const Knowledge& k, const std::vector<std::string>& variables) {
  std::vector<std::string> out;
  std::set<std::string> known(variables.begin(), variables.end());
  auto check_known = [&](const std::string& v, const std::string& where) {
    if (!known.count(v)) out.push_back(where + ": unknown variable '" + v + "'");
  };
  for (const auto& [v, t] : k.tiers) {
    check_known(v, "tier");
    if (t < 1) out.push_back("tier: variable '" + v + "' has tier " + std::to_string(t) + " (tiers start at 1)");
  }
  for (const auto& [a, b] : k.forbidden) {
    check_known(a, "forbid");
    check_known(b, "forbid");
  }
  for (const auto& [a, b] : k.required_directed) {
    check_known(a, "require");
    check_known(b, "require");
  }
  for (const auto& [a, b] : k.forbidden_adjacent) {
    check_known(a, "forbid adjacency");
    check_known(b, "forbid adjacency");
  }
  for (const auto& [a, b] : k.required_adjacent) {
    check_known(a, "require adjacency");
    check_known(b, "require adjacency");
  }
  for (const auto& v : k.context_all) check_known(v, "context-all");
  for (const auto& v : k.context_tier) check_known(v, "context-tier");

  for (const auto& [a, b] : k.required_directed) {
    if (a == b) out.push_back("require " + a + " -> " + b + ": self-loop");
    if (k.forbidden.count({a, b})) out.push_back("edge " + a + " -> " + b + " is both required and forbidden");
    if (k.forbidden_adjacent.count(unordered_pair(a, b)))
      out.push_back("edge " + a + " -> " + b + " is required but the pair is forbidden to be adjacent");
    if (a < b && k.required_directed.count({b, a}))
      out.push_back("edges " + a + " -> " + b + " and " + b + " -> " + a + " are both required");
    auto ta = k.tier(a), tb = k.tier(b);
    if (ta && tb && *ta > *tb)
      out.push_back("required edge " + a + " -> " + b + " points backwards in time (tier " + std::to_string(*ta) +
                    " -> tier " + std::to_string(*tb) + ")");
  }
  for (const auto& [a, b] : k.required_adjacent) {
    if (k.forbidden_adjacent.count({a, b}))
      out.push_back("pair {" + a + ", " + b + "} is both required and forbidden to be adjacent");
    if (k.forbidden.count({a, b}) && k.forbidden.count({b, a}))
      out.push_back("pair {" + a + ", " + b + "} is required adjacent but both orientations are forbidden");
  }
  for (const auto& v : k.context_all)
    if (k.context_tier.count(v)) out.push_back("variable '" + v + "' is in both context-all and context-tier");
  for (const auto& v : k.context_tier)
    if (!k.tier(v)) out.push_back("context-tier variable '" + v + "' has no tier");

  // Required edges must not close a directed cycle.
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& [a, b] : k.required_directed)
    if (a != b) succ[a].push_back(b);
  std::map<std::string, int> state;  // 1 = on stack, 2 = done
  std::vector<std::string> stack;
  std::function<bool(const std::string&)> visit = [&](const std::string& v) {
    state[v] = 1;
    stack.push_back(v);
    for (const auto& w : succ[v]) {
      if (state[w] == 1) {
        auto from = std::find(stack.begin(), stack.end(), w);
        std::string msg = "required edges form a directed cycle:";
        for (auto it = from; it != stack.end(); ++it) msg += " " + *it + " ->";
        out.push_back(msg + " " + w);
        return true;
      }
      if (state[w] == 0 && visit(w)) return true;
    }
    stack.pop_back();
    state[v] = 2;
    return false;
  };
  for (const auto& [v, _] : succ)
    if (state[v] == 0 && visit(v)) break;
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Knowledge read_knowledge(std::istream& in) {
  Knowledge k;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ParseError("knowledge line " + std::to_string(lineno) + ": " + why);
    };
    const auto& head = tokens[0];
    if (head == "tier") {
      if (tokens.size() < 2) fail("expected 'tier <k>: vars...'");
      std::string num = tokens[1];
      std::size_t first_var = 2;
      if (!num.empty() && num.back() == ':') {
        num.pop_back();
      } else if (tokens.size() > 2 && tokens[2] == ":") {
        first_var = 3;
      } else {
        fail("expected ':' after tier number");
      }
      int t = 0;
      try {
        t = std::stoi(num);
      } catch (...) {
        fail("bad tier number '" + num + "'");
      }
      for (std::size_t i = first_var; i < tokens.size(); ++i) k.set_tier(tokens[i], t);
    } else if (head == "forbid" || head == "require" || head == "blacklist" || head == "whitelist") {
      if (tokens.size() != 4) fail("expected '" + head + " a -> b' or '" + head + " a -- b'");
      bool forbid = head == "forbid" || head == "blacklist";
      const auto &a = tokens[1], &op = tokens[2], &b = tokens[3];
      if (op == "->") {
        forbid ? k.forbid(a, b) : k.require(a, b);
      } else if (op == "--") {
        forbid ? k.forbid_adjacent(a, b) : k.require_adjacent(a, b);
      } else {
        fail("unknown edge operator '" + op + "'");
      }
    } else if (head == "context-all:" || head == "context-tier:") {
      auto& target = head == "context-all:" ? k.context_all : k.context_tier;
      for (std::size_t i = 1; i < tokens.size(); ++i) target.insert(tokens[i]);
    } else if ((head == "context-all" || head == "context-tier") && tokens.size() >= 2 && tokens[1] == ":") {
      auto& target = head == "context-all" ? k.context_all : k.context_tier;
      for (std::size_t i = 2; i < tokens.size(); ++i) target.insert(tokens[i]);
    } else {
      fail("unknown directive '" + head + "'");
    }
  }
  return k;
}

Knowledge load_knowledge(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_knowledge(in);
}

void write_knowledge(std::ostream& out, const Knowledge& k) {
  std::map<int, std::vector<std::string>> by_tier;
  for (const auto& [v, t] : k.tiers) by_tier[t].push_back(v);
  for (const auto& [t, vars] : by_tier) {
    out << "tier " << t << ":";
    for (const auto& v : vars) out << ' ' << v;
    out << '\n';
  }
  for (const auto& [a, b] : k.forbidden) out << "forbid " << a << " -> " << b << '\n';
  for (const auto& [a, b] : k.forbidden_adjacent) out << "forbid " << a << " -- " << b << '\n';
  for (const auto& [a, b] : k.required_directed) out << "require " << a << " -> " << b << '\n';
  for (const auto& [a, b] : k.required_adjacent) out << "require " << a << " -- " << b << '\n';
  if (!k.context_all.empty()) {
    out << "context-all:";
    for (const auto& v : k.context_all) out << ' ' << v;
    out << '\n';
  }
  if (!k.context_tier.empty()) {
    out << "context-tier:";
    for (const auto& v : k.context_tier) out << ' ' << v;
    out << '\n';
  }
}

bool ResolvedKnowledge::has_tiers() const {
  return std::any_of(tier.begin(), tier.end(), [](int t) { return t > 0; });
}

bool ResolvedKnowledge::allows(std::size_t from, std::size_t to) const {
  if (forbids(from, to) || requires_dir(to, from)) return false;
  if (tier[from] > 0 && tier[to] > 0 && tier[from] > tier[to]) return false;
  return true;
}

ResolvedKnowledge resolve(const Knowledge& k, const std::vector<std::string>& names) {
  ResolvedKnowledge r;
  r.p = names.size();
  const auto p = r.p;
  r.tier.assign(p, 0);
  r.forbid_dir.assign(p * p, 0);
  r.require_dir.assign(p * p, 0);
  r.gap.assign(p * p, 0);
  r.forced.assign(p * p, 0);
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < p; ++i) idx[names[i]] = i;
  auto at = [&](const std::string& v) {
    auto it = idx.find(v);
    if (it == idx.end()) throw ValidationError("knowledge references unknown variable '" + v + "'");
    return it->second;
  };
  for (const auto& [v, t] : k.tiers) r.tier[at(v)] = t;
  for (const auto& [a, b] : k.forbidden) r.forbid_dir[at(a) * p + at(b)] = 1;
  for (const auto& [a, b] : k.required_directed) {
    auto i = at(a), j = at(b);
    r.require_dir[i * p + j] = 1;
    r.forced[i * p + j] = r.forced[j * p + i] = 1;
  }
  for (const auto& [a, b] : k.required_adjacent) {
    auto i = at(a), j = at(b);
    r.forced[i * p + j] = r.forced[j * p + i] = 1;
  }
  for (const auto& [a, b] : k.forbidden_adjacent) {
    auto i = at(a), j = at(b);
    r.gap[i * p + j] = r.gap[j * p + i] = 1;
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (i != j && r.forbid_dir[i * p + j] && r.forbid_dir[j * p + i]) r.gap[i * p + j] = 1;
  return r;
}

}  // namespace cdkit
