#include "cdkit/engine.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cdkit/error.hpp"

namespace cdkit {

std::string to_string(VStructRule r) {
  switch (r) {
    case VStructRule::standard: return "standard";
    case VStructRule::conservative: return "conservative";
    case VStructRule::majority: return "majority";
  }
  return "?";
}

std::string to_string(ConflictMode m) {
  return m == ConflictMode::bidirected ? "bidirected" : "pvalue";
}

std::string to_string(NaPolicy p) {
  switch (p) {
    case NaPolicy::delete_edge: return "delete";
    case NaPolicy::keep_edge: return "keep";
    case NaPolicy::error: return "error";
  }
  return "?";
}

VStructRule parse_vstruct_rule(const std::string& s) {
  if (s == "standard") return VStructRule::standard;
  if (s == "conservative") return VStructRule::conservative;
  if (s == "majority") return VStructRule::majority;
  throw ValidationError("unknown v-structure rule '" + s + "' (standard, conservative, majority)");
}

ConflictMode parse_conflict_mode(const std::string& s) {
  if (s == "bidirected") return ConflictMode::bidirected;
  if (s == "pvalue" || s == "pvalue-preference") return ConflictMode::pvalue_preference;
  throw ValidationError("unknown conflict mode '" + s + "' (bidirected, pvalue)");
}

NaPolicy parse_na_policy(const std::string& s) {
  if (s == "delete") return NaPolicy::delete_edge;
  if (s == "keep") return NaPolicy::keep_edge;
  if (s == "error") return NaPolicy::error;
  throw ValidationError("unknown NA policy '" + s + "' (delete, keep, error)");
}

void EngineConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (workers == 0) throw ValidationError("worker count must be at least 1");
}

// --- Trace ----------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* decision_name(Decision d) { return d == Decision::independent ? "independent" : "dependent"; }

}  // namespace

std::string SearchTrace::to_text() const {
  std::string out;
  for (const auto& e : entries) {
    out += e.skeleton_phase() ? std::to_string(e.level) : std::string("vs");
    out += ' ' + names[e.x] + ' ' + names[e.y] + " {";
    for (std::size_t k = 0; k < e.s.size(); ++k) {
      if (k) out += ',';
      out += names[e.s[k]];
    }
    out += "} ";
    out += e.result.computable() ? format_double(*e.result.p_value) : std::string("NA");
    out += ' ';
    out += decision_name(e.decision);
    out += '\n';
  }
  return out;
}

SearchTrace SearchTrace::from_text(std::istream& in, const std::vector<std::string>& names) {
  SearchTrace t;
  t.names = names;
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < names.size(); ++i) idx[names[i]] = i;
  auto lookup = [&](const std::string& v, std::size_t line) {
    auto it = idx.find(v);
    if (it == idx.end())
      throw ParseError("trace line " + std::to_string(line) + ": unknown variable '" + v + "'");
    return it->second;
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string level, x, y, set, p, decision;
    if (!(ls >> level >> x >> y >> set >> p >> decision) || set.size() < 2 || set.front() != '{' ||
        set.back() != '}')
      throw ParseError("trace line " + std::to_string(lineno) + ": malformed entry");
    TraceEntry e;
    if (level == "vs") {
      e.level = -1;
    } else {
      auto r = std::from_chars(level.data(), level.data() + level.size(), e.level);
      if (r.ec != std::errc() || e.level < 0)
        throw ParseError("trace line " + std::to_string(lineno) + ": bad level '" + level + "'");
    }
    e.x = lookup(x, lineno);
    e.y = lookup(y, lineno);
    std::string inner = set.substr(1, set.size() - 2);
    std::size_t pos = 0;
    while (!inner.empty() && pos <= inner.size()) {
      auto comma = inner.find(',', pos);
      if (comma == std::string::npos) comma = inner.size();
      e.s.push_back(lookup(inner.substr(pos, comma - pos), lineno));
      pos = comma + 1;
    }
    if (p != "NA") {
      double v = 0.0;
      auto r = std::from_chars(p.data(), p.data() + p.size(), v);
      if (r.ec != std::errc()) throw ParseError("trace line " + std::to_string(lineno) + ": bad p-value");
      e.result.p_value = v;
    }
    if (decision == "independent") {
      e.decision = Decision::independent;
    } else if (decision == "dependent") {
      e.decision = Decision::dependent;
    } else {
      throw ParseError("trace line " + std::to_string(lineno) + ": bad decision '" + decision + "'");
    }
    e.p_used = e.result.p_value.value_or(e.decision == Decision::independent ? 1.0 : 0.0);
    t.entries.push_back(std::move(e));
  }
  return t;
}

bool operator==(const SearchTrace& a, const SearchTrace& b) {
  if (a.names != b.names || a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& u = a.entries[i];
    const auto& v = b.entries[i];
    if (u.level != v.level || u.x != v.x || u.y != v.y || u.s != v.s || u.decision != v.decision) return false;
    if (u.result.p_value != v.result.p_value || u.result.statistic != v.result.statistic ||
        u.result.df != v.result.df || u.result.n_effective != v.result.n_effective ||
        u.result.flags != v.result.flags)
      return false;
  }
  return true;
}

// --- Skeleton ---------------------------------------------------------------------

namespace {

TraceEntry run_test(const IndependenceTest& tester, const EngineConfig& config, int level, std::size_t x,
                    std::size_t y, std::vector<std::size_t> s) {
  TraceEntry e;
  e.level = level;
  e.x = x;
  e.y = y;
  e.result = tester.test(x, y, s);
  e.s = std::move(s);
  if (e.result.computable()) {
    e.p_used = *e.result.p_value;
  } else {
    switch (config.na_policy) {
      case NaPolicy::delete_edge: e.p_used = 1.0; break;
      case NaPolicy::keep_edge: e.p_used = 0.0; break;
      case NaPolicy::error: {
        const auto names = tester.names();
        std::string msg = "test " + names[x] + " _||_ " + names[y] + " | {";
        for (std::size_t k = 0; k < e.s.size(); ++k) msg += (k ? "," : "") + names[e.s[k]];
        throw std::runtime_error(msg + "} is not computable: " + e.result.reason);
      }
    }
  }
  e.decision = e.p_used >= config.alpha ? Decision::independent : Decision::dependent;
  return e;
}

// Calls f on every size-k subset of `pool`, in lexicographic order of
// positions; stops when f returns true.
template <class F>
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k, F&& f) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pos(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pos[i]];
    if (f(subset)) return true;
    std::size_t i = k;
    while (i > 0 && pos[i - 1] == pool.size() - k + i - 1) --i;
    if (i == 0) return false;
    ++pos[i - 1];
    for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

// Candidate conditioning variables for testing x - y from x's side.
std::vector<std::size_t> conditioning_pool(const std::vector<std::vector<std::size_t>>& adj, std::size_t x,
                                           std::size_t y, const ResolvedKnowledge& rk, bool tier_restricted) {
  std::vector<std::size_t> out;
  const int limit = std::max(rk.tier[x], rk.tier[y]);
  for (auto v : adj[x]) {
    if (v == y) continue;
    if (tier_restricted && rk.tier[v] > limit) continue;
    out.push_back(v);
  }
  return out;
}

struct EdgeOutcome {
  bool removed = false;
  std::vector<std::size_t> sepset;
  double p = 1.0;
  std::vector<TraceEntry> tests;
};

template <class Job>
void run_parallel(std::size_t count, std::size_t workers, Job&& job) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        auto i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::size_t> sorted_by_name(std::vector<std::size_t> v, const std::vector<std::size_t>& rank) {
  std::sort(v.begin(), v.end(), [&](auto a, auto b) { return rank[a] < rank[b]; });
  return v;
}

}  // namespace

SkeletonResult skeleton_stable(const IndependenceTest& tester, const EngineConfig& config,
                               const Knowledge& knowledge) {
  config.validate();
  const auto names = tester.names();
  const auto p = names.size();
  if (auto problems = validate(knowledge, names); !problems.empty()) {
    std::string msg = "invalid background knowledge:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw ValidationError(msg);
  }
  const auto rk = resolve(knowledge, names);

  MixedGraph g(names);
  const auto& order = g.name_order();
  std::vector<std::size_t> rank(p);
  for (std::size_t i = 0; i < p; ++i) rank[i] = g.rank(i);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t s = r + 1; s < p; ++s)
      if (!rk.is_gap(order[r], order[s])) g.add_undirected(order[r], order[s]);

  SkeletonResult out;
  out.trace.names = names;

  for (std::size_t level = 0;; ++level) {
    if (config.m_max && level > *config.m_max) break;
    // Frozen adjacency for this level, each list in name order.
    std::vector<std::vector<std::size_t>> adj(p);
    for (std::size_t v = 0; v < p; ++v) adj[v] = g.adjacents(v);

    struct Job {
      std::size_t x, y;
      std::vector<std::size_t> pool_x, pool_y;
    };
    std::vector<Job> jobs;
    bool any_large_enough = false;
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t s = r + 1; s < p; ++s) {
        auto x = order[r], y = order[s];
        if (!g.adjacent(x, y) || rk.is_forced(x, y)) continue;
        auto px = conditioning_pool(adj, x, y, rk, config.tier_restricted);
        auto py = conditioning_pool(adj, y, x, rk, config.tier_restricted);
        if (px.size() < level && py.size() < level) continue;
        any_large_enough = true;
        jobs.push_back({x, y, std::move(px), std::move(py)});
      }
    }
    if (!any_large_enough) break;

    std::vector<EdgeOutcome> outcomes(jobs.size());
    run_parallel(jobs.size(), config.workers, [&](std::size_t j) {
      const auto& job = jobs[j];
      auto& res = outcomes[j];
      std::set<std::vector<std::size_t>> tried;
      auto visit = [&](const std::vector<std::size_t>& subset) {
        auto key = subset;
        std::sort(key.begin(), key.end());
        if (!tried.insert(key).second) return false;
        auto e = run_test(tester, config, static_cast<int>(level), job.x, job.y, subset);
        const bool indep = e.decision == Decision::independent;
        const double pv = e.p_used;
        res.tests.push_back(std::move(e));
        if (indep) {
          res.removed = true;
          res.sepset = subset;
          res.p = pv;
        }
        return indep;
      };
      if (!for_each_subset(job.pool_x, level, visit)) for_each_subset(job.pool_y, level, visit);
    });

    for (std::size_t j = 0; j < jobs.size(); ++j) {
      auto& res = outcomes[j];
      for (auto& e : res.tests) out.trace.entries.push_back(std::move(e));
      if (res.removed) {
        const auto x = jobs[j].x, y = jobs[j].y;
        g.remove_edge(x, y);
        out.sepset_pvalues[{std::min(x, y), std::max(x, y)}] = res.p;
        out.sepsets.set(x, y, sorted_by_name(std::move(res.sepset), rank));
      }
    }
  }
  out.graph = std::move(g);
  return out;
}

// --- Orientation ------------------------------------------------------------------

Orientation orient_v_structures(const SkeletonResult& skeleton, const IndependenceTest& tester,
                                const EngineConfig& config, const ResolvedKnowledge* rk, SearchTrace* trace) {
  MixedGraph g = skeleton.graph;
  const auto p = g.size();
  const auto& order = g.name_order();

  // Knowledge-determined orientations first.
  if (rk) {
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        if (a != b && g.is_undirected(a, b) &&
            (rk->requires_dir(a, b) || (rk->allows(a, b) && !rk->allows(b, a))))
          g.add_directed(a, b);
  }

  enum class Kind { collider, noncollider, ambiguous };
  struct Triple {
    std::size_t x, z, y;
    Kind kind;
    double p;
  };
  std::vector<Triple> triples;

  ResolvedKnowledge none;
  if (!rk) {
    none = resolve(Knowledge{}, g.nodes());
  }
  const ResolvedKnowledge& know = rk ? *rk : none;

  for (auto z : order) {
    auto nb = skeleton.graph.adjacents(z);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        auto x = nb[i], y = nb[j];
        if (skeleton.graph.adjacent(x, y)) continue;
        Triple t{x, z, y, Kind::ambiguous, 1.0};
        const auto key = std::make_pair(std::min(x, y), std::max(x, y));
        if (auto it = skeleton.sepset_pvalues.find(key); it != skeleton.sepset_pvalues.end()) t.p = it->second;
        if (config.vstruct_rule == VStructRule::standard) {
          // Pairs kept apart by knowledge have no recorded separating set.
          if (const auto* sep = skeleton.sepsets.get(x, y)) {
            bool in = std::find(sep->begin(), sep->end(), z) != sep->end();
            t.kind = in ? Kind::noncollider : Kind::collider;
          }
        } else {
          std::vector<std::vector<std::size_t>> adj(p);
          for (auto v : {x, y}) adj[v] = skeleton.graph.adjacents(v);
          std::set<std::vector<std::size_t>> tried;
          std::size_t separating = 0, with_z = 0;
          for (auto side : {std::make_pair(x, y), std::make_pair(y, x)}) {
            auto pool = conditioning_pool(adj, side.first, side.second, know, config.tier_restricted);
            std::size_t top = pool.size();
            if (config.m_max) top = std::min(top, *config.m_max);
            for (std::size_t k = 0; k <= top; ++k) {
              for_each_subset(pool, k, [&](const std::vector<std::size_t>& subset) {
                auto key2 = subset;
                std::sort(key2.begin(), key2.end());
                if (!tried.insert(key2).second) return false;
                auto e = run_test(tester, config, -1, x, y, subset);
                if (e.decision == Decision::independent) {
                  ++separating;
                  if (std::find(subset.begin(), subset.end(), z) != subset.end()) ++with_z;
                }
                if (trace) trace->entries.push_back(std::move(e));
                return false;
              });
            }
          }
          if (separating > 0) {
            if (config.vstruct_rule == VStructRule::conservative) {
              if (with_z == 0) t.kind = Kind::collider;
              else if (with_z == separating) t.kind = Kind::noncollider;
            } else {
              if (2 * with_z < separating) t.kind = Kind::collider;
              else if (2 * with_z > separating) t.kind = Kind::noncollider;
            }
          }
        }
        triples.push_back(t);
      }
    }
  }

  Orientation out;
  std::vector<Triple> colliders;
  for (const auto& t : triples) {
    if (t.kind == Kind::collider) colliders.push_back(t);
    if (t.kind == Kind::ambiguous) out.ambiguous_triples.insert({std::min(t.x, t.y), t.z, std::max(t.x, t.y)});
  }
  if (config.conflict_mode == ConflictMode::pvalue_preference) {
    std::stable_sort(colliders.begin(), colliders.end(), [](const Triple& a, const Triple& b) { return a.p < b.p; });
  }
  for (const auto& t : colliders) {
    for (auto u : {t.x, t.y}) {
      if (!know.allows(u, t.z)) continue;
      if (config.conflict_mode == ConflictMode::pvalue_preference && g.mark_at(u, t.z) == Mark::arrow) continue;
      g.set_mark(t.z, u, Mark::arrow);
    }
  }
  out.graph = std::move(g);
  return out;
}

namespace {

SearchResult run_search(const IndependenceTest& tester, const EngineConfig& config, const Knowledge& knowledge) {
  auto skel = skeleton_stable(tester, config, knowledge);
  const auto rk = resolve(knowledge, tester.names());
  SearchResult out;
  out.trace = skel.trace;
  auto oriented = orient_v_structures(skel, tester, config, &rk, &out.trace);
  out.graph = meek_closure(oriented.graph, &rk, &oriented.ambiguous_triples);
  out.sepsets = std::move(skel.sepsets);
  out.ambiguous_triples = std::move(oriented.ambiguous_triples);
  return out;
}

}  // namespace

SearchResult pc(const IndependenceTest& tester, const EngineConfig& config, const Knowledge& knowledge) {
  if (knowledge.context_all.empty() && knowledge.context_tier.empty()) return run_search(tester, config, knowledge);
  return run_search(tester, config, expand_context(knowledge, tester.names()));
}

SearchResult tpc(const IndependenceTest& tester, const EngineConfig& config, const Knowledge& knowledge) {
  const auto names = tester.names();
  std::vector<std::string> untiered;
  for (const auto& v : names)
    if (!knowledge.tier(v)) untiered.push_back(v);
  if (!untiered.empty()) {
    std::string msg = "tiered search needs a tier for every variable; missing:";
    for (const auto& v : untiered) msg += " " + v;
    throw ValidationError(msg);
  }
  if (auto problems = validate(knowledge, names); !problems.empty()) {
    std::string msg = "invalid background knowledge:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw ValidationError(msg);
  }
  auto expanded = expand_context(tiers_to_forbidden(knowledge), names);
  EngineConfig cfg = config;
  cfg.tier_restricted = true;
  return run_search(tester, cfg, expanded);
}

MixedGraph replay_skeleton(const SearchTrace& trace, const Knowledge& knowledge) {
  MixedGraph g(trace.names);
  const auto rk = resolve(knowledge, trace.names);
  const auto p = g.size();
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b)
      if (!rk.is_gap(a, b)) g.add_undirected(a, b);
  for (const auto& e : trace.entries)
    if (e.skeleton_phase() && e.decision == Decision::independent) g.remove_edge(e.x, e.y);
  return g;
}

// --- Oracle -------------------------------------------------------------------------

DSeparationOracle::DSeparationOracle(MixedGraph dag) : dag_(std::move(dag)) {
  if (!dag_.is_dag()) throw ValidationError("d-separation oracle needs a DAG");
}

CITestResult DSeparationOracle::test(std::size_t x, std::size_t y, std::span<const std::size_t> s) const {
  CITestResult r;
  const bool sep = d_separated(dag_, x, y, s);
  r.p_value = sep ? 1.0 : 0.0;
  r.statistic = sep ? 0.0 : 1.0;
  return r;
}

}  // namespace cdkit
