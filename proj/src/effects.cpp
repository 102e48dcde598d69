#include "cdkit/effects.hpp"

#include <algorithm>

#include <Eigen/QR>

#include "cdkit/error.hpp"

namespace cdkit {

std::vector<std::string> cpdag_violations(const MixedGraph& g) {
  std::vector<std::string> out;
  for (const auto& e : g.edges()) {
    if (e.mark_a == Mark::arrow && e.mark_b == Mark::arrow)
      out.push_back("conflict edge " + g.name(e.a) + " <-> " + g.name(e.b));
  }
  if (auto cyc = g.directed_cycle()) {
    std::string msg = "directed cycle:";
    for (auto v : *cyc) msg += " " + g.name(v) + " ->";
    out.push_back(msg + " " + g.name(cyc->front()));
  }
  if (out.empty()) {
    auto closed = meek_closure(g);
    for (const auto& e : g.edges())
      if (g.is_undirected(e.a, e.b) && !closed.is_undirected(e.a, e.b))
        out.push_back("edge " + g.name(e.a) + " --- " + g.name(e.b) + " is not maximally oriented (would become " +
                      edge_text(closed, e.a, e.b) + ")");
  }
  return out;
}

EffectEstimate ida_local(const MixedGraph& g, const Dataset& data, const std::string& x, const std::string& y) {
  EffectEstimate out;
  out.source = x;
  out.target = y;
  const auto gx = g.require_index(x);
  const auto gy = g.require_index(y);
  if (auto problems = cpdag_violations(g); !problems.empty()) {
    std::string msg = "graph is not a valid CPDAG/MPDAG:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw GraphError(msg);
  }
  auto column = [&](std::size_t v) {
    auto j = data.index_of(g.name(v));
    if (!j) throw ValidationError("variable '" + g.name(v) + "' is not in the data");
    if (data.column(*j).scale != Scale::continuous)
      throw ValidationError("variable '" + g.name(v) + "' is not continuous");
    return *j;
  };
  if (gx == gy) {
    out.values = {1.0};
    out.parent_sets = {{}};
    out.bounds = {1.0, 1.0};
    return out;
  }

  const auto parents = g.parents(gx);
  const auto siblings = g.undirected_neighbors(gx);
  const auto jx = column(gx);
  const auto jy = column(gy);

  // Subsets in canonical order: by size, then lexicographic in name order.
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t k = 0; k <= siblings.size(); ++k) {
    std::vector<bool> pick(siblings.size(), false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
    do {
      std::vector<std::size_t> t;
      for (std::size_t i = 0; i < siblings.size(); ++i)
        if (pick[i]) t.push_back(siblings[i]);
      subsets.push_back(std::move(t));
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }

  for (const auto& t : subsets) {
    bool admissible = true;
    for (std::size_t i = 0; i < t.size() && admissible; ++i) {
      for (std::size_t j = i + 1; j < t.size() && admissible; ++j) admissible = g.adjacent(t[i], t[j]);
      for (auto p : parents) admissible = admissible && g.adjacent(t[i], p);
    }
    if (!admissible) continue;

    std::vector<std::size_t> adjust(parents);
    adjust.insert(adjust.end(), t.begin(), t.end());
    std::sort(adjust.begin(), adjust.end(), [&](auto a, auto b) { return g.rank(a) < g.rank(b); });
    std::vector<std::string> names;
    for (auto v : adjust) names.push_back(g.name(v));

    if (std::find(adjust.begin(), adjust.end(), gy) != adjust.end()) {
      out.values.push_back(0.0);
      out.parent_sets.push_back(std::move(names));
      continue;
    }
    std::vector<std::size_t> cols{jx};
    for (auto v : adjust) cols.push_back(column(v));
    std::vector<std::size_t> all(cols);
    all.push_back(jy);
    const auto rows = data.complete_rows(all);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(cols.size() + 1);
    if (n < d + 1) {
      ++out.skipped;
      continue;
    }
    Eigen::MatrixXd design(n, d);
    Eigen::VectorXd response(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto i = rows[static_cast<std::size_t>(r)];
      design(r, 0) = 1.0;
      for (std::size_t c = 0; c < cols.size(); ++c) design(r, static_cast<Eigen::Index>(c + 1)) = data.value(i, cols[c]);
      response(r) = data.value(i, jy);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < d) {
      ++out.skipped;
      continue;
    }
    Eigen::VectorXd beta = qr.solve(response);
    out.values.push_back(beta(1));
    out.parent_sets.push_back(std::move(names));
  }
  if (out.values.empty()) throw std::runtime_error("no admissible parent set gave a non-singular regression");
  auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
  out.bounds = {*lo, *hi};
  return out;
}

}  // namespace cdkit
