#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cdkit/dataset.hpp"
#include "cdkit/graph.hpp"

namespace cdkit {

struct EffectEstimate {
  std::string source;
  std::string target;
  // One value per admissible parent set, in canonical subset order.
  std::vector<double> values;
  // Admissible parent sets (names) matching `values`.
  std::vector<std::vector<std::string>> parent_sets;
  std::pair<double, double> bounds{0.0, 0.0};
  // Parent sets whose regression was singular and therefore skipped.
  std::size_t skipped = 0;
};

// Structural problems that make `g` unusable as a CPDAG/MPDAG: conflict
// edges, directed cycles, or orientations that Meek's rules would extend.
std::vector<std::string> cpdag_violations(const MixedGraph& g);

// Local IDA. For each subset T of x's undirected neighbours such that
// pa(x) + T introduces no new v-structure at x, the effect is the least-squares
// coefficient of x in the regression of y on x, pa(x) and T (0 when y is among
// them). The effect of x on itself is 1. Uses rows complete on the regression
// variables. Throws GraphError on an invalid graph and ValidationError on
// non-continuous or unknown variables.
EffectEstimate ida_local(const MixedGraph& g, const Dataset& data, const std::string& x, const std::string& y);

}  // namespace cdkit
