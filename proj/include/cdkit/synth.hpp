#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdkit/dataset.hpp"
#include "cdkit/graph.hpp"
#include "cdkit/knowledge.hpp"

namespace cdkit {

enum class MechanismKind { multinomial, linear, ordered_logistic, poisson };

std::string to_string(MechanismKind k);

// How one node is drawn given its parents.
//
// Numeric parents (continuous, count) enter linear predictors through a single
// coefficient; a categorical parent with L levels through L-1 dummy
// coefficients, the first level being the reference.
struct Mechanism {
  MechanismKind kind = MechanismKind::linear;
  // multinomial: one probability row per joint configuration of the parents
  // (all categorical), parents taken in name order with the last varying
  // fastest. A root node has a single row.
  std::vector<std::vector<double>> table;
  double intercept = 0.0;  // linear, poisson
  std::map<std::string, std::vector<double>> coefficients;
  double noise_sd = 1.0;         // linear
  std::vector<double> cutpoints;  // ordered_logistic: P(Y <= k) = logistic(c_k - eta)
};

struct NodeSpec {
  std::string name;
  Scale scale = Scale::continuous;
  std::vector<std::string> levels;  // categorical, and count nodes drawn from a table
  std::optional<int> tier;
  Mechanism mechanism;
};

struct GenerativeSpec {
  std::vector<NodeSpec> nodes;  // column order of generated data
  MixedGraph dag;

  // Builds the spec; parents of each node are given by name.
  static GenerativeSpec from_parents(std::vector<NodeSpec> nodes,
                                     const std::map<std::string, std::vector<std::string>>& parents);

  std::vector<std::string> names() const;
  std::vector<ColumnSchema> schema() const;
  // Tier assignments of nodes that declare one.
  Knowledge tier_knowledge() const;
  // Every violated invariant.
  std::vector<std::string> problems() const;
  // Throws ValidationError listing problems().
  void validate() const;
};

// Ancestral sampling. Each column draws from its own seeded stream.
// Throws GraphError if the DAG is cyclic and ValidationError if invalid.
Dataset generate(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed);

// 34-variable cohort in the layout of the obesity example: country, sex, fto,
// birth_weight, then ten variables per wave for three waves. Coefficients are
// illustrative, not estimates.
GenerativeSpec paper_cohort_spec();
// Number of leading columns forming the cross-section (baseline plus wave 0).
inline constexpr std::size_t kCohortCrossSection = 14;
// Tiers, context variables of the cohort: country and sex point into every
// variable, each age into its own wave.
Knowledge paper_cohort_knowledge();

// --- Missingness ---------------------------------------------------------------

struct MissingMechanism {
  enum class Kind { never, mcar, mar };
  Kind kind = Kind::never;
  double rate = 0.0;
  // mar: logit P(missing) = b0 + sum coefficient * standardized driver, with b0
  // calibrated so the expected missing fraction equals `rate`.
  std::vector<std::string> drivers;
  std::vector<double> coefficients;
};

struct MissingnessSpec {
  std::map<std::string, MissingMechanism> variables;  // absent = never

  std::vector<std::string> problems(const std::vector<std::string>& names) const;
};

// Returns a copy with cells masked according to `spec`; observed values are
// never altered. Throws ValidationError on an invalid spec or a mar driver
// with missing cells.
Dataset inject_missing(const Dataset& data, const MissingnessSpec& spec, std::uint64_t seed);

// Baseline, age and bmi never missing; fiber and mvpa about 55% (MAR on bmi
// and age of the same wave); everything else 1-10% MCAR.
MissingnessSpec paper_missingness_spec();

// --- JSON -----------------------------------------------------------------------

// {"variables": [{"name", "scale", "levels"?, "tier"?, "parents"?,
//   "mechanism": {"type", "table"?, "intercept"?, "coefficients"?, "noise_sd"?,
//                 "cutpoints"?}}]}
// Coefficient values are numbers or arrays (categorical parents).
std::string spec_to_json(const GenerativeSpec& spec);
GenerativeSpec spec_from_json(const std::string& text);
GenerativeSpec load_spec(const std::string& path);

// {"variables": {"name": {"type": "never"|"mcar"|"mar", "rate"?, "drivers"?, "coefficients"?}}}
std::string missingness_to_json(const MissingnessSpec& spec);
MissingnessSpec missingness_from_json(const std::string& text);

}  // namespace cdkit
