#include "cdkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cdkit/error.hpp"

namespace cdkit {

std::string to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::multinomial: return "multinomial";
    case MechanismKind::linear: return "linear";
    case MechanismKind::ordered_logistic: return "ordered_logistic";
    case MechanismKind::poisson: return "poisson";
  }
  return "?";
}

namespace {

MechanismKind parse_mechanism(const std::string& s) {
  if (s == "multinomial") return MechanismKind::multinomial;
  if (s == "linear") return MechanismKind::linear;
  if (s == "ordered_logistic") return MechanismKind::ordered_logistic;
  if (s == "poisson") return MechanismKind::poisson;
  throw ParseError("unknown mechanism type '" + s + "'");
}

Scale parse_scale(const std::string& s) {
  if (s == "continuous") return Scale::continuous;
  if (s == "categorical") return Scale::categorical;
  if (s == "count") return Scale::count;
  throw ParseError("unknown scale '" + s + "'");
}

// One reproducible stream per column.
std::mt19937_64 column_stream(std::uint64_t seed, std::size_t column) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(column), 0x5eedu};
  return std::mt19937_64(seq);
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

// --- GenerativeSpec ---------------------------------------------------------------

GenerativeSpec GenerativeSpec::from_parents(std::vector<NodeSpec> nodes,
                                            const std::map<std::string, std::vector<std::string>>& parents) {
  GenerativeSpec spec;
  std::vector<std::string> names;
  for (const auto& n : nodes) names.push_back(n.name);
  spec.dag = MixedGraph(names);
  for (const auto& [child, ps] : parents) {
    auto c = spec.dag.index_of(child);
    if (!c) throw ValidationError("parents given for unknown node '" + child + "'");
    for (const auto& p : ps) {
      auto pi = spec.dag.index_of(p);
      if (!pi) throw ValidationError("node '" + child + "' has unknown parent '" + p + "'");
      if (*pi == *c) throw ValidationError("node '" + child + "' lists itself as a parent");
      spec.dag.add_directed(*pi, *c);
    }
  }
  spec.nodes = std::move(nodes);
  return spec;
}

std::vector<std::string> GenerativeSpec::names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) out.push_back(n.name);
  return out;
}

std::vector<ColumnSchema> GenerativeSpec::schema() const {
  std::vector<ColumnSchema> out;
  for (const auto& n : nodes) {
    switch (n.scale) {
      case Scale::continuous: out.push_back(ColumnSchema::continuous(n.name)); break;
      case Scale::categorical: out.push_back(ColumnSchema::categorical(n.name, n.levels)); break;
      case Scale::count: out.push_back(ColumnSchema::count(n.name)); break;
    }
  }
  return out;
}

Knowledge GenerativeSpec::tier_knowledge() const {
  Knowledge k;
  for (const auto& n : nodes)
    if (n.tier) k.set_tier(n.name, *n.tier);
  return k;
}

std::vector<std::string> GenerativeSpec::problems() const {
  std::vector<std::string> out;
  if (dag.nodes() != names()) {
    out.push_back("dag nodes do not match the node list");
    return out;
  }
  if (!dag.only_directed()) out.push_back("dag has non-directed edges");
  if (auto cyc = dag.directed_cycle()) {
    std::string msg = "dag has a directed cycle:";
    for (auto v : *cyc) msg += " " + dag.name(v);
    out.push_back(msg);
  }
  std::set<std::string> seen;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    const auto& n = nodes[v];
    const auto& m = n.mechanism;
    const std::string where = "node '" + n.name + "': ";
    if (!seen.insert(n.name).second) out.push_back(where + "duplicate name");
    const auto parents = dag.parents(v);
    const bool discrete = n.scale == Scale::categorical || (n.scale == Scale::count && !n.levels.empty());
    if ((n.scale == Scale::categorical || m.kind == MechanismKind::multinomial) && n.levels.size() < 2)
      out.push_back(where + "needs at least two levels");
    if (n.scale == Scale::count && !n.levels.empty()) {
      for (const auto& l : n.levels) {
        double x = 0.0;
        std::istringstream ls(l);
        if (!(ls >> x) || x < 0 || x != std::floor(x)) out.push_back(where + "count level '" + l + "' is not a count");
      }
    }

    switch (m.kind) {
      case MechanismKind::multinomial: {
        if (!discrete) out.push_back(where + "multinomial needs a categorical or count scale with levels");
        std::size_t configs = 1;
        for (auto p : parents) {
          if (nodes[p].scale != Scale::categorical) {
            out.push_back(where + "multinomial parent '" + nodes[p].name + "' is not categorical");
          } else {
            configs *= nodes[p].levels.size();
          }
        }
        if (m.table.size() != configs)
          out.push_back(where + "probability table has " + std::to_string(m.table.size()) + " rows, expected " +
                        std::to_string(configs));
        for (std::size_t r = 0; r < m.table.size(); ++r) {
          const auto& row = m.table[r];
          if (row.size() != n.levels.size()) {
            out.push_back(where + "probability row " + std::to_string(r) + " has the wrong length");
            continue;
          }
          double sum = 0.0;
          bool negative = false;
          for (double q : row) {
            sum += q;
            negative = negative || !(q >= 0.0);
          }
          if (negative || std::abs(sum - 1.0) > 1e-9)
            out.push_back(where + "probability row " + std::to_string(r) + " does not sum to 1");
        }
        if (!m.coefficients.empty()) out.push_back(where + "multinomial takes no coefficients");
        break;
      }
      case MechanismKind::linear:
        if (n.scale != Scale::continuous) out.push_back(where + "linear mechanism needs a continuous scale");
        if (!(m.noise_sd > 0.0)) out.push_back(where + "noise sd must be positive");
        break;
      case MechanismKind::ordered_logistic:
        if (n.scale != Scale::categorical) out.push_back(where + "ordered logistic needs a categorical scale");
        if (m.cutpoints.size() + 1 != n.levels.size())
          out.push_back(where + "needs " + std::to_string(n.levels.size() ? n.levels.size() - 1 : 0) + " cutpoints");
        for (std::size_t k = 1; k < m.cutpoints.size(); ++k)
          if (!(m.cutpoints[k] > m.cutpoints[k - 1])) out.push_back(where + "cutpoints must be strictly increasing");
        break;
      case MechanismKind::poisson:
        if (n.scale != Scale::count || !n.levels.empty()) out.push_back(where + "poisson needs a count scale without levels");
        break;
    }
    if (m.kind != MechanismKind::multinomial) {
      std::set<std::string> parent_names;
      for (auto p : parents) parent_names.insert(nodes[p].name);
      for (const auto& [name, coef] : m.coefficients)
        if (!parent_names.count(name)) out.push_back(where + "coefficient for non-parent '" + name + "'");
      for (auto p : parents) {
        auto it = m.coefficients.find(nodes[p].name);
        if (it == m.coefficients.end()) {
          out.push_back(where + "no coefficient for parent '" + nodes[p].name + "'");
          continue;
        }
        const std::size_t want = nodes[p].scale == Scale::categorical ? nodes[p].levels.size() - 1 : 1;
        if (it->second.size() != want)
          out.push_back(where + "parent '" + nodes[p].name + "' needs " + std::to_string(want) + " coefficient(s)");
      }
    }
  }
  return out;
}

void GenerativeSpec::validate() const {
  auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid generative spec:";
  for (const auto& s : p) msg += "\n  " + s;
  throw ValidationError(msg);
}

// --- Generation -----------------------------------------------------------------

Dataset generate(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.dag.nodes() == spec.names() && spec.dag.directed_cycle())
    throw GraphError("generative spec dag is cyclic");
  spec.validate();
  Dataset data(spec.schema(), n);
  const auto order = spec.dag.topological_order();

  for (auto v : order) {
    const auto& node = spec.nodes[v];
    const auto& m = node.mechanism;
    const auto parents = spec.dag.parents(v);
    auto rng = column_stream(seed, v);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto predictor = [&](std::size_t i) {
      double eta = 0.0;
      for (auto p : parents) {
        const auto& coef = m.coefficients.at(spec.nodes[p].name);
        if (spec.nodes[p].scale == Scale::categorical) {
          int c = data.code(i, p);
          if (c > 0) eta += coef[static_cast<std::size_t>(c - 1)];
        } else {
          eta += coef[0] * data.value(i, p);
        }
      }
      return eta;
    };
    auto emit_level = [&](std::size_t i, std::size_t level) {
      if (node.scale == Scale::categorical) {
        data.set_code(i, v, static_cast<int>(level));
      } else {
        data.set_value(i, v, std::stod(node.levels[level]));
      }
    };

    switch (m.kind) {
      case MechanismKind::multinomial:
        for (std::size_t i = 0; i < n; ++i) {
          std::size_t row = 0;
          for (auto p : parents) row = row * spec.nodes[p].levels.size() + static_cast<std::size_t>(data.code(i, p));
          const auto& probs = m.table[row];
          const double u = unif(rng);
          double acc = 0.0;
          std::size_t level = probs.size() - 1;
          for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
              level = k;
              break;
            }
          }
          emit_level(i, level);
        }
        break;
      case MechanismKind::linear: {
        std::normal_distribution<double> noise(0.0, m.noise_sd);
        for (std::size_t i = 0; i < n; ++i) data.set_value(i, v, m.intercept + predictor(i) + noise(rng));
        break;
      }
      case MechanismKind::ordered_logistic:
        for (std::size_t i = 0; i < n; ++i) {
          const double eta = predictor(i);
          const double u = unif(rng);
          std::size_t level = m.cutpoints.size();
          for (std::size_t k = 0; k < m.cutpoints.size(); ++k) {
            if (u < logistic(m.cutpoints[k] - eta)) {
              level = k;
              break;
            }
          }
          emit_level(i, level);
        }
        break;
      case MechanismKind::poisson:
        for (std::size_t i = 0; i < n; ++i) {
          const double lambda = std::clamp(std::exp(m.intercept + predictor(i)), 1e-12, 1e6);
          std::poisson_distribution<long> draw(lambda);
          data.set_value(i, v, static_cast<double>(draw(rng)));
        }
        break;
    }
  }
  data.finalize();
  return data;
}

// --- Bundled cohort ----------------------------------------------------------------

namespace {

std::vector<double> scaled(const std::vector<double>& v, double s) {
  std::vector<double> out(v);
  for (auto& x : out) x *= s;
  return out;
}

}  // namespace

GenerativeSpec paper_cohort_spec() {
  // Country contrasts against the first country, in units of the outcome's scale.
  const std::vector<double> C{0.2, -0.3, 0.4, 0.1, -0.2, 0.3, -0.1};
  const std::vector<std::string> countries{"ITA", "EST", "CYP", "BEL", "SWE", "GER", "HUN", "ESP"};

  std::vector<NodeSpec> nodes;
  std::map<std::string, std::vector<std::string>> parents;

  auto add = [&](NodeSpec n, std::map<std::string, std::vector<double>> coef = {}) {
    std::vector<std::string> ps;
    for (const auto& [p, _] : coef) ps.push_back(p);
    if (n.mechanism.kind != MechanismKind::multinomial) n.mechanism.coefficients = std::move(coef);
    parents[n.name] = ps;
    nodes.push_back(std::move(n));
  };
  auto linear = [](std::string name, int tier, double intercept, double sd) {
    NodeSpec n;
    n.name = std::move(name);
    n.tier = tier;
    n.mechanism.kind = MechanismKind::linear;
    n.mechanism.intercept = intercept;
    n.mechanism.noise_sd = sd;
    return n;
  };

  {
    NodeSpec n;
    n.name = "country";
    n.scale = Scale::categorical;
    n.levels = countries;
    n.tier = 1;
    n.mechanism.kind = MechanismKind::multinomial;
    n.mechanism.table = {{0.14, 0.12, 0.08, 0.10, 0.12, 0.16, 0.14, 0.14}};
    add(n);
  }
  {
    NodeSpec n;
    n.name = "sex";
    n.scale = Scale::categorical;
    n.levels = {"male", "female"};
    n.tier = 1;
    n.mechanism.kind = MechanismKind::multinomial;
    n.mechanism.table = {{0.51, 0.49}};
    add(n);
  }
  {
    NodeSpec n;
    n.name = "fto";
    n.scale = Scale::count;
    n.levels = {"0", "1", "2"};
    n.tier = 2;
    n.mechanism.kind = MechanismKind::multinomial;
    n.mechanism.table = {{0.38, 0.47, 0.15}};
    add(n);
  }
  add(linear("birth_weight", 3, 3350.0, 450.0), {{"sex", {-120.0}}, {"country", scaled(C, 150.0)}});

  for (int k = 0; k < 3; ++k) {
    const std::string t = "_t" + std::to_string(k);
    const std::string prev = "_t" + std::to_string(k - 1);
    const int tier = 4 + k;
    auto with_lag = [&](std::map<std::string, std::vector<double>> coef, const std::string& var,
                        std::vector<double> lag) {
      if (k > 0) coef[var + prev] = std::move(lag);
      return coef;
    };

    add(linear("age" + t, tier, 6.0 + 2.0 * k, 1.5));
    {
      std::map<std::string, std::vector<double>> coef{{"fto", {0.2}}, {"sugar" + t, {0.15}}, {"mvpa" + t, {-0.08}},
                                                     {"media_time" + t, {0.2}}};
      if (k == 0) coef["birth_weight"] = {0.0003};
      add(linear("bmi" + t, tier, 0.2, 1.0), with_lag(coef, "bmi", {0.7}));
    }
    add(linear("bodyfat" + t, tier, 20.0, 3.0),
        with_lag({{"bmi" + t, {2.5}}, {"sex", {2.0}}, {"age" + t, {-0.3}}}, "bodyfat", {0.3}));
    {
      NodeSpec n;
      n.name = "education" + t;
      n.scale = Scale::categorical;
      n.levels = {"low", "medium", "high"};
      n.tier = tier;
      n.mechanism.kind = MechanismKind::ordered_logistic;
      n.mechanism.cutpoints = {-1.5, 0.9};
      add(n, with_lag({{"country", scaled(C, 2.0)}}, "education", {2.5, 5.0}));
    }
    add(linear("fiber" + t, tier, -3.0, 0.4),
        with_lag({{"education" + t, {0.1, 0.2}}, {"country", scaled(C, 0.3)}}, "fiber", {0.4}));
    {
      NodeSpec n;
      n.name = "media_devices" + t;
      n.scale = Scale::count;
      n.tier = tier;
      n.mechanism.kind = MechanismKind::poisson;
      n.mechanism.intercept = -0.4;
      add(n, with_lag({{"country", scaled(C, 0.8)},
                       {"sex", {-0.25}},
                       {"education" + t, {-0.3, -0.6}},
                       {"age" + t, {0.1}}},
                      "media_devices", {0.15}));
    }
    add(linear("media_time" + t, tier, 1.2, 0.8),
        with_lag({{"media_devices" + t, {0.25}}, {"age" + t, {0.1}}, {"country", scaled(C, 0.8)}}, "media_time",
                 {0.4}));
    add(linear("mvpa" + t, tier, 6.0, 2.0),
        with_lag({{"sex", {-0.8}}, {"age" + t, {0.3}}, {"media_time" + t, {-0.6}}}, "mvpa", {0.4}));
    add(linear("sugar" + t, tier, 0.0, 1.0),
        with_lag({{"education" + t, {-0.3, -0.6}}, {"media_time" + t, {0.35}}, {"country", scaled(C, 1.0)}},
                 "sugar", {0.4}));
    add(linear("wellbeing" + t, tier, 0.0, 1.0),
        with_lag({{"bmi" + t, {-0.2}},
                  {"media_time" + t, {-0.25}},
                  {"mvpa" + t, {0.08}},
                  {"country", scaled(C, 0.8)}},
                 "wellbeing", {0.4}));
  }
  auto spec = GenerativeSpec::from_parents(std::move(nodes), parents);
  spec.validate();
  return spec;
}

Knowledge paper_cohort_knowledge() {
  Knowledge k = paper_cohort_spec().tier_knowledge();
  k.context_all = {"country", "sex"};
  k.context_tier = {"age_t0", "age_t1", "age_t2"};
  return k;
}

// --- Missingness ------------------------------------------------------------------

std::vector<std::string> MissingnessSpec::problems(const std::vector<std::string>& names) const {
  std::vector<std::string> out;
  std::set<std::string> known(names.begin(), names.end());
  auto never = [&](const std::string& v) {
    auto it = variables.find(v);
    return it == variables.end() || it->second.kind == MissingMechanism::Kind::never;
  };
  for (const auto& [v, m] : variables) {
    const std::string where = "missingness for '" + v + "': ";
    if (!known.count(v)) out.push_back(where + "unknown variable");
    if (m.kind == MissingMechanism::Kind::never) continue;
    if (!(m.rate >= 0.0 && m.rate < 1.0)) out.push_back(where + "rate must lie in [0, 1)");
    if (m.kind == MissingMechanism::Kind::mar) {
      if (m.drivers.size() != m.coefficients.size())
        out.push_back(where + "drivers and coefficients differ in length");
      for (const auto& d : m.drivers) {
        if (!known.count(d)) out.push_back(where + "unknown driver '" + d + "'");
        else if (!never(d)) out.push_back(where + "driver '" + d + "' is not never-missing");
      }
    }
  }
  return out;
}

Dataset inject_missing(const Dataset& data, const MissingnessSpec& spec, std::uint64_t seed) {
  if (auto p = spec.problems(data.names()); !p.empty()) {
    std::string msg = "invalid missingness spec:";
    for (const auto& s : p) msg += "\n  " + s;
    throw ValidationError(msg);
  }
  Dataset out = data;
  const auto n = data.rows();
  for (const auto& [name, m] : spec.variables) {
    if (m.kind == MissingMechanism::Kind::never || m.rate == 0.0 || n == 0) continue;
    const auto j = data.require_index(name);
    auto rng = column_stream(seed, j);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> prob(n, m.rate);
    if (m.kind == MissingMechanism::Kind::mar) {
      std::vector<double> eta(n, 0.0);
      for (std::size_t d = 0; d < m.drivers.size(); ++d) {
        const auto k = data.require_index(m.drivers[d]);
        if (data.missing_count(k) > 0)
          throw ValidationError("missingness driver '" + m.drivers[d] + "' has missing cells");
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += data.value(i, k);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) sq += (data.value(i, k) - mean) * (data.value(i, k) - mean);
        const double sd = std::sqrt(sq / static_cast<double>(n));
        if (sd > 0.0)
          for (std::size_t i = 0; i < n; ++i) eta[i] += m.coefficients[d] * (data.value(i, k) - mean) / sd;
      }
      // Intercept such that the average probability equals the target rate.
      auto average = [&](double b0) {
        double s = 0.0;
        for (double e : eta) s += logistic(b0 + e);
        return s / static_cast<double>(n);
      };
      double lo = -50.0, hi = 50.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (average(mid) < m.rate ? lo : hi) = mid;
      }
      const double b0 = 0.5 * (lo + hi);
      for (std::size_t i = 0; i < n; ++i) prob[i] = logistic(b0 + eta[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (unif(rng) < prob[i]) out.set_missing(i, j);
  }
  return out;
}

MissingnessSpec paper_missingness_spec() {
  MissingnessSpec spec;
  auto mcar = [](double rate) {
    MissingMechanism m;
    m.kind = MissingMechanism::Kind::mcar;
    m.rate = rate;
    return m;
  };
  spec.variables["fto"] = mcar(0.05);
  spec.variables["birth_weight"] = mcar(0.08);
  const std::map<std::string, double> base{{"bodyfat", 0.06}, {"education", 0.03},  {"media_devices", 0.04},
                                           {"media_time", 0.07}, {"sugar", 0.09}, {"wellbeing", 0.10}};
  for (int k = 0; k < 3; ++k) {
    const std::string t = "_t" + std::to_string(k);
    for (const auto& [v, r] : base) spec.variables[v + t] = mcar(std::min(0.10, r + 0.005 * k));
    for (const std::string v : {"fiber", "mvpa"}) {
      MissingMechanism m;
      m.kind = MissingMechanism::Kind::mar;
      m.rate = 0.55;
      m.drivers = {"bmi" + t, "age" + t};
      m.coefficients = {0.5, -0.3};
      spec.variables[v + t] = m;
    }
  }
  return spec;
}

// --- JSON -------------------------------------------------------------------------

std::string spec_to_json(const GenerativeSpec& spec) {
  using nlohmann::ordered_json;
  ordered_json vars = ordered_json::array();
  for (std::size_t v = 0; v < spec.nodes.size(); ++v) {
    const auto& n = spec.nodes[v];
    ordered_json j;
    j["name"] = n.name;
    j["scale"] = to_string(n.scale);
    if (!n.levels.empty()) j["levels"] = n.levels;
    if (n.tier) j["tier"] = *n.tier;
    std::vector<std::string> ps;
    for (auto p : spec.dag.parents(v)) ps.push_back(spec.nodes[p].name);
    j["parents"] = ps;
    ordered_json m;
    m["type"] = to_string(n.mechanism.kind);
    switch (n.mechanism.kind) {
      case MechanismKind::multinomial: m["table"] = n.mechanism.table; break;
      case MechanismKind::linear:
        m["intercept"] = n.mechanism.intercept;
        m["noise_sd"] = n.mechanism.noise_sd;
        break;
      case MechanismKind::ordered_logistic: m["cutpoints"] = n.mechanism.cutpoints; break;
      case MechanismKind::poisson: m["intercept"] = n.mechanism.intercept; break;
    }
    if (n.mechanism.kind != MechanismKind::multinomial) {
      ordered_json coef = ordered_json::object();
      for (const auto& [p, c] : n.mechanism.coefficients) {
        if (c.size() == 1 && spec.nodes[spec.dag.require_index(p)].scale != Scale::categorical) coef[p] = c[0];
        else coef[p] = c;
      }
      m["coefficients"] = coef;
    }
    j["mechanism"] = m;
    vars.push_back(j);
  }
  ordered_json root;
  root["variables"] = vars;
  return root.dump(2) + "\n";
}

GenerativeSpec spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("spec json: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  auto fail = [](const std::string& why) { throw ParseError("spec json: " + why); };
  if (!j.is_object() || !j.contains("variables") || !j["variables"].is_array())
    fail("expected an object with a 'variables' array");
  std::vector<NodeSpec> nodes;
  std::map<std::string, std::vector<std::string>> parents;
  try {
    for (const auto& v : j["variables"]) {
      NodeSpec n;
      n.name = v.at("name").get<std::string>();
      n.scale = parse_scale(v.value("scale", std::string("continuous")));
      if (v.contains("levels")) n.levels = v["levels"].get<std::vector<std::string>>();
      if (v.contains("tier")) n.tier = v["tier"].get<int>();
      if (v.contains("parents")) parents[n.name] = v["parents"].get<std::vector<std::string>>();
      const auto& m = v.at("mechanism");
      n.mechanism.kind = parse_mechanism(m.at("type").get<std::string>());
      if (m.contains("table")) n.mechanism.table = m["table"].get<std::vector<std::vector<double>>>();
      n.mechanism.intercept = m.value("intercept", 0.0);
      n.mechanism.noise_sd = m.value("noise_sd", 1.0);
      if (m.contains("cutpoints")) n.mechanism.cutpoints = m["cutpoints"].get<std::vector<double>>();
      if (m.contains("coefficients")) {
        for (const auto& [p, c] : m["coefficients"].items())
          n.mechanism.coefficients[p] = c.is_array() ? c.get<std::vector<double>>() : std::vector<double>{c.get<double>()};
      }
      nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return GenerativeSpec::from_parents(std::move(nodes), parents);
}

GenerativeSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return spec_from_json(ss.str());
}

std::string missingness_to_json(const MissingnessSpec& spec) {
  nlohmann::ordered_json vars = nlohmann::ordered_json::object();
  for (const auto& [name, m] : spec.variables) {
    nlohmann::ordered_json j;
    switch (m.kind) {
      case MissingMechanism::Kind::never: j["type"] = "never"; break;
      case MissingMechanism::Kind::mcar: j["type"] = "mcar"; break;
      case MissingMechanism::Kind::mar: j["type"] = "mar"; break;
    }
    if (m.kind != MissingMechanism::Kind::never) j["rate"] = m.rate;
    if (m.kind == MissingMechanism::Kind::mar) {
      j["drivers"] = m.drivers;
      j["coefficients"] = m.coefficients;
    }
    vars[name] = j;
  }
  nlohmann::ordered_json root;
  root["variables"] = vars;
  return root.dump(2) + "\n";
}

MissingnessSpec missingness_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("missingness json: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  MissingnessSpec spec;
  try {
    for (const auto& [name, v] : j.at("variables").items()) {
      MissingMechanism m;
      const auto type = v.at("type").get<std::string>();
      if (type == "never") m.kind = MissingMechanism::Kind::never;
      else if (type == "mcar") m.kind = MissingMechanism::Kind::mcar;
      else if (type == "mar") m.kind = MissingMechanism::Kind::mar;
      else throw ParseError("missingness json: unknown type '" + type + "' for '" + name + "'");
      m.rate = v.value("rate", 0.0);
      if (v.contains("drivers")) m.drivers = v["drivers"].get<std::vector<std::string>>();
      if (v.contains("coefficients")) m.coefficients = v["coefficients"].get<std::vector<double>>();
      spec.variables[name] = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("missingness json: ") + e.what());
  }
  return spec;
}

}  // namespace cdkit
