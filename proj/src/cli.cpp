#include "cdkit/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "cdkit/citest.hpp"
#include "cdkit/dataset.hpp"
#include "cdkit/effects.hpp"
#include "cdkit/engine.hpp"
#include "cdkit/error.hpp"
#include "cdkit/graph.hpp"
#include "cdkit/knowledge.hpp"
#include "cdkit/synth.hpp"

namespace cdkit {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

// Flags naming files a command writes; excluded from the manifest digest so
// that a rerun into other paths yields byte-identical outputs.
const std::set<std::string> kOutputFlags{"out", "json", "trace", "manifest", "masked-out", "schema-out",
                                         "knowledge-out", "spec-out"};
// Flags naming files a command reads; their contents are hashed.
const std::set<std::string> kInputFlags{"data", "schema", "knowledge", "imputations", "spec", "missing-spec",
                                        "dag", "graph", "a", "b"};
// Runtime-only settings that never change outputs.
const std::set<std::string> kRuntimeFlags{"workers"};

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string one_line(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\n') {
      out += s[i];
      continue;
    }
    out += out.ends_with(':') ? " " : "; ";
    while (i + 1 < s.size() && s[i + 1] == ' ') ++i;
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
  if (!f) throw std::runtime_error("error writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --- Knowledge from flags -----------------------------------------------------

struct EdgeSpec {
  std::string a, b;
  bool directed = true;
};

EdgeSpec parse_edge(const std::string& text) {
  for (std::string op : {"->", "--"}) {
    auto pos = text.find(op);
    if (pos == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    EdgeSpec e{trim(text.substr(0, pos)), trim(text.substr(pos + 2)), op == "->"};
    if (!e.a.empty() && !e.b.empty()) return e;
  }
  throw ValidationError("cannot parse edge '" + text + "' (expected 'a->b' or 'a--b')");
}

Knowledge restrict_knowledge(const Knowledge& k, const std::vector<std::string>& vars) {
  std::set<std::string> keep(vars.begin(), vars.end());
  Knowledge out;
  for (const auto& [v, t] : k.tiers)
    if (keep.count(v)) out.tiers[v] = t;
  auto pairs = [&](const std::set<NamePair>& in, std::set<NamePair>& dst) {
    for (const auto& p : in)
      if (keep.count(p.first) && keep.count(p.second)) dst.insert(p);
  };
  pairs(k.forbidden, out.forbidden);
  pairs(k.required_directed, out.required_directed);
  pairs(k.required_adjacent, out.required_adjacent);
  pairs(k.forbidden_adjacent, out.forbidden_adjacent);
  for (const auto& v : k.context_all)
    if (keep.count(v)) out.context_all.insert(v);
  for (const auto& v : k.context_tier)
    if (keep.count(v)) out.context_tier.insert(v);
  return out;
}

// --- Manifest -------------------------------------------------------------------

// Resolved value of every option of a subcommand, keyed by long flag name.
json resolved_options(const CLI::App& sub) {
  json cfg = json::object();
  for (const auto* opt : sub.get_options()) {
    const auto& name = opt->get_single_name();
    if (name.empty() || name == "help" || opt->get_positional()) continue;
    if (opt->get_expected_max() == 0) {
      cfg[name] = opt->count() > 0;
    } else if (opt->get_items_expected_max() > 1) {
      cfg[name] = opt->count() > 0 ? json(opt->results()) : json::array();
    } else if (opt->count() > 0) {
      cfg[name] = opt->results().back();
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    } else {
      cfg[name] = nullptr;
    }
  }
  return cfg;
}

struct Manifest {
  std::string command;
  json options;  // every option, as resolved
  std::uint64_t seed = 0;
  bool has_seed = false;
  json inputs = json::object();
  json outputs = json::object();
  std::string digest;

  void finish_inputs() {
    for (const auto& [key, value] : options.items()) {
      if (!kInputFlags.count(key) || value.is_null()) continue;
      if (value.is_array()) {
        json list = json::array();
        for (const auto& p : value) list.push_back({{"path", p}, {"sha256", sha256_file(p.get<std::string>())}});
        inputs[key] = list;
      } else {
        auto path = value.get<std::string>();
        inputs[key] = {{"path", path}, {"sha256", sha256_file(path)}};
      }
    }
    json core = {{"tool", "cdkit"}, {"version", kVersion}, {"command", command}};
    json settings = json::object();
    for (const auto& [key, value] : options.items())
      if (!kOutputFlags.count(key) && !kRuntimeFlags.count(key) && !kInputFlags.count(key)) settings[key] = value;
    core["settings"] = settings;
    json input_digests = json::object();
    for (const auto& [key, value] : inputs.items()) {
      if (value.is_array()) {
        json list = json::array();
        for (const auto& e : value) list.push_back(e["sha256"]);
        input_digests[key] = list;
      } else {
        input_digests[key] = value["sha256"];
      }
    }
    core["inputs"] = input_digests;
    digest = sha256_hex(core.dump());
  }

  void add_output(const std::string& role, const std::string& path, const std::string& content) {
    outputs[role] = {{"path", path}, {"sha256", sha256_hex(content)}};
  }

  json to_json() const {
    json j = {{"tool", "cdkit"}, {"version", kVersion}, {"command", command}, {"digest", digest}};
    j["options"] = options;
    if (has_seed) j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    return j;
  }
};

// --- Command state ----------------------------------------------------------------

struct DiscoverArgs {
  std::string data, schema, knowledge;
  std::vector<std::string> markers, imputations, context_all, context_tier, forbid, require;
  std::string test = "cg", missing = "complete", conflict = "bidirected", na_policy = "delete";
  double alpha = 0.01;
  std::optional<int> m_max;
  bool maj_rule = false, conservative = false, tiered = false, adapt_df = false;
  std::size_t hot_deck = 0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string out, json_out, trace, manifest;
};

struct SimulateArgs {
  bool paper_cohort = false, cross_section = false;
  std::string spec, missing, missing_spec;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string out, masked_out, schema_out, knowledge_out, spec_out, manifest;
};

struct OracleArgs {
  std::string dag, conflict = "bidirected";
  bool maj_rule = false, conservative = false;
  std::size_t workers = 1;
  std::string out, json_out, trace, manifest;
};

struct CompareArgs {
  std::string a, b, manifest;
  bool truth = false;
};

struct DsepArgs {
  std::string dag;
  std::vector<std::string> nodes;
};

struct EffectsArgs {
  std::string graph, data, schema, source, target, manifest;
};

struct RerunArgs {
  std::string manifest;
  bool check = false;
};

std::size_t default_workers() {
  if (const char* env = std::getenv("CDKIT_WORKERS")) {
    std::size_t w = 0;
    auto [p, ec] = std::from_chars(env, env + std::strlen(env), w);
    if (ec == std::errc{} && *p == '\0' && w > 0) return w;
  }
  return 1;
}

Dataset load_data(const std::string& path, const std::string& schema_path, const std::vector<std::string>& markers) {
  CsvOptions opts;
  if (!markers.empty()) opts.missing_markers = {markers.begin(), markers.end()};
  std::optional<std::vector<ColumnSchema>> schema;
  if (!schema_path.empty()) schema = load_schema(schema_path);
  return load_csv(path, schema, opts);
}

EngineConfig engine_config(double alpha, std::optional<int> m_max, bool maj_rule, bool conservative,
                           const std::string& conflict, const std::string& na_policy, std::size_t workers) {
  EngineConfig c;
  c.alpha = alpha;
  if (m_max) {
    if (*m_max < 0) throw ValidationError("--m-max must be non-negative");
    c.m_max = static_cast<std::size_t>(*m_max);
  }
  c.vstruct_rule = maj_rule ? VStructRule::majority : conservative ? VStructRule::conservative : VStructRule::standard;
  c.conflict_mode = parse_conflict_mode(conflict);
  c.na_policy = parse_na_policy(na_policy);
  c.workers = workers;
  c.validate();
  return c;
}

// Writes a graph to the requested files (or DOT to stdout when none) and records them.
void emit_graph(const MixedGraph& g, const std::string& dot_path, const std::string& json_path, Manifest& m,
                std::ostream& out) {
  const std::string comment = "cdkit manifest " + m.digest;
  const auto dot = to_dot(g, comment);
  if (!dot_path.empty()) {
    write_file(dot_path, dot);
    m.add_output("out", dot_path, dot);
  }
  if (!json_path.empty()) {
    const auto text = to_json(g, m.digest);
    write_file(json_path, text);
    m.add_output("json", json_path, text);
  }
  if (dot_path.empty() && json_path.empty()) out << dot;
}

void write_manifest(Manifest& m, const std::string& explicit_path, const std::vector<std::string>& primary,
                    const std::string& stdout_text) {
  std::string path = explicit_path;
  if (path.empty())
    for (const auto& p : primary)
      if (!p.empty()) {
        path = p + ".manifest.json";
        break;
      }
  if (path.empty()) return;
  m.add_output("stdout", "", stdout_text);
  write_file(path, m.to_json().dump(2) + "\n");
}

// --- Commands -------------------------------------------------------------------

int cmd_discover(const DiscoverArgs& a, Manifest& m, std::ostream& out, std::ostream& err) {
  m.seed = a.seed;
  m.has_seed = true;
  m.finish_inputs();
  const auto data = load_data(a.data, a.schema, a.markers);
  const auto kernel = parse_kernel(a.test);
  const auto mode = parse_missing_mode(a.missing);
  const auto config =
      engine_config(a.alpha, a.m_max, a.maj_rule, a.conservative, a.conflict, a.na_policy, a.workers);
  KernelOptions kopts;
  kopts.adapt_df = a.adapt_df;

  Knowledge k;
  if (!a.knowledge.empty()) k = load_knowledge(a.knowledge);
  for (const auto& v : a.context_all) k.context_all.insert(v);
  for (const auto& v : a.context_tier) k.context_tier.insert(v);
  for (const auto& s : a.forbid) {
    auto e = parse_edge(s);
    e.directed ? k.forbid(e.a, e.b) : k.forbid_adjacent(e.a, e.b);
  }
  for (const auto& s : a.require) {
    auto e = parse_edge(s);
    e.directed ? k.require(e.a, e.b) : k.require_adjacent(e.a, e.b);
  }

  std::unique_ptr<IndependenceTest> tester;
  if (mode == MissingMode::mi_pooled) {
    std::vector<Dataset> sets;
    for (const auto& p : a.imputations) sets.push_back(load_csv(p, data.schema()));
    if (sets.empty() && a.hot_deck > 0) sets = hot_deck_impute(data, a.hot_deck, a.seed);
    if (sets.empty()) throw ValidationError("--missing mi needs --imputations files or --hot-deck m");
    tester = std::make_unique<PooledIndependenceTest>(kernel, std::move(sets), kopts);
  } else {
    if (mode == MissingMode::complete_only && data.has_missing())
      err << "warning: " << data.missing_count()
          << " missing cells; list-wise deletion drops incomplete rows (see --missing twd)\n";
    tester = std::make_unique<DataIndependenceTest>(kernel, mode, data, kopts);
  }

  auto result = a.tiered ? tpc(*tester, config, k) : pc(*tester, config, k);
  std::ostringstream buf;
  emit_graph(result.graph, a.out, a.json_out, m, buf);
  if (!a.trace.empty()) {
    const auto text = result.trace.to_text();
    write_file(a.trace, text);
    m.add_output("trace", a.trace, text);
  }
  out << buf.str();
  write_manifest(m, a.manifest, {a.out, a.json_out}, buf.str());
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& a, Manifest& m, std::ostream& out, std::ostream&) {
  if (a.paper_cohort == !a.spec.empty()) throw CLI::ValidationError("simulate", "give exactly one of --paper-cohort, --spec");
  if (a.cross_section && !a.paper_cohort) throw CLI::ValidationError("simulate", "--cross-section needs --paper-cohort");
  if (!a.knowledge_out.empty() && !a.paper_cohort)
    throw CLI::ValidationError("simulate", "--knowledge-out needs --paper-cohort");
  m.seed = a.seed;
  m.has_seed = true;
  m.finish_inputs();
  const auto spec = a.paper_cohort ? paper_cohort_spec() : load_spec(a.spec);
  spec.validate();
  auto data = generate(spec, a.n, a.seed);
  auto names = data.names();
  if (a.cross_section) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < kCohortCrossSection; ++j) cols.push_back(j);
    data = data.project(cols);
    names = data.names();
  }
  std::optional<Dataset> masked;
  if (!a.missing.empty() && !a.missing_spec.empty())
    throw CLI::ValidationError("simulate", "give at most one of --missing, --missing-spec");
  if (!a.missing.empty() || !a.missing_spec.empty()) {
    auto ms = a.missing_spec.empty() ? paper_missingness_spec() : missingness_from_json(read_file(a.missing_spec));
    if (a.missing_spec.empty() || a.cross_section) {
      std::set<std::string> keep(names.begin(), names.end());
      for (auto it = ms.variables.begin(); it != ms.variables.end();)
        it = keep.count(it->first) ? std::next(it) : ms.variables.erase(it);
    }
    masked = inject_missing(data, ms, a.seed ^ 0x9e3779b97f4a7c15ull);
  }

  auto csv = [](const Dataset& d) {
    std::ostringstream s;
    write_csv(s, d);
    return s.str();
  };
  std::ostringstream buf;
  const auto full = csv(data);
  if (!a.out.empty()) {
    write_file(a.out, full);
    m.add_output("out", a.out, full);
  }
  if (masked) {
    const auto text = csv(*masked);
    std::string path = a.masked_out;
    if (path.empty() && !a.out.empty()) path = fs::path(a.out).replace_extension().string() + "_missing.csv";
    if (!path.empty()) {
      write_file(path, text);
      m.add_output("masked-out", path, text);
    } else {
      buf << text;
    }
  } else if (a.out.empty()) {
    buf << full;
  }
  if (!a.schema_out.empty()) {
    std::ostringstream s;
    write_schema(s, data.schema());
    write_file(a.schema_out, s.str());
    m.add_output("schema-out", a.schema_out, s.str());
  }
  if (!a.knowledge_out.empty()) {
    std::ostringstream s;
    write_knowledge(s, restrict_knowledge(paper_cohort_knowledge(), names));
    write_file(a.knowledge_out, s.str());
    m.add_output("knowledge-out", a.knowledge_out, s.str());
  }
  if (!a.spec_out.empty()) {
    const auto text = spec_to_json(spec);
    write_file(a.spec_out, text);
    m.add_output("spec-out", a.spec_out, text);
  }
  out << buf.str();
  write_manifest(m, a.manifest, {a.out}, buf.str());
  return kExitOk;
}

MixedGraph load_dag(const std::string& path) {
  auto dag = load_graph_json(path);
  if (!dag.only_directed()) throw GraphError("'" + path + "' is not a DAG: it has undirected or bi-directed edges");
  if (auto cyc = dag.directed_cycle()) {
    std::string msg = "'" + path + "' is cyclic:";
    for (auto v : *cyc) msg += " " + dag.name(v) + " ->";
    throw GraphError(msg + " " + dag.name(cyc->front()));
  }
  return dag;
}

int cmd_oracle(const OracleArgs& a, Manifest& m, std::ostream& out, std::ostream&) {
  m.finish_inputs();
  const auto dag = load_dag(a.dag);
  const auto config = engine_config(0.5, std::nullopt, a.maj_rule, a.conservative, a.conflict, "delete", a.workers);
  DSeparationOracle oracle(dag);
  auto result = pc(oracle, config);
  std::ostringstream buf;
  emit_graph(result.graph, a.out, a.json_out, m, buf);
  if (!a.trace.empty()) {
    const auto text = result.trace.to_text();
    write_file(a.trace, text);
    m.add_output("trace", a.trace, text);
  }
  out << buf.str();
  write_manifest(m, a.manifest, {a.out, a.json_out}, buf.str());
  return kExitOk;
}

int cmd_compare(const CompareArgs& a, Manifest& m, std::ostream& out, std::ostream&) {
  m.finish_inputs();
  auto g1 = load_graph_json(a.a);
  auto g2 = a.truth ? cpdag_of(load_dag(a.b)) : load_graph_json(a.b);
  std::ostringstream buf;
  buf << "shd " << shd(g1, g2) << "\n";
  auto s = score(g1, g2);
  buf << "adjacency_precision " << num(s.adjacency_precision) << "\n"
      << "adjacency_recall " << num(s.adjacency_recall) << "\n"
      << "adjacency_f1 " << num(s.adjacency_f1) << "\n"
      << "arrowhead_precision " << num(s.arrowhead_precision) << "\n"
      << "arrowhead_recall " << num(s.arrowhead_recall) << "\n";
  for (const auto& d : edge_differences(g1, g2))
    buf << "diff " << d.a << " " << d.b << ": " << (d.left.empty() ? "absent" : d.left) << " | "
        << (d.right.empty() ? "absent" : d.right) << "\n";
  out << buf.str();
  write_manifest(m, a.manifest, {}, buf.str());
  return kExitOk;
}

int cmd_dsep(const DsepArgs& a, std::ostream& out) {
  if (a.nodes.size() < 2) throw CLI::ValidationError("dsep", "expected: dsep --dag FILE X Y [S ...]");
  const auto dag = load_dag(a.dag);
  std::vector<std::string> s(a.nodes.begin() + 2, a.nodes.end());
  out << (d_separated(dag, a.nodes[0], a.nodes[1], s) ? "true" : "false") << "\n";
  return kExitOk;
}

int cmd_effects(const EffectsArgs& a, Manifest& m, std::ostream& out, std::ostream&) {
  m.finish_inputs();
  const auto g = load_graph_json(a.graph);
  const auto data = load_data(a.data, a.schema, {});
  auto e = ida_local(g, data, a.source, a.target);
  std::ostringstream buf;
  buf << "effect " << e.source << " -> " << e.target << "\n";
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    buf << "value " << num(e.values[i]) << " parents {";
    for (std::size_t k = 0; k < e.parent_sets[i].size(); ++k) buf << (k ? "," : "") << e.parent_sets[i][k];
    buf << "}\n";
  }
  if (e.skipped) buf << "skipped " << e.skipped << " singular parent set(s)\n";
  buf << "bounds " << num(e.bounds.first) << " " << num(e.bounds.second) << "\n";
  out << buf.str();
  write_manifest(m, a.manifest, {}, buf.str());
  return kExitOk;
}

// --- Parser ---------------------------------------------------------------------

const std::vector<std::string> kTests{"fisher-z", "fz", "g-square", "gsq", "cg", "cond-gauss", "dg", "degen-gauss"};

struct Parser {
  CLI::App app{"Constraint-based causal discovery with background knowledge and missing data", "cdkit"};
  DiscoverArgs discover;
  SimulateArgs simulate;
  OracleArgs oracle;
  CompareArgs compare;
  DsepArgs dsep;
  EffectsArgs effects;
  RerunArgs rerun;
  std::map<std::string, CLI::App*> subs;

  Parser() {
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    const auto workers = default_workers();
    discover.workers = oracle.workers = workers;

    auto* d = subs["discover"] = app.add_subcommand("discover", "Run pc (or tpc with --tiered) on a CSV file");
    d->add_option("--data", discover.data, "CSV data file")->required();
    d->add_option("--schema", discover.schema, "Schema file (name,scale[,levels])");
    d->add_option("--missing-markers", discover.markers, "Cell values read as missing (default: empty, NA)");
    d->add_option("--test", discover.test, "CI test: fz, gsq, cg, dg")->check(CLI::IsMember(kTests));
    d->add_option("--alpha", discover.alpha, "Significance level");
    d->add_option("--m-max", discover.m_max, "Largest conditioning-set size");
    auto* maj = d->add_flag("--maj-rule", discover.maj_rule, "Majority rule for v-structures");
    d->add_flag("--conservative", discover.conservative, "Conservative rule for v-structures")->excludes(maj);
    d->add_option("--conflict", discover.conflict, "Conflicting orientations: bidirected or pvalue")
        ->check(CLI::IsMember({"bidirected", "pvalue", "pvalue-preference"}));
    d->add_option("--na-policy", discover.na_policy, "Uncomputable tests: delete, keep or error")
        ->check(CLI::IsMember({"delete", "keep", "error"}));
    d->add_flag("--adapt-df", discover.adapt_df, "Reduce G-square df for empty cells");
    d->add_option("--missing", discover.missing, "Missing data: complete, twd or mi")
        ->check(CLI::IsMember({"complete", "listwise", "twd", "testwise", "mi"}));
    d->add_option("--imputations", discover.imputations, "Completed datasets for --missing mi")
        ;
    d->add_option("--hot-deck", discover.hot_deck, "Build m hot-deck imputations (demonstration only)");
    d->add_option("--seed", discover.seed, "Seed for --hot-deck");
    d->add_option("--knowledge", discover.knowledge, "Knowledge file");
    d->add_flag("--tiered", discover.tiered, "Tier-restricted search (every variable needs a tier)");
    d->add_option("--context-all", discover.context_all, "Context variables pointing into every variable");
    d->add_option("--context-tier", discover.context_tier, "Context variables pointing into their own tier");
    d->add_option("--forbid,--blacklist", discover.forbid, "Forbidden edge 'a->b' or adjacency 'a--b'");
    d->add_option("--require,--whitelist", discover.require, "Required edge 'a->b' or adjacency 'a--b'");
    d->add_option("--workers", discover.workers, "Worker threads (default $CDKIT_WORKERS or 1)");
    d->add_option("--out", discover.out, "DOT output file");
    d->add_option("--json", discover.json_out, "Graph JSON output file");
    d->add_option("--trace", discover.trace, "Test trace output file");
    d->add_option("--manifest", discover.manifest, "Manifest file (default: <out>.manifest.json)");

    auto* s = subs["simulate"] = app.add_subcommand("simulate", "Generate synthetic data");
    s->add_flag("--paper-cohort", simulate.paper_cohort, "Use the bundled 34-variable cohort");
    s->add_option("--spec", simulate.spec, "Generative spec JSON");
    s->add_option("--n", simulate.n, "Number of rows")->required();
    s->add_option("--seed", simulate.seed, "Random seed");
    s->add_flag("--cross-section", simulate.cross_section, "Keep baseline and first wave only");
    s->add_option("--missing", simulate.missing, "Missingness preset: paper")->check(CLI::IsMember({"paper"}));
    s->add_option("--missing-spec", simulate.missing_spec, "Missingness JSON file");
    s->add_option("--out", simulate.out, "CSV output (default: stdout)");
    s->add_option("--masked-out", simulate.masked_out, "CSV with missing cells");
    s->add_option("--schema-out", simulate.schema_out, "Schema file output");
    s->add_option("--knowledge-out", simulate.knowledge_out, "Cohort knowledge file output");
    s->add_option("--spec-out", simulate.spec_out, "Spec JSON output");
    s->add_option("--manifest", simulate.manifest, "Manifest file (default: <out>.manifest.json)");

    auto* o = subs["oracle"] = app.add_subcommand("oracle", "Run pc with a d-separation oracle on a DAG");
    o->add_option("--dag", oracle.dag, "DAG JSON file")->required();
    auto* omaj = o->add_flag("--maj-rule", oracle.maj_rule, "Majority rule for v-structures");
    o->add_flag("--conservative", oracle.conservative, "Conservative rule for v-structures")->excludes(omaj);
    o->add_option("--conflict", oracle.conflict, "bidirected or pvalue")
        ->check(CLI::IsMember({"bidirected", "pvalue", "pvalue-preference"}));
    o->add_option("--workers", oracle.workers, "Worker threads");
    o->add_option("--out", oracle.out, "DOT output file");
    o->add_option("--json", oracle.json_out, "Graph JSON output file");
    o->add_option("--trace", oracle.trace, "Test trace output file");
    o->add_option("--manifest", oracle.manifest, "Manifest file");

    auto* c = subs["compare"] = app.add_subcommand("compare", "Compare two graphs");
    c->add_option("--a", compare.a, "Estimated graph JSON")->required();
    c->add_option("--b", compare.b, "Reference graph JSON")->required();
    c->add_flag("--truth", compare.truth, "Reference is a true DAG; compare against its CPDAG");
    c->add_option("--manifest", compare.manifest, "Manifest file");

    auto* ds = subs["dsep"] = app.add_subcommand("dsep", "Query d-separation: dsep --dag FILE X Y [S ...]");
    ds->add_option("--dag", dsep.dag, "DAG JSON file")->required();
    ds->add_option("nodes", dsep.nodes, "X Y and the conditioning set")->required();

    auto* e = subs["effects"] = app.add_subcommand("effects", "Local IDA effect estimates");
    e->add_option("--graph", effects.graph, "CPDAG/MPDAG JSON")->required();
    e->add_option("--data", effects.data, "CSV data (continuous)")->required();
    e->add_option("--schema", effects.schema, "Schema file");
    e->add_option("--source", effects.source, "Intervention variable")->required();
    e->add_option("--target", effects.target, "Outcome variable")->required();
    e->add_option("--manifest", effects.manifest, "Manifest file");

    auto* r = subs["rerun"] = app.add_subcommand("rerun", "Re-execute a run from its manifest");
    r->add_option("--manifest", rerun.manifest, "Manifest JSON")->required();
    r->add_flag("--check", rerun.check, "Write to a scratch directory and compare output digests");
  }
};

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

// Rebuilds a command line from a manifest's resolved options.
std::vector<std::string> command_line(const json& manifest, const std::map<std::string, std::string>& output_paths) {
  std::vector<std::string> args{manifest.at("command").get<std::string>()};
  for (const auto& [key, value] : manifest.at("options").items()) {
    if (kOutputFlags.count(key)) {
      auto it = output_paths.find(key);
      if (it != output_paths.end()) args.insert(args.end(), {"--" + key, it->second});
      continue;
    }
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_array()) {
      if (value.empty()) continue;
      args.push_back("--" + key);
      for (const auto& v : value) args.push_back(v.get<std::string>());
    } else {
      args.insert(args.end(), {"--" + key, value.get<std::string>()});
    }
  }
  return args;
}

int cmd_rerun(const RerunArgs& a, std::ostream& out, std::ostream& err, int depth) {
  if (depth > 0) throw ValidationError("a manifest cannot describe a rerun");
  json manifest;
  try {
    manifest = json::parse(read_file(a.manifest));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  for (const auto& [role, entry] : manifest.at("inputs").items()) {
    std::vector<json> entries = entry.is_array() ? entry.get<std::vector<json>>() : std::vector<json>{entry};
    for (const auto& e : entries) {
      const auto path = e.at("path").get<std::string>();
      if (sha256_file(path) != e.at("sha256").get<std::string>())
        throw ValidationError("input '" + path + "' changed since the manifest was written");
    }
  }

  std::map<std::string, std::string> paths;
  fs::path scratch;
  if (a.check) {
    scratch = fs::temp_directory_path() / ("cdkit-rerun-" + manifest.at("digest").get<std::string>().substr(0, 16));
    fs::create_directories(scratch);
  }
  for (const auto& [role, entry] : manifest.at("outputs").items()) {
    if (role == "stdout") continue;
    const auto path = entry.at("path").get<std::string>();
    paths[role] = a.check ? (scratch / (role + fs::path(path).extension().string())).string() : path;
  }
  if (!a.check) {
    if (manifest.at("options").contains("manifest") && !manifest["options"]["manifest"].is_null())
      paths["manifest"] = manifest["options"]["manifest"].get<std::string>();
    return execute(command_line(manifest, paths), out, err, depth + 1);
  }

  std::ostringstream captured;
  int code = execute(command_line(manifest, paths), captured, err, depth + 1);
  if (code != kExitOk) return code;
  std::size_t mismatches = 0;
  for (const auto& [role, entry] : manifest.at("outputs").items()) {
    const auto expected = entry.at("sha256").get<std::string>();
    const auto actual = role == "stdout" ? sha256_hex(captured.str()) : sha256_file(paths[role]);
    const bool same = actual == expected;
    mismatches += !same;
    out << (same ? "match " : "MISMATCH ") << role << "\n";
  }
  fs::remove_all(scratch);
  if (mismatches) {
    err << "error: " << mismatches << " output(s) differ from the manifest\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  Parser p;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    p.app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << p.app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  std::string name;
  for (const auto& [n, sub] : p.subs)
    if (sub->parsed()) name = n;
  Manifest m;
  m.command = name;
  if (name != "rerun" && name != "dsep") m.options = resolved_options(*p.subs[name]);
  try {
    if (name == "discover") return cmd_discover(p.discover, m, out, err);
    if (name == "simulate") return cmd_simulate(p.simulate, m, out, err);
    if (name == "oracle") return cmd_oracle(p.oracle, m, out, err);
    if (name == "compare") return cmd_compare(p.compare, m, out, err);
    if (name == "dsep") return cmd_dsep(p.dsep, out);
    if (name == "effects") return cmd_effects(p.effects, m, out, err);
    return cmd_rerun(p.rerun, out, err, depth);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const GraphError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return execute(args, out, err, 0);
}

}  // namespace cdkit
