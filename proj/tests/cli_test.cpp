#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cdkit/cli.hpp"
#include "cdkit/dataset.hpp"
#include "cdkit/graph.hpp"
#include "support.hpp"

using namespace cdkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cdkit-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  void write(const std::string& name, const std::string& text) { std::ofstream(path(name)) << text; }

  std::string read(const std::string& name) {
    std::ifstream f(path(name));
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  void write_graph(const std::string& name, const MixedGraph& g) { write(name, to_json(g)); }

  fs::path dir_;
};

MixedGraph chain() {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_directed("B", "C");
  return g;
}

MixedGraph collider() {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_directed("C", "B");
  return g;
}

const char* kLinearSpec = R"({"variables": [
  {"name": "X", "scale": "continuous", "mechanism": {"type": "linear"}},
  {"name": "M", "scale": "continuous", "parents": ["X"], "mechanism": {"type": "linear", "coefficients": {"X": 1.5}}},
  {"name": "Y", "scale": "continuous", "parents": ["M"], "mechanism": {"type": "linear", "coefficients": {"M": 1.0}}}
]})";

}  // namespace

TEST_F(Cli, SimulateCohort) {
  auto r = run({"simulate", "--paper-cohort", "--n", "5000", "--seed", "1", "--out", path("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto d = load_csv(path("d.csv"));
  EXPECT_EQ(d.rows(), 5000u);
  EXPECT_EQ(d.cols(), 34u);
  EXPECT_TRUE(fs::exists(path("d.csv.manifest.json")));
}

TEST_F(Cli, SimulateZeroRowsGivesHeaderOnly) {
  write("s.json", kLinearSpec);
  auto r = run({"simulate", "--spec", path("s.json"), "--n", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "X,M,Y\n");
}

TEST_F(Cli, SimulateCohortMissingness) {
  auto r = run({"simulate", "--paper-cohort", "--n", "2000", "--missing", "paper", "--seed", "2", "--masked-out",
                path("m.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto d = load_csv(path("m.csv"));
  auto frac = [&](const std::string& v) {
    return static_cast<double>(d.missing_count(d.require_index(v))) / static_cast<double>(d.rows());
  };
  EXPECT_EQ(frac("country"), 0.0);
  EXPECT_EQ(frac("bmi_t1"), 0.0);
  EXPECT_GE(frac("fiber_t0"), 0.5);
  EXPECT_LE(frac("fiber_t0"), 0.6);
}

TEST_F(Cli, SimulateRequiresOneSource) {
  EXPECT_EQ(run({"simulate", "--n", "5"}).code, kExitUsage);
  EXPECT_EQ(run({"simulate", "--n", "5", "--paper-cohort", "--missing", "weird"}).code, kExitUsage);
}

TEST_F(Cli, SimulateRejectsInvalidSpec) {
  write("bad.json", R"({"variables": [{"name": "X", "scale": "continuous", "mechanism": {"type": "linear", "noise_sd": 0}}]})");
  auto r = run({"simulate", "--spec", path("bad.json"), "--n", "5"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("noise"), std::string::npos);
}

TEST_F(Cli, DiscoverWritesDotAndManifest) {
  ASSERT_EQ(run({"simulate", "--paper-cohort", "--cross-section", "--n", "1000", "--out", path("d.csv")}).code, 0);
  auto r = run({"discover", "--data", path("d.csv"), "--test", "cg", "--alpha", "0.01", "--out", path("g.dot")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto dot = read("g.dot");
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  auto manifest = nlohmann::json::parse(read("g.dot.manifest.json"));
  EXPECT_NE(dot.find(manifest["digest"].get<std::string>()), std::string::npos);
  EXPECT_EQ(manifest["options"]["alpha"], "0.01");
  EXPECT_TRUE(manifest["inputs"].contains("data"));
}

TEST_F(Cli, DiscoverTieredUsesKnowledge) {
  ASSERT_EQ(run({"simulate", "--paper-cohort", "--cross-section", "--n", "1000", "--out", path("d.csv"),
                 "--schema-out", path("d.schema"), "--knowledge-out", path("k.txt")})
                .code,
            0);
  auto r = run({"discover", "--data", path("d.csv"), "--schema", path("d.schema"), "--knowledge", path("k.txt"),
                "--tiered", "--json", path("g.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto g = load_graph_json(path("g.json"));
  for (auto v : g.nodes()) {
    if (v == "country" || v == "sex" || v == "age_t0") continue;
    EXPECT_TRUE(g.is_directed(g.require_index("country"), g.require_index(v))) << v;
  }
  // Without tiers for every variable the tiered search refuses to run.
  write("partial.txt", "tier 1: country sex\n");
  auto bad = run({"discover", "--data", path("d.csv"), "--knowledge", path("partial.txt"), "--tiered"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_EQ(std::count(bad.err.begin(), bad.err.end(), '\n'), 1);
}

TEST_F(Cli, DiscoverTestwiseDeletion) {
  ASSERT_EQ(run({"simulate", "--paper-cohort", "--cross-section", "--n", "800", "--missing", "paper", "--out",
                 path("d.csv"), "--masked-out", path("m.csv")})
                .code,
            0);
  auto r = run({"discover", "--data", path("m.csv"), "--missing", "twd", "--trace", path("t.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("digraph"), std::string::npos);
  EXPECT_FALSE(read("t.txt").empty());
  auto listwise = run({"discover", "--data", path("m.csv")});
  EXPECT_EQ(listwise.code, 0);
  EXPECT_NE(listwise.err.find("warning"), std::string::npos);
}

TEST_F(Cli, DiscoverMultipleImputation) {
  ASSERT_EQ(run({"simulate", "--spec", (write("s.json", kLinearSpec), path("s.json")), "--n", "300", "--out",
                 path("d.csv")})
                .code,
            0);
  auto r = run({"discover", "--data", path("d.csv"), "--test", "fz", "--missing", "mi", "--imputations",
                path("d.csv"), path("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto single = run({"discover", "--data", path("d.csv"), "--test", "fz"});
  EXPECT_EQ(r.out.substr(r.out.find('\n')), single.out.substr(single.out.find('\n')));
  EXPECT_EQ(run({"discover", "--data", path("d.csv"), "--missing", "mi"}).code, kExitValidation);
}

TEST_F(Cli, KnowledgeFlags) {
  write("s.json", kLinearSpec);
  ASSERT_EQ(run({"simulate", "--spec", path("s.json"), "--n", "2000", "--out", path("d.csv")}).code, 0);
  auto r = run({"discover", "--data", path("d.csv"), "--test", "fz", "--blacklist", "X--M", "--whitelist", "X->Y",
                "--json", path("g.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto g = load_graph_json(path("g.json"));
  EXPECT_FALSE(g.adjacent(g.require_index("X"), g.require_index("M")));
  EXPECT_TRUE(g.is_directed(g.require_index("X"), g.require_index("Y")));
  EXPECT_EQ(run({"discover", "--data", path("d.csv"), "--forbid", "X=>Y"}).code, kExitValidation);
  EXPECT_EQ(run({"discover", "--data", path("d.csv"), "--forbid", "X->Q"}).code, kExitValidation);
}

TEST_F(Cli, WorkersDoNotChangeOutput) {
  ASSERT_EQ(run({"simulate", "--paper-cohort", "--cross-section", "--n", "1000", "--out", path("d.csv")}).code, 0);
  std::vector<std::string> outputs;
  for (std::string w : {"1", "2", "8"}) {
    auto r = run({"discover", "--data", path("d.csv"), "--workers", w, "--out", path("g" + w + ".dot"), "--trace",
                  path("t" + w + ".txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(read("g" + w + ".dot") + read("t" + w + ".txt"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
  setenv("CDKIT_WORKERS", "3", 1);
  auto r = run({"discover", "--data", path("d.csv"), "--out", path("env.dot")});
  unsetenv("CDKIT_WORKERS");
  ASSERT_EQ(r.code, 0);
  auto manifest = nlohmann::json::parse(read("env.dot.manifest.json"));
  EXPECT_EQ(manifest["options"]["workers"], "3");
  EXPECT_EQ(read("env.dot"), read("g1.dot"));
}

TEST_F(Cli, RerunReproducesOutputs) {
  ASSERT_EQ(run({"simulate", "--paper-cohort", "--cross-section", "--n", "500", "--seed", "4", "--out",
                 path("d.csv"), "--missing", "paper"})
                .code,
            0);
  auto sim = run({"rerun", "--manifest", path("d.csv.manifest.json"), "--check"});
  EXPECT_EQ(sim.code, 0) << sim.err;
  EXPECT_EQ(sim.out.find("MISMATCH"), std::string::npos);

  ASSERT_EQ(run({"discover", "--data", path("d_missing.csv"), "--missing", "twd", "--maj-rule", "--json",
                 path("g.json"), "--trace", path("t.txt")})
                .code,
            0);
  auto before = read("g.json");
  auto check = run({"rerun", "--manifest", path("g.json.manifest.json"), "--check"});
  EXPECT_EQ(check.code, 0) << check.err;
  EXPECT_NE(check.out.find("match json"), std::string::npos);
  EXPECT_NE(check.out.find("match trace"), std::string::npos);

  fs::remove(path("g.json"));
  EXPECT_EQ(run({"rerun", "--manifest", path("g.json.manifest.json")}).code, 0);
  EXPECT_EQ(read("g.json"), before);

  std::ofstream(path("d_missing.csv"), std::ios::app) << "\n";
  auto changed = run({"rerun", "--manifest", path("g.json.manifest.json")});
  EXPECT_EQ(changed.code, kExitValidation);
  EXPECT_NE(changed.err.find("changed"), std::string::npos);
}

TEST_F(Cli, CompareIdenticalGraphs) {
  write_graph("g.json", chain());
  auto r = run({"compare", "--a", path("g.json"), "--b", path("g.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("shd 0\n"), std::string::npos);
}

TEST_F(Cli, CompareAgainstTruth) {
  write_graph("truth.json", collider());
  write_graph("est.json", cpdag_of(collider()));
  auto r = run({"compare", "--a", path("est.json"), "--b", path("truth.json"), "--truth"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("adjacency_precision 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("adjacency_recall 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("arrowhead_precision 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("arrowhead_recall 1\n"), std::string::npos);
}

TEST_F(Cli, CompareConflictModes) {
  // A -> B <-> C <- D under bidirected conflicts; B -> C <- D when the
  // stronger separation wins.
  MixedGraph bidirected({"A", "B", "C", "D"});
  bidirected.add_directed("A", "B");
  bidirected.add_directed("D", "C");
  bidirected.add_bidirected(1, 2);
  MixedGraph preferred({"A", "B", "C", "D"});
  preferred.add_directed("A", "B");
  preferred.add_directed("B", "C");
  preferred.add_directed("D", "C");
  write_graph("x.json", bidirected);
  write_graph("y.json", preferred);
  auto r = run({"compare", "--a", path("x.json"), "--b", path("y.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("shd 1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("diff B C: B <-> C | B -> C"), std::string::npos) << r.out;
}

TEST_F(Cli, CompareNodeMismatch) {
  write_graph("a.json", chain());
  write_graph("b.json", MixedGraph({"A", "B", "Z"}));
  EXPECT_EQ(run({"compare", "--a", path("a.json"), "--b", path("b.json")}).code, kExitValidation);
}

TEST_F(Cli, OracleChainAndCollider) {
  write_graph("chain.json", chain());
  auto r = run({"oracle", "--dag", path("chain.json"), "--json", path("cp.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto g = load_graph_json(path("cp.json"));
  EXPECT_TRUE(g.is_undirected(0, 1));
  EXPECT_TRUE(g.is_undirected(1, 2));
  write_graph("collider.json", collider());
  ASSERT_EQ(run({"oracle", "--dag", path("collider.json"), "--json", path("cc.json")}).code, 0);
  auto c = load_graph_json(path("cc.json"));
  EXPECT_TRUE(c.is_directed(0, 1));
  EXPECT_TRUE(c.is_directed(2, 1));
}

TEST_F(Cli, OracleMatchesCpdagOnRandomDag) {
  std::mt19937_64 rng(10);
  auto dag = support::random_dag(10, 0.3, rng);
  write_graph("dag.json", dag);
  ASSERT_EQ(run({"oracle", "--dag", path("dag.json"), "--json", path("cp.json")}).code, 0);
  EXPECT_EQ(shd(load_graph_json(path("cp.json")), cpdag_of(dag)), 0u);
}

TEST_F(Cli, OracleRejectsCycles) {
  MixedGraph g({"A", "B", "C"});
  g.add_directed("A", "B");
  g.add_directed("B", "C");
  g.add_directed("C", "A");
  write_graph("cyc.json", g);
  auto r = run({"oracle", "--dag", path("cyc.json")});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("cyclic"), std::string::npos);
}

TEST_F(Cli, DsepQueries) {
  write_graph("c.json", collider());
  EXPECT_EQ(run({"dsep", "--dag", path("c.json"), "A", "C"}).out, "true\n");
  EXPECT_EQ(run({"dsep", "--dag", path("c.json"), "A", "C", "B"}).out, "false\n");
  EXPECT_EQ(run({"dsep", "--dag", path("c.json"), "A"}).code, kExitUsage);
  EXPECT_EQ(run({"dsep", "--dag", path("c.json"), "A", "Q"}).code, kExitValidation);
}

TEST_F(Cli, EffectsFullyDirected) {
  write("s.json", kLinearSpec);
  ASSERT_EQ(run({"simulate", "--spec", path("s.json"), "--n", "10000", "--out", path("d.csv")}).code, 0);
  MixedGraph g({"M", "X", "Y"});
  g.add_directed("X", "M");
  g.add_directed("M", "Y");
  write_graph("g.json", g);
  auto r = run({"effects", "--graph", path("g.json"), "--data", path("d.csv"), "--source", "X", "--target", "Y"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  auto pos = r.out.find("value ");
  EXPECT_NEAR(std::stod(r.out.substr(pos + 6)), 1.5, 0.05);
  auto self = run({"effects", "--graph", path("g.json"), "--data", path("d.csv"), "--source", "X", "--target", "X"});
  EXPECT_NE(self.out.find("value 1 "), std::string::npos);
}

TEST_F(Cli, EffectsAmbiguousNeighbour) {
  write("s.json", kLinearSpec);
  ASSERT_EQ(run({"simulate", "--spec", path("s.json"), "--n", "2000", "--out", path("d.csv")}).code, 0);
  MixedGraph g({"X", "M", "Y"});
  g.add_undirected("X", "M");
  g.add_undirected("M", "Y");
  write_graph("g.json", g);
  auto r = run({"effects", "--graph", path("g.json"), "--data", path("d.csv"), "--source", "X", "--target", "Y"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t values = 0;
  for (std::size_t p = r.out.find("value "); p != std::string::npos; p = r.out.find("value ", p + 1)) ++values;
  EXPECT_EQ(values, 2u);
  EXPECT_NE(r.out.find("bounds "), std::string::npos);
}

TEST_F(Cli, EffectsInvalidGraphListsViolations) {
  write("s.json", kLinearSpec);
  ASSERT_EQ(run({"simulate", "--spec", path("s.json"), "--n", "50", "--out", path("d.csv")}).code, 0);
  MixedGraph g({"X", "M", "Y"});
  g.add_directed("X", "M");
  g.add_undirected("M", "Y");
  write_graph("g.json", g);
  auto r = run({"effects", "--graph", path("g.json"), "--data", path("d.csv"), "--source", "M", "--target", "Y"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("M --- Y"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"discover"}).code, kExitUsage);
  EXPECT_EQ(run({"discover", "--data", path("missing.csv")}).code, kExitValidation);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  write("ragged.csv", "a,b\n1,2\n3\n");
  EXPECT_EQ(run({"discover", "--data", path("ragged.csv")}).code, kExitValidation);
  // A pair that is never jointly observed cannot be tested.
  write("gap.csv", "a,b,c\n1,NA,0.5\n2,NA,0.1\n3,NA,0.7\nNA,1,0.2\nNA,4,0.9\nNA,2,0.3\n4,NA,0.4\nNA,7,0.8\n");
  auto r = run({"discover", "--data", path("gap.csv"), "--missing", "twd", "--na-policy", "error"});
  EXPECT_EQ(r.code, kExitRuntime) << r.err;
}
