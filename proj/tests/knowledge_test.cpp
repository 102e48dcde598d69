#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "cdkit/error.hpp"
#include "cdkit/knowledge.hpp"

using namespace cdkit;

namespace {

bool contains(const std::vector<std::string>& problems, const std::string& needle) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

Knowledge cohort_style() {
  Knowledge k;
  const std::string base[] = {"country", "sex", "fto", "birth_weight"};
  for (int i = 0; i < 4; ++i) k.set_tier(base[i], i == 0 ? 1 : i);
  const std::string wave[] = {"age", "bmi", "bodyfat", "education", "fiber", "media_devices", "media_time", "mvpa",
                              "sugar", "wellbeing"};
  for (int t = 0; t < 3; ++t)
    for (const auto& v : wave) k.set_tier(v + "_t" + std::to_string(t), 4 + t);
  k.context_all = {"country", "sex"};
  k.context_tier = {"age_t0", "age_t1", "age_t2"};
  return k;
}

std::vector<std::string> names_of(const Knowledge& k) {
  std::vector<std::string> out;
  for (const auto& [v, t] : k.tiers) out.push_back(v);
  return out;
}

}  // namespace

TEST(Tiers, LaterCannotCauseEarlier) {
  Knowledge k;
  k.set_tier("A", 1);
  k.set_tier("B", 2);
  auto f = tiers_to_forbidden(k);
  EXPECT_TRUE(f.forbidden.count({"B", "A"}));
  EXPECT_FALSE(f.forbidden.count({"A", "B"}));
}

TEST(Tiers, SameTierAddsNothing) {
  Knowledge k;
  k.set_tier("A", 2);
  k.set_tier("B", 2);
  EXPECT_TRUE(tiers_to_forbidden(k).forbidden.empty());
}

TEST(Tiers, PairwiseExpansion) {
  Knowledge k;
  k.set_tier("A", 1);
  k.set_tier("B", 2);
  k.set_tier("C", 3);
  auto f = tiers_to_forbidden(k);
  EXPECT_EQ(f.forbidden, (std::set<NamePair>{{"B", "A"}, {"C", "A"}, {"C", "B"}}));
  EXPECT_EQ(tiers_to_forbidden(f), f);
}

TEST(Context, ContextAllAndContextTier) {
  Knowledge k;
  k.context_all = {"sex"};
  k.context_tier = {"age"};
  k.set_tier("age", 2);
  k.set_tier("bmi", 2);
  k.set_tier("edu", 1);
  auto e = expand_context(k, {"sex", "bmi", "age", "edu"});
  EXPECT_TRUE(e.required_directed.count({"sex", "bmi"}));
  EXPECT_TRUE(e.required_directed.count({"sex", "edu"}));
  EXPECT_TRUE(e.required_directed.count({"age", "bmi"}));
  EXPECT_FALSE(e.required_directed.count({"age", "edu"}));
  EXPECT_TRUE(e.forbidden_adjacent.count(unordered_pair("age", "edu")));
  EXPECT_TRUE(e.forbidden_adjacent.count(unordered_pair("sex", "age")));
  EXPECT_TRUE(e.forbidden.count({"bmi", "sex"}));
  EXPECT_TRUE(e.forbidden.count({"bmi", "age"}));
}

TEST(Context, EmptySetsLeaveKnowledgeUnchanged) {
  Knowledge k;
  k.forbid("a", "b");
  k.set_tier("a", 1);
  EXPECT_EQ(expand_context(k, {"a", "b"}), k);
}

TEST(Context, TwoContextAllVariablesAreNotAdjacent) {
  Knowledge k;
  k.context_all = {"country", "sex"};
  auto e = expand_context(k, {"country", "sex", "bmi"});
  EXPECT_TRUE(e.forbidden_adjacent.count(unordered_pair("country", "sex")));
  auto r = resolve(e, {"bmi", "country", "sex"});
  EXPECT_TRUE(r.is_gap(1, 2));
  EXPECT_TRUE(r.requires_dir(1, 0));
}

TEST(Context, UnknownVariableRejected) {
  Knowledge k;
  k.context_all = {"ghost"};
  EXPECT_THROW(expand_context(k, {"a"}), ValidationError);
}

TEST(Context, ExpansionIsMonotoneIdempotentAndCommutes) {
  auto k = cohort_style();
  auto vars = names_of(k);
  auto a = tiers_to_forbidden(expand_context(k, vars));
  auto b = expand_context(tiers_to_forbidden(k), vars);
  EXPECT_EQ(a, b);
  EXPECT_EQ(expand_context(a, vars), a);
  EXPECT_EQ(tiers_to_forbidden(a), a);
  EXPECT_TRUE(std::includes(a.forbidden.begin(), a.forbidden.end(), k.forbidden.begin(), k.forbidden.end()));
}

TEST(Validate, RequiredAndForbiddenPair) {
  Knowledge k;
  k.forbid("a", "b");
  k.require("a", "b");
  auto problems = validate(k, {"a", "b"});
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_TRUE(contains(problems, "a -> b"));
}

TEST(Validate, RequiredAgainstTierOrder) {
  Knowledge k;
  k.set_tier("a", 3);
  k.set_tier("b", 1);
  k.require("a", "b");
  auto problems = validate(k, {"a", "b"});
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_TRUE(contains(problems, "3"));
  EXPECT_TRUE(contains(problems, "1"));
}

TEST(Validate, ReportsEveryViolation) {
  Knowledge k;
  k.forbid("a", "b");
  k.require("a", "b");
  k.forbid_adjacent("a", "c");
  k.require_adjacent("c", "a");
  k.context_all = {"x"};
  k.context_tier = {"x", "c"};
  k.forbid("ghost", "a");
  auto problems = validate(k, {"a", "b", "c", "x"});
  EXPECT_GE(problems.size(), 5u);
  EXPECT_TRUE(contains(problems, "ghost"));
}

TEST(Validate, RequiredCycle) {
  Knowledge k;
  k.require("a", "b");
  k.require("b", "a");
  EXPECT_TRUE(contains(validate(k, {"a", "b"}), "cycle"));
}

TEST(Validate, CohortStyleKnowledgeIsValid) {
  auto k = cohort_style();
  EXPECT_EQ(k.tiers.size(), 34u);
  EXPECT_TRUE(validate(k, names_of(k)).empty());
}

TEST(Resolve, OppositeForbiddenPairsBecomeGap) {
  Knowledge k;
  k.forbid("a", "b");
  k.forbid("b", "a");
  auto r = resolve(k, {"a", "b", "c"});
  EXPECT_TRUE(r.is_gap(0, 1));
  EXPECT_TRUE(r.is_gap(1, 0));
  EXPECT_FALSE(r.is_gap(0, 2));
}

TEST(Resolve, AllowsRespectsTiersAndRequirements) {
  Knowledge k;
  k.set_tier("a", 1);
  k.set_tier("b", 2);
  k.require("c", "a");
  auto r = resolve(k, {"a", "b", "c"});
  EXPECT_TRUE(r.allows(0, 1));
  EXPECT_FALSE(r.allows(1, 0));
  EXPECT_FALSE(r.allows(0, 2));
  EXPECT_TRUE(r.is_forced(0, 2));
}

TEST(KnowledgeFile, ParsesAllForms) {
  std::istringstream in(
      "# cohort\n"
      "tier 1: country sex\n"
      "tier 2: bmi age\n"
      "forbid bmi -> age\n"
      "forbid a -- b\n"
      "require sex -> bmi\n"
      "require age -- bmi\n"
      "blacklist x -> y\n"
      "whitelist y -> z\n"
      "context-all: country sex\n"
      "context-tier: age\n");
  auto k = read_knowledge(in);
  EXPECT_EQ(k.tier("bmi"), 2);
  EXPECT_TRUE(k.forbidden.count({"bmi", "age"}));
  EXPECT_TRUE(k.forbidden.count({"x", "y"}));
  EXPECT_TRUE(k.forbidden_adjacent.count({"a", "b"}));
  EXPECT_TRUE(k.required_directed.count({"y", "z"}));
  EXPECT_TRUE(k.required_adjacent.count(unordered_pair("bmi", "age")));
  EXPECT_EQ(k.context_all.size(), 2u);
  EXPECT_EQ(k.context_tier, (std::set<std::string>{"age"}));
}

TEST(KnowledgeFile, RoundTrip) {
  auto k = cohort_style();
  k.forbid("fto", "sex");
  k.require_adjacent("bmi_t0", "bodyfat_t0");
  std::stringstream buf;
  write_knowledge(buf, k);
  EXPECT_EQ(read_knowledge(buf), k);
}

TEST(KnowledgeFile, MalformedLineNamesLine) {
  std::istringstream in("tier 1: a\nforbid a => b\n");
  try {
    read_knowledge(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}
