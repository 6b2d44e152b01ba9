#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "test_util.hpp"

namespace omq {
namespace {

using testutil::from_text;
using testutil::load_example;

// ---------------------------------------------------------------------------
// Horn layer
// ---------------------------------------------------------------------------

TEST(MinModel, SmallFormulas) {
  HornFormula f;
  f.num_vars = 2;
  f.units = {0};
  f.clauses = {{{0}, {1}}};
  EXPECT_EQ(min_model(f), (std::vector<bool>{true, true}));
  f.units.clear();
  EXPECT_EQ(min_model(f), (std::vector<bool>{false, false}));
  // empty body fires unconditionally; duplicate body variables count once
  f.clauses = {{{}, {0}}, {{0, 0}, {1}}};
  EXPECT_EQ(min_model(f), (std::vector<bool>{true, true}));
}

TEST(MinModel, AgreesWithNaiveFixpoint) {
  std::mt19937 rng(42);
  std::size_t largest = 0;
  for (int i = 0; i < 100; ++i) {
    auto f = testgen::random_horn(rng, 10000);
    largest = std::max(largest, f.clauses.size());
    ASSERT_EQ(min_model(f), naive_fixpoint(f)) << "formula " << i;
  }
  EXPECT_GT(largest, 5000u);
}

TEST(HornFormula, UnitsAndClausesForTinyInput) {
  Vocabulary voc;
  auto in = parse_omq("A(c).", "A(x) -> B(x)", "q(x) <- B(x).", voc);
  auto f = horn_formula(in.db, in.omq, voc);
  EXPECT_EQ(f.units.size(), 1u);
  EXPECT_EQ(f.num_vars, 2);  // A(c), B(c)
  ASSERT_FALSE(f.clauses.empty());
  auto m = min_model(f);
  EXPECT_TRUE(std::all_of(m.begin(), m.end(), [](bool b) { return b; }));

  Database empty;
  auto g = horn_formula(empty, in.omq, voc);
  EXPECT_TRUE(g.units.empty());
  auto gm = min_model(g);
  EXPECT_TRUE(std::none_of(gm.begin(), gm.end(), [](bool b) { return b; }));
}

// ---------------------------------------------------------------------------
// query-directed chase
// ---------------------------------------------------------------------------

std::size_t max_witness_adom(const ChaseResult& ch) {
  std::size_t best = 0;
  for (const auto& w : ch.witnesses) {
    std::set<ConstId> dom;
    for (int f : w) dom.insert(ch.db[f].args.begin(), ch.db[f].args.end());
    best = std::max(best, dom.size());
  }
  return best;
}

TEST(QueryDirectedChase, ResearchersExample) {
  auto l = load_example("example1");
  auto ch = query_directed_chase(l->in.omq, l->in.db, l->voc, PieceMode::Partial);
  EXPECT_FALSE(testgen::witness_violation(ch, l->voc.consts).has_value());
  auto text = print_database(l->voc, ch.db);
  // john's known office gets an unknown building; mike gets office and building
  EXPECT_NE(text.find("InBuilding(room4,_:"), std::string::npos);
  int mike_offices = 0;
  ConstId mike = *l->voc.consts.find("mike");
  for (const auto& f : ch.db.facts())
    if (l->voc.rels.name(f.rel) == "HasOffice" && f.args[0] == mike) {
      ++mike_offices;
      EXPECT_TRUE(l->voc.consts.is_null(f.args[1]));
      bool building = false;
      for (const auto& g : ch.db.facts())
        building |= l->voc.rels.name(g.rel) == "InBuilding" && g.args[0] == f.args[1];
      EXPECT_TRUE(building);
    }
  EXPECT_EQ(mike_offices, 1);
}

TEST(QueryDirectedChase, AppendixHasEightNulls) {
  auto l = load_example("appendix");
  auto ch = query_directed_chase(l->in.omq, l->in.db, l->voc, PieceMode::Partial);
  EXPECT_EQ(ch.db.nulls(l->voc.consts).size(), 8u);
  EXPECT_EQ(ch.db.size(), 34u);
  // every term carries an L self-loop
  int l_rel = *l->voc.rels.find("L");
  for (ConstId c : ch.db.adom()) EXPECT_TRUE(ch.db.contains({l_rel, {c, c}}));
  EXPECT_FALSE(testgen::witness_violation(ch, l->voc.consts).has_value());
}

TEST(QueryDirectedChase, EmptyOntologyIsIdentity) {
  auto l = from_text("R(a,b). S(b).", "", "q(x) <- R(x,y), S(y).");
  auto ch = query_directed_chase(l->in.omq, l->in.db, l->voc);
  EXPECT_EQ(ch.db.size(), 2u);
  EXPECT_EQ(ch.witnesses.size(), 2u);
}

TEST(QueryDirectedChase, RejectsUnguardedOntology) {
  auto l = from_text("R(a,b).", "R(x,y), S(y,z) -> P(x)", "q(x) <- P(x).");
  EXPECT_THROW(query_directed_chase(l->in.omq, l->in.db, l->voc), StructuralError);
}

TEST(QueryDirectedChase, WitnessInvariantsOnExamples) {
  for (const char* name : {"example1", "cone", "largeoffice", "officemate", "appendix"}) {
    auto l = load_example(name);
    for (auto mode : {PieceMode::Complete, PieceMode::Partial, PieceMode::Multi}) {
      auto ch = query_directed_chase(l->in.omq, l->in.db, l->voc, mode);
      auto why = testgen::witness_violation(ch, l->voc.consts);
      EXPECT_FALSE(why.has_value()) << name << ": " << why.value_or("");
      EXPECT_EQ(ch.origin.size(), ch.db.size());
      for (const auto& [n, src] : ch.null_source) {
        EXPECT_TRUE(l->voc.consts.is_null(n));
        EXPECT_FALSE(ch.db[src].args.empty());
      }
    }
  }
}

// Complete answers from the query-directed chase match a deep oblivious chase.
TEST(QueryDirectedChase, CompleteAnswersMatchBoundedChase) {
  for (const char* name : {"example1", "cone", "largeoffice", "officemate", "appendix"}) {
    auto l = load_example(name);
    auto want = testutil::run_oracle(*l, AnswerKind::Complete);
    auto ref = testgen::bounded_complete(l->in.omq, l->in.db, l->voc, 4);
    ASSERT_TRUE(ref.has_value()) << name;
    EXPECT_EQ(*ref, want) << name;
  }
}

// Doubling the database doubles the chase and the formula; witness
// databases stay the same size.
TEST(QueryDirectedChase, LinearInDatabaseCopies) {
  std::vector<std::size_t> sizes, clauses, widths;
  for (std::size_t copies : {2u, 4u, 8u}) {
    auto text = appendix_family(copies);
    auto l = from_text(text.facts, text.tgd, text.cq);
    auto ch = query_directed_chase(l->in.omq, l->in.db, l->voc, PieceMode::Multi);
    sizes.push_back(ch.db.size());
    clauses.push_back(ch.horn_clauses);
    widths.push_back(max_witness_adom(ch));
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    EXPECT_EQ(sizes[i], 2 * sizes[i - 1]);
    EXPECT_EQ(clauses[i], 2 * clauses[i - 1]);
    EXPECT_EQ(widths[i], widths[0]);
  }
}

// ---------------------------------------------------------------------------
// entailment on a small database
// ---------------------------------------------------------------------------

TEST(EntailsSmall, ResearcherHasSomeOffice) {
  auto l = load_example("example1");
  Vocabulary& voc = l->voc;
  Database small = parse_database("Researcher(mary).", voc);
  ConstId mary = *voc.consts.find("mary");
  ConstId room1 = *voc.consts.find("room1");
  EXPECT_TRUE(entails_small(small, l->in.omq.onto, parse_query("p(x) <- HasOffice(x,y).", voc), {mary}));
  EXPECT_TRUE(
      entails_small(small, l->in.omq.onto, parse_query("p(x) <- HasOffice(x,y), InBuilding(y,z).", voc), {mary}));
  EXPECT_FALSE(entails_small(small, l->in.omq.onto, parse_query("p(x,y) <- HasOffice(x,y).", voc), {mary, room1}));
  EXPECT_TRUE(entails_small(small, l->in.omq.onto, parse_query("p(x) <- Researcher(x).", voc), {mary}));
  EXPECT_THROW(entails_small(small, l->in.omq.onto, parse_query("p(x) <- Researcher(x).", voc), {}),
               ValidationError);
}

TEST(EntailsSmall, InfiniteChaseIsDecided) {
  Vocabulary voc;
  auto onto = parse_ontology("A(x) -> exists y . R(x,y), A(y)", voc);
  Database small = parse_database("A(c).", voc);
  ConstId c = *voc.consts.find("c");
  // a long path exists in the infinite model, a cycle never does
  EXPECT_TRUE(entails_small(small, onto, parse_query("p(x) <- R(x,y1), R(y1,y2), R(y2,y3), R(y3,y4).", voc), {c}));
  EXPECT_FALSE(entails_small(small, onto, parse_query("p(x) <- R(x,y), R(y,x).", voc), {c}));
  EXPECT_FALSE(entails_small(small, onto, parse_query("p() <- R(x,x).", voc), {}));
}

// Random small cases against a bounded oblivious chase: the bounded chase
// only under-approximates, so any hit it finds must be an entailment, and
// misses at large depth must stay misses.
TEST(EntailsSmall, AgreesWithBoundedChase) {
  testgen::Generator gen(17);
  int checked = 0, positives = 0;
  for (int i = 0; i < 150; ++i) {
    auto in = gen.next(i % 2 == 0);
    Vocabulary voc;
    auto parsed = parse_omq(in.facts, in.tgd, in.cq, voc);
    Database small;
    small.add(parsed.db[0]);
    auto adom = small.adom();
    const auto& q = parsed.omq.query;
    Database deep;
    try {
      deep = chase_bounded(small, parsed.omq.onto, 6, voc.consts, 20000);
    } catch (const ResourceLimitError&) {
      continue;
    }
    FactIndex idx(deep);
    for (const auto& t : testgen::complete_candidates(adom, q.arity())) {
      bool found = false;
      for_each_hom(q, idx, {}, [&](const std::vector<ConstId>& h) {
        Tuple img;
        for (int v : q.answer_vars) img.push_back(h[static_cast<std::size_t>(v)]);
        found = img == t;
        return !found;
      });
      bool ent = entails_small(small, parsed.omq.onto, q, t);
      EXPECT_EQ(ent, found) << testgen::describe(in);
      ++checked;
      positives += ent;
    }
  }
  EXPECT_GT(checked, 100);
  EXPECT_GT(positives, 10);
}

// ---------------------------------------------------------------------------
// bounded chase and cl
// ---------------------------------------------------------------------------

TEST(ChaseBounded, DepthSemantics) {
  Vocabulary voc;
  auto onto = parse_ontology("A(x) -> exists y . R(x,y)", voc);
  auto d = parse_database("A(c).", voc);
  EXPECT_EQ(chase_bounded(d, onto, 0, voc.consts).size(), 1u);
  auto one = chase_bounded(d, onto, 1, voc.consts);
  ASSERT_EQ(one.size(), 2u);
  EXPECT_TRUE(voc.consts.is_null(one[1].args[1]));
  EXPECT_THROW(chase_bounded(d, onto, -1, voc.consts), ValidationError);
}

TEST(ChaseBounded, ObliviousFiring) {
  auto l = load_example("example1");
  auto db = chase_bounded(l->in.db, l->in.omq.onto, 3, l->voc.consts);
  int rel = *l->voc.rels.find("InBuilding");
  ConstId room1 = *l->voc.consts.find("room1");
  int successors = 0;
  for (const auto& f : db.facts()) successors += f.rel == rel && f.args[0] == room1;
  EXPECT_EQ(successors, 2);  // main1 and a fresh null
}

TEST(ChaseBounded, FactLimit) {
  Vocabulary voc;
  auto onto = parse_ontology("A(x) -> exists y . R(x,y), A(y)", voc);
  auto d = parse_database("A(c).", voc);
  EXPECT_THROW(chase_bounded(d, onto, 100, voc.consts, 50), ResourceLimitError);
}

TEST(Closure, ConnectedQueriesOverOntologySymbols) {
  Vocabulary voc;
  auto in = parse_omq("A(c).", "A(x) -> exists y . R(x,y)", "q(x) <- A(x).", voc);
  auto qs = cl(in.omq, voc.rels);
  ASSERT_FALSE(qs.empty());
  bool has_r_boolean = false, has_r_both = false;
  for (const auto& p : qs) {
    EXPECT_TRUE(classify(p).connected);
    for (const auto& a : p.atoms) EXPECT_TRUE(voc.rels.name(a.rel) == "A" || voc.rels.name(a.rel) == "R");
    if (p.atoms.size() == 1 && voc.rels.name(p.atoms[0].rel) == "R" && p.atoms[0].args[0] != p.atoms[0].args[1]) {
      has_r_boolean |= p.arity() == 0;
      has_r_both |= p.arity() == 2;
    }
  }
  EXPECT_TRUE(has_r_boolean);
  EXPECT_TRUE(has_r_both);
  // independent of the database, and deterministic
  EXPECT_EQ(cl(in.omq, voc.rels).size(), qs.size());

  Vocabulary voc2;
  auto none = parse_omq("A(c).", "", "q(x) <- A(x).", voc2);
  EXPECT_TRUE(cl(none.omq, voc2.rels).empty());
}

}  // namespace
}  // namespace omq
