#include <gtest/gtest.h>

#include "random_instances.hpp"
#include "test_util.hpp"

namespace omq {
namespace {

using namespace testutil;

Tuple tup(Loaded& l, const std::string& text, AnswerKind kind) {
  auto t = parse_tuple(text, l.voc, kind);
  if (!t) throw std::logic_error("unknown constant in " + text);
  return *t;
}

TEST(SingleTesting, ResearchersGolden) {
  auto l = load_example("example1");
  SingleTester complete(l->in.omq, l->in.db, l->voc, AnswerKind::Complete);
  SingleTester partial(l->in.omq, l->in.db, l->voc, AnswerKind::Single);
  SingleTester multi(l->in.omq, l->in.db, l->voc, AnswerKind::Multi);

  EXPECT_TRUE(complete.test(tup(*l, "(mary, room1, main1)", AnswerKind::Complete)));
  EXPECT_FALSE(complete.test(tup(*l, "(john, room4, main1)", AnswerKind::Complete)));

  EXPECT_TRUE(partial.test(tup(*l, "(john, room4, *)", AnswerKind::Single)));
  EXPECT_TRUE(partial.test(tup(*l, "(mike, *, *)", AnswerKind::Single)));
  // not minimal: (mary, room1, main1) is below it
  EXPECT_FALSE(partial.test(tup(*l, "(mary, room1, *)", AnswerKind::Single)));
  EXPECT_FALSE(partial.test(tup(*l, "(mary, *, *)", AnswerKind::Single)));
  EXPECT_FALSE(partial.test(tup(*l, "(*, *, *)", AnswerKind::Single)));

  EXPECT_TRUE(multi.test(tup(*l, "(mike, *1, *2)", AnswerKind::Multi)));
  EXPECT_FALSE(multi.test(tup(*l, "(mike, *1, *1)", AnswerKind::Multi)));
  EXPECT_TRUE(multi.test(tup(*l, "(john, room4, *1)", AnswerKind::Multi)));

  // the one-shot functions agree
  EXPECT_TRUE(single_test_partial(l->in.omq, l->in.db, l->voc, tup(*l, "(mike, *, *)", AnswerKind::Single)));
  EXPECT_TRUE(single_test_complete(l->in.omq, l->in.db, l->voc, tup(*l, "(mary, room1, main1)", AnswerKind::Complete)));
  EXPECT_FALSE(single_test_multi(l->in.omq, l->in.db, l->voc, tup(*l, "(mike, *1, *1)", AnswerKind::Multi)));
}

TEST(SingleTesting, LargeOfficeMulti) {
  auto l = load_example("largeoffice");
  SingleTester multi(l->in.omq, l->in.db, l->voc, AnswerKind::Multi);
  EXPECT_TRUE(multi.test(tup(*l, "(mike, *1, *1, *2)", AnswerKind::Multi)));
  EXPECT_FALSE(multi.test(tup(*l, "(mike, *1, *2, *3)", AnswerKind::Multi)));
  EXPECT_FALSE(multi.test(tup(*l, "(mike, *1, *1, *1)", AnswerKind::Multi)));
}

// The officemate query is acyclic but not free-connex: it can be tested,
// not enumerated.
TEST(SingleTesting, OfficemateAgreesWithOracle) {
  auto l = load_example("officemate");
  SingleTester partial(l->in.omq, l->in.db, l->voc, AnswerKind::Single);
  auto answers = run_oracle(*l, AnswerKind::Single);
  ASSERT_FALSE(answers.empty());
  for (const auto& t : answers) EXPECT_TRUE(partial.test(t)) << print_answer(l->voc, t, AnswerKind::Single);
  auto adom = l->in.db.adom();
  std::vector<ConstId> consts(adom.begin(), adom.end());
  for (const auto& t : testgen::partial_candidates(consts, 4))
    EXPECT_EQ(partial.test(t), std::binary_search(answers.begin(), answers.end(), t))
        << print_answer(l->voc, t, AnswerKind::Single);
}

TEST(SingleTesting, ModeRequirements) {
  auto cone = load_example("cone");
  // the cone rule puts two atoms on the same pair of terms
  EXPECT_THROW(SingleTester(cone->in.omq, cone->in.db, cone->voc, AnswerKind::Multi), UnsupportedModeError);
  EXPECT_NO_THROW(SingleTester(cone->in.omq, cone->in.db, cone->voc, AnswerKind::Single));

  auto cyc = from_text("R(a,b). R(b,c). R(c,a).", "", "q(x) <- R(x,y), R(y,z), R(z,x).");
  EXPECT_THROW(SingleTester(cyc->in.omq, cyc->in.db, cyc->voc, AnswerKind::Single), StructuralError);
  // weakly acyclic once x is fixed
  SingleTester wc(cyc->in.omq, cyc->in.db, cyc->voc, AnswerKind::Complete);
  EXPECT_TRUE(wc.test(tup(*cyc, "(a)", AnswerKind::Complete)));
}

TEST(SingleTesting, RejectsWrongLengthAndWildcardsInCompleteTuples) {
  auto l = load_example("example1");
  SingleTester partial(l->in.omq, l->in.db, l->voc, AnswerKind::Single);
  EXPECT_THROW(partial.test(tup(*l, "(mary, room1)", AnswerKind::Single)), ValidationError);
  SingleTester complete(l->in.omq, l->in.db, l->voc, AnswerKind::Complete);
  EXPECT_THROW(complete.test(Tuple{0, kStar, 1}), ValidationError);
}

// Constants that occur only in the query or ontology are not answer values.
TEST(SingleTesting, ConstantsOutsideTheDatabase) {
  auto l = from_text("A(a).", "A(x) -> exists y . R(x,y)", "q(x,y) <- R(x,y).");
  ConstId stranger = l->voc.consts.named("zz");
  SingleTester partial(l->in.omq, l->in.db, l->voc, AnswerKind::Single);
  EXPECT_FALSE(partial.test(Tuple{stranger, kStar}));
  EXPECT_TRUE(partial.test(tup(*l, "(a, *)", AnswerKind::Single)));
}

// A full triangle query over five constants: every candidate tuple against
// the oracle.
TEST(CompleteAllTesting, TriangleAgainstOracle) {
  std::string facts;
  const char* c[] = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if ((i * 3 + j * 7) % 4 != 0) facts += std::string("E(") + c[i] + "," + c[j] + "). ";
  auto l = from_text(facts + "A(a). A(c).", "A(x) -> exists y . E(x,y), E(y,x)", "q(x,y,z) <- E(x,y), E(y,z), E(z,x).");
  CompleteTester tester(l->in.omq, l->in.db, l->voc);
  auto want = run_oracle(*l, AnswerKind::Complete);
  auto adom = l->in.db.adom();
  std::vector<ConstId> consts(adom.begin(), adom.end());
  int yes = 0;
  for (const auto& t : testgen::complete_candidates(consts, 3)) {
    bool in = std::binary_search(want.begin(), want.end(), t);
    EXPECT_EQ(tester.test(t), in) << print_answer(l->voc, t, AnswerKind::Complete);
    yes += in;
  }
  EXPECT_GT(yes, 0);
  EXPECT_THROW(tester.test(Tuple{0, 1}), ValidationError);
  EXPECT_THROW(tester.test(Tuple{0, 1, kStar}), ValidationError);
}

TEST(CompleteAllTesting, RejectsNonFreeConnex) {
  auto l = load_example("officemate");
  EXPECT_THROW(CompleteTester(l->in.omq, l->in.db, l->voc), StructuralError);
}

// The image tester accepts exactly the multi-wildcard images of
// homomorphisms into the chase, minimal or not.
TEST(MultiImageTesting, MatchesChaseImages) {
  for (const char* ex : {"example1", "cone", "largeoffice", "appendix"}) {
    auto l = load_example(ex);
    PipelineOptions po;
    po.kind = AnswerKind::Multi;
    auto pl = build_pipeline(l->in.omq, l->in.db, l->voc, po);
    MultiImageTester tester(pl);
    OracleOptions oo;
    oo.kind = AnswerKind::Multi;
    auto images = oracle_images(l->in.omq, l->in.db, l->voc, oo);
    for (const auto& t : images) EXPECT_TRUE(tester.test_original(t)) << ex << " " << print_answer(l->voc, t, AnswerKind::Multi);
    auto adom = l->in.db.adom();
    std::vector<ConstId> consts(adom.begin(), adom.end());
    int k = l->in.omq.query.arity();
    if (k > 4) continue;
    for (const auto& t : testgen::multi_candidates(consts, k))
      EXPECT_EQ(tester.test_original(t), images.count(t) > 0) << ex << " " << print_answer(l->voc, t, AnswerKind::Multi);
  }
}

TEST(MultiImageTesting, Validation) {
  auto l = load_example("example1");
  PipelineOptions po;
  po.kind = AnswerKind::Multi;
  auto pl = build_pipeline(l->in.omq, l->in.db, l->voc, po);
  MultiImageTester tester(pl);
  EXPECT_THROW(tester.test_original(Tuple{0}), ValidationError);
  EXPECT_FALSE(tester.test_original(Tuple{0, make_wild(2), make_wild(1)}));
  EXPECT_THROW(tester.test(Tuple{0, make_wild(2), make_wild(1)}), ValidationError);
}

}  // namespace
}  // namespace omq
