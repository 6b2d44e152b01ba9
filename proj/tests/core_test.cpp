#include <gtest/gtest.h>

#include <random>

#include "omq/lattice.hpp"
#include "omq/syntax.hpp"

namespace omq {
namespace {

constexpr ConstId a = 0, b = 1, c = 2;
const ConstId w1 = make_wild(1), w2 = make_wild(2), w3 = make_wild(3);

TEST(WildcardOrder, ConstantBelowStar) {
  EXPECT_TRUE(wildcard_lt({a, b}, {a, kStar}));
  EXPECT_TRUE(wildcard_lt({a, b}, {kStar, kStar}));
  EXPECT_FALSE(wildcard_le({a, kStar}, {a, b}));
  EXPECT_FALSE(wildcard_le({a, b}, {b, kStar}));
  EXPECT_TRUE(wildcard_le({a, b}, {a, b}));
  EXPECT_FALSE(wildcard_lt({a, b}, {a, b}));
}

TEST(WildcardOrder, LengthMismatchThrows) { EXPECT_THROW(wildcard_le({a}, {a, b}), UsageError); }

TEST(MultiOrder, IdentifiedWildcardsAreMoreSpecific) {
  // (a,*1,*1) says more than (a,*1,*2)
  EXPECT_TRUE(multi_lt({a, w1, w1}, {a, w1, w2}));
  EXPECT_FALSE(multi_le({a, w1, w2}, {a, w1, w1}));
  EXPECT_TRUE(multi_lt({a, b, b}, {a, w1, w1}));
  EXPECT_TRUE(multi_lt({a, b, c}, {a, w1, w2}));
  // b identifies positions that a keeps apart
  EXPECT_FALSE(multi_le({a, b, c}, {a, w1, w1}));
  EXPECT_FALSE(multi_le({w1, b}, {a, b}));
}

TEST(MultiOrder, RejectsMalformedTuples) {
  EXPECT_THROW(multi_le({w2, w1}, {w1, w2}), ValidationError);
  EXPECT_TRUE(validate_multi_tuple({a, w1, w2, w1, w3}));
  EXPECT_FALSE(validate_multi_tuple({a, w2}));
  EXPECT_FALSE(validate_multi_tuple({w1, w3}));
  EXPECT_FALSE(validate_multi_tuple({kUnset}));
}

TEST(MultiOrder, CanonicalRenumbering) {
  EXPECT_EQ(canonical_multi({w3, a, w2, w3}), (Tuple{w1, a, w2, w1}));
  EXPECT_EQ(flatten({w1, a, w2}), (Tuple{kStar, a, kStar}));
}

TEST(WildcardImage, NullsBecomeWildcards) {
  ConstantPool pool;
  ConstId x = pool.named("x");
  ConstId n1 = pool.fresh_null(), n2 = pool.fresh_null();
  EXPECT_EQ(wildcard_image({x, n2, n1, n2}, pool, false), (Tuple{x, kStar, kStar, kStar}));
  EXPECT_EQ(wildcard_image({x, n2, n1, n2}, pool, true), (Tuple{x, w1, w2, w1}));
}

// Both orders are partial orders on small random tuples.
TEST(OrderProperties, PartialOrderAxioms) {
  std::mt19937 rng(11);
  auto single = [&] {
    Tuple t(3);
    for (auto& v : t) v = std::uniform_int_distribution<int>(-1, 2)(rng);
    return t;
  };
  auto multi = [&] {
    Tuple t(3);
    for (auto& v : t) {
      int r = std::uniform_int_distribution<int>(0, 4)(rng);
      v = r < 2 ? r : make_wild(r - 1);
    }
    return canonical_multi(t);
  };
  for (int round = 0; round < 2000; ++round) {
    Tuple s1 = single(), s2 = single(), s3 = single();
    EXPECT_TRUE(wildcard_le(s1, s1));
    if (wildcard_le(s1, s2) && wildcard_le(s2, s1)) EXPECT_EQ(s1, s2);
    if (wildcard_le(s1, s2) && wildcard_le(s2, s3)) EXPECT_TRUE(wildcard_le(s1, s3));

    Tuple m1 = multi(), m2 = multi(), m3 = multi();
    ASSERT_TRUE(validate_multi_tuple(m1));
    EXPECT_TRUE(multi_le(m1, m1));
    if (multi_le(m1, m2) && multi_le(m2, m1)) EXPECT_EQ(m1, m2);
    if (multi_le(m1, m2) && multi_le(m2, m3)) EXPECT_TRUE(multi_le(m1, m3));
    // flattening is monotone
    if (multi_le(m1, m2)) EXPECT_TRUE(wildcard_le(flatten(m1), flatten(m2)));
  }
}

TEST(Minimal, SingleAndMulti) {
  TupleSet s = {{a, b}, {a, kStar}, {kStar, c}, {kStar, kStar}};
  auto m = minimal_single(s);
  EXPECT_EQ(m.size(), 2u);
  TupleSet ms = {{w1, w1}, {w1, w2}, {a, w1}};
  auto mm = minimal_multi(ms);
  EXPECT_EQ(mm.size(), 2u);
  EXPECT_TRUE(std::find(mm.begin(), mm.end(), Tuple{w1, w2}) == mm.end());
}

TEST(Database, DeduplicatesAndMeasures) {
  Vocabulary voc;
  auto db = parse_database("R(a,b). R(a,b). S(b).", voc);
  EXPECT_EQ(db.size(), 2u);
  EXPECT_EQ(db.weight(), 5u);
  EXPECT_EQ(db.adom().size(), 2u);
  auto gs = guarded_sets(db);
  // {} {a} {b} {a,b}
  EXPECT_EQ(gs.size(), 4u);
}

TEST(Vocabulary, ArityClashAndReservedPrefix) {
  Vocabulary voc;
  voc.rels.intern("R", 2);
  EXPECT_THROW(voc.rels.intern("R", 3), UsageError);
  EXPECT_THROW(voc.consts.named("_:g1"), UsageError);
  ConstId n = voc.consts.fresh_null();
  EXPECT_TRUE(voc.consts.is_null(n));
  EXPECT_EQ(voc.rels.fresh("R", 1), 1);
  EXPECT_EQ(voc.rels.name(1), "R#2");
}

TEST(TgdAnalysis, GuardAndEliFlags) {
  Vocabulary voc;
  auto o = parse_ontology(
      "A(x) -> exists y . R(x,y), B(y)\n"
      "R(x,y), A(y) -> B(x)\n"
      "R(x,y), S(y,z) -> B(x)\n"
      "T(x,y,z) -> R(x,y)\n"
      "R(x,y) -> exists z . S(x,z), S(y,z)\n"
      "A(x) -> exists y . R(x,y), R(y,x)\n",
      voc);
  ASSERT_EQ(o.rules.size(), 6u);
  EXPECT_TRUE(o.rules[0].eli);
  EXPECT_EQ(o.rules[0].existential.size(), 1u);
  EXPECT_TRUE(o.rules[1].guarded());
  EXPECT_TRUE(o.rules[1].eli);
  EXPECT_FALSE(o.rules[2].guarded());
  EXPECT_TRUE(o.rules[3].guarded());
  EXPECT_FALSE(o.rules[3].eli);  // ternary
  EXPECT_FALSE(o.rules[4].eli);  // two frontier variables
  EXPECT_FALSE(o.rules[5].eli);  // parallel edges
  EXPECT_FALSE(o.guarded());
}

}  // namespace
}  // namespace omq
