#pragma once

// Random small OMQ instances and the full battery of cross-checks against the
// brute-force oracle. Shared by the randomized GoogleTest suite and by the
// acceptance runner.

#include <random>
#include <set>
#include <sstream>

#include "omq/enumerate.hpp"
#include "omq/oracle.hpp"

namespace omq::testgen {

struct Instance {
  std::string facts, tgd, cq;
  bool eli_only = false;
};

// Relations: unary A B C, binary R S, ternary T (never in ELI instances).
class Generator {
 public:
  explicit Generator(unsigned seed) : rng_(seed) {}

  Instance next(bool eli_only) {
    Instance in;
    in.eli_only = eli_only;
    in.facts = database();
    int rules = uniform(0, 3);
    for (int i = 0; i < rules; ++i) in.tgd += eli_only ? eli_rule() : guarded_rule();
    in.cq = query(eli_only);
    return in;
  }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  std::string database() {
    int consts = uniform(2, 8);
    int facts = uniform(2, 10);
    std::ostringstream out;
    auto c = [&] { return "c" + std::to_string(uniform(0, consts - 1)); };
    for (int i = 0; i < facts; ++i) {
      int kind = uniform(0, 9);
      if (kind < 4)
        out << pick(unary_) << "(" << c() << "). ";
      else if (kind < 9)
        out << pick(binary_) << "(" << c() << "," << c() << "). ";
      else
        out << "T(" << c() << "," << c() << "," << c() << "). ";
    }
    return out.str() + "\n";
  }

  // Head is a tree hanging from the frontier variable x; body is a guard atom
  // on x, optionally with a unary atom on the other variable.
  std::string eli_rule() {
    std::string body;
    switch (uniform(0, 3)) {
      case 0: body = pick(unary_) + "(x)"; break;
      case 1: body = pick(binary_) + "(x,z)"; break;
      case 2: body = pick(binary_) + "(z,x)"; break;
      default: body = pick(binary_) + "(x,z), " + pick(unary_) + "(z)"; break;
    }
    int ex = uniform(0, 2);
    std::vector<std::string> nodes{"x"}, head;
    for (int i = 1; i <= ex; ++i) {
      std::string y = "y" + std::to_string(i);
      const auto& parent = pick(nodes);
      head.push_back(pick(binary_) + (chance(0.5) ? "(" + parent + "," + y + ")" : "(" + y + "," + parent + ")"));
      nodes.push_back(y);
    }
    int labels = ex == 0 ? 1 : uniform(0, 2);
    for (int i = 0; i < labels; ++i) head.push_back(pick(unary_) + "(" + pick(nodes) + ")");
    return rule_text(body, ex, head);
  }

  std::string guarded_rule() {
    std::vector<std::string> vars;
    std::string body;
    switch (uniform(0, 3)) {
      case 0: vars = {"x"}; body = pick(unary_) + "(x)"; break;
      case 1: vars = {"x", "z"}; body = pick(binary_) + "(x,z)"; break;
      case 2: vars = {"x", "z"}; body = pick(binary_) + "(x,z), " + pick(unary_) + "(" + pick(vars) + ")"; break;
      default: vars = {"x", "z", "w"}; body = "T(x,z,w)"; break;
    }
    std::vector<std::string> pool;
    for (const auto& v : vars)
      if (chance(0.6)) pool.push_back(v);
    if (pool.empty()) pool.push_back(pick(vars));
    int ex = uniform(0, 2);
    for (int i = 1; i <= ex; ++i) pool.push_back("y" + std::to_string(i));
    std::vector<std::string> head;
    int atoms = uniform(1, 2) + (ex > 0 ? 1 : 0);
    for (int i = 0; i < atoms; ++i) {
      int kind = uniform(0, 9);
      if (kind < 3)
        head.push_back(pick(unary_) + "(" + pick(pool) + ")");
      else if (kind < 9)
        head.push_back(pick(binary_) + "(" + pick(pool) + "," + pick(pool) + ")");
      else
        head.push_back("T(" + pick(pool) + "," + pick(pool) + "," + pick(pool) + ")");
    }
    // every existential must occur in the head
    for (int i = 1; i <= ex; ++i) {
      std::string y = "y" + std::to_string(i);
      bool used = false;
      for (const auto& h : head) used = used || h.find(y) != std::string::npos;
      if (!used) head.push_back(pick(binary_) + "(" + pool.front() + "," + y + ")");
    }
    return rule_text(body, ex, head);
  }

  static std::string rule_text(const std::string& body, int ex, const std::vector<std::string>& head) {
    std::string out = body + " -> ";
    if (ex > 0) {
      out += "exists ";
      for (int i = 1; i <= ex; ++i) out += (i > 1 ? "," : "") + std::string("y") + std::to_string(i);
      out += " . ";
    }
    for (std::size_t i = 0; i < head.size(); ++i) out += (i ? ", " : "") + head[i];
    return out + "\n";
  }

  // Mostly tree-shaped queries grown atom by atom, sometimes disconnected or
  // cyclic, with one to three answer positions.
  std::string query(bool eli_only) {
    int atoms = uniform(1, 4);
    int nvars = 0;
    auto fresh = [&] { return nvars++; };
    std::vector<std::string> body;
    for (int i = 0; i < atoms; ++i) {
      int arity = chance(0.3) ? 1 : (!eli_only && chance(0.1) ? 3 : 2);
      std::vector<int> args;
      for (int p = 0; p < arity; ++p) args.push_back(-1);
      if (i > 0 && chance(0.85)) args[static_cast<std::size_t>(uniform(0, arity - 1))] = uniform(0, nvars - 1);
      if (i > 0 && arity > 1 && chance(0.15)) args[0] = uniform(0, nvars - 1);
      for (auto& a : args)
        if (a < 0) a = fresh();
      std::string rel = arity == 1 ? pick(unary_) : arity == 2 ? pick(binary_) : std::string("T");
      std::string text = rel + "(";
      for (std::size_t p = 0; p < args.size(); ++p) text += (p ? "," : "") + std::string("v") + std::to_string(args[p]);
      body.push_back(text + ")");
    }
    int k = uniform(1, std::min(3, nvars));
    std::vector<int> vars(static_cast<std::size_t>(nvars));
    std::iota(vars.begin(), vars.end(), 0);
    std::shuffle(vars.begin(), vars.end(), rng_);
    std::vector<int> answer(vars.begin(), vars.begin() + k);
    if (k < 3 && chance(0.1)) answer.push_back(answer.front());
    std::string out = "q(";
    for (std::size_t i = 0; i < answer.size(); ++i) out += (i ? "," : "") + std::string("v") + std::to_string(answer[i]);
    out += ") <- ";
    for (std::size_t i = 0; i < body.size(); ++i) out += (i ? ", " : "") + body[i];
    return out + ".\n";
  }

  std::mt19937 rng_;
  std::vector<std::string> unary_{"A", "B", "C"};
  std::vector<std::string> binary_{"R", "S"};
};

// ---------------------------------------------------------------------------
// candidate tuples
// ---------------------------------------------------------------------------

inline std::vector<Tuple> complete_candidates(const std::vector<ConstId>& adom, int k) {
  std::vector<Tuple> out{{}};
  for (int i = 0; i < k; ++i) {
    std::vector<Tuple> next;
    for (const auto& t : out)
      for (ConstId c : adom) {
        next.push_back(t);
        next.back().push_back(c);
      }
    out = std::move(next);
  }
  return out;
}

inline std::vector<Tuple> partial_candidates(std::vector<ConstId> adom, int k) {
  adom.push_back(kStar);
  return complete_candidates(adom, k);
}

// Every canonical multi-wildcard tuple over adom.
inline std::vector<Tuple> multi_candidates(const std::vector<ConstId>& adom, int k) {
  std::vector<Tuple> out;
  Tuple cur;
  std::function<void(int)> rec = [&](int used) {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (ConstId c : adom) {
      cur.push_back(c);
      rec(used);
      cur.pop_back();
    }
    for (int w = 1; w <= used + 1; ++w) {
      cur.push_back(make_wild(w));
      rec(std::max(used, w));
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

// ---------------------------------------------------------------------------
// checks
// ---------------------------------------------------------------------------

struct Stats {
  std::size_t instances = 0;
  std::size_t enumerated = 0;  // (instance, mode) pairs run through enumeration
  std::size_t single_tests = 0;
  std::size_t all_tests = 0;
  std::size_t chases_checked = 0;
  std::size_t equation_checked = 0;
};

struct Report {
  std::vector<std::string> enum_mismatch;    // emitted set differs from the oracle
  std::vector<std::string> test_mismatch;    // a tester disagrees with the oracle
  std::vector<std::string> order_violation;  // pruning / ordering / complete-first
  std::vector<std::string> chase_violation;  // witness invariants or the complete-answer equation
  std::vector<std::string> size_chain;       // |complete| <= |partial| <= |multi|
  std::vector<std::string> errors;           // exceptions escaping a check
  Stats stats;

  bool clean() const {
    return enum_mismatch.empty() && test_mismatch.empty() && order_violation.empty() && chase_violation.empty() &&
           size_chain.empty() && errors.empty();
  }
};

inline std::string describe(const Instance& in) { return in.facts + in.tgd + in.cq; }

inline std::string show(const Vocabulary& voc, const std::vector<Tuple>& ts, AnswerKind k) {
  std::string out = "{";
  for (const auto& t : ts) out += " " + print_answer(voc, t, k);
  return out + " }";
}

// The three chase-like conditions plus full coverage of the facts.
inline std::optional<std::string> witness_violation(const ChaseResult& ch, const ConstantPool& pool) {
  std::vector<int> seen(ch.db.size(), 0);
  std::unordered_map<ConstId, int> null_home;
  for (std::size_t w = 0; w < ch.witnesses.size(); ++w) {
    int named = 0;
    for (int f : ch.witnesses[w]) {
      ++seen[static_cast<std::size_t>(f)];
      if (ch.witness_of[static_cast<std::size_t>(f)] != static_cast<int>(w)) return "witness_of disagrees";
      bool has_null = false;
      for (ConstId c : ch.db[f].args) {
        if (!pool.is_null(c)) continue;
        has_null = true;
        auto [it, fresh] = null_home.emplace(c, static_cast<int>(w));
        if (!fresh && it->second != static_cast<int>(w)) return "null shared by two witness databases";
      }
      named += has_null ? 0 : 1;
    }
    if (named != 1) return "witness database with " + std::to_string(named) + " null-free facts";
  }
  for (std::size_t f = 0; f < seen.size(); ++f)
    if (seen[f] != 1) return "fact in " + std::to_string(seen[f]) + " witness databases";
  return std::nullopt;
}

// Complete answers from a depth-bounded oblivious chase, used as an
// independent reference for the query-directed chase.
inline std::optional<std::vector<Tuple>> bounded_complete(const Omq& q, const Database& d, Vocabulary& voc,
                                                          int depth) {
  try {
    auto db = chase_bounded(d, q.onto, depth, voc.consts, 20'000);
    std::vector<Tuple> out;
    for (const auto& t : raw_images(q.query, db, 200'000))
      if (std::none_of(t.begin(), t.end(), [&](ConstId c) { return voc.consts.is_null(c); })) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
  } catch (const ResourceLimitError&) {
    return std::nullopt;
  }
}

inline constexpr int kMaxReferenceDepth = 16;

struct CheckOptions {
  bool single_tests = true;
  bool all_tests = true;
  bool enumeration = true;
  bool order = true;
  bool chase = true;
};

inline void check_instance(const Instance& in, Report& rep, const CheckOptions& opt = {}) {
  Vocabulary voc;
  auto parsed = parse_omq(in.facts, in.tgd, in.cq, voc);
  const Omq& q = parsed.omq;
  const Database& d = parsed.db;
  ++rep.stats.instances;
  const std::string ctx = describe(in);
  auto structure = classify(q.query);
  const bool enumerable = structure.acyclic && structure.free_connex;
  const int k = q.query.arity();
  auto adom = d.adom();

  std::map<AnswerKind, std::vector<Tuple>> oracle;
  for (auto kind : {AnswerKind::Complete, AnswerKind::Single, AnswerKind::Multi}) {
    OracleOptions oo;
    oo.kind = kind;
    oracle[kind] = oracle_answers(q, d, voc, oo);
  }
  const auto& oc = oracle[AnswerKind::Complete];
  const auto& op = oracle[AnswerKind::Single];
  const auto& om = oracle[AnswerKind::Multi];
  if (!(oc.size() <= op.size() && op.size() <= om.size()))
    rep.size_chain.push_back(ctx + "sizes " + std::to_string(oc.size()) + " " + std::to_string(op.size()) + " " +
                             std::to_string(om.size()));

  // --- enumeration ------------------------------------------------------
  if (opt.enumeration) {
    for (auto kind : {AnswerKind::Complete, AnswerKind::Single, AnswerKind::Multi}) {
      EnumOptions eo;
      eo.kind = kind;
      if (!enumerable) {
        try {
          make_enumeration(q, d, voc, eo);
          rep.enum_mismatch.push_back(ctx + "enumeration accepted a query outside its class");
        } catch (const StructuralError&) {
        }
        continue;
      }
      ++rep.stats.enumerated;
      auto e = make_enumeration(q, d, voc, eo);
      auto got = collect(*e);
      auto sorted = got;
      std::sort(sorted.begin(), sorted.end());
      bool dup = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
      if (dup || sorted != oracle[kind])
        rep.enum_mismatch.push_back(ctx + mode_name(kind) + (dup ? " repeated output " : " ") +
                                    "got " + show(voc, got, kind) + " oracle " + show(voc, oracle[kind], kind));
      if (kind != AnswerKind::Single || !opt.order) continue;

      // pruning off: nothing smaller after something larger; the minimal
      // elements of the output are the answers
      eo.prune = false;
      auto raw = collect(*make_enumeration(q, d, voc, eo));
      for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t j = i + 1; j < raw.size(); ++j)
          if (wildcard_lt(raw[j], raw[i])) {
            rep.order_violation.push_back(ctx + "unpruned order: " + print_answer(voc, raw[j], kind) +
                                          " after " + print_answer(voc, raw[i], kind));
            i = raw.size();
            break;
          }
      TupleSet raw_set(raw.begin(), raw.end());
      if (minimal_single(raw_set) != op) rep.order_violation.push_back(ctx + "unpruned output has other minima");
      for (std::size_t i = 0; i < got.size(); ++i)
        for (std::size_t j = 0; j < got.size(); ++j)
          if (i != j && wildcard_lt(got[i], got[j])) {
            rep.order_violation.push_back(ctx + "pruned output is not an antichain");
            i = got.size();
            break;
          }

      eo.prune = true;
      eo.complete_first = true;
      auto cf = collect(*make_enumeration(q, d, voc, eo));
      auto cf_sorted = cf;
      std::sort(cf_sorted.begin(), cf_sorted.end());
      if (cf_sorted != op) rep.order_violation.push_back(ctx + "complete-first changes the answer set");
      bool wild_seen = false;
      for (const auto& t : cf) {
        bool wild = std::any_of(t.begin(), t.end(), is_wild);
        if (!wild && wild_seen) {
          rep.order_violation.push_back(ctx + "complete answer after a wildcard answer in complete-first mode");
          break;
        }
        wild_seen = wild_seen || wild;
      }
    }
  }

  // --- single tests -------------------------------------------------------
  if (opt.single_tests) {
    auto member = [](const std::vector<Tuple>& v, const Tuple& t) { return std::binary_search(v.begin(), v.end(), t); };
    if (structure.weakly_acyclic) {
      SingleTester complete_tester(q, d, voc, AnswerKind::Complete);
      for (const auto& t : complete_candidates(adom, k)) {
        ++rep.stats.single_tests;
        if (complete_tester.test(t) != member(oc, t)) {
          rep.test_mismatch.push_back(ctx + "single complete " + print_answer(voc, t, AnswerKind::Complete));
          break;
        }
      }
    }
    if (structure.acyclic) {
      SingleTester partial_tester(q, d, voc, AnswerKind::Single);
      for (const auto& t : partial_candidates(adom, k)) {
        ++rep.stats.single_tests;
        if (partial_tester.test(t) != member(op, t)) {
          rep.test_mismatch.push_back(ctx + "single partial " + print_answer(voc, t, AnswerKind::Single));
          break;
        }
      }
    }
    if (structure.acyclic && q.onto.eli()) {
      SingleTester multi_tester(q, d, voc, AnswerKind::Multi);
      for (const auto& t : multi_candidates(adom, k)) {
        ++rep.stats.single_tests;
        if (multi_tester.test(t) != member(om, t)) {
          rep.test_mismatch.push_back(ctx + "single multi " + print_answer(voc, t, AnswerKind::Multi));
          break;
        }
      }
    }
  }

  // --- all-testers ----------------------------------------------------------
  if (opt.all_tests && structure.free_connex) {
    CompleteTester ct(q, d, voc);
    for (const auto& t : complete_candidates(adom, k)) {
      ++rep.stats.all_tests;
      if (ct.test(t) != std::binary_search(oc.begin(), oc.end(), t)) {
        rep.test_mismatch.push_back(ctx + "all-test complete " + print_answer(voc, t, AnswerKind::Complete));
        break;
      }
    }
  }
  if (opt.all_tests && enumerable) {
    OracleOptions oo;
    oo.kind = AnswerKind::Multi;
    TupleSet images;
    for (const auto& t : oracle_images(q, d, voc, oo)) images.insert(canonical_multi(t));
    PipelineOptions po;
    po.kind = AnswerKind::Multi;
    auto pl = build_pipeline(q, d, voc, po);
    MultiImageTester mt(pl);
    for (const auto& t : multi_candidates(adom, k)) {
      ++rep.stats.all_tests;
      if (mt.test_original(t) != (images.count(t) > 0)) {
        rep.test_mismatch.push_back(ctx + "all-test multi " + print_answer(voc, t, AnswerKind::Multi));
        break;
      }
    }
  }

  // --- chase ------------------------------------------------------------------
  if (opt.chase) {
    for (auto mode : {PieceMode::Complete, PieceMode::Partial, PieceMode::Multi}) {
      auto ch = query_directed_chase(q, d, voc, mode);
      ++rep.stats.chases_checked;
      if (auto why = witness_violation(ch, voc.consts)) rep.chase_violation.push_back(ctx + *why);
    }
    // Q(D) = q(ch^q(D)) restricted to adom(D): deeper and deeper oblivious
    // chases never find more, and eventually find the same
    for (int depth = 0;; ++depth) {
      auto ref = bounded_complete(q, d, voc, depth);
      if (!ref) break;  // reference too large to build
      if (!std::includes(oc.begin(), oc.end(), ref->begin(), ref->end())) {
        rep.chase_violation.push_back(ctx + "depth-" + std::to_string(depth) + " chase finds answers " +
                                      show(voc, *ref, AnswerKind::Complete) + " beyond " +
                                      show(voc, oc, AnswerKind::Complete));
        break;
      }
      if (*ref == oc) {
        ++rep.stats.equation_checked;
        break;
      }
      if (depth == kMaxReferenceDepth) {
        rep.chase_violation.push_back(ctx + "complete answers " + show(voc, oc, AnswerKind::Complete) +
                                      " not reached by the depth-" + std::to_string(depth) + " chase");
        break;
      }
    }
  }
}

// Random Horn formula with up to `max_clauses` clauses; bodies of zero to
// three variables, one or two heads, a few unit facts.
inline HornFormula random_horn(std::mt19937& rng, int max_clauses) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  HornFormula f;
  const int clauses = uniform(1, max_clauses);
  f.num_vars = std::max(2, clauses / uniform(1, 6));
  for (int i = uniform(1, 5); i > 0; --i) f.units.push_back(uniform(0, f.num_vars - 1));
  for (int i = 0; i < clauses; ++i) {
    HornClause c;
    for (int b = uniform(0, 3); b > 0; --b) c.body.push_back(uniform(0, f.num_vars - 1));
    for (int h = uniform(1, 2); h > 0; --h) c.heads.push_back(uniform(0, f.num_vars - 1));
    f.clauses.push_back(std::move(c));
  }
  return f;
}

// `count` instances from one seed; every second one is ELI-only so that the
// multi-wildcard single tester gets its share.
inline Report run_battery(unsigned seed, int count, const CheckOptions& opt = {}) {
  Generator gen(seed);
  Report rep;
  for (int i = 0; i < count; ++i) {
    auto in = gen.next(i % 2 == 1);
    try {
      check_instance(in, rep, opt);
    } catch (const std::exception& e) {
      rep.errors.push_back(describe(in) + e.what());
    }
  }
  return rep;
}

}  // namespace omq::testgen
