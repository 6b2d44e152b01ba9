#pragma once

// Reference answers by brute force: materialize a chase, enumerate every
// homomorphism of the query, map the images to tuples and keep the minimal
// ones. Slow on purpose; used to check the engine on small inputs.

#include "omq/homomorphism.hpp"
#include "omq/lattice.hpp"
#include "omq/syntax.hpp"

namespace omq {

struct OracleOptions {
  AnswerKind kind = AnswerKind::Single;
  int bounded_depth = -1;  // >= 0: oblivious chase of that depth; < 0: query-directed chase
  std::size_t max_images = 5'000'000;
};

inline Database oracle_chase(const Omq& q, const Database& d, Vocabulary& voc, const OracleOptions& opt) {
  if (!q.onto.guarded()) throw StructuralError("ontology is not guarded");
  if (opt.bounded_depth >= 0) return chase_bounded(d, q.onto, opt.bounded_depth, voc.consts);
  PieceMode m = opt.kind == AnswerKind::Complete ? PieceMode::Complete
                : opt.kind == AnswerKind::Single ? PieceMode::Partial
                                                 : PieceMode::Multi;
  return query_directed_chase(q, d, voc, m).db;
}

// Every image of an answer-variable tuple under a homomorphism into `db`,
// with nulls kept as they are.
inline TupleSet raw_images(const ConjunctiveQuery& q, const Database& db, std::size_t cap) {
  FactIndex idx(db);
  TupleSet out;
  for_each_hom(q, idx, {}, [&](const std::vector<ConstId>& h) {
    Tuple t;
    for (int v : q.answer_vars) t.push_back(h[static_cast<std::size_t>(v)]);
    out.insert(std::move(t));
    if (out.size() > cap) throw ResourceLimitError("incomplete: oracle image limit exceeded");
    return true;
  });
  return out;
}

// The answer images before minimization: null-free tuples for complete
// answers, nulls flattened to * or numbered apart otherwise.
inline TupleSet oracle_images(const Omq& q, const Database& d, Vocabulary& voc, const OracleOptions& opt) {
  auto chased = oracle_chase(q, d, voc, opt);
  TupleSet out;
  for (const auto& t : raw_images(q.query, chased, opt.max_images)) {
    if (opt.kind == AnswerKind::Complete) {
      if (std::none_of(t.begin(), t.end(), [&](ConstId c) { return voc.consts.is_null(c); })) out.insert(t);
    } else {
      out.insert(wildcard_image(t, voc.consts, opt.kind == AnswerKind::Multi));
    }
  }
  return out;
}

// Sorted answer set of the requested kind.
inline std::vector<Tuple> oracle_answers(const Omq& q, const Database& d, Vocabulary& voc, const OracleOptions& opt) {
  auto images = oracle_images(q, d, voc, opt);
  switch (opt.kind) {
    case AnswerKind::Complete: {
      std::vector<Tuple> out(images.begin(), images.end());
      std::sort(out.begin(), out.end());
      return out;
    }
    case AnswerKind::Single:
      return minimal_single(images);
    case AnswerKind::Multi:
      return minimal_multi(images);
  }
  return {};
}

}  // namespace omq
