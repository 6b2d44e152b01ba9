#pragma once

// Glue between the chase, normalization, and per-component preparation.

#include <chrono>
#include <memory>

#include "omq/prepare.hpp"
#include "omq/syntax.hpp"

namespace omq {

struct ComponentPlan {
  ConjunctiveQuery q;          // connected component of the normalized query
  std::vector<int> positions;  // component answer position -> normalized answer position
  PreparedInstance prep;
};

struct Pipeline {
  NormalizedQuery nq;
  ChaseResult chase;  // query-directed chase, extended by the normalization facts
  std::vector<ComponentPlan> comps;
  double chase_ms = 0;
  double prepare_ms = 0;
};

inline void require_guarded(const Omq& q) {
  if (!q.onto.guarded()) throw StructuralError("ontology is not guarded");
}

inline void require_enumerable(const ConjunctiveQuery& q) {
  auto r = classify(q);
  if (!r.acyclic) throw StructuralError("query is not acyclic");
  if (!r.free_connex) {
    std::string msg = "query is not free-connex acyclic";
    if (r.bad_path) {
      msg += " (bad path:";
      for (int v : *r.bad_path) msg += " " + q.var_names[static_cast<std::size_t>(v)];
      msg += ")";
    }
    throw StructuralError(msg);
  }
}

inline PieceMode piece_mode(AnswerKind k) {
  switch (k) {
    case AnswerKind::Complete:
      return PieceMode::Complete;
    case AnswerKind::Single:
      return PieceMode::Partial;
    case AnswerKind::Multi:
      return PieceMode::Multi;
  }
  return PieceMode::Multi;
}

// Adds the facts of the normalization symbols; each new fact joins the
// witness of the fact it was derived from.
inline void apply_normalization(const NormalizedQuery& nq, ChaseResult& ch) {
  if (nq.rules.empty()) return;
  const std::size_t n = ch.db.size();
  for (std::size_t i = 0; i < n; ++i) {
    Database single;
    single.add(ch.db[static_cast<int>(i)]);
    nq.transform(single);
    for (std::size_t j = 1; j < single.size(); ++j) {
      auto [idx, fresh] = ch.db.insert(single[static_cast<int>(j)]);
      if (!fresh) continue;
      ch.origin.push_back(ch.origin[i]);
      int w = ch.witness_of[i];
      ch.witness_of.push_back(w);
      ch.witnesses[static_cast<std::size_t>(w)].push_back(idx);
    }
  }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

struct PipelineOptions {
  AnswerKind kind = AnswerKind::Single;
  int root_atom = -1;        // atom of the original query to root its component at
  int forced_depth = -1;     // skip the depth analysis (testing only)
  bool prepare = true;       // build q1/D1 per component
};

inline Pipeline build_pipeline(const Omq& q, const Database& d, Vocabulary& voc, PipelineOptions opt = {}) {
  require_guarded(q);
  Pipeline p;
  auto t0 = std::chrono::steady_clock::now();
  p.chase = query_directed_chase(q, d, voc, piece_mode(opt.kind), opt.forced_depth);
  p.nq = normalize_query(q.query, voc);
  apply_normalization(p.nq, p.chase);
  p.chase_ms = elapsed_ms(t0);
  if (!opt.prepare) return p;
  auto t1 = std::chrono::steady_clock::now();
  const auto& nqq = p.nq.q;
  for (const auto& atoms : atom_components(nqq)) {
    ComponentPlan c;
    c.q = subquery(nqq, atoms);
    for (int v : c.q.answer_vars)
      c.positions.push_back(static_cast<int>(std::find(nqq.answer_vars.begin(), nqq.answer_vars.end(), v) -
                                             nqq.answer_vars.begin()));
    PrepareOptions po;
    po.drop_nulls = opt.kind == AnswerKind::Complete;
    if (opt.root_atom >= 0) {
      auto it = std::find(atoms.begin(), atoms.end(), opt.root_atom);
      if (it != atoms.end()) po.root = static_cast<int>(it - atoms.begin());
    }
    c.prep = build_q1_d1(c.q, p.chase, voc.consts, &voc, po);
    p.comps.push_back(std::move(c));
  }
  // Answer variables that occur in no atom cannot happen (the parser rejects
  // them), so the components cover every normalized answer position.
  p.prepare_ms = elapsed_ms(t1);
  return p;
}

}  // namespace omq
