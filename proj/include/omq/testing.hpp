#pragma once

// Deciding whether a given tuple is an answer: single tests that build a
// Boolean query per call, and all-testers that preprocess once and then
// answer membership queries quickly.

#include "omq/engine.hpp"
#include "omq/homomorphism.hpp"
#include "omq/lattice.hpp"

namespace omq {

namespace detail {

// q with the answer variables listed in `subst` replaced by constants; the
// remaining answer variables become existential.
inline ConjunctiveQuery substitute(const ConjunctiveQuery& q, const std::vector<ConstId>& subst) {
  ConjunctiveQuery out = q;
  out.answer_vars.clear();
  for (auto& a : out.atoms)
    for (auto& t : a.args)
      if (t.is_var && subst[static_cast<std::size_t>(t.id)] != kUnset)
        t = Term::constant(subst[static_cast<std::size_t>(t.id)]);
  return out;
}

inline int adom_symbol(Vocabulary& voc) {
  if (auto id = voc.rels.find("P_db#adom")) return *id;
  return voc.rels.intern("P_db#adom", 1);
}

// The chase plus one unary fact per constant of the input database.
inline Database with_adom(const Database& chased, const Database& input, int rel) {
  Database out = chased;
  for (ConstId c : input.adom()) out.add(Fact{rel, {c}});
  return out;
}

inline void check_length(const ConjunctiveQuery& q, const Tuple& t) {
  if (t.size() != q.answer_vars.size())
    throw ValidationError("tuple has length " + std::to_string(t.size()) + ", query arity is " +
                          std::to_string(q.answer_vars.size()));
}

inline bool in_adom(const std::vector<ConstId>& adom, ConstId c) {
  return std::binary_search(adom.begin(), adom.end(), c);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// single tests
// ---------------------------------------------------------------------------

// Runs the chase once for an OMQ and database; each test() then costs one
// Boolean evaluation per candidate query. The single_test_* functions below
// build a tester for one tuple.
class SingleTester {
 public:
  SingleTester(const Omq& q, const Database& d, Vocabulary& voc, AnswerKind kind)
      : q_(&q), kind_(kind), adom_(d.adom()) {
    require_guarded(q);
    auto rep = classify(q.query);
    switch (kind) {
      case AnswerKind::Complete:
        if (!rep.weakly_acyclic) throw StructuralError("query is not weakly acyclic");
        break;
      case AnswerKind::Single:
        if (!rep.acyclic) throw StructuralError("query is not acyclic");
        break;
      case AnswerKind::Multi:
        if (!q.onto.eli()) throw UnsupportedModeError("multi-wildcard single testing needs an ELI ontology");
        if (!rep.acyclic) throw StructuralError("query is not acyclic");
        break;
    }
    auto ch = query_directed_chase(q, d, voc, piece_mode(kind));
    p_db_ = detail::adom_symbol(voc);
    db_ = kind == AnswerKind::Complete ? std::move(ch.db) : detail::with_adom(ch.db, d, p_db_);
    idx_ = std::make_unique<FactIndex>(db_);
  }

  SingleTester(const SingleTester&) = delete;
  SingleTester& operator=(const SingleTester&) = delete;

  bool test(const Tuple& c) const {
    detail::check_length(q_->query, c);
    switch (kind_) {
      case AnswerKind::Complete: return test_complete(c);
      case AnswerKind::Single: return test_partial(c);
      case AnswerKind::Multi: return test_multi(c);
    }
    return false;
  }

 private:
  bool named(ConstId c) const { return detail::in_adom(adom_, c); }

  bool test_complete(const Tuple& c) const {
    const auto& qq = q_->query;
    std::vector<ConstId> subst(static_cast<std::size_t>(qq.num_vars()), kUnset);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (is_wild(c[i])) throw ValidationError("complete answers contain no wildcards");
      if (!named(c[i])) return false;
      auto& s = subst[static_cast<std::size_t>(qq.answer_vars[i])];
      if (s != kUnset && s != c[i]) return false;
      s = c[i];
    }
    return eval_boolean(detail::substitute(qq, subst), *idx_);
  }

  bool test_partial(const Tuple& c) const {
    const auto& qq = q_->query;
    std::vector<ConstId> subst(static_cast<std::size_t>(qq.num_vars()), kUnset);
    std::vector<int> wild_vars;
    for (std::size_t i = 0; i < c.size(); ++i) {
      int v = qq.answer_vars[i];
      if (c[i] != kStar && is_wild(c[i])) throw ValidationError("numbered wildcard in single-wildcard mode");
      bool prior_wild = std::find(wild_vars.begin(), wild_vars.end(), v) != wild_vars.end();
      if (c[i] == kStar) {
        if (subst[static_cast<std::size_t>(v)] != kUnset) return false;
        if (!prior_wild) wild_vars.push_back(v);
        continue;
      }
      if (prior_wild || !named(c[i])) return false;
      auto& s = subst[static_cast<std::size_t>(v)];
      if (s != kUnset && s != c[i]) return false;
      s = c[i];
    }
    auto base = detail::substitute(qq, subst);
    if (!eval_boolean(base, *idx_)) return false;
    for (int z : wild_vars) {
      auto better = base;
      better.atoms.push_back(Atom{p_db_, {Term::var(z)}});
      if (eval_boolean(better, *idx_)) return false;
    }
    return true;
  }

  bool test_multi(const Tuple& c) const {
    if (!validate_multi_tuple(c)) return false;
    const auto& qq = q_->query;
    // one representative variable per wildcard; constants substituted
    std::vector<ConstId> value(static_cast<std::size_t>(qq.num_vars()), kUnset);
    std::vector<int> rep_of_class;
    for (std::size_t i = 0; i < c.size(); ++i) {
      int v = qq.answer_vars[i];
      auto& s = value[static_cast<std::size_t>(v)];
      if (s != kUnset && s != c[i]) return false;
      s = c[i];
      if (!is_wild(c[i]) && !named(c[i])) return false;
    }
    std::vector<int> rename(static_cast<std::size_t>(qq.num_vars()));
    std::iota(rename.begin(), rename.end(), 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!is_wild(c[i])) continue;
      auto k = static_cast<std::size_t>(wild_index(c[i]));
      if (rep_of_class.size() < k) rep_of_class.resize(k, -1);
      int v = qq.answer_vars[i];
      if (rep_of_class[k - 1] < 0) rep_of_class[k - 1] = v;
      rename[static_cast<std::size_t>(v)] = rep_of_class[k - 1];
    }
    // q̂ with the wildcard representatives as its answer variables
    auto hat = [&](const std::vector<int>& ren, const std::vector<ConstId>& subst) {
      ConjunctiveQuery out = qq;
      out.answer_vars.clear();
      for (auto& a : out.atoms)
        for (auto& t : a.args) {
          if (!t.is_var) continue;
          int v = ren[static_cast<std::size_t>(t.id)];
          ConstId s = subst[static_cast<std::size_t>(v)];
          t = s != kUnset ? Term::constant(s) : Term::var(v);
        }
      for (int r : rep_of_class)
        if (r >= 0 && subst[static_cast<std::size_t>(r)] == kUnset &&
            std::find(out.answer_vars.begin(), out.answer_vars.end(), ren[static_cast<std::size_t>(r)]) ==
                out.answer_vars.end())
          out.answer_vars.push_back(ren[static_cast<std::size_t>(r)]);
      return out;
    };
    std::vector<ConstId> subst(static_cast<std::size_t>(qq.num_vars()), kUnset);
    for (int v = 0; v < qq.num_vars(); ++v)
      if (value[static_cast<std::size_t>(v)] != kUnset && !is_wild(value[static_cast<std::size_t>(v)]))
        subst[static_cast<std::size_t>(v)] = value[static_cast<std::size_t>(v)];
    auto qhat = hat(rename, subst);
    if (!classify(qhat).weakly_acyclic) return false;
    if (!eval_boolean(qhat, *idx_)) return false;
    const int k = static_cast<int>(rep_of_class.size());
    // improvement: one wildcard becomes a constant
    for (int a = 0; a < k; ++a) {
      int z = rep_of_class[static_cast<std::size_t>(a)];
      auto cand = qhat;
      cand.atoms.push_back(Atom{p_db_, {Term::var(z)}});
      if (eval_boolean(cand, *idx_)) return false;
    }
    // improvement: two wildcards merge
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        int za = rep_of_class[static_cast<std::size_t>(a)], zb = rep_of_class[static_cast<std::size_t>(b)];
        auto ren = rename;
        for (auto& r : ren)
          if (r == zb) r = za;
        auto cand = hat(ren, subst);
        if (!classify(cand).weakly_acyclic) continue;
        if (eval_boolean(cand, *idx_)) return false;
      }
    return true;
  }

  const Omq* q_;
  AnswerKind kind_;
  std::vector<ConstId> adom_;
  int p_db_ = -1;
  Database db_;
  std::unique_ptr<FactIndex> idx_;
};

inline bool single_test_complete(const Omq& q, const Database& d, Vocabulary& voc, const Tuple& c) {
  return SingleTester(q, d, voc, AnswerKind::Complete).test(c);
}

inline bool single_test_partial(const Omq& q, const Database& d, Vocabulary& voc, const Tuple& c) {
  return SingleTester(q, d, voc, AnswerKind::Single).test(c);
}

inline bool single_test_multi(const Omq& q, const Database& d, Vocabulary& voc, const Tuple& c) {
  return SingleTester(q, d, voc, AnswerKind::Multi).test(c);
}

// ---------------------------------------------------------------------------
// all-testing, complete answers
// ---------------------------------------------------------------------------

class CompleteTester {
 public:
  CompleteTester(const Omq& q, const Database& d, Vocabulary& voc) {
    require_guarded(q);
    auto rep = classify(q.query);
    if (!rep.free_connex) throw StructuralError("query is not free-connex acyclic");
    ChaseResult ch = query_directed_chase(q, d, voc, PieceMode::Complete);
    nq_ = normalize_query(q.query, voc);
    apply_normalization(nq_, ch);
    const auto& nqq = nq_.q;
    auto sets = atom_var_sets(nqq);
    const int guard = static_cast<int>(sets.size());
    sets.push_back(nqq.answer_vars);
    auto jt = join_tree_of(sets);
    if (!jt) throw StructuralError("query is not free-connex acyclic");
    // components of the join tree once the guard node is removed
    std::vector<int> comp(static_cast<std::size_t>(guard));
    std::iota(comp.begin(), comp.end(), 0);
    std::function<int(int)> find = [&](int x) {
      return comp[static_cast<std::size_t>(x)] == x ? x : comp[static_cast<std::size_t>(x)] = find(comp[static_cast<std::size_t>(x)]);
    };
    for (auto [a, b] : jt->edges)
      if (a != guard && b != guard) comp[static_cast<std::size_t>(find(a))] = find(b);
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < guard; ++i) groups[find(i)].push_back(i);
    for (const auto& [root, atoms] : groups) {
      auto sub = subquery(nqq, atoms);
      for (auto& t : detail::eliminate_quantified(sub, ch.db)) {
        Check c;
        for (int x : t.vars)
          c.positions.push_back(static_cast<int>(std::find(nqq.answer_vars.begin(), nqq.answer_vars.end(), x) -
                                                 nqq.answer_vars.begin()));
        for (auto& r : t.rows)
          if (std::none_of(r.begin(), r.end(), [&](ConstId v) { return voc.consts.is_null(v); }))
            c.rows.insert(std::move(r));
        if (c.positions.empty() && c.rows.empty()) always_false_ = true;
        if (!c.positions.empty()) checks_.push_back(std::move(c));
      }
    }
  }

  bool test(const Tuple& c) const {
    if (c.size() != nq_.expand.size())
      throw ValidationError("tuple has length " + std::to_string(c.size()) + ", query arity is " +
                            std::to_string(nq_.expand.size()));
    for (ConstId v : c)
      if (is_wild(v)) throw ValidationError("complete answers contain no wildcards");
    if (always_false_) return false;
    auto t = nq_.restrict_tuple(c);
    if (!t) return false;
    Tuple key;
    for (const auto& chk : checks_) {
      key.clear();
      for (int p : chk.positions) key.push_back((*t)[static_cast<std::size_t>(p)]);
      if (!chk.rows.count(key)) return false;
    }
    return true;
  }

 private:
  struct Check {
    std::vector<int> positions;  // normalized answer positions
    TupleSet rows;
  };
  NormalizedQuery nq_;
  std::vector<Check> checks_;
  bool always_false_ = false;
};

// ---------------------------------------------------------------------------
// all-testing, minimal-or-not partial answers with multiple wildcards
// ---------------------------------------------------------------------------

// Decides membership in the set of multi-wildcard images of homomorphisms
// (nulls replaced consistently, distinct nulls by distinct wildcards), over
// the prepared components of a pipeline. Tuples use the normalized arity.
class MultiImageTester {
 public:
  explicit MultiImageTester(const Pipeline& p) : p_(&p) {
    arity_ = p.nq.q.arity();
    comps_.resize(p.comps.size());
    for (std::size_t ci = 0; ci < p.comps.size(); ++ci) {
      const auto& pr = p.comps[ci].prep;
      auto& cd = comps_[ci];
      cd.named_rows.resize(static_cast<std::size_t>(pr.num_atoms()));
      auto by_pred = pred_index(pr);
      for (int a = 0; a < pr.num_atoms(); ++a) {
        const auto& rows = pr.rows[static_cast<std::size_t>(a)];
        for (std::size_t r = 0; r < rows.size(); ++r) {
          int g = pr.row_group[static_cast<std::size_t>(a)][r];
          if (g < 0) {
            cd.named_rows[static_cast<std::size_t>(a)].insert(rows[r]);
            continue;
          }
          auto& per_atom = cd.group_rows[g];
          per_atom.resize(static_cast<std::size_t>(pr.num_atoms()));
          per_atom[static_cast<std::size_t>(a)].push_back(static_cast<int>(r));
          if (!pred_named(pr, a, rows[r])) continue;
          for_each_excursion(pr, by_pred, a, rows[r], [&](std::uint32_t mask, const Tuple& h) {
            Tuple g_img = h;
            std::vector<std::pair<ConstId, int>> seen;
            for (auto& v : g_img) {
              if (v == kUnset || !pr.is_null(v)) continue;
              auto it = std::find_if(seen.begin(), seen.end(), [&](auto& e) { return e.first == v; });
              if (it == seen.end()) {
                seen.emplace_back(v, static_cast<int>(seen.size()) + 1);
                v = make_wild(static_cast<int>(seen.size()));
              } else {
                v = make_wild(it->second);
              }
            }
            auto& lst = cd.tree_groups[tree_key(mask, g_img)];
            if (lst.empty() || lst.back() != g) lst.push_back(g);
          });
        }
      }
      for (auto& [k, lst] : cd.tree_groups) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
      }
    }
  }

  // Same test for a tuple over the original answer positions.
  bool test_original(const Tuple& t) const {
    if (t.size() != p_->nq.expand.size())
      throw ValidationError("tuple has length " + std::to_string(t.size()) + ", query arity is " +
                            std::to_string(p_->nq.expand.size()));
    if (!validate_multi_tuple(t)) return false;
    auto r = p_->nq.restrict_tuple(t);
    return r && test(canonical_multi(*r));
  }

  bool test(const Tuple& t) const {
    if (static_cast<int>(t.size()) != arity_) throw ValidationError("tuple has the wrong length");
    if (!validate_multi_tuple(t)) throw ValidationError("malformed multi-wildcard tuple");
    for (const auto& c : p_->comps)
      if (c.prep.empty) return false;
    std::vector<Realized> trees;
    for (std::size_t ci = 0; ci < p_->comps.size(); ++ci) {
      const auto& comp = p_->comps[ci];
      const auto& pr = comp.prep;
      Tuple lt;
      for (int pos : comp.positions) lt.push_back(t[static_cast<std::size_t>(pos)]);
      const auto& jt = pr.tree;
      for (int a = 0; a < pr.num_atoms(); ++a) {
        const auto& vars = pr.atom_vars[static_cast<std::size_t>(a)];
        bool any_wild = false;
        for (int x : vars) any_wild |= is_wild(lt[static_cast<std::size_t>(x)]);
        if (!any_wild) {
          Tuple row;
          for (int x : vars) row.push_back(lt[static_cast<std::size_t>(x)]);
          if (!comps_[ci].named_rows[static_cast<std::size_t>(a)].count(row)) return false;
          continue;
        }
        bool pred_const = true;
        for (int x : jt.pred_vars[static_cast<std::size_t>(a)]) pred_const &= !is_wild(lt[static_cast<std::size_t>(x)]);
        if (!pred_const) continue;
        Realized r;
        r.comp = static_cast<int>(ci);
        std::vector<int> stack{a};
        while (!stack.empty()) {
          int u = stack.back();
          stack.pop_back();
          r.mask |= std::uint32_t{1} << u;
          for (int ch : jt.children[static_cast<std::size_t>(u)])
            for (int x : jt.pred_vars[static_cast<std::size_t>(ch)])
              if (is_wild(lt[static_cast<std::size_t>(x)])) {
                stack.push_back(ch);
                break;
              }
        }
        r.g.assign(static_cast<std::size_t>(pr.arity), kUnset);
        for (int u = 0; u < pr.num_atoms(); ++u)
          if (r.mask >> u & 1u)
            for (int x : pr.atom_vars[static_cast<std::size_t>(u)]) r.g[static_cast<std::size_t>(x)] = lt[static_cast<std::size_t>(x)];
        auto it = comps_[ci].tree_groups.find(tree_key(r.mask, canonical_multi(r.g)));
        if (it == comps_[ci].tree_groups.end()) return false;
        r.groups = &it->second;
        trees.push_back(std::move(r));
      }
    }
    if (trees.empty()) return true;
    // classes: trees linked by a shared wildcard must share one group
    std::vector<int> cls(trees.size());
    std::iota(cls.begin(), cls.end(), 0);
    std::function<int(int)> find = [&](int x) {
      return cls[static_cast<std::size_t>(x)] == x ? x : cls[static_cast<std::size_t>(x)] = find(cls[static_cast<std::size_t>(x)]);
    };
    std::unordered_map<ConstId, int> owner;
    for (std::size_t i = 0; i < trees.size(); ++i)
      for (ConstId v : trees[i].g)
        if (is_wild(v)) {
          auto [it, fresh] = owner.emplace(v, static_cast<int>(i));
          if (!fresh) cls[static_cast<std::size_t>(find(static_cast<int>(i)))] = find(it->second);
        }
    std::map<int, std::vector<int>> classes;
    for (std::size_t i = 0; i < trees.size(); ++i) classes[find(static_cast<int>(i))].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> order;
    for (auto& [r, members] : classes) order.push_back(members);
    std::vector<int> group_of(order.size(), -1);
    std::unordered_map<int, std::vector<int>> in_group;  // group -> classes placed there
    std::function<bool(std::size_t)> place = [&](std::size_t k) -> bool {
      if (k == order.size()) return true;
      const std::vector<int>* cand = nullptr;
      for (int ti : order[k])
        if (!cand || trees[static_cast<std::size_t>(ti)].groups->size() < cand->size()) cand = trees[static_cast<std::size_t>(ti)].groups;
      for (int g : *cand) {
        auto& here = in_group[g];
        here.push_back(static_cast<int>(k));
        bool ok;
        if (here.size() == 1 && order[k].size() == 1) {
          ok = true;  // a lone tree is realizable in every group listed for it
        } else {
          std::vector<int> members;
          for (int c : here) members.insert(members.end(), order[static_cast<std::size_t>(c)].begin(), order[static_cast<std::size_t>(c)].end());
          ok = realizable(trees, members, g);
        }
        if (ok && place(k + 1)) return true;
        here.pop_back();
      }
      return false;
    };
    return place(0);
  }

 private:
  struct Realized {
    int comp = 0;
    std::uint32_t mask = 0;
    Tuple g;
    const std::vector<int>* groups = nullptr;
  };

  struct CompData {
    std::vector<TupleSet> named_rows;                                     // rows without nulls, per atom
    std::unordered_map<int, std::vector<std::vector<int>>> group_rows;    // group -> atom -> row indices
    std::unordered_map<Tuple, std::vector<int>, TupleHash> tree_groups;   // (mask, canonical g) -> groups
  };

  static Tuple tree_key(std::uint32_t mask, const Tuple& g) {
    Tuple k{static_cast<ConstId>(mask)};
    k.insert(k.end(), g.begin(), g.end());
    return k;
  }

  // Maps all atoms of the given trees into group g, wildcards injectively to nulls.
  bool realizable(const std::vector<Realized>& trees, const std::vector<int>& members, int g) const {
    struct Item {
      int comp, atom;
      const Tuple* g;
    };
    std::vector<Item> items;
    for (int ti : members) {
      const auto& r = trees[static_cast<std::size_t>(ti)];
      for (int u = 0; u < 32; ++u)
        if (r.mask >> u & 1u) items.push_back({r.comp, u, &r.g});
    }
    std::unordered_map<ConstId, ConstId> null_of;
    std::unordered_set<ConstId> used;
    std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
      if (i == items.size()) return true;
      const auto& it = items[i];
      const auto& pr = p_->comps[static_cast<std::size_t>(it.comp)].prep;
      const auto& gr = comps_[static_cast<std::size_t>(it.comp)].group_rows;
      auto gi = gr.find(g);
      if (gi == gr.end()) return false;
      const auto& vars = pr.atom_vars[static_cast<std::size_t>(it.atom)];
      for (int ri : gi->second[static_cast<std::size_t>(it.atom)]) {
        const Tuple& row = pr.rows[static_cast<std::size_t>(it.atom)][static_cast<std::size_t>(ri)];
        std::vector<ConstId> bound;
        bool ok = true;
        for (std::size_t k = 0; k < vars.size() && ok; ++k) {
          ConstId want = (*it.g)[static_cast<std::size_t>(vars[k])];
          if (!is_wild(want)) {
            ok = row[k] == want;
            continue;
          }
          if (!pr.is_null(row[k])) {
            ok = false;
            continue;
          }
          auto f = null_of.find(want);
          if (f != null_of.end()) {
            ok = f->second == row[k];
          } else if (used.count(row[k])) {
            ok = false;
          } else {
            null_of.emplace(want, row[k]);
            used.insert(row[k]);
            bound.push_back(want);
          }
        }
        if (ok && rec(i + 1)) return true;
        for (ConstId w : bound) {
          used.erase(null_of[w]);
          null_of.erase(w);
        }
      }
      return false;
    };
    return rec(0);
  }

  const Pipeline* p_;
  int arity_ = 0;
  std::vector<CompData> comps_;
};

}  // namespace omq
