#pragma once

// Backtracking homomorphism search and Boolean evaluation of conjunctive
// queries over an explicit database.

#include <functional>

#include "omq/structure.hpp"

namespace omq {

class FactIndex {
 public:
  explicit FactIndex(Database&&) = delete;
  explicit FactIndex(const Database& db) : db_(&db) {
    for (std::size_t i = 0; i < db.size(); ++i) {
      const Fact& f = db[static_cast<int>(i)];
      by_rel_[f.rel].push_back(static_cast<int>(i));
      for (std::size_t p = 0; p < f.args.size(); ++p)
        by_arg_[key(f.rel, static_cast<int>(p), f.args[p])].push_back(static_cast<int>(i));
    }
  }

  const Database& db() const { return *db_; }

  const std::vector<int>& by_rel(int rel) const {
    auto it = by_rel_.find(rel);
    return it == by_rel_.end() ? empty_ : it->second;
  }

  const std::vector<int>& by_arg(int rel, int pos, ConstId v) const {
    auto it = by_arg_.find(key(rel, pos, v));
    return it == by_arg_.end() ? empty_ : it->second;
  }

 private:
  static Tuple key(int rel, int pos, ConstId v) { return {rel, pos, v}; }

  const Database* db_;
  std::unordered_map<int, std::vector<int>> by_rel_;
  std::unordered_map<Tuple, std::vector<int>, TupleHash> by_arg_;
  std::vector<int> empty_;
};

// Calls f(assignment) for every homomorphism extending `fixed` (kUnset marks
// free variables). f returns false to stop; the result is false iff stopped.
template <class F>
bool for_each_hom(const ConjunctiveQuery& q, const FactIndex& idx, std::vector<ConstId> fixed, F&& f) {
  const std::size_t n = q.atoms.size();
  fixed.resize(static_cast<std::size_t>(q.num_vars()), kUnset);
  // greedy order: next atom is the one with the most bound positions
  std::vector<int> order;
  std::vector<bool> bound(fixed.size(), false), placed(n, false);
  for (std::size_t v = 0; v < fixed.size(); ++v) bound[v] = fixed[v] != kUnset;
  for (std::size_t k = 0; k < n; ++k) {
    int best = -1, best_score = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i]) continue;
      int score = 0;
      for (const auto& t : q.atoms[i].args)
        if (!t.is_var || bound[static_cast<std::size_t>(t.id)]) ++score;
      if (score > best_score) {
        best = static_cast<int>(i);
        best_score = score;
      }
    }
    placed[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
    for (const auto& t : q.atoms[static_cast<std::size_t>(best)].args)
      if (t.is_var) bound[static_cast<std::size_t>(t.id)] = true;
  }
  std::vector<ConstId>& h = fixed;
  std::function<bool(std::size_t)> rec = [&](std::size_t k) -> bool {
    if (k == n) return f(static_cast<const std::vector<ConstId>&>(h));
    const Atom& a = q.atoms[static_cast<std::size_t>(order[k])];
    const std::vector<int>* cand = &idx.by_rel(a.rel);
    for (std::size_t p = 0; p < a.args.size(); ++p) {
      const auto& t = a.args[p];
      ConstId v = !t.is_var ? t.id : h[static_cast<std::size_t>(t.id)];
      if (v == kUnset) continue;
      const auto& c = idx.by_arg(a.rel, static_cast<int>(p), v);
      if (c.size() < cand->size()) cand = &c;
    }
    for (int fi : *cand) {
      const Fact& fact = idx.db()[fi];
      std::vector<int> set;
      bool ok = true;
      for (std::size_t p = 0; p < a.args.size() && ok; ++p) {
        const auto& t = a.args[p];
        if (!t.is_var) {
          ok = fact.args[p] == t.id;
          continue;
        }
        auto& slot = h[static_cast<std::size_t>(t.id)];
        if (slot == kUnset) {
          slot = fact.args[p];
          set.push_back(t.id);
        } else if (slot != fact.args[p]) {
          ok = false;
        }
      }
      bool go_on = !ok || rec(k + 1);
      for (int v : set) h[static_cast<std::size_t>(v)] = kUnset;
      if (!go_on) return false;
    }
    return true;
  };
  return rec(0);
}

namespace detail {

// Rows of an atom over its distinct variables, honouring constants and
// repeated variables.
inline std::vector<Tuple> atom_matches(const Atom& a, const FactIndex& idx) {
  auto vars = a.vars();
  std::vector<Tuple> out;
  for (int fi : idx.by_rel(a.rel)) {
    const Fact& f = idx.db()[fi];
    Tuple row(vars.size(), kUnset);
    bool ok = true;
    for (std::size_t p = 0; p < a.args.size() && ok; ++p) {
      const auto& t = a.args[p];
      if (!t.is_var) {
        ok = f.args[p] == t.id;
        continue;
      }
      auto i = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), t.id) - vars.begin());
      if (row[i] == kUnset)
        row[i] = f.args[p];
      else
        ok = row[i] == f.args[p];
    }
    if (ok) out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

// Does q have a homomorphism into the database? Answer variables are treated
// as existential. Acyclic queries go through a semijoin pass; everything else
// falls back to backtracking.
inline bool eval_boolean(const ConjunctiveQuery& q, const FactIndex& idx) {
  if (q.atoms.empty()) return true;
  auto sets = atom_var_sets(q);
  auto jt = join_tree_of(sets);
  if (!jt) return !for_each_hom(q, idx, {}, [](const std::vector<ConstId>&) { return false; });
  root_tree(*jt, 0, sets);
  std::vector<std::vector<Tuple>> rows;
  for (const auto& a : q.atoms) rows.push_back(detail::atom_matches(a, idx));
  for (auto it = jt->preorder.rbegin(); it != jt->preorder.rend(); ++it) {
    int u = *it;
    if (rows[static_cast<std::size_t>(u)].empty()) return false;
    int par = jt->parent[static_cast<std::size_t>(u)];
    if (par < 0) continue;
    const auto& shared = jt->pred_vars[static_cast<std::size_t>(u)];
    auto cpos = [&](const std::vector<int>& vars) {
      std::vector<int> pos;
      for (int x : shared) pos.push_back(static_cast<int>(std::find(vars.begin(), vars.end(), x) - vars.begin()));
      return pos;
    };
    auto up = cpos(sets[static_cast<std::size_t>(u)]);
    auto pp = cpos(sets[static_cast<std::size_t>(par)]);
    TupleSet keys;
    for (const auto& r : rows[static_cast<std::size_t>(u)]) {
      Tuple k;
      for (int p : up) k.push_back(r[static_cast<std::size_t>(p)]);
      keys.insert(std::move(k));
    }
    std::erase_if(rows[static_cast<std::size_t>(par)], [&](const Tuple& r) {
      Tuple k;
      for (int p : pp) k.push_back(r[static_cast<std::size_t>(p)]);
      return !keys.count(k);
    });
  }
  // join trees of disconnected queries link components through empty
  // separators, so a nonempty root means every component is satisfiable
  return !rows[static_cast<std::size_t>(jt->root)].empty();
}

inline bool eval_boolean(const ConjunctiveQuery& q, const Database& db) {
  FactIndex idx(db);
  return eval_boolean(q, idx);
}

}  // namespace omq
