#pragma once

// From a connected, normalized, acyclic and free-connex acyclic query q0 over
// a chase result D0 to a full self-join-free query q1 over a database D1,
// plus the index of progress trees used by the partial-answer enumerator.
//
// q1 variables are numbered by answer position, so a total assignment of
// q1 is an answer tuple.

#include <bit>
#include <map>

#include "omq/chase.hpp"
#include "omq/structure.hpp"

namespace omq {

struct PreparedInstance {
  int arity = 0;                               // |x̄| = number of q1 variables
  std::vector<std::string> atom_names;         // fresh symbol per q1 atom
  std::vector<std::vector<int>> atom_vars;     // answer positions, in atom order
  std::vector<std::vector<Tuple>> rows;        // D1, per atom
  std::vector<std::vector<int>> row_group;     // witness of each row, -1 if null-free
  JoinTree tree;                               // rooted join tree of q1
  std::vector<int> source_atom;                // q0 atom each q1 atom came from
  bool empty = false;                          // q0(D0) is empty
  const ConstantPool* pool = nullptr;

  int num_atoms() const { return static_cast<int>(atom_vars.size()); }
  bool is_null(ConstId c) const { return pool && c >= 0 && pool->is_null(c); }
};

struct PrepareOptions {
  int root = -1;            // index into q0's atoms whose q1 atom becomes the root
  bool drop_nulls = false;  // keep only null-free rows (complete answers)
};

namespace detail {

struct Table {
  std::vector<int> vars;  // q0 variable ids
  std::vector<Tuple> rows;
  bool had_quantified = false;
  int source = 0;
  bool alive = true;
};

inline std::vector<int> positions_of(const std::vector<int>& vars, const std::vector<int>& sub) {
  std::vector<int> out;
  for (int x : sub) out.push_back(static_cast<int>(std::find(vars.begin(), vars.end(), x) - vars.begin()));
  return out;
}

inline Tuple project(const Tuple& row, const std::vector<int>& pos) {
  Tuple out;
  out.reserve(pos.size());
  for (int p : pos) out.push_back(row[static_cast<std::size_t>(p)]);
  return out;
}

// keeps the rows of `target` whose projection on `shared` occurs in `filter`
inline void semijoin(Table& target, const Table& filter, const std::vector<int>& shared) {
  auto fpos = positions_of(filter.vars, shared);
  auto tpos = positions_of(target.vars, shared);
  std::unordered_set<Tuple, TupleHash> keys;
  for (const auto& r : filter.rows) keys.insert(project(r, fpos));
  std::erase_if(target.rows, [&](const Tuple& r) { return !keys.count(project(r, tpos)); });
}

inline void dedupe(std::vector<Tuple>& rows) {
  std::unordered_set<Tuple, TupleHash> seen;
  std::vector<Tuple> out;
  for (auto& r : rows)
    if (seen.insert(r).second) out.push_back(std::move(r));
  rows = std::move(out);
}

inline std::string q1_atom_name(const Vocabulary* voc, const ConjunctiveQuery& q0, const Atom& a,
                                std::vector<std::string>& used) {
  std::string base = voc ? voc->rels.name(a.rel) : "R" + std::to_string(a.rel);
  std::string suffix;
  if (!a.args.empty() && a.args[0].is_var) {
    const auto& vn = q0.var_names[static_cast<std::size_t>(a.args[0].id)];
    auto p = vn.find_last_not_of("0123456789");
    suffix = vn.substr(p == std::string::npos ? 0 : p + 1);
  }
  std::string name = base + suffix;
  for (int k = 2; suffix.empty() || std::find(used.begin(), used.end(), name) != used.end(); ++k) {
    suffix = "_" + std::to_string(k);
    name = base + suffix;
  }
  used.push_back(name);
  return name;
}

// Projects away quantified variables private to one atom and absorbs atoms
// covered by another, until only answer variables remain. Returns the
// surviving tables; nullary ones encode Boolean conditions.
inline std::vector<Table> eliminate_quantified(const ConjunctiveQuery& q0, const Database& db) {
  std::vector<bool> answer(static_cast<std::size_t>(q0.num_vars()), false);
  for (int x : q0.answer_vars) answer[static_cast<std::size_t>(x)] = true;
  std::unordered_map<int, std::vector<int>> by_rel;
  for (std::size_t f = 0; f < db.size(); ++f) by_rel[db[static_cast<int>(f)].rel].push_back(static_cast<int>(f));

  std::vector<Table> tabs;
  for (std::size_t i = 0; i < q0.atoms.size(); ++i) {
    const auto& a = q0.atoms[i];
    Table t;
    t.source = static_cast<int>(i);
    for (const auto& term : a.args) {
      if (!term.is_var) throw StructuralError("query is not normalized");
      t.vars.push_back(term.id);
    }
    for (int x : t.vars) t.had_quantified |= !answer[static_cast<std::size_t>(x)];
    if (auto it = by_rel.find(a.rel); it != by_rel.end())
      for (int f : it->second) t.rows.push_back(db[f].args);
    tabs.push_back(std::move(t));
  }

  auto occurrences = [&](int x) {
    int n = 0;
    for (const auto& t : tabs)
      if (t.alive && std::count(t.vars.begin(), t.vars.end(), x)) ++n;
    return n;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& t : tabs) {
      if (!t.alive) continue;
      for (std::size_t i = 0; i < t.vars.size();) {
        int x = t.vars[i];
        if (!answer[static_cast<std::size_t>(x)] && occurrences(x) == 1) {
          t.vars.erase(t.vars.begin() + static_cast<std::ptrdiff_t>(i));
          for (auto& r : t.rows) r.erase(r.begin() + static_cast<std::ptrdiff_t>(i));
          dedupe(t.rows);
          changed = true;
        } else {
          ++i;
        }
      }
    }
    for (std::size_t i = 0; i < tabs.size(); ++i) {
      auto& t = tabs[i];
      if (!t.alive || !t.had_quantified) continue;
      for (std::size_t j = 0; j < tabs.size(); ++j) {
        if (i == j || !tabs[j].alive) continue;
        auto& o = tabs[j];
        bool covered = std::all_of(t.vars.begin(), t.vars.end(),
                                   [&](int x) { return std::count(o.vars.begin(), o.vars.end(), x) > 0; });
        if (!covered) continue;
        semijoin(o, t, t.vars);
        t.alive = false;
        changed = true;
        break;
      }
    }
  }
  std::vector<Table> out;
  for (auto& t : tabs) {
    if (!t.alive) continue;
    for (int x : t.vars)
      if (!answer[static_cast<std::size_t>(x)]) throw StructuralError("quantified variables could not be eliminated");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

// Runs the bottom-up semijoin pass of a rooted tree over the given tables.
inline void bottom_up_semijoin(PreparedInstance& p) {
  const auto& t = p.tree;
  for (auto it = t.preorder.rbegin(); it != t.preorder.rend(); ++it) {
    int u = *it;
    int par = t.parent[static_cast<std::size_t>(u)];
    if (par < 0) continue;
    detail::Table child{p.atom_vars[static_cast<std::size_t>(u)], p.rows[static_cast<std::size_t>(u)]};
    detail::Table parent{p.atom_vars[static_cast<std::size_t>(par)], std::move(p.rows[static_cast<std::size_t>(par)])};
    detail::semijoin(parent, child, t.pred_vars[static_cast<std::size_t>(u)]);
    p.rows[static_cast<std::size_t>(par)] = std::move(parent.rows);
  }
  if (t.root >= 0 && p.rows[static_cast<std::size_t>(t.root)].empty()) p.empty = true;
}

inline void assign_groups(PreparedInstance& p, const ChaseResult& d0) {
  std::unordered_map<ConstId, int> null_group;
  for (std::size_t f = 0; f < d0.db.size(); ++f)
    for (ConstId c : d0.db[static_cast<int>(f)].args)
      if (p.is_null(c)) null_group.emplace(c, d0.witness_of[f]);
  p.row_group.assign(p.rows.size(), {});
  for (std::size_t a = 0; a < p.rows.size(); ++a)
    for (const auto& r : p.rows[a]) {
      int g = -1;
      for (ConstId c : r)
        if (p.is_null(c)) {
          g = null_group.at(c);
          break;
        }
      p.row_group[a].push_back(g);
    }
}

inline PreparedInstance build_q1_d1(const ConjunctiveQuery& q0, const ChaseResult& d0, const ConstantPool& pool,
                                    const Vocabulary* voc = nullptr, PrepareOptions opt = {}) {
  auto rep = classify(q0);
  if (!rep.acyclic) throw StructuralError("query is not acyclic");
  if (!rep.free_connex) throw StructuralError("query is not free-connex acyclic");
  if (!rep.connected) throw StructuralError("query is not connected");
  if (q0.has_repeated_answer_vars() || q0.has_constants())
    throw StructuralError("query is not normalized");

  PreparedInstance p;
  p.pool = &pool;
  p.arity = q0.arity();
  std::vector<int> answer_pos(static_cast<std::size_t>(q0.num_vars()), -1);
  for (std::size_t i = 0; i < q0.answer_vars.size(); ++i)
    answer_pos[static_cast<std::size_t>(q0.answer_vars[i])] = static_cast<int>(i);

  auto tabs = detail::eliminate_quantified(q0, d0.db);
  std::vector<int> kept;
  for (std::size_t i = 0; i < tabs.size(); ++i) {
    if (tabs[i].vars.empty()) {
      if (tabs[i].rows.empty()) p.empty = true;
      continue;
    }
    kept.push_back(static_cast<int>(i));
  }

  std::vector<std::string> used;
  for (int i : kept) {
    auto& t = tabs[static_cast<std::size_t>(i)];
    std::vector<int> vars;
    for (int x : t.vars) vars.push_back(answer_pos[static_cast<std::size_t>(x)]);
    p.atom_vars.push_back(vars);
    if (opt.drop_nulls)
      std::erase_if(t.rows, [&](const Tuple& r) {
        return std::any_of(r.begin(), r.end(), [&](ConstId c) { return pool.is_null(c); });
      });
    p.rows.push_back(std::move(t.rows));
    p.source_atom.push_back(t.source);
    p.atom_names.push_back(detail::q1_atom_name(voc, q0, q0.atoms[static_cast<std::size_t>(t.source)], used));
  }
  if (p.atom_vars.empty()) {
    if (p.arity != 0) throw StructuralError("answer variables lost during preparation");
    p.tree.n = 0;
    assign_groups(p, d0);
    return p;
  }
  auto jt = join_tree_of(p.atom_vars);
  if (!jt) throw StructuralError("prepared query is not acyclic");
  p.tree = *jt;
  int root = -1;
  if (opt.root >= 0) {
    auto it = std::find(p.source_atom.begin(), p.source_atom.end(), opt.root);
    if (it == p.source_atom.end()) throw ValidationError("requested root atom was eliminated");
    root = static_cast<int>(it - p.source_atom.begin());
  } else {
    for (int a = 0; a < p.num_atoms() && root < 0; ++a)
      if (std::count(p.atom_vars[static_cast<std::size_t>(a)].begin(), p.atom_vars[static_cast<std::size_t>(a)].end(), 0))
        root = a;
    if (root < 0) root = 0;
  }
  root_tree(p.tree, root, p.atom_vars);
  bottom_up_semijoin(p);
  assign_groups(p, d0);
  return p;
}

// ---------------------------------------------------------------------------
// progress trees
// ---------------------------------------------------------------------------

struct ProgressTree {
  std::uint32_t mask = 0;  // atoms of the subtree
  Tuple g;                 // per q1 variable: constant, kStar, or kUnset outside the subtree
  friend bool operator==(const ProgressTree&, const ProgressTree&) = default;
};

struct ProgressTreeHash {
  std::size_t operator()(const ProgressTree& t) const noexcept {
    std::size_t h = t.mask;
    boost::hash_combine(h, boost::hash_range(t.g.begin(), t.g.end()));
    return h;
  }
};

enum class Order { Less, Greater, Incomparable };

inline int tree_root(const JoinTree& jt, std::uint32_t mask) {
  for (int v : jt.preorder)
    if (mask >> v & 1u) return v;
  return -1;
}

// The database-preferring order.
inline Order db_preferring_cmp(const JoinTree& jt, const ProgressTree& a, const ProgressTree& b) {
  if (tree_root(jt, a.mask) != tree_root(jt, b.mask)) return Order::Incomparable;
  auto less = [](const ProgressTree& x, const ProgressTree& y) {
    if (x.mask != y.mask) return (x.mask & y.mask) == x.mask;
    bool strict = false;
    for (std::size_t i = 0; i < x.g.size(); ++i) {
      if (x.g[i] == kUnset) continue;
      if (x.g[i] == kStar) {
        if (y.g[i] != kStar) return false;
      } else if (y.g[i] == kStar) {
        strict = true;
      } else if (y.g[i] != x.g[i]) {
        return false;
      }
    }
    return strict;
  };
  if (less(a, b)) return Order::Less;
  if (less(b, a)) return Order::Greater;
  return Order::Incomparable;
}

// Sort key realizing a linear extension of the database-preferring order.
inline bool progress_tree_before(const ProgressTree& a, const ProgressTree& b) {
  auto stars = [](const ProgressTree& t) { return std::count(t.g.begin(), t.g.end(), kStar); };
  int pa = std::popcount(a.mask), pb = std::popcount(b.mask);
  if (pa != pb) return pa < pb;
  auto sa = stars(a), sb = stars(b);
  if (sa != sb) return sa < sb;
  auto key = [](ConstId v) -> std::int64_t {
    if (v == kStar) return std::int64_t{1} << 40;
    if (v == kUnset) return std::int64_t{1} << 41;
    return v;
  };
  for (std::size_t i = 0; i < a.g.size(); ++i)
    if (key(a.g[i]) != key(b.g[i])) return key(a.g[i]) < key(b.g[i]);
  return a.mask < b.mask;
}

class TreesIndex {
 public:
  struct Node {
    ProgressTree tree;
    int prev = -1;
    int next = -1;
    int list = -1;
    bool removed = false;
  };
  struct List {
    int atom = 0;
    Tuple pred;
    int head = -1;
    int size = 0;
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<List>& lists() const { return lists_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  int find_list(int atom, const Tuple& pred) const {
    auto it = head_table_.find(list_key(atom, pred));
    return it == head_table_.end() ? -1 : it->second;
  }
  int locate(const ProgressTree& t) const {
    auto it = location_.find(t);
    return it == location_.end() ? -1 : it->second;
  }

  // Unlinks a node; it keeps its own next pointer so that a cursor standing
  // on it can continue.
  bool unlink(int n) {
    auto& nd = nodes_[static_cast<std::size_t>(n)];
    if (nd.removed) return false;
    nd.removed = true;
    auto& l = lists_[static_cast<std::size_t>(nd.list)];
    if (nd.prev >= 0)
      nodes_[static_cast<std::size_t>(nd.prev)].next = nd.next;
    else
      l.head = nd.next;
    if (nd.next >= 0) nodes_[static_cast<std::size_t>(nd.next)].prev = nd.prev;
    --l.size;
    return true;
  }

  // Trees currently in a list, in list order.
  std::vector<ProgressTree> list_contents(int l) const {
    std::vector<ProgressTree> out;
    for (int n = lists_[static_cast<std::size_t>(l)].head; n >= 0; n = nodes_[static_cast<std::size_t>(n)].next)
      out.push_back(nodes_[static_cast<std::size_t>(n)].tree);
    return out;
  }

  void add_list(int atom, Tuple pred, std::vector<ProgressTree> trees) {
    std::sort(trees.begin(), trees.end(), progress_tree_before);
    int id = static_cast<int>(lists_.size());
    head_table_.emplace(list_key(atom, pred), id);
    List l{atom, std::move(pred), -1, static_cast<int>(trees.size())};
    int prev = -1;
    for (auto& t : trees) {
      int n = static_cast<int>(nodes_.size());
      location_.emplace(t, n);
      nodes_.push_back({std::move(t), prev, -1, id, false});
      if (prev >= 0)
        nodes_[static_cast<std::size_t>(prev)].next = n;
      else
        l.head = n;
      prev = n;
    }
    lists_.push_back(std::move(l));
  }

 private:
  static Tuple list_key(int atom, const Tuple& pred) {
    Tuple k{atom};
    k.insert(k.end(), pred.begin(), pred.end());
    return k;
  }

  std::vector<Node> nodes_;
  std::vector<List> lists_;
  std::unordered_map<Tuple, int, TupleHash> head_table_;
  std::unordered_map<ProgressTree, int, ProgressTreeHash> location_;
};

inline Tuple pred_values(const PreparedInstance& p, int atom, const Tuple& h) {
  Tuple out;
  for (int x : p.tree.pred_vars[static_cast<std::size_t>(atom)]) out.push_back(h[static_cast<std::size_t>(x)]);
  return out;
}

// Rows of each atom grouped by their values at the predecessor variables.
using PredIndex = std::vector<std::unordered_map<Tuple, std::vector<int>, TupleHash>>;

inline PredIndex pred_index(const PreparedInstance& p) {
  PredIndex out(static_cast<std::size_t>(p.num_atoms()));
  for (int a = 0; a < p.num_atoms(); ++a) {
    auto pos = detail::positions_of(p.atom_vars[static_cast<std::size_t>(a)], p.tree.pred_vars[static_cast<std::size_t>(a)]);
    const auto& rows = p.rows[static_cast<std::size_t>(a)];
    for (std::size_t r = 0; r < rows.size(); ++r)
      out[static_cast<std::size_t>(a)][detail::project(rows[r], pos)].push_back(static_cast<int>(r));
  }
  return out;
}

inline bool row_has_null(const PreparedInstance& p, const Tuple& row) {
  return std::any_of(row.begin(), row.end(), [&](ConstId c) { return p.is_null(c); });
}

inline bool pred_named(const PreparedInstance& p, int a, const Tuple& row) {
  const auto& vars = p.atom_vars[static_cast<std::size_t>(a)];
  for (int x : p.tree.pred_vars[static_cast<std::size_t>(a)]) {
    auto i = std::find(vars.begin(), vars.end(), x) - vars.begin();
    if (p.is_null(row[static_cast<std::size_t>(i)])) return false;
  }
  return true;
}

// Starting from `row` of atom `a`, follows every child whose predecessor
// variables meet a null, choosing a matching row each time. `f(mask, h)` sees
// every complete excursion; h holds raw values (nulls included) and kUnset
// outside the mask.
template <class F>
void for_each_excursion(const PreparedInstance& p, const PredIndex& by_pred, int a, const Tuple& row, F&& f) {
  Tuple h(static_cast<std::size_t>(p.arity), kUnset);
  std::function<void(std::vector<int>, std::uint32_t)> grow = [&](std::vector<int> pending, std::uint32_t mask) {
    if (pending.empty()) {
      f(mask, static_cast<const Tuple&>(h));
      return;
    }
    int u = pending.back();
    pending.pop_back();
    std::vector<int> must;
    for (int c : p.tree.children[static_cast<std::size_t>(u)])
      for (int x : p.tree.pred_vars[static_cast<std::size_t>(c)])
        if (p.is_null(h[static_cast<std::size_t>(x)])) {
          must.push_back(c);
          break;
        }
    std::function<void(std::size_t, std::vector<int>&, std::uint32_t)> pick =
        [&](std::size_t i, std::vector<int>& pend, std::uint32_t m) {
          if (i == must.size()) {
            grow(pend, m);
            return;
          }
          int c = must[i];
          auto it = by_pred[static_cast<std::size_t>(c)].find(pred_values(p, c, h));
          if (it == by_pred[static_cast<std::size_t>(c)].end()) return;
          const auto& cvars = p.atom_vars[static_cast<std::size_t>(c)];
          for (int rr : it->second) {
            const Tuple& crow = p.rows[static_cast<std::size_t>(c)][static_cast<std::size_t>(rr)];
            std::vector<int> set;
            bool ok = true;
            for (std::size_t k = 0; k < cvars.size() && ok; ++k) {
              auto& slot = h[static_cast<std::size_t>(cvars[k])];
              if (slot == kUnset) {
                slot = crow[k];
                set.push_back(cvars[k]);
              } else if (slot != crow[k]) {
                ok = false;
              }
            }
            if (ok) {
              pend.push_back(c);
              pick(i + 1, pend, m | (std::uint32_t{1} << c));
              pend.pop_back();
            }
            for (int x : set) h[static_cast<std::size_t>(x)] = kUnset;
          }
        };
    pick(0, pending, mask);
  };
  const auto& vars = p.atom_vars[static_cast<std::size_t>(a)];
  for (std::size_t i = 0; i < vars.size(); ++i) h[static_cast<std::size_t>(vars[i])] = row[i];
  grow({a}, std::uint32_t{1} << a);
}

inline TreesIndex build_trees_index(const PreparedInstance& p) {
  TreesIndex idx;
  const int n = p.num_atoms();
  if (n > 32) throw ResourceLimitError("query has too many atoms for the progress-tree index");
  std::unordered_set<ProgressTree, ProgressTreeHash> seen;
  std::map<std::pair<int, Tuple>, std::vector<ProgressTree>> lists;
  auto emit = [&](int root, ProgressTree t) {
    if (!seen.insert(t).second) return;
    lists[{root, pred_values(p, root, t.g)}].push_back(std::move(t));
  };
  auto by_pred = pred_index(p);
  for (int a = 0; a < n; ++a) {
    const auto& vars = p.atom_vars[static_cast<std::size_t>(a)];
    for (const Tuple& row : p.rows[static_cast<std::size_t>(a)]) {
      if (!row_has_null(p, row)) {
        ProgressTree t{std::uint32_t{1} << a, Tuple(static_cast<std::size_t>(p.arity), kUnset)};
        for (std::size_t i = 0; i < vars.size(); ++i) t.g[static_cast<std::size_t>(vars[i])] = row[i];
        emit(a, std::move(t));
      } else if (pred_named(p, a, row)) {
        for_each_excursion(p, by_pred, a, row, [&](std::uint32_t mask, const Tuple& h) {
          ProgressTree t{mask, h};
          for (auto& v : t.g)
            if (v != kUnset && p.is_null(v)) v = kStar;
          emit(a, std::move(t));
        });
      }
    }
  }
  for (auto& [key, trees] : lists) idx.add_list(key.first, key.second, std::move(trees));
  return idx;
}

// Connected sets of join-tree nodes, as bit masks.
inline std::vector<std::uint32_t> join_subtrees(const JoinTree& jt) {
  std::vector<std::uint32_t> out;
  const int n = jt.n;
  if (n > 20) throw ResourceLimitError("query has too many atoms for subtree enumeration");
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    int root = tree_root(jt, m);
    bool ok = true;
    for (int v = 0; v < n && ok; ++v)
      if ((m >> v & 1u) && v != root && !(m >> jt.parent[static_cast<std::size_t>(v)] & 1u)) ok = false;
    if (ok) out.push_back(m);
  }
  return out;
}

}  // namespace omq
