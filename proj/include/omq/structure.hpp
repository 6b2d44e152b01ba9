#pragma once

#include <deque>
#include <functional>
#include <numeric>
#include <optional>

#include "omq/core.hpp"

namespace omq {

// ---------------------------------------------------------------------------
// join trees
// ---------------------------------------------------------------------------

// Undirected tree over atom indices 0..n-1, optionally rooted.
struct JoinTree {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  int root = -1;
  std::vector<int> parent;                 // -1 for the root
  std::vector<std::vector<int>> children;  // ascending atom index
  std::vector<int> preorder;
  std::vector<std::vector<int>> pred_vars;  // vars shared with the parent

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (auto [a, b] : edges) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    return adj;
  }
};

// GYO ear removal over hyperedges given as variable lists. Ties go to the
// lowest ear index, then the lowest witness index. When the hypergraph is
// disconnected the result is a forest, joined into a tree through arbitrary
// (lowest-index) edges, which keeps the connected-subtree property since the
// parts share no variable.
inline std::optional<JoinTree> join_tree_of(const std::vector<std::vector<int>>& edges_vars) {
  const int n = static_cast<int>(edges_vars.size());
  JoinTree t;
  t.n = n;
  if (n == 0) return t;
  std::vector<std::vector<int>> vs = edges_vars;
  for (auto& v : vs) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  int remaining = n;
  std::vector<int> leftovers;
  while (remaining > 1) {
    bool found = false;
    for (int e = 0; e < n && !found; ++e) {
      if (!alive[static_cast<std::size_t>(e)]) continue;
      // variables of e shared with some other live edge
      std::vector<int> shared;
      for (int x : vs[static_cast<std::size_t>(e)]) {
        for (int f = 0; f < n; ++f) {
          if (f == e || !alive[static_cast<std::size_t>(f)]) continue;
          if (std::binary_search(vs[static_cast<std::size_t>(f)].begin(),
                                 vs[static_cast<std::size_t>(f)].end(), x)) {
            shared.push_back(x);
            break;
          }
        }
      }
      if (shared.empty()) {
        // isolated from the rest: remember it, it will be attached later
        alive[static_cast<std::size_t>(e)] = false;
        --remaining;
        leftovers.push_back(e);
        found = true;
        break;
      }
      for (int f = 0; f < n; ++f) {
        if (f == e || !alive[static_cast<std::size_t>(f)]) continue;
        const auto& fv = vs[static_cast<std::size_t>(f)];
        if (std::all_of(shared.begin(), shared.end(),
                        [&](int x) { return std::binary_search(fv.begin(), fv.end(), x); })) {
          t.edges.emplace_back(std::min(e, f), std::max(e, f));
          alive[static_cast<std::size_t>(e)] = false;
          --remaining;
          found = true;
          break;
        }
      }
    }
    if (!found) return std::nullopt;
  }
  int last = -1;
  for (int e = 0; e < n; ++e)
    if (alive[static_cast<std::size_t>(e)]) last = e;
  // Attach isolated parts: each leftover was a whole component when removed
  // except that later removals may still hang below it. Link leftovers to the
  // final survivor so the structure is one tree.
  for (int e : leftovers) t.edges.emplace_back(std::min(e, last), std::max(e, last));
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

inline std::vector<std::vector<int>> atom_var_sets(const ConjunctiveQuery& q) {
  std::vector<std::vector<int>> out;
  for (const auto& a : q.atoms) out.push_back(a.vars());
  return out;
}

inline std::optional<JoinTree> join_tree(const ConjunctiveQuery& q) {
  return join_tree_of(atom_var_sets(q));
}

// Orients the tree at `root` and fills parent/children/preorder/pred_vars.
inline void root_tree(JoinTree& t, int root, const std::vector<std::vector<int>>& atom_vars) {
  t.root = root;
  t.parent.assign(static_cast<std::size_t>(t.n), -1);
  t.children.assign(static_cast<std::size_t>(t.n), {});
  t.preorder.clear();
  t.pred_vars.assign(static_cast<std::size_t>(t.n), {});
  if (t.n == 0) return;
  auto adj = t.adjacency();
  std::vector<bool> seen(static_cast<std::size_t>(t.n), false);
  std::vector<int> stack{root};
  seen[static_cast<std::size_t>(root)] = true;
  // BFS to set parents, then DFS for preorder with children ascending
  std::deque<int> bfs{root};
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop_front();
    for (int w : adj[static_cast<std::size_t>(u)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      t.parent[static_cast<std::size_t>(w)] = u;
      t.children[static_cast<std::size_t>(u)].push_back(w);
      bfs.push_back(w);
    }
  }
  for (auto& c : t.children) std::sort(c.begin(), c.end());
  std::function<void(int)> dfs = [&](int u) {
    t.preorder.push_back(u);
    for (int c : t.children[static_cast<std::size_t>(u)]) dfs(c);
  };
  dfs(root);
  for (int u = 0; u < t.n; ++u) {
    int p = t.parent[static_cast<std::size_t>(u)];
    if (p < 0) continue;
    for (int x : atom_vars[static_cast<std::size_t>(u)])
      if (std::find(atom_vars[static_cast<std::size_t>(p)].begin(),
                    atom_vars[static_cast<std::size_t>(p)].end(),
                    x) != atom_vars[static_cast<std::size_t>(p)].end())
        t.pred_vars[static_cast<std::size_t>(u)].push_back(x);
  }
}

inline bool has_connected_subtree_property(const JoinTree& t,
                                           const std::vector<std::vector<int>>& atom_vars) {
  std::vector<int> all;
  for (const auto& v : atom_vars) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  auto adj = t.adjacency();
  for (int x : all) {
    std::vector<int> holders;
    for (int i = 0; i < t.n; ++i)
      if (std::find(atom_vars[static_cast<std::size_t>(i)].begin(),
                    atom_vars[static_cast<std::size_t>(i)].end(), x) != atom_vars[static_cast<std::size_t>(i)].end())
        holders.push_back(i);
    std::vector<bool> seen(static_cast<std::size_t>(t.n), false);
    std::vector<int> stack{holders.front()};
    seen[static_cast<std::size_t>(holders.front())] = true;
    std::size_t reached = 0;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      ++reached;
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        if (std::find(holders.begin(), holders.end(), w) == holders.end()) continue;
        seen[static_cast<std::size_t>(w)] = true;
        stack.push_back(w);
      }
    }
    if (reached != holders.size()) return false;
  }
  return static_cast<int>(t.edges.size()) == std::max(0, t.n - 1);
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

struct StructureReport {
  bool acyclic = false;
  bool weakly_acyclic = false;
  bool free_connex = false;
  bool connected = false;
  bool self_join_free = false;
  bool repeated_answer_vars = false;
  std::optional<std::vector<int>> bad_path;
};

inline std::vector<std::vector<int>> gaifman(const ConjunctiveQuery& q) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(q.num_vars()));
  for (const auto& a : q.atoms) {
    auto vs = a.vars();
    for (int x : vs)
      for (int y : vs)
        if (x != y) adj[static_cast<std::size_t>(x)].push_back(y);
  }
  for (auto& l : adj) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  return adj;
}

// Path y1..yn between two distinct, non-adjacent answer variables whose inner
// variables are quantified and consecutive ones adjacent.
inline std::optional<std::vector<int>> find_bad_path(const ConjunctiveQuery& q) {
  auto adj = gaifman(q);
  auto answers = q.distinct_answer_vars();
  auto adjacent = [&](int x, int y) {
    const auto& l = adj[static_cast<std::size_t>(x)];
    return std::binary_search(l.begin(), l.end(), y);
  };
  for (int a : answers) {
    std::vector<int> prev(static_cast<std::size_t>(q.num_vars()), -2);
    std::deque<int> bfs;
    for (int y : adj[static_cast<std::size_t>(a)]) {
      if (q.is_answer(y)) continue;
      prev[static_cast<std::size_t>(y)] = a;
      bfs.push_back(y);
    }
    while (!bfs.empty()) {
      int u = bfs.front();
      bfs.pop_front();
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (q.is_answer(w)) {
          if (w != a && !adjacent(a, w)) {
            std::vector<int> path{w};
            for (int c = u; c != a; c = prev[static_cast<std::size_t>(c)]) path.push_back(c);
            path.push_back(a);
            std::reverse(path.begin(), path.end());
            return path;
          }
          continue;
        }
        if (prev[static_cast<std::size_t>(w)] != -2 || w == a) continue;
        prev[static_cast<std::size_t>(w)] = u;
        bfs.push_back(w);
      }
    }
  }
  return std::nullopt;
}

inline std::vector<std::vector<int>> atom_components(const ConjunctiveQuery& q) {
  const int n = static_cast<int>(q.atoms.size());
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<int>> by_var(static_cast<std::size_t>(q.num_vars()));
  for (int i = 0; i < n; ++i)
    for (int x : q.atoms[static_cast<std::size_t>(i)].vars()) by_var[static_cast<std::size_t>(x)].push_back(i);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<int> stack{s};
    comp[static_cast<std::size_t>(s)] = id;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      out.back().push_back(u);
      for (int x : q.atoms[static_cast<std::size_t>(u)].vars())
        for (int w : by_var[static_cast<std::size_t>(x)])
          if (comp[static_cast<std::size_t>(w)] < 0) {
            comp[static_cast<std::size_t>(w)] = id;
            stack.push_back(w);
          }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

inline StructureReport classify(const ConjunctiveQuery& q) {
  StructureReport r;
  auto sets = atom_var_sets(q);
  r.acyclic = join_tree_of(sets).has_value();

  std::vector<std::vector<int>> frozen;
  for (const auto& s : sets) {
    std::vector<int> f;
    for (int x : s)
      if (!q.is_answer(x)) f.push_back(x);
    frozen.push_back(f);
  }
  r.weakly_acyclic = join_tree_of(frozen).has_value();

  auto guarded = sets;
  guarded.push_back(q.distinct_answer_vars());
  r.free_connex = join_tree_of(guarded).has_value();

  r.connected = atom_components(q).size() <= 1;
  std::vector<int> rels;
  for (const auto& a : q.atoms) rels.push_back(a.rel);
  std::sort(rels.begin(), rels.end());
  r.self_join_free = std::adjacent_find(rels.begin(), rels.end()) == rels.end();
  r.repeated_answer_vars = q.has_repeated_answer_vars();
  if (r.acyclic && !r.free_connex) r.bad_path = find_bad_path(q);
  return r;
}

// ---------------------------------------------------------------------------
// components, normalization, self-join-free rewrite
// ---------------------------------------------------------------------------

// Sub-query of q on the given atoms; keeps the variable numbering of q.
inline ConjunctiveQuery subquery(const ConjunctiveQuery& q, const std::vector<int>& atoms) {
  ConjunctiveQuery out;
  out.name = q.name;
  out.var_names = q.var_names;
  std::vector<bool> used(static_cast<std::size_t>(q.num_vars()), false);
  for (int i : atoms) {
    out.atoms.push_back(q.atoms[static_cast<std::size_t>(i)]);
    for (int x : q.atoms[static_cast<std::size_t>(i)].vars()) used[static_cast<std::size_t>(x)] = true;
  }
  for (int x : q.distinct_answer_vars())
    if (used[static_cast<std::size_t>(x)]) out.answer_vars.push_back(x);
  return out;
}

inline std::vector<ConjunctiveQuery> connected_components(const ConjunctiveQuery& q) {
  std::vector<ConjunctiveQuery> out;
  for (const auto& c : atom_components(q)) out.push_back(subquery(q, c));
  return out;
}

// One rewritten atom: `rel` holds, for each fact of `source` matching
// `pattern`, the values at the positions listed in `keep`.
struct PatternRule {
  int source = 0;
  int rel = 0;
  std::vector<Term> pattern;  // original terms
  std::vector<int> keep;      // first position of each distinct variable
};

struct NormalizedQuery {
  ConjunctiveQuery q;                // distinct answer vars, no constants, distinct vars per atom
  std::vector<int> expand;           // original answer position -> normalized position
  std::vector<PatternRule> rules;    // database transformer

  Tuple expand_tuple(const Tuple& t) const {
    Tuple out;
    out.reserve(expand.size());
    for (int p : expand) out.push_back(t[static_cast<std::size_t>(p)]);
    return out;
  }

  // Maps an original-arity tuple to the normalized arity; nullopt when two
  // positions bound to the same variable disagree.
  std::optional<Tuple> restrict_tuple(const Tuple& t) const {
    Tuple out(static_cast<std::size_t>(q.arity()), kUnset);
    for (std::size_t i = 0; i < expand.size(); ++i) {
      auto& slot = out[static_cast<std::size_t>(expand[i])];
      if (slot != kUnset && slot != t[i]) return std::nullopt;
      slot = t[i];
    }
    return out;
  }

  void transform(Database& db) const {
    if (rules.empty()) return;
    std::vector<Fact> add;
    for (const auto& f : db.facts()) {
      for (const auto& r : rules) {
        if (f.rel != r.source) continue;
        bool ok = true;
        std::vector<std::pair<int, ConstId>> binding;
        for (std::size_t i = 0; i < r.pattern.size() && ok; ++i) {
          const auto& t = r.pattern[i];
          if (!t.is_var) {
            ok = f.args[i] == t.id;
          } else {
            auto it = std::find_if(binding.begin(), binding.end(),
                                   [&](auto& p) { return p.first == t.id; });
            if (it == binding.end())
              binding.emplace_back(t.id, f.args[i]);
            else
              ok = it->second == f.args[i];
          }
        }
        if (!ok) continue;
        Fact g;
        g.rel = r.rel;
        for (int p : r.keep) g.args.push_back(f.args[static_cast<std::size_t>(p)]);
        add.push_back(std::move(g));
      }
    }
    for (auto& g : add) db.add(std::move(g));
  }
};

inline NormalizedQuery normalize_query(const ConjunctiveQuery& q, Vocabulary& voc) {
  NormalizedQuery out;
  out.q = q;
  out.q.answer_vars = q.distinct_answer_vars();
  for (int v : q.answer_vars)
    out.expand.push_back(static_cast<int>(
        std::find(out.q.answer_vars.begin(), out.q.answer_vars.end(), v) - out.q.answer_vars.begin()));
  for (auto& a : out.q.atoms) {
    bool plain = true;
    std::vector<int> seen;
    for (const auto& t : a.args) {
      if (!t.is_var || std::find(seen.begin(), seen.end(), t.id) != seen.end()) plain = false;
      if (t.is_var) seen.push_back(t.id);
    }
    if (plain) continue;
    PatternRule r;
    r.source = a.rel;
    r.pattern = a.args;
    std::string name = voc.rels.name(a.rel) + "_{";
    std::vector<Term> kept;
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) name += ",";
      const auto& t = a.args[i];
      if (t.is_var) {
        name += q.var_names[static_cast<std::size_t>(t.id)];
        if (std::find(kept.begin(), kept.end(), t) == kept.end()) {
          kept.push_back(t);
          r.keep.push_back(static_cast<int>(i));
        }
      } else {
        name += voc.consts.label(t.id);
      }
    }
    name += "}";
    // Reuse the symbol for an identical pattern.
    auto existing = std::find_if(out.rules.begin(), out.rules.end(), [&](const PatternRule& o) {
      return o.source == r.source && o.pattern == r.pattern;
    });
    if (existing != out.rules.end()) {
      r.rel = existing->rel;
    } else {
      r.rel = voc.rels.fresh(name, static_cast<int>(kept.size()));
      out.rules.push_back(r);
    }
    a.rel = r.rel;
    a.args = kept;
  }
  return out;
}

// Gives every repeated relation symbol in the query a fresh copy per atom and
// bridges the copies to the original symbol in both directions.
inline Omq selfjoin_free_rewrite(const Omq& in, Vocabulary& voc) {
  Omq out = in;
  std::unordered_map<int, int> count;
  for (const auto& a : in.query.atoms) ++count[a.rel];
  std::unordered_map<int, int> seen;
  for (auto& a : out.query.atoms) {
    if (count[a.rel] < 2) continue;
    int k = ++seen[a.rel];
    int orig = a.rel;
    int arity = voc.rels.arity(orig);
    int fresh = voc.rels.fresh(voc.rels.name(orig) + "_" + std::to_string(k), arity);
    a.rel = fresh;
    for (int dir = 0; dir < 2; ++dir) {
      Tgd t;
      Atom from, to;
      from.rel = dir == 0 ? orig : fresh;
      to.rel = dir == 0 ? fresh : orig;
      for (int i = 0; i < arity; ++i) {
        t.var_names.push_back("x" + std::to_string(i + 1));
        from.args.push_back(Term::var(i));
        to.args.push_back(Term::var(i));
      }
      t.body.push_back(from);
      t.head.push_back(to);
      analyze_tgd(t, voc.rels);
      out.onto.rules.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace omq
